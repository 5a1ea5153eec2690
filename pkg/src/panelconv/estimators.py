"""Convergence-speed estimators for country panels.

Every dynamic estimator here works on the error-correction form of an AR(p)
with covariates,

    dy_it = a_i + g_i f_t - phi y_{i,t-1} + sum_l psi_l dy_{i,t-l} + b' x_it + u_it,

so the headline number is always the speed of convergence phi (the negative
of the coefficient on the lagged level). The module covers the classic
cross-section growth-on-initial-level regression, two-way fixed effects,
fixed effects with group-specific year effects, pooled and mean-group
cross-section-augmented regressions that absorb a common factor, and the
half-panel jackknife bias correction. Derived quantities (mean adjustment
lag, long-run covariate effects, the implied level-form AR coefficients)
are attached to every report.
"""

from __future__ import annotations

import dataclasses
import inspect
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .lstsq import RegressionResult, gauss_newton_nls, least_squares, residual_project
from .panel import PanelDataset, PanelError, cross_section_averages

__all__ = [
    "Statistic",
    "EstimateReport",
    "BarroResult",
    "default_lag_order",
    "mean_lag",
    "long_run_effect",
    "level_ar_from_ecm",
    "ecm_from_level_ar",
    "speed_from_initial_level_coef",
    "barro_estimate",
    "twfe_estimate",
    "fe_gte_estimate",
    "dccep_estimate",
    "dccemg_estimate",
    "half_panel_jackknife",
]

logger = logging.getLogger("panelconv.estimators")


@dataclass(frozen=True)
class Statistic:
    """A point estimate with its standard error (NaN when unavailable)."""

    value: float
    se: float = float("nan")

    def __iter__(self):
        return iter((self.value, self.se))


def default_lag_order(T_ave: float) -> int:
    """Default AR order: max(1, floor(T_ave ** (1/3)))."""
    if T_ave <= 0:
        raise ValueError("T_ave must be positive")
    return max(1, int(math.floor(T_ave ** (1.0 / 3.0))))


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def mean_lag(phi, psi=(), covariance=None) -> Statistic:
    """Mean adjustment lag (1 - phi - sum(psi)) / phi.

    The average age of the weights with which past shocks still sit in the
    current level. psi are the short-run coefficients on the lagged
    differences; with none the formula reduces to (1 - phi) / phi.
    covariance, when given, is the covariance of (phi, psi_1, ..) in that
    order and yields a delta-method standard error.
    """
    phi = float(phi)
    psi = np.asarray(psi, dtype=float).ravel()
    if not np.isfinite(phi) or phi <= 0:
        raise ValueError(f"mean lag needs phi > 0, got {phi}")
    value = (1.0 - phi - psi.sum()) / phi
    if covariance is None:
        return Statistic(value)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    grad = np.empty(1 + psi.size)
    grad[0] = -(1.0 - psi.sum()) / phi**2
    grad[1:] = -1.0 / phi
    return Statistic(value, float(np.sqrt(grad @ cov @ grad)))


def long_run_effect(beta, phi, covariance=None) -> Statistic:
    """Long-run effect beta / phi of a covariate on the outcome level.

    covariance, when given, is the 2x2 covariance of (beta, phi).
    """
    beta, phi = float(beta), float(phi)
    if not np.isfinite(phi) or phi <= 0:
        raise ValueError(f"long-run effect needs phi > 0, got {phi}")
    value = beta / phi
    if covariance is None:
        return Statistic(value)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    grad = np.array([1.0 / phi, -beta / phi**2])
    return Statistic(value, float(np.sqrt(grad @ cov @ grad)))


def level_ar_from_ecm(phi, psi=()) -> np.ndarray:
    """Implied level-form AR coefficients (rho_1 .. rho_p).

    Inverts dy_t = -phi y_{t-1} + sum psi_l dy_{t-l} back to
    y_t = sum rho_l y_{t-l}; the coefficients always sum to 1 - phi.
    """
    psi = np.asarray(psi, dtype=float).ravel()
    p = psi.size + 1
    rho = np.empty(p)
    rho[0] = 1.0 - float(phi) + (psi[0] if p > 1 else 0.0)
    for l in range(2, p):
        rho[l - 1] = psi[l - 1] - psi[l - 2]
    if p > 1:
        rho[p - 1] = -psi[p - 2]
    return rho


def ecm_from_level_ar(rho) -> tuple[float, np.ndarray]:
    """Inverse of level_ar_from_ecm: (phi, psi) from (rho_1 .. rho_p)."""
    rho = np.asarray(rho, dtype=float).ravel()
    phi = 1.0 - rho.sum()
    p = rho.size
    psi = np.array([-rho[l:].sum() for l in range(1, p)])
    return float(phi), psi


def speed_from_initial_level_coef(b: float, horizon: int) -> float:
    """Annual speed phi implied by an initial-level coefficient over a horizon.

    The cross-section coefficient estimates -(1 - (1 - phi) ** horizon);
    solving gives phi = 1 - (1 + b) ** (1 / horizon). Returns NaN when
    1 + b is not inside (0, 1], i.e. when the coefficient implies
    divergence or an oscillating root.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    base = 1.0 + float(b)
    if not 0.0 < base <= 1.0:
        return float("nan")
    return 1.0 - base ** (1.0 / horizon)


# ---------------------------------------------------------------------------
# regression frames
# ---------------------------------------------------------------------------


def _shift(a: np.ndarray, k: int) -> np.ndarray:
    """Shift columns right by k, filling with NaN (per-country lag)."""
    if k == 0:
        return a.copy()
    out = np.full_like(a, np.nan)
    out[:, k:] = a[:, :-k]
    return out


@dataclass(frozen=True)
class _Frame:
    """Stacked usable rows of the error-correction regression."""

    country: np.ndarray
    yearcol: np.ndarray
    dep: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]


def _ecm_frame(
    panel: PanelDataset, outcome: str, p: int, covariates: Sequence[str]
) -> _Frame:
    if outcome not in panel.values:
        raise PanelError(f"unknown outcome variable {outcome!r}")
    for c in covariates:
        if c not in panel.values:
            raise PanelError(f"unknown covariate {c!r}")
    if p < 1:
        raise PanelError("lag order must be >= 1")
    y = panel.values[outcome]
    dy = y - _shift(y, 1)
    cols = [_shift(y, 1)]
    names = [f"{outcome}[-1]"]
    for l in range(1, p):
        cols.append(_shift(dy, l))
        names.append(f"d{outcome}[-{l}]")
    for c in covariates:
        cols.append(panel.values[c])
        names.append(c)
    mask = np.isfinite(dy)
    for col in cols:
        mask &= np.isfinite(col)
    ci, tj = np.nonzero(mask)
    if ci.size == 0:
        raise PanelError("no usable observations after lagging")
    X = np.column_stack([col[mask] for col in cols])
    return _Frame(ci, tj, dy[mask], X, tuple(names))


def _span_stats(country_ids: np.ndarray) -> tuple[int, int, int, float, int]:
    counts = np.bincount(country_ids)
    counts = counts[counts > 0]
    return (
        int(country_ids.size),
        int(counts.size),
        int(counts.min()),
        float(counts.mean()),
        int(counts.max()),
    )


def _demean_groups(
    M: np.ndarray, ids_a: np.ndarray, ids_b: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Remove group-a and group-b means by alternating projections.

    Exact up to tol * scale; balanced designs converge in a couple of
    sweeps, unbalanced ones geometrically.
    """
    M = np.array(M, dtype=float)
    one_d = M.ndim == 1
    if one_d:
        M = M[:, None]
    na, nb = int(ids_a.max()) + 1, int(ids_b.max()) + 1
    ca = np.bincount(ids_a, minlength=na).astype(float)
    cb = np.bincount(ids_b, minlength=nb).astype(float)
    ca[ca == 0] = 1.0
    cb[cb == 0] = 1.0
    scale = max(1.0, float(np.max(np.abs(M))))
    for _ in range(1000):
        worst = 0.0
        for ids, counts, size in ((ids_a, ca, na), (ids_b, cb, nb)):
            for j in range(M.shape[1]):
                means = np.bincount(ids, weights=M[:, j], minlength=size) / counts
                M[:, j] -= means[ids]
                worst = max(worst, float(np.max(np.abs(means))))
        if worst <= tol * scale:
            break
    else:
        logger.warning("two-way demeaning stopped at sweep cap (residual %.2e)", worst)
    return M[:, 0] if one_d else M


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    """Fitted convergence regression with derived quantities attached.

    coefficients/covariance are in the regression's own parameterization
    (the lagged-level coefficient is -phi); phi and everything derived from
    it are reported in the positive-speed convention.
    """

    method: str
    outcome: str
    names: tuple[str, ...]
    coefficients: np.ndarray
    covariance: np.ndarray
    se_kind: str
    nobs: int
    n_countries: int
    T_min: int
    T_ave: float
    T_max: int
    p: int
    q: int | None
    covariates: tuple[str, ...]
    phi: Statistic
    psi: np.ndarray
    beta: dict[str, Statistic]
    mean_lag: Statistic
    long_run: dict[str, Statistic]
    extra: dict = field(default_factory=dict)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def level_ar(self) -> np.ndarray:
        """Implied level-form AR coefficients rho_1 .. rho_p."""
        return level_ar_from_ecm(self.phi.value, self.psi)

    def coefficient(self, name: str) -> Statistic:
        i = self.names.index(name)
        return Statistic(float(self.coefficients[i]), float(self.std_errors[i]))

    def summary(self) -> str:
        lines = [
            f"{self.method}: {self.outcome}, n={self.n_countries}, "
            f"obs={self.nobs}, T=[{self.T_min}, {self.T_max}] "
            f"(mean {self.T_ave:.1f}), p={self.p}"
            + (f", q={self.q}" if self.q is not None else ""),
            f"  phi = {self.phi.value:.4f} ({self.phi.se:.4f})   "
            f"mean lag = {self.mean_lag.value:.1f} ({self.mean_lag.se:.1f})",
        ]
        for i, name in enumerate(self.names):
            lines.append(
                f"  {name:<20s} {self.coefficients[i]:+10.4f} ({self.std_errors[i]:.4f})"
            )
        for name, st in self.long_run.items():
            lines.append(f"  long-run {name:<11s} {st.value:+10.4f} ({st.se:.4f})")
        return "\n".join(lines)


def _build_report(
    method: str,
    outcome: str,
    p: int,
    q: int | None,
    names: Sequence[str],
    coefficients: np.ndarray,
    covariance: np.ndarray,
    se_kind: str,
    covariates: Sequence[str],
    span: tuple[int, int, int, float, int],
    extra: dict | None = None,
) -> EstimateReport:
    names = tuple(names)
    coefficients = np.asarray(coefficients, dtype=float)
    covariance = np.asarray(covariance, dtype=float)
    extra = dict(extra or {})
    i1 = names.index(f"{outcome}[-1]")
    psi_idx = [names.index(f"d{outcome}[-{l}]") for l in range(1, p)]
    phi_val = -float(coefficients[i1])
    phi = Statistic(phi_val, float(np.sqrt(max(covariance[i1, i1], 0.0))))
    psi = coefficients[psi_idx].copy()

    # covariance of (phi, psi): flip the sign of the lagged-level row/column
    sel = [i1] + psi_idx
    sign = np.ones(len(sel))
    sign[0] = -1.0
    cov_pp = (covariance[np.ix_(sel, sel)] * sign[:, None]) * sign[None, :]
    if phi_val > 0:
        ml = mean_lag(phi_val, psi, cov_pp)
    else:
        ml = Statistic(float("nan"), float("nan"))
        extra.setdefault("unstable", True)

    beta: dict[str, Statistic] = {}
    long_run: dict[str, Statistic] = {}
    for c in covariates:
        j = names.index(c)
        b = float(coefficients[j])
        beta[c] = Statistic(b, float(np.sqrt(max(covariance[j, j], 0.0))))
        if phi_val > 0:
            grad = np.zeros(len(names))
            grad[j] = 1.0 / phi_val
            grad[i1] = b / phi_val**2
            se = float(np.sqrt(max(grad @ covariance @ grad, 0.0)))
            long_run[c] = Statistic(b / phi_val, se)
        else:
            long_run[c] = Statistic(float("nan"), float("nan"))

    nobs, n_c, t_min, t_ave, t_max = span
    return EstimateReport(
        method=method,
        outcome=outcome,
        names=names,
        coefficients=coefficients,
        covariance=covariance,
        se_kind=se_kind,
        nobs=nobs,
        n_countries=n_c,
        T_min=t_min,
        T_ave=t_ave,
        T_max=t_max,
        p=p,
        q=q,
        covariates=tuple(covariates),
        phi=phi,
        psi=psi,
        beta=beta,
        mean_lag=ml,
        long_run=long_run,
        extra=extra,
    )


def _resolve_p(panel: PanelDataset, outcome: str, lags: int | None) -> int:
    if lags is not None:
        if lags < 1:
            raise PanelError("lag order must be >= 1")
        return int(lags)
    counts = panel.counts(outcome)
    counts = counts[counts > 0]
    if counts.size == 0:
        raise PanelError(f"variable {outcome!r} has no observations")
    return default_lag_order(float(counts.mean()))


# ---------------------------------------------------------------------------
# fixed-effects estimators
# ---------------------------------------------------------------------------


def twfe_estimate(
    panel: PanelDataset,
    outcome: str,
    lags: int | None = None,
    covariates: Sequence[str] = (),
    se_kind: str = "cluster-robust",
) -> EstimateReport:
    """Two-way fixed-effects fit of the error-correction regression.

    Country and year effects are removed by exact alternating demeaning
    (numerically identical to including the dummies). Standard errors
    default to clustering by country. Note the year effects only absorb a
    common factor when every country loads on it equally; heterogeneous
    loadings leave a bias that grows with the factor's persistence.
    """
    p = _resolve_p(panel, outcome, lags)
    frame = _ecm_frame(panel, outcome, p, covariates)
    years_used = np.unique(frame.yearcol)
    n_used = np.unique(frame.country).size
    Z = _demean_groups(
        np.column_stack([frame.dep, frame.X]), frame.country, frame.yearcol
    )
    dof_absorbed = n_used + years_used.size - 1
    res = least_squares(
        Z[:, 1:],
        Z[:, 0],
        se_kind=se_kind,
        cluster_ids=frame.country if se_kind == "cluster-robust" else None,
        names=frame.names,
        dof_absorbed=dof_absorbed,
    )
    return _build_report(
        "twfe",
        outcome,
        p,
        None,
        frame.names,
        res.coefficients,
        res.covariance,
        se_kind,
        covariates,
        _span_stats(frame.country),
        extra={"dof_absorbed": dof_absorbed, "rank": res.rank},
    )


def fe_gte_estimate(
    panel: PanelDataset,
    outcome: str,
    groups: Mapping[str, object],
    lags: int | None = None,
    covariates: Sequence[str] = (),
    se_kind: str = "cluster-robust",
) -> EstimateReport:
    """Fixed effects with group-specific year effects.

    Like the two-way fit, but each group of countries gets its own set of
    year effects, so a common factor loaded equally within groups (while
    differing across them) is absorbed. With a single group this reduces
    exactly to twfe_estimate. Groups with a single usable country are
    rejected: their group-year effects would absorb the country outright.
    """
    p = _resolve_p(panel, outcome, lags)
    frame = _ecm_frame(panel, outcome, p, covariates)
    used = np.unique(frame.country)
    missing = [panel.countries[i] for i in used if panel.countries[i] not in groups]
    if missing:
        raise PanelError(f"countries without a group label: {missing}")
    labels = sorted({groups[panel.countries[i]] for i in used}, key=str)
    label_ix = {g: k for k, g in enumerate(labels)}
    country_group = np.array(
        [label_ix.get(groups.get(c), -1) for c in panel.countries]
    )
    members: dict[object, int] = {}
    for i in used:
        g = labels[country_group[i]]
        members[g] = members.get(g, 0) + 1
    singles = [g for g, m in members.items() if m < 2]
    if singles:
        raise PanelError(
            f"groups with fewer than two usable countries: {singles}; "
            "their year effects would absorb the country entirely"
        )
    n_years = panel.n_years
    gy = country_group[frame.country] * n_years + frame.yearcol
    # compress group-year ids to consecutive integers
    uniq, gy = np.unique(gy, return_inverse=True)
    Z = _demean_groups(np.column_stack([frame.dep, frame.X]), frame.country, gy)
    dof_absorbed = used.size + uniq.size - len(labels)
    res = least_squares(
        Z[:, 1:],
        Z[:, 0],
        se_kind=se_kind,
        cluster_ids=frame.country if se_kind == "cluster-robust" else None,
        names=frame.names,
        dof_absorbed=dof_absorbed,
    )
    return _build_report(
        "fe-gte",
        outcome,
        p,
        None,
        frame.names,
        res.coefficients,
        res.covariance,
        se_kind,
        covariates,
        _span_stats(frame.country),
        extra={
            "n_groups": len(labels),
            "dof_absorbed": dof_absorbed,
            "rank": res.rank,
        },
    )


# ---------------------------------------------------------------------------
# cross-section-augmented estimators
# ---------------------------------------------------------------------------


def _csa_columns(
    panel: PanelDataset,
    outcome: str,
    covariates: Sequence[str],
    q: int,
    proxy_vars: Sequence[str] = (),
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Year-indexed matrix of cross-section-average lags 0..q."""
    variables = [outcome, *covariates, *proxy_vars]
    csa = cross_section_averages(panel, variables)
    cols, names = [], []
    for k, v in enumerate(variables):
        m = csa.means[v][None, :]
        for l in range(q + 1):
            cols.append(_shift(m, l)[0])
            # proxies may repeat a variable; keep names unique
            tag = v if k < 1 + len(covariates) else f"{v}~proxy{k}"
            names.append(f"csa:{tag}[-{l}]")
    return np.column_stack(cols), tuple(names)


def dccep_estimate(
    panel: PanelDataset,
    outcome: str,
    lags: int | None = None,
    covariates: Sequence[str] = (),
    csa_lags: int | None = None,
    se_kind: str = "hetero-robust",
    proxy_vars: Sequence[str] = (),
) -> EstimateReport:
    """Pooled error-correction fit with cross-section-average augmentation.

    Current and lagged cross-section averages of the outcome (and the
    covariates, plus any proxy_vars) proxy the common factor. They enter
    with country-specific coefficients, implemented by partialling them out
    country by country before pooling; a generalized inverse makes the fit
    invariant to redundant average columns. The pooled coefficients carry a
    bias of order 1/T, which is what the half-panel jackknife removes.
    """
    p = _resolve_p(panel, outcome, lags)
    q = int(csa_lags) if csa_lags is not None else p
    if q < 0:
        raise PanelError("csa_lags must be >= 0")
    frame = _ecm_frame(panel, outcome, p, covariates)
    csa_mat, _ = _csa_columns(panel, outcome, covariates, q, proxy_vars)
    ok = np.all(np.isfinite(csa_mat[frame.yearcol]), axis=1)
    country, yearcol = frame.country[ok], frame.yearcol[ok]
    dep, X = frame.dep[ok], frame.X[ok]
    if dep.size == 0:
        raise PanelError("no usable observations after cross-section averaging")

    dep_t = np.empty_like(dep)
    X_t = np.empty_like(X)
    dof_absorbed = 0
    for i in np.unique(country):
        rows = country == i
        basis = np.column_stack(
            [np.ones(int(rows.sum())), csa_mat[yearcol[rows]]]
        )
        both = residual_project(basis, np.column_stack([dep[rows], X[rows]]))
        dep_t[rows] = both[:, 0]
        X_t[rows] = both[:, 1:]
        dof_absorbed += int(np.linalg.matrix_rank(basis))
    res = least_squares(
        X_t,
        dep_t,
        se_kind=se_kind,
        cluster_ids=country if se_kind == "cluster-robust" else None,
        names=frame.names,
        dof_absorbed=dof_absorbed,
    )
    return _build_report(
        "dccep",
        outcome,
        p,
        q,
        frame.names,
        res.coefficients,
        res.covariance,
        se_kind,
        covariates,
        _span_stats(country),
        extra={"dof_absorbed": dof_absorbed, "rank": res.rank},
    )


def dccemg_estimate(
    panel: PanelDataset,
    outcome: str,
    lags: int | None = None,
    covariates: Sequence[str] = (),
    csa_lags: int | None = None,
    homogeneous_covariates: Sequence[str] = (),
) -> EstimateReport:
    """Mean-group error-correction fit with cross-section averages.

    Each country is fit separately (intercept, dynamics, covariates, and
    cross-section-average columns), and the reported coefficients are the
    unweighted means across countries with the nonparametric dispersion
    variance sum((c_i - mean)(c_i - mean)') / (n (n - 1)). Countries with
    too few usable rows are dropped with a warning. Covariates listed in
    homogeneous_covariates keep a single pooled coefficient, estimated by
    partialling the heterogeneous block out country by country; long-run
    effects for those use the mean-group phi.

    Long-run effects of heterogeneous covariates are averages of the
    per-country ratios beta_i / phi_i over countries with phi_i > 0; the
    mean adjustment lag is evaluated at the mean-group coefficients.
    """
    p = _resolve_p(panel, outcome, lags)
    q = int(csa_lags) if csa_lags is not None else p + 1
    if q < 0:
        raise PanelError("csa_lags must be >= 0")
    homogeneous = tuple(homogeneous_covariates)
    for c in homogeneous:
        if c not in covariates:
            raise PanelError(f"homogeneous covariate {c!r} not among covariates")
    frame = _ecm_frame(panel, outcome, p, covariates)
    csa_mat, _ = _csa_columns(panel, outcome, covariates, q)
    ok = np.all(np.isfinite(csa_mat[frame.yearcol]), axis=1)
    country, yearcol = frame.country[ok], frame.yearcol[ok]
    dep, X = frame.dep[ok], frame.X[ok]

    het_cols = [j for j, nm in enumerate(frame.names) if nm not in homogeneous]
    hom_cols = [j for j, nm in enumerate(frame.names) if nm in homogeneous]
    het_names = tuple(frame.names[j] for j in het_cols)
    k_het = len(het_cols)
    k_basis = 1 + csa_mat.shape[1]
    min_rows = k_het + k_basis + len(hom_cols) + 1

    kept: list[int] = []
    dropped: list[str] = []
    rows_by_country: dict[int, np.ndarray] = {}
    for i in np.unique(country):
        rows = np.nonzero(country == i)[0]
        if rows.size < min_rows:
            dropped.append(panel.countries[i])
        else:
            kept.append(int(i))
            rows_by_country[int(i)] = rows
    if dropped:
        logger.warning(
            "dccemg: dropping %d countries with fewer than %d usable rows: %s",
            len(dropped),
            min_rows,
            ", ".join(dropped),
        )
    if len(kept) < 2:
        raise PanelError(
            f"mean-group fit needs at least two countries with {min_rows}+ rows"
        )

    def country_design(rows: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [np.ones(rows.size), csa_mat[yearcol[rows]], X[np.ix_(rows, het_cols)]]
        )

    # pooled stage for the homogeneous block
    hom_beta = np.zeros(len(hom_cols))
    hom_cov = np.zeros((len(hom_cols), len(hom_cols)))
    if hom_cols:
        dep_t = []
        H_t = []
        absorbed = 0
        for i in kept:
            rows = rows_by_country[i]
            basis = country_design(rows)
            out = residual_project(
                basis, np.column_stack([dep[rows], X[np.ix_(rows, hom_cols)]])
            )
            dep_t.append(out[:, 0])
            H_t.append(out[:, 1:])
            absorbed += int(np.linalg.matrix_rank(basis))
        res_h = least_squares(
            np.vstack(H_t),
            np.concatenate(dep_t),
            se_kind="hetero-robust",
            names=tuple(frame.names[j] for j in hom_cols),
            dof_absorbed=absorbed,
        )
        hom_beta, hom_cov = res_h.coefficients, res_h.covariance

    # per-country stage
    per = np.empty((len(kept), k_het))
    for r, i in enumerate(kept):
        rows = rows_by_country[i]
        d_i = dep[rows]
        if hom_cols:
            d_i = d_i - X[np.ix_(rows, hom_cols)] @ hom_beta
        fit = least_squares(country_design(rows), d_i)
        per[r] = fit.coefficients[k_basis:]

    mg = per.mean(axis=0)
    dev = per - mg
    n_used = len(kept)
    mg_cov = (dev.T @ dev) / (n_used * (n_used - 1))

    names = het_names + tuple(frame.names[j] for j in hom_cols)
    coefs = np.concatenate([mg, hom_beta])
    cov = np.zeros((len(names), len(names)))
    cov[:k_het, :k_het] = mg_cov
    if hom_cols:
        cov[k_het:, k_het:] = hom_cov

    used_mask = np.isin(country, kept)
    span = _span_stats(country[used_mask])
    report = _build_report(
        "dccemg" if not hom_cols else "dccemg*",
        outcome,
        p,
        q,
        names,
        coefs,
        cov,
        "mean-group",
        covariates,
        span,
        extra={
            "countries_used": tuple(panel.countries[i] for i in kept),
            "countries_dropped": tuple(dropped),
            "country_coefficients": per,
            "country_names": het_names,
        },
    )

    # replace long-run effects of heterogeneous covariates by the average of
    # per-country ratios (phi_i > 0 only), the natural mean-group analogue
    i_phi = het_names.index(f"{outcome}[-1]")
    phi_i = -per[:, i_phi]
    stable = phi_i > 0
    long_run = dict(report.long_run)
    for c in covariates:
        if c in homogeneous or c not in het_names:
            continue
        j = het_names.index(c)
        if stable.sum() >= 2:
            ratios = per[stable, j] / phi_i[stable]
            se = float(np.sqrt(ratios.var(ddof=1) / stable.sum()))
            long_run[c] = Statistic(float(ratios.mean()), se)
        else:
            long_run[c] = Statistic(float("nan"), float("nan"))
    extra = dict(report.extra)
    extra["long_run_n"] = int(stable.sum())
    return dataclasses.replace(report, long_run=long_run, extra=extra)


# ---------------------------------------------------------------------------
# half-panel jackknife
# ---------------------------------------------------------------------------


def _half_panel(panel: PanelDataset, outcome: str, which: str) -> PanelDataset:
    """Keep the first or second half of each country's outcome span.

    Odd spans drop the middle year so both halves have equal length. All
    variables are masked to the chosen window.
    """
    n, T = panel.n_countries, panel.n_years
    keep = np.zeros((n, T), dtype=bool)
    for i, c in enumerate(panel.countries):
        span = panel.observed_span(outcome, c)
        if span is None:
            continue
        j0 = int(np.searchsorted(panel.years, span[0]))
        j1 = int(np.searchsorted(panel.years, span[1]))
        h = (j1 - j0 + 1) // 2
        if h == 0:
            continue
        if which == "first":
            keep[i, j0 : j0 + h] = True
        else:
            keep[i, j1 - h + 1 : j1 + 1] = True
    values = {}
    for v, arr in panel.values.items():
        out = np.where(keep, arr, np.nan)
        values[v] = out
    return PanelDataset(panel.countries, panel.years.copy(), values)


def half_panel_jackknife(
    estimator: Callable[..., EstimateReport],
    panel: PanelDataset,
    outcome: str,
    **kwargs,
) -> EstimateReport:
    """Half-panel jackknife bias correction of a panel estimator.

    Runs the estimator on the full panel and on the first and second half
    of every country's observed window, then reports

        2 * full - (first_half + second_half) / 2,

    which removes the leading 1/T bias term. Standard errors and the
    covariance come from the full-sample fit. Lag orders resolved on the
    full sample are pinned for the half fits.
    """
    full = estimator(panel, outcome, **kwargs)
    half_kwargs = dict(kwargs)
    params = inspect.signature(estimator).parameters
    if "lags" in params:
        half_kwargs["lags"] = full.p
    if "csa_lags" in params and full.q is not None:
        half_kwargs["csa_lags"] = full.q
    rep_a = estimator(_half_panel(panel, outcome, "first"), outcome, **half_kwargs)
    rep_b = estimator(_half_panel(panel, outcome, "second"), outcome, **half_kwargs)
    if rep_a.names != full.names or rep_b.names != full.names:
        raise PanelError("half-sample fits returned different coefficient layouts")
    corrected = 2.0 * full.coefficients - 0.5 * (rep_a.coefficients + rep_b.coefficients)
    extra = dict(full.extra)
    extra["jackknife"] = {
        "full_phi": full.phi.value,
        "first_half_phi": rep_a.phi.value,
        "second_half_phi": rep_b.phi.value,
    }
    return _build_report(
        full.method + "+hjk",
        outcome,
        full.p,
        full.q,
        full.names,
        corrected,
        full.covariance,
        full.se_kind,
        full.covariates,
        (full.nobs, full.n_countries, full.T_min, full.T_ave, full.T_max),
        extra=extra,
    )


# ---------------------------------------------------------------------------
# cross-section growth regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BarroResult:
    """Cross-section growth-on-initial-level regression.

    The regression of the total outcome change over a horizon on the
    initial level (optionally with a domestic-vs-reference price gap and
    steady-state covariates). phi is the implied annual speed, theta the
    implied steady-state coefficients; divergent is set when the estimated
    initial-level coefficient is nonnegative, in which case no finite speed
    exists and phi is NaN rather than clamped.
    """

    method: str
    outcome: str
    year0: int
    year1: int
    names: tuple[str, ...]
    coefficients: np.ndarray
    covariance: np.ndarray
    se_kind: str
    nobs: int
    initial_coef: Statistic
    phi: Statistic
    theta: dict[str, Statistic]
    ppp_gap_coef: Statistic | None
    mean_lag: Statistic
    divergent: bool
    dropped: tuple[str, ...]
    extra: dict = field(default_factory=dict)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def summary(self) -> str:
        lines = [
            f"{self.method}: {self.outcome} growth {self.year0}-{self.year1}, "
            f"n={self.nobs}" + (", divergent" if self.divergent else ""),
            f"  initial-level coef = {self.initial_coef.value:+.4f} "
            f"({self.initial_coef.se:.4f})",
            f"  phi = {self.phi.value:.4f} ({self.phi.se:.4f})   "
            f"mean lag = {self.mean_lag.value:.1f} ({self.mean_lag.se:.1f})",
        ]
        for name, st in self.theta.items():
            lines.append(f"  theta[{name}] = {st.value:+.4f} ({st.se:.4f})")
        return "\n".join(lines)


def _barro_rows(panel, outcome, year0, year1, covariates, ppp_var):
    """Per-country cross-section rows; NLS gets per-country horizons."""
    if year1 <= year0:
        raise PanelError("year1 must be after year0")
    y = panel.values[outcome]
    years = panel.years
    j0 = int(np.searchsorted(years, year0))
    j1 = int(np.searchsorted(years, year1))
    if j0 >= len(years) or years[j0] != year0 or j1 >= len(years) or years[j1] != year1:
        raise PanelError(f"years {year0} and {year1} must both be on the panel's axis")
    rows = []
    dropped = []
    for i, c in enumerate(panel.countries):
        span = panel.observed_span(outcome, c)
        if span is None:
            dropped.append(c)
            continue
        f0, f1 = max(span[0], year0), min(span[1], year1)
        if f1 <= f0:
            dropped.append(c)
            continue
        k0 = int(np.searchsorted(years, f0))
        k1 = int(np.searchsorted(years, f1))
        vals = {}
        fine = True
        for v in (*covariates, *((ppp_var,) if ppp_var else ())):
            x = panel.values[v][i, k0]
            if not np.isfinite(x):
                fine = False
                break
            vals[v] = float(x)
        if not fine:
            dropped.append(c)
            continue
        rows.append(
            {
                "country": c,
                "full": f0 == year0 and f1 == year1,
                "horizon": int(f1 - f0),
                "y0": float(y[i, k0]),
                "dep": float(y[i, k1] - y[i, k0]),
                "covariates": vals,
            }
        )
    return rows, dropped


def barro_estimate(
    panel: PanelDataset,
    outcome: str,
    year0: int,
    year1: int,
    covariates: Sequence[str] = (),
    ppp_var: str | None = None,
    method: str = "linear",
    se_kind: str = "hetero-robust",
) -> BarroResult:
    """Cross-section growth regression over the window [year0, year1].

    Regresses the total change in the outcome on its initial level, an
    optional initial price gap (outcome minus ppp_var at year0), and
    steady-state covariates read at year0. method="linear" keeps countries
    observed at both endpoints and maps the initial-level coefficient b to
    the annual speed phi = 1 - (1 + b) ** (1/T) and the covariate
    coefficients c to theta = -phi c / b by the delta method.
    method="nls" instead fits the nonlinear map with country-specific
    horizons, which admits countries whose observed window only partially
    covers [year0, year1].

    Warning: the initial level mechanically contains the country effect, so
    with dispersed steady states this regression understates convergence by
    a margin that barro_asymptotic_bias quantifies. The estimator is
    provided as the benchmark under fire, not as a recommendation.
    """
    if outcome not in panel.values:
        raise PanelError(f"unknown outcome variable {outcome!r}")
    for v in (*covariates, *((ppp_var,) if ppp_var else ())):
        if v not in panel.values:
            raise PanelError(f"unknown variable {v!r}")
    if method not in ("linear", "nls"):
        raise PanelError(f"method must be 'linear' or 'nls', got {method!r}")
    rows, dropped = _barro_rows(panel, outcome, year0, year1, covariates, ppp_var)
    if method == "linear":
        partial = [r["country"] for r in rows if not r["full"]]
        rows = [r for r in rows if r["full"]]
        if partial:
            dropped = dropped + partial
            logger.info(
                "barro linear: dropping %d countries not observed at both "
                "endpoints (use method='nls' to keep them)",
                len(partial),
            )
    if len(rows) < len(covariates) + (3 if ppp_var else 2) + 1:
        raise PanelError(f"too few usable countries ({len(rows)})")
    T = year1 - year0
    dep = np.array([r["dep"] for r in rows])
    y0 = np.array([r["y0"] for r in rows])
    Ti = np.array([r["horizon"] for r in rows], dtype=float)
    Zc = np.column_stack(
        [[r["covariates"][v] for r in rows] for v in covariates]
    ) if covariates else np.empty((len(rows), 0))
    gap = (
        y0 - np.array([r["covariates"][ppp_var] for r in rows]) if ppp_var else None
    )

    gap_name = f"{outcome}-{ppp_var}@{year0}" if ppp_var else None
    names = ["const", f"{outcome}@{year0}"]
    cols = [np.ones(len(rows)), y0]
    if ppp_var:
        names.append(gap_name)
        cols.append(gap)
    names += list(covariates)
    X = np.column_stack([*cols, Zc]) if covariates else np.column_stack(cols)

    lin = least_squares(X, dep, se_kind=se_kind, names=tuple(names))
    ib = 1
    b = float(lin.coefficients[ib])

    if method == "linear":
        coefs, cov = lin.coefficients, lin.covariance
        horizon = float(T)
    else:
        k_extra = (1 if ppp_var else 0)
        kz = len(covariates)

        def unpack(theta_vec):
            a = theta_vec[0]
            phi = theta_vec[1]
            rest = theta_vec[2:]
            c_gap = rest[0] if ppp_var else 0.0
            th = rest[k_extra:]
            return a, phi, c_gap, th

        def scale(phi, Ti):
            # (1 - (1 - phi)^T) / phi with the phi -> 0 limit T
            base = 1.0 - (1.0 - phi) ** Ti
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(np.abs(phi) > 1e-12, base / phi, Ti)
            return base, s

        def resid(theta_vec):
            a, phi, c_gap, th = unpack(theta_vec)
            base, s = scale(phi, Ti)
            pred = a - base * y0 + s * (Zc @ th if kz else 0.0)
            if ppp_var:
                pred = pred + c_gap * gap
            return dep - pred

        def jac(theta_vec):
            a, phi, c_gap, th = unpack(theta_vec)
            base, s = scale(phi, Ti)
            dbase = Ti * (1.0 - phi) ** (Ti - 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                ds = np.where(
                    np.abs(phi) > 1e-12,
                    (dbase * phi - base) / phi**2,
                    -Ti * (Ti - 1.0) / 2.0,
                )
            J = np.zeros((len(dep), len(theta_vec)))
            J[:, 0] = -1.0
            J[:, 1] = dbase * y0 - ds * (Zc @ th if kz else 0.0)
            col = 2
            if ppp_var:
                J[:, col] = -gap
                col += 1
            for j in range(kz):
                J[:, col + j] = -s * Zc[:, j]
            return J

        phi0 = speed_from_initial_level_coef(b, T)
        if not np.isfinite(phi0) or phi0 <= 0:
            phi0 = 0.01
        th0 = []
        for v in covariates:
            c = float(lin.coefficients[names.index(v)])
            th0.append(-phi0 * c / b if b < 0 else 0.0)
        init = [float(lin.coefficients[0]), phi0]
        if ppp_var:
            init.append(float(lin.coefficients[names.index(gap_name)]))
        init += th0
        nls = gauss_newton_nls(
            resid,
            np.array(init),
            jacobian_fn=jac,
            names=("const", "phi", *((gap_name,) if ppp_var else ()), *covariates),
        )
        coefs, cov = nls.coefficients, nls.covariance
        horizon = float(np.mean(Ti))

    # implied annual speed and steady-state coefficients
    if method == "linear":
        se_b = float(np.sqrt(max(cov[ib, ib], 0.0)))
        phi_val = speed_from_initial_level_coef(b, T)
        divergent = not np.isfinite(phi_val)
        if divergent:
            phi = Statistic(float("nan"), float("nan"))
            ml = Statistic(float("nan"), float("nan"))
            theta = {v: Statistic(float("nan"), float("nan")) for v in covariates}
        else:
            dphi_db = -(1.0 / T) * (1.0 + b) ** (1.0 / T - 1.0)
            phi = Statistic(phi_val, abs(dphi_db) * se_b)
            ml_val = (1.0 - phi_val) / phi_val
            ml = Statistic(ml_val, abs(-1.0 / phi_val**2 * dphi_db) * se_b)
            theta = {}
            for v in covariates:
                jv = names.index(v)
                c = float(coefs[jv])
                val = -phi_val * c / b
                g = np.zeros(len(names))
                g[jv] = -phi_val / b
                g[ib] = -c * (dphi_db * b - phi_val) / b**2
                theta[v] = Statistic(val, float(np.sqrt(max(g @ cov @ g, 0.0))))
        gap_coef = (
            Statistic(
                float(coefs[names.index(gap_name)]),
                float(np.sqrt(max(cov[names.index(gap_name), names.index(gap_name)], 0.0))),
            )
            if ppp_var
            else None
        )
        out_names = tuple(names)
        initial = Statistic(b, se_b)
    else:
        nls_names = ("const", "phi", *((gap_name,) if ppp_var else ()), *covariates)
        iphi = 1
        phi_val = float(coefs[iphi])
        phi_se = float(np.sqrt(max(cov[iphi, iphi], 0.0)))
        divergent = phi_val <= 0
        phi = Statistic(phi_val if not divergent else float("nan"), phi_se)
        if divergent:
            ml = Statistic(float("nan"), float("nan"))
        else:
            ml = Statistic(
                (1.0 - phi_val) / phi_val, phi_se / phi_val**2
            )
        theta = {}
        for v in covariates:
            jv = nls_names.index(v)
            theta[v] = Statistic(
                float(coefs[jv]), float(np.sqrt(max(cov[jv, jv], 0.0)))
            )
        gap_coef = None
        if ppp_var:
            jg = nls_names.index(gap_name)
            gap_coef = Statistic(
                float(coefs[jg]), float(np.sqrt(max(cov[jg, jg], 0.0)))
            )
        # implied average-horizon initial-level coefficient
        b_impl = -(1.0 - (1.0 - phi_val) ** horizon) if not divergent else float("nan")
        initial = Statistic(b_impl)
        out_names = nls_names

    return BarroResult(
        method=f"barro-{method}",
        outcome=outcome,
        year0=year0,
        year1=year1,
        names=out_names,
        coefficients=np.asarray(coefs, dtype=float),
        covariance=np.asarray(cov, dtype=float),
        se_kind=se_kind if method == "linear" else "nls-sandwich",
        nobs=len(rows),
        initial_coef=initial,
        phi=phi,
        theta=theta,
        ppp_gap_coef=gap_coef,
        mean_lag=ml,
        divergent=divergent,
        dropped=tuple(dropped),
        extra={"horizon": horizon},
    )
