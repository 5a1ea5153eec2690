"""Two-step analysis of time-invariant country characteristics.

Dynamic panel regressions difference or demean away everything constant
within a country, so the effect of characteristics like geography or
institutions has to be recovered in a second step: first filter each
country's intercept out of the fitted dynamics, then regress the filtered
intercepts on the characteristics across countries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .estimators import (
    EstimateReport,
    Statistic,
    dccep_estimate,
    half_panel_jackknife,
    level_ar_from_ecm,
)
from .lstsq import least_squares
from .panel import PanelDataset, PanelError

__all__ = [
    "FilteredIntercepts",
    "TimeInvariantResult",
    "filtered_intercepts",
    "time_invariant_effects",
]

logger = logging.getLogger("panelconv.twostep")


@dataclass(frozen=True)
class FilteredIntercepts:
    """Per-country intercepts after filtering out the fitted dynamics.

    For country i with level-form AR coefficients rho and covariate
    coefficients beta, the intercept is

        a_i = mean(y_t) - sum_l rho_l mean(y_{t-l}) - beta' mean(x_t)

    with all means taken over the same usable rows (those where the lags
    and covariates are observed). When the dynamics are exact this recovers
    the intercept exactly; estimation error in the dynamics enters every
    country through the same shared coefficients.
    """

    countries: tuple[str, ...]
    values: np.ndarray
    filter_method: str
    level_ar: np.ndarray
    beta: dict[str, float]
    dropped: tuple[str, ...] = ()

    def as_mapping(self) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.countries, self.values)}


@dataclass(frozen=True)
class TimeInvariantResult:
    """Cross-country regression of filtered intercepts on characteristics."""

    names: tuple[str, ...]
    coefficients: np.ndarray
    covariance: np.ndarray
    se_kind: str
    nobs: int
    filter_method: str
    countries_used: tuple[str, ...]
    dropped: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def coefficient(self, name: str) -> Statistic:
        i = self.names.index(name)
        return Statistic(float(self.coefficients[i]), float(self.std_errors[i]))

    def summary(self) -> str:
        lines = [
            f"time-invariant effects ({self.filter_method} filter), "
            f"n={self.nobs}"
        ]
        for i, name in enumerate(self.names):
            lines.append(
                f"  {name:<20s} {self.coefficients[i]:+10.4f} ({self.std_errors[i]:.4f})"
            )
        return "\n".join(lines)


def filtered_intercepts(
    panel: PanelDataset,
    outcome: str,
    covariates: Sequence[str] = (),
    dynamics: EstimateReport | None = None,
    lags: int | None = None,
) -> FilteredIntercepts:
    """Filter country intercepts from the outcome using fitted dynamics.

    dynamics is any EstimateReport for the same outcome and covariates; by
    default a jackknife-corrected pooled cross-section-augmented fit is run
    here, since the filtering step inherits every bias of the coefficients
    it uses. Countries without a single usable row are dropped with a
    warning.
    """
    if dynamics is None:
        dynamics = half_panel_jackknife(
            dccep_estimate, panel, outcome, covariates=tuple(covariates), lags=lags
        )
    if tuple(dynamics.covariates) != tuple(covariates):
        raise PanelError(
            f"dynamics were fit with covariates {dynamics.covariates}, "
            f"got {tuple(covariates)}"
        )
    rho = level_ar_from_ecm(dynamics.phi.value, dynamics.psi)
    beta = {c: dynamics.beta[c].value for c in covariates}
    p = rho.size

    y = panel.values[outcome]
    lagged = [y]
    for l in range(1, p + 1):
        sh = np.full_like(y, np.nan)
        sh[:, l:] = y[:, :-l]
        lagged.append(sh)
    xs = [panel.values[c] for c in covariates]
    mask = np.isfinite(y)
    for arr in (*lagged[1:], *xs):
        mask &= np.isfinite(arr)

    countries, values, dropped = [], [], []
    for i, c in enumerate(panel.countries):
        rows = mask[i]
        if not rows.any():
            dropped.append(c)
            continue
        a = float(np.mean(y[i, rows]))
        for l in range(1, p + 1):
            a -= rho[l - 1] * float(np.mean(lagged[l][i, rows]))
        for c_name, x in zip(covariates, xs):
            a -= beta[c_name] * float(np.mean(x[i, rows]))
        countries.append(c)
        values.append(a)
    if dropped:
        logger.warning(
            "filtered_intercepts: no usable rows for %d countries: %s",
            len(dropped),
            ", ".join(dropped),
        )
    if not countries:
        raise PanelError("no country had a usable row for intercept filtering")
    return FilteredIntercepts(
        countries=tuple(countries),
        values=np.array(values),
        filter_method=dynamics.method,
        level_ar=rho,
        beta=beta,
        dropped=tuple(dropped),
    )


def time_invariant_effects(
    intercepts: FilteredIntercepts,
    characteristics: Mapping[str, Mapping[str, float]],
    variables: Sequence[str] | None = None,
) -> TimeInvariantResult:
    """Regress filtered intercepts on country characteristics.

    characteristics maps country -> {variable -> value} (the layout
    load_country_csv produces). Only countries present on both sides with
    finite values enter; standard errors are heteroskedasticity-robust.
    """
    if variables is None:
        for row in characteristics.values():
            variables = tuple(row.keys())
            break
        else:
            raise PanelError("characteristics table is empty")
    variables = tuple(variables)
    if not variables:
        raise PanelError("no characteristic variables given")

    used, a, Z, dropped = [], [], [], list(intercepts.dropped)
    for c, val in zip(intercepts.countries, intercepts.values):
        row = characteristics.get(c)
        if row is None:
            dropped.append(c)
            continue
        try:
            z = [float(row[v]) for v in variables]
        except KeyError as e:
            raise PanelError(f"country {c!r} is missing characteristic {e}") from None
        if not all(np.isfinite(z)):
            dropped.append(c)
            continue
        used.append(c)
        a.append(float(val))
        Z.append(z)
    k = len(variables) + 1
    if len(used) <= k:
        raise PanelError(
            f"only {len(used)} countries match the characteristics table; "
            f"need more than {k}"
        )
    X = np.column_stack([np.ones(len(used)), np.array(Z)])
    names = ("const", *variables)
    res = least_squares(X, np.array(a), se_kind="hetero-robust", names=names)
    if res.rank < k:
        raise PanelError(
            "characteristics are collinear (design rank "
            f"{res.rank} < {k}); drop a redundant column"
        )
    return TimeInvariantResult(
        names=names,
        coefficients=res.coefficients,
        covariance=res.covariance,
        se_kind="hetero-robust",
        nobs=len(used),
        filter_method=intercepts.filter_method,
        countries_used=tuple(used),
        dropped=tuple(dropped),
    )
