"""Synthetic panel generators for Monte Carlo work.

Panels follow

    y_it = alpha_i + gamma_i f_t + rho_i y_{i,t-1} + beta_i' x_it + u_it

with a single common factor f_t, country heterogeneity tied to observed
cross-country characteristics z_i, and optional covariates that may load on
the same factor. Everything is driven by one integer seed: the same spec
reproduces the same panel bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .panel import PanelDataset

__all__ = [
    "DgpError",
    "FactorSpec",
    "ZLinkSpec",
    "HeterogeneitySpec",
    "CovariateSpec",
    "DgpSpec",
    "HeterogeneityDraw",
    "PanelTruth",
    "simulate_factor",
    "draw_heterogeneity",
    "simulate_panel",
    "replication_seed",
]

FACTOR_KINDS = (
    "iid-normal",
    "stationary-ar1",
    "trend-ar1",
    "rw-drift",
    "piecewise-drift",
)

_FACTOR_BURN = 200


class DgpError(ValueError):
    """Raised for invalid generator specifications."""


@dataclass(frozen=True)
class FactorSpec:
    """Law of the common factor f_t.

    kind selects among an iid normal sequence, a stationary AR(1), a linear
    trend plus stationary AR(1), a random walk with drift, and a random walk
    whose drift changes at given breakpoints. mu is drift per year, a the AR
    coefficient, sigma the innovation SD.
    """

    kind: str
    mu: float = 0.0
    a: float = 0.0
    sigma: float = 1.0
    breakpoints: tuple[int, ...] = ()
    drifts: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in FACTOR_KINDS:
            raise DgpError(f"unknown factor kind {self.kind!r}")
        if self.kind in ("stationary-ar1", "trend-ar1") and not abs(self.a) < 1:
            raise DgpError(f"AR coefficient must satisfy |a| < 1, got {self.a}")
        if self.sigma < 0:
            raise DgpError("sigma must be nonnegative")
        object.__setattr__(self, "breakpoints", tuple(int(b) for b in self.breakpoints))
        object.__setattr__(self, "drifts", tuple(float(d) for d in self.drifts))
        if self.kind == "piecewise-drift":
            if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
                raise DgpError("breakpoints must be strictly increasing")
            if len(self.drifts) != len(self.breakpoints) + 1:
                raise DgpError(
                    "piecewise-drift needs len(drifts) == len(breakpoints) + 1"
                )

    @property
    def stationary_variance(self) -> float:
        """Level variance of the stationary AR(1) component."""
        if self.kind not in ("stationary-ar1", "trend-ar1"):
            raise DgpError(f"no stationary variance for kind {self.kind!r}")
        return self.sigma**2 / (1.0 - self.a**2)


def simulate_factor(spec: FactorSpec, T: int, seed, t_start: int = 1) -> np.ndarray:
    """Draw f_t for t = t_start .. t_start + T - 1.

    Deterministic given the seed. AR components are burned in internally;
    random walks start from zero one step before t_start. t_start < 1 is
    used by the panel generator to extend the factor into the pre-sample
    burn-in window.
    """
    if T < 1:
        raise DgpError("factor length must be >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(t_start, t_start + T, dtype=float)
    if spec.kind == "iid-normal":
        return spec.sigma * rng.standard_normal(T)
    if spec.kind in ("stationary-ar1", "trend-ar1"):
        eps = rng.standard_normal(_FACTOR_BURN + T)
        s = np.zeros(_FACTOR_BURN + T)
        for i in range(1, _FACTOR_BURN + T):
            s[i] = spec.a * s[i - 1] + spec.sigma * eps[i]
        s = s[_FACTOR_BURN:]
        if spec.kind == "stationary-ar1":
            return s
        return spec.mu * t + s
    if spec.kind == "rw-drift":
        steps = spec.mu + spec.sigma * rng.standard_normal(T)
        return np.cumsum(steps)
    # piecewise-drift: random walk whose drift switches at the breakpoints
    # (breakpoints are calendar positions on the t axis).
    bp = np.asarray(spec.breakpoints, dtype=float)
    drift = np.asarray(spec.drifts)[np.searchsorted(bp, t, side="right")]
    steps = drift + spec.sigma * rng.standard_normal(T)
    return np.cumsum(steps)


@dataclass(frozen=True)
class ZLinkSpec:
    """Linear law `value_i = mean + theta' z_i + eta_i` for a country trait.

    z_i is independent standard normal of dimension len(theta); eta_i is
    normal with SD sigma_eta.
    """

    mean: float
    theta: tuple[float, ...] = ()
    sigma_eta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        if self.sigma_eta < 0:
            raise DgpError("sigma_eta must be nonnegative")

    @property
    def is_degenerate(self) -> bool:
        return not self.theta and self.sigma_eta == 0.0


@dataclass(frozen=True)
class HeterogeneitySpec:
    """Country-level parameter laws.

    alpha and gamma follow ZLinkSpec laws on independent z blocks; the mean
    factor loading must be positive unless the gamma law is degenerate at
    zero (the no-factor escape hatch). rho is either a single value or a
    (lo, hi) uniform range strictly inside (-1, 1). beta_mean/beta_sigma
    give normal cross-country laws for covariate coefficients. sigma_u is
    a fixed innovation SD or a (lo, hi) uniform range.
    """

    alpha: ZLinkSpec
    gamma: ZLinkSpec
    rho: float | tuple[float, float] = 0.5
    beta_mean: tuple[float, ...] = ()
    beta_sigma: tuple[float, ...] = ()
    sigma_u: float | tuple[float, float] = 1.0

    def __post_init__(self) -> None:
        if self.gamma.mean < 0 or (self.gamma.mean == 0 and not self.gamma.is_degenerate):
            raise DgpError(
                "mean factor loading must be positive (or the gamma law "
                "degenerate at zero for factor-free designs)"
            )
        rho = self.rho
        if isinstance(rho, (tuple, list)):
            lo, hi = float(rho[0]), float(rho[1])
            if not (-1 < lo <= hi < 1):
                raise DgpError(f"rho range ({lo}, {hi}) must lie inside (-1, 1)")
            object.__setattr__(self, "rho", (lo, hi))
        else:
            if not -1 < float(rho) < 1:
                raise DgpError(f"rho = {rho} must lie inside (-1, 1)")
            object.__setattr__(self, "rho", float(rho))
        bm = tuple(float(x) for x in self.beta_mean)
        bs = tuple(float(x) for x in self.beta_sigma)
        if bs and len(bs) != len(bm):
            raise DgpError("beta_sigma must match beta_mean in length")
        if not bs:
            bs = tuple(0.0 for _ in bm)
        object.__setattr__(self, "beta_mean", bm)
        object.__setattr__(self, "beta_sigma", bs)
        su = self.sigma_u
        if isinstance(su, (tuple, list)):
            lo, hi = float(su[0]), float(su[1])
            if lo < 0 or hi < lo:
                raise DgpError(f"sigma_u range ({lo}, {hi}) is invalid")
            object.__setattr__(self, "sigma_u", (lo, hi))
        else:
            if float(su) < 0:
                raise DgpError("sigma_u must be nonnegative")
            object.__setattr__(self, "sigma_u", float(su))

    @property
    def n_covariates(self) -> int:
        return len(self.beta_mean)


@dataclass(frozen=True)
class CovariateSpec:
    """Law of the time-varying covariates: x_it = lambda_i f_t + AR(1) noise.

    lambda_mean/lambda_sigma set the normal cross-country law of the factor
    loading (the endogeneity knob; zero means the covariate ignores the
    factor). a_x and sigma_x parameterize the idiosyncratic AR(1) part.
    """

    lambda_mean: float = 0.0
    lambda_sigma: float = 0.0
    a_x: float = 0.0
    sigma_x: float = 1.0

    def __post_init__(self) -> None:
        if not abs(self.a_x) < 1:
            raise DgpError(f"covariate AR coefficient must satisfy |a| < 1, got {self.a_x}")
        if self.sigma_x < 0 or self.lambda_sigma < 0:
            raise DgpError("covariate SDs must be nonnegative")


@dataclass(frozen=True)
class DgpSpec:
    """Complete generative specification of a synthetic panel."""

    n: int
    T: int
    factor: FactorSpec
    heterogeneity: HeterogeneitySpec
    covariates: CovariateSpec | None = None
    burn_in: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.T < 2:
            raise DgpError("need n >= 1 countries and T >= 2 years")
        if self.burn_in < 200:
            raise DgpError("burn-in must be at least 200 for stationary starts")
        if self.heterogeneity.n_covariates > 0 and self.covariates is None:
            object.__setattr__(self, "covariates", CovariateSpec())

    # -- JSON round trip ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["factor"]["kind"] = self.factor.kind
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "DgpSpec":
        def _pair(x):
            return tuple(x) if isinstance(x, (list, tuple)) else x

        het = d["heterogeneity"]
        spec = DgpSpec(
            n=int(d["n"]),
            T=int(d["T"]),
            factor=FactorSpec(**d["factor"]),
            heterogeneity=HeterogeneitySpec(
                alpha=ZLinkSpec(**het["alpha"]),
                gamma=ZLinkSpec(**het["gamma"]),
                rho=_pair(het.get("rho", 0.5)),
                beta_mean=tuple(het.get("beta_mean", ())),
                beta_sigma=tuple(het.get("beta_sigma", ())),
                sigma_u=_pair(het.get("sigma_u", 1.0)),
            ),
            covariates=(
                CovariateSpec(**d["covariates"]) if d.get("covariates") else None
            ),
            burn_in=int(d.get("burn_in", 200)),
            seed=int(d.get("seed", 0)),
        )
        return spec

    @staticmethod
    def from_json(s: str) -> "DgpSpec":
        return DgpSpec.from_dict(json.loads(s))


@dataclass(frozen=True)
class HeterogeneityDraw:
    """Realized country parameters (one row per country)."""

    alpha: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    sigma_u: np.ndarray
    z_alpha: np.ndarray
    z_gamma: np.ndarray


@dataclass(frozen=True)
class PanelTruth:
    """Planted parameters attached to a simulated panel."""

    draw: HeterogeneityDraw
    factor: np.ndarray
    lam: np.ndarray
    spec: DgpSpec

    @property
    def phi(self) -> np.ndarray:
        """Per-country speed of convergence 1 - rho_i."""
        return 1.0 - self.draw.rho


def replication_seed(seed: int, replication: int) -> int:
    """Deterministic sub-seed for one Monte Carlo replication."""
    return int(np.random.SeedSequence([int(seed), int(replication)]).generate_state(1)[0])


def draw_heterogeneity(spec: HeterogeneitySpec, n: int, seed) -> HeterogeneityDraw:
    """Draw the per-country parameter table.

    z blocks are independent standard normal; the draw is deterministic
    given the seed.
    """
    if n < 1:
        raise DgpError("need n >= 1")
    rng = np.random.default_rng(seed)
    ka, kg = len(spec.alpha.theta), len(spec.gamma.theta)
    z_alpha = rng.standard_normal((n, ka))
    z_gamma = rng.standard_normal((n, kg))
    alpha = (
        spec.alpha.mean
        + (z_alpha @ np.asarray(spec.alpha.theta) if ka else 0.0)
        + spec.alpha.sigma_eta * rng.standard_normal(n)
    )
    gamma = (
        spec.gamma.mean
        + (z_gamma @ np.asarray(spec.gamma.theta) if kg else 0.0)
        + spec.gamma.sigma_eta * rng.standard_normal(n)
    )
    if isinstance(spec.rho, tuple):
        rho = rng.uniform(spec.rho[0], spec.rho[1], size=n)
    else:
        rho = np.full(n, spec.rho)
    kx = spec.n_covariates
    beta = np.empty((n, kx))
    for j in range(kx):
        beta[:, j] = spec.beta_mean[j] + spec.beta_sigma[j] * rng.standard_normal(n)
    if isinstance(spec.sigma_u, tuple):
        sigma_u = rng.uniform(spec.sigma_u[0], spec.sigma_u[1], size=n)
    else:
        sigma_u = np.full(n, spec.sigma_u)
    return HeterogeneityDraw(
        alpha=np.atleast_1d(alpha).astype(float) * np.ones(n),
        gamma=np.atleast_1d(gamma).astype(float) * np.ones(n),
        rho=rho,
        beta=beta,
        sigma_u=sigma_u,
        z_alpha=z_alpha,
        z_gamma=z_gamma,
    )


def simulate_panel(spec: DgpSpec) -> tuple[PanelDataset, PanelTruth]:
    """Generate a balanced panel plus its planted truth.

    The recursion starts burn_in periods before the first exposed year at
    the factor-free stationary point alpha_i / (1 - rho_i), so the exposed
    window is effectively a process started in the distant past. The factor
    is extended backwards over the burn-in window with the same law.
    """
    ss = np.random.SeedSequence(spec.seed)
    s_het, s_fac, s_u, s_x = ss.spawn(4)
    n, T, B = spec.n, spec.T, spec.burn_in
    total = B + T

    draw = draw_heterogeneity(spec.heterogeneity, n, s_het)
    f = simulate_factor(spec.factor, total, s_fac, t_start=1 - B)

    rng_u = np.random.default_rng(s_u)
    u = draw.sigma_u[:, None] * rng_u.standard_normal((n, total))

    kx = spec.heterogeneity.n_covariates
    x = np.zeros((kx, n, total))
    lam = np.zeros((n, kx))
    if kx:
        cov = spec.covariates
        rng_x = np.random.default_rng(s_x)
        lam = cov.lambda_mean + cov.lambda_sigma * rng_x.standard_normal((n, kx))
        for j in range(kx):
            eps = cov.sigma_x * rng_x.standard_normal((n, total))
            v = np.zeros((n, total))
            v[:, 0] = eps[:, 0]
            for t in range(1, total):
                v[:, t] = cov.a_x * v[:, t - 1] + eps[:, t]
            x[j] = lam[:, j : j + 1] * f[None, :] + v

    y = np.empty((n, total))
    y_prev = draw.alpha / (1.0 - draw.rho)
    for t in range(total):
        y_t = draw.alpha + draw.gamma * f[t] + draw.rho * y_prev + u[:, t]
        for j in range(kx):
            y_t = y_t + draw.beta[:, j] * x[j, :, t]
        y[:, t] = y_t
        y_prev = y_t

    width = max(3, len(str(n)))
    countries = tuple(f"C{i + 1:0{width}d}" for i in range(n))
    years = np.arange(1, T + 1)
    values = {"y": y[:, B:]}
    for j in range(kx):
        values[f"x{j + 1}"] = x[j, :, B:]
    panel = PanelDataset(countries, years, values)
    truth = PanelTruth(draw=draw, factor=f[B:].copy(), lam=lam, spec=spec)
    return panel, truth
