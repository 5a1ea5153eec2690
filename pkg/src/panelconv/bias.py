"""Closed-form large-sample bias predictions for the convergence estimators.

These are the theoretical benchmarks the Monte Carlo experiments are judged
against: the cross-section (initial-level) regression bias under unobserved
country effects, the two-way fixed-effects bias when a stationary common
factor is loaded heterogeneously, the degenerate unit limit when the factor
is trended, and the classic dynamic-panel small-T approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dgp import FactorSpec

__all__ = [
    "BiasPrediction",
    "barro_asymptotic_bias",
    "twfe_bias_stationary_factor",
    "twfe_limit_trended",
    "nickell_bias_approx",
    "kappa_squared",
]


@dataclass(frozen=True)
class BiasPrediction:
    """One closed-form prediction.

    value is the headline number (a bias, except for the trended limit
    where it is the probability limit itself); regime names which result
    produced it; approximate flags expansions that are not exact limits.
    """

    value: float
    regime: str
    inputs: dict[str, Any] = field(default_factory=dict)
    approximate: bool = False
    note: str = ""


def barro_asymptotic_bias(rho0: float, T: int, dispersion_ratio: float) -> BiasPrediction:
    """Large-n bias of the initial-level coefficient in the growth regression.

    The cross-section regression of the T-year growth total on the initial
    level estimates -(1 - rho0**T) only when countries share one intercept.
    With intercept dispersion the initial level is correlated with the
    country effect baked into it, and the coefficient is biased upward
    (toward zero convergence) by

        (1 - rho0**T) * X / (1 + X),   X = r (1 + rho0) / (1 - rho0),

    where r = dispersion_ratio is the variance of the country-effect part of
    the initial level (intercept heterogeneity plus covariate terms) over
    the innovation variance. r = 0 recovers consistency; r -> inf drives the
    estimated coefficient all the way to zero.
    """
    if not 0 <= rho0 < 1:
        raise ValueError(f"rho0 = {rho0} must lie in [0, 1)")
    if T < 1:
        raise ValueError("T must be >= 1")
    if dispersion_ratio < 0:
        raise ValueError("dispersion_ratio must be nonnegative")
    gap = 1.0 - rho0**T
    if rho0 == 0:
        x = float(dispersion_ratio)
    else:
        x = dispersion_ratio * (1.0 + rho0) / (1.0 - rho0)
    bias = gap * x / (1.0 + x)
    implied = (rho0**T + bias) ** (1.0 / T)
    return BiasPrediction(
        value=float(bias),
        regime="cross-section-initial-level",
        inputs={
            "rho0": float(rho0),
            "T": int(T),
            "dispersion_ratio": float(dispersion_ratio),
            "implied_rho_hat": float(implied),
        },
        note="bias of the initial-level coefficient; implied_rho_hat is the "
        "persistence a user would back out from the biased coefficient",
    )


def twfe_bias_stationary_factor(
    rho0: float, kappa_sq: float, factor: FactorSpec
) -> BiasPrediction:
    """Large-(n, T) bias of the two-way FE lag coefficient, stationary factor.

    With loadings of variance sigma_gamma**2 on a stationary factor, the
    demeaned lag is correlated with the demeaned error through the factor
    and the pooled estimator of rho0 is inflated by

        kappa_sq * sum_s rho0**s g(s+1)
        --------------------------------------------------------
        1 + kappa_sq * sum_{s,s'} rho0**(s+s') g(|s - s'|)

    where g is the factor autocovariance and kappa_sq scales the loading
    variance by the stationary variance of the idiosyncratic part of y
    (see kappa_squared). For an AR(1) factor with coefficient a and level
    variance s2 the sums collapse to

        num = kappa_sq * s2 * a / (1 - rho0 * a)
        den = 1 + kappa_sq * s2 * (1 + rho0 * a) / ((1 - rho0**2) (1 - rho0 * a))

    and an iid factor (a = 0) contributes no bias at all.
    """
    if not abs(rho0) < 1:
        raise ValueError(f"rho0 = {rho0} must lie inside (-1, 1)")
    if kappa_sq < 0:
        raise ValueError("kappa_sq must be nonnegative")
    if factor.kind == "iid-normal":
        a, s2 = 0.0, factor.sigma**2
    elif factor.kind == "stationary-ar1":
        a, s2 = factor.a, factor.stationary_variance
    else:
        raise ValueError(
            f"factor kind {factor.kind!r} is not stationary; this prediction "
            "applies only to iid-normal or stationary-ar1 factors"
        )
    num = kappa_sq * s2 * a / (1.0 - rho0 * a)
    den = 1.0 + kappa_sq * s2 * (1.0 + rho0 * a) / ((1.0 - rho0**2) * (1.0 - rho0 * a))
    return BiasPrediction(
        value=float(num / den),
        regime="twfe-stationary-factor",
        inputs={
            "rho0": float(rho0),
            "kappa_sq": float(kappa_sq),
            "factor_a": float(a),
            "factor_variance": float(s2),
        },
        note="upward bias of the pooled lag coefficient",
    )


def twfe_limit_trended(rho0: float, mu: float) -> BiasPrediction:
    """Probability limit of the two-way FE lag coefficient, trended factor.

    When the factor carries a nonzero drift mu and loadings differ across
    countries, the loading-specific trends dominate every stationary moment
    and the pooled lag coefficient converges to one regardless of rho0: the
    regression looks like a unit root even though every country is stable.
    The returned value is the limit itself, not a bias.
    """
    if not abs(rho0) < 1:
        raise ValueError(f"rho0 = {rho0} must lie inside (-1, 1)")
    if mu == 0:
        raise ValueError("mu = 0 has no trend; use the stationary prediction")
    return BiasPrediction(
        value=1.0,
        regime="twfe-trended-collapse",
        inputs={"rho0": float(rho0), "mu": float(mu)},
        note="probability limit of the pooled lag coefficient under "
        "heterogeneous loadings on a trended factor",
    )


def nickell_bias_approx(rho0: float, T: int) -> BiasPrediction:
    """Small-T within-estimator bias approximation -(1 + rho0)/(T - 1).

    The familiar fixed-T dynamic-panel bias of the demeaned lag coefficient,
    to first order in 1/T. Flagged approximate: at small T and high rho0 the
    exact fixed-T expression differs noticeably.
    """
    if not abs(rho0) < 1:
        raise ValueError(f"rho0 = {rho0} must lie inside (-1, 1)")
    if T < 2:
        raise ValueError("T must be >= 2")
    return BiasPrediction(
        value=float(-(1.0 + rho0) / (T - 1)),
        regime="within-small-T",
        inputs={"rho0": float(rho0), "T": int(T)},
        approximate=True,
        note="first-order in 1/T; not an exact fixed-T expression",
    )


def kappa_squared(sigma_gamma_sq: float, sigma_u_sq: float, rho0: float) -> float:
    """Loading-variance ratio kappa^2 = sigma_gamma^2 (1 - rho0^2) / sigma_u^2.

    Normalizes the factor-loading variance by the stationary variance
    sigma_u^2 / (1 - rho0^2) of the idiosyncratic part of the outcome.
    """
    if sigma_gamma_sq < 0 or sigma_u_sq <= 0:
        raise ValueError("need sigma_gamma_sq >= 0 and sigma_u_sq > 0")
    if not abs(rho0) < 1:
        raise ValueError(f"rho0 = {rho0} must lie inside (-1, 1)")
    return float(sigma_gamma_sq * (1.0 - rho0**2) / sigma_u_sq)
