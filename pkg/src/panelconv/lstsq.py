"""Least-squares kernel shared by every estimator.

All solves go through a rank-revealing SVD pseudo-inverse: singular values
below 1e-10 times the largest are treated as zero, rank-deficient systems
get the minimum-norm solution, and projections are therefore invariant to
the particular generalized inverse. Covariances come in classical,
heteroskedasticity-robust and cluster-robust flavors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "KernelError",
    "RegressionResult",
    "NlsResult",
    "least_squares",
    "residual_project",
    "gauss_newton_nls",
]

logger = logging.getLogger("panelconv.lstsq")

RANK_RTOL = 1e-10
SE_KINDS = ("classical", "hetero-robust", "cluster-robust")


class KernelError(ValueError):
    """Raised for ill-posed least-squares inputs."""


def _thin_svd(X: np.ndarray):
    """SVD of X with small singular values zeroed out.

    Returns (U, s_kept, Vt, rank). A zero matrix has rank 0.
    """
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0], s[:0], Vt[:0], 0
    keep = s > RANK_RTOL * s[0]
    r = int(keep.sum())
    return U[:, :r], s[:r], Vt[:r], r


@dataclass
class RegressionResult:
    """Coefficients, covariance and fit diagnostics of one least-squares fit."""

    coefficients: np.ndarray
    covariance: np.ndarray
    se_kind: str
    residuals: np.ndarray
    rank: int
    nobs: int
    names: tuple[str, ...] = ()
    dof_absorbed: int = 0

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def dof_resid(self) -> int:
        return max(self.nobs - self.rank - self.dof_absorbed, 1)


def least_squares(
    X: np.ndarray,
    y: np.ndarray,
    se_kind: str = "classical",
    cluster_ids: np.ndarray | None = None,
    names: Sequence[str] = (),
    dof_absorbed: int = 0,
) -> RegressionResult:
    """Minimum-norm OLS via pseudo-inverse, with selectable covariance.

    Parameters
    ----------
    X : (n, k) design matrix, no missing entries.
    y : (n,) response.
    se_kind : "classical", "hetero-robust" (Huber-White) or "cluster-robust".
    cluster_ids : length-n labels, required for cluster-robust.
    names : optional column names carried into the result.
    dof_absorbed : count of parameters absorbed upstream (fixed effects that
        were swept out before this fit); enters the degrees-of-freedom
        correction only.

    Robust covariances are scaled by n / (n - k_total) where k_total counts
    the effective rank plus dof_absorbed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    if n == 0:
        raise KernelError("design matrix has zero rows")
    if y.shape[0] != n:
        raise KernelError(f"X has {n} rows but y has {y.shape[0]}")
    if se_kind not in SE_KINDS:
        raise KernelError(f"se_kind must be one of {SE_KINDS}, got {se_kind!r}")
    if se_kind == "cluster-robust":
        if cluster_ids is None:
            raise KernelError("cluster-robust covariance needs cluster_ids")
        cluster_ids = np.asarray(cluster_ids)
        if cluster_ids.shape[0] != n:
            raise KernelError(
                f"cluster_ids has length {cluster_ids.shape[0]}, expected {n}"
            )

    U, s, Vt, rank = _thin_svd(X)
    # Minimum-norm solution X+ y; bread = (X'X)+ shared by every se kind.
    beta = Vt.T @ ((U.T @ y) / s) if rank else np.zeros(k)
    resid = y - X @ beta
    bread = (Vt.T / s**2) @ Vt if rank else np.zeros((k, k))

    k_total = rank + int(dof_absorbed)
    dof = max(n - k_total, 1)
    if se_kind == "classical":
        sigma2 = float(resid @ resid) / dof
        cov = sigma2 * bread
    elif se_kind == "hetero-robust":
        Xe = X * resid[:, None]
        meat = Xe.T @ Xe
        cov = bread @ meat @ bread * (n / dof)
    else:
        meat = np.zeros((k, k))
        # Per-cluster score outer products.
        order = np.argsort(cluster_ids, kind="stable")
        Xs, es, cs = X[order], resid[order], cluster_ids[order]
        starts = np.flatnonzero(np.r_[True, cs[1:] != cs[:-1]])
        bounds = np.r_[starts, cs.size]
        for a, b in zip(bounds[:-1], bounds[1:]):
            g = Xs[a:b].T @ es[a:b]
            meat += np.outer(g, g)
        cov = bread @ meat @ bread * (n / dof)

    cov = 0.5 * (cov + cov.T)
    return RegressionResult(
        coefficients=beta,
        covariance=cov,
        se_kind=se_kind,
        residuals=resid,
        rank=rank,
        nobs=n,
        names=tuple(names),
        dof_absorbed=int(dof_absorbed),
    )


def residual_project(basis: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Residuals of each target column after regression on `basis`.

    Implements the residual-maker M = I - H (H'H)- H' without materializing
    it: the output is invariant to adding linearly dependent columns to the
    basis, because the fit uses the pseudo-inverse.

    targets may be (n,) or (n, m); the result has the same shape.
    """
    H = np.atleast_2d(np.asarray(basis, dtype=float))
    T = np.asarray(targets, dtype=float)
    squeeze = T.ndim == 1
    T2 = T[:, None] if squeeze else T
    if H.shape[0] != T2.shape[0]:
        raise KernelError(
            f"basis has {H.shape[0]} rows but targets have {T2.shape[0]}"
        )
    U, s, Vt, rank = _thin_svd(H)
    if rank == 0:
        out = T2.copy()
    else:
        out = T2 - U @ (U.T @ T2)
    return out[:, 0] if squeeze else out


@dataclass
class NlsResult:
    """Gauss-Newton output: parameters, sandwich covariance, diagnostics."""

    coefficients: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    nobs: int
    names: tuple[str, ...] = ()

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def gauss_newton_nls(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    names: Sequence[str] = (),
) -> NlsResult:
    """Minimize sum of squared residuals by damped Gauss-Newton.

    residual_fn maps a parameter vector to the residual vector. jacobian_fn,
    if given, returns the (n, k) Jacobian of the residuals; otherwise forward
    finite differences with step 1e-6 * max(1, |theta_j|) are used.

    Convergence means the gradient norm J'r drops below tol (scaled by the
    residual norm). Non-convergence is reported in the result, never hidden.
    The covariance is the heteroskedasticity-robust sandwich at the optimum.
    """
    theta = np.asarray(init, dtype=float).copy()
    k = theta.size
    r = np.asarray(residual_fn(theta), dtype=float)
    if r.ndim != 1:
        raise KernelError("residual function must return a 1-d vector")
    n = r.size

    def jac(th: np.ndarray, r0: np.ndarray) -> np.ndarray:
        if jacobian_fn is not None:
            J = np.asarray(jacobian_fn(th), dtype=float)
            if J.shape != (n, k):
                raise KernelError(f"jacobian shape {J.shape}, expected {(n, k)}")
            return J
        J = np.empty((n, k))
        for j in range(k):
            step = 1e-6 * max(1.0, abs(th[j]))
            tp = th.copy()
            tp[j] += step
            J[:, j] = (np.asarray(residual_fn(tp), dtype=float) - r0) / step
        return J

    ssr = float(r @ r)
    converged = False
    it = 0
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        J = jac(theta, r)
        g = J.T @ r
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= tol * max(1.0, np.sqrt(ssr)):
            converged = True
            break
        U, s, Vt, rank = _thin_svd(J)
        if rank == 0:
            raise KernelError("singular Jacobian in Gauss-Newton step")
        step = Vt.T @ ((U.T @ r) / s)
        # Halve the step until the objective stops increasing.
        lam = 1.0
        for _ in range(30):
            trial = theta - lam * step
            rt = np.asarray(residual_fn(trial), dtype=float)
            ssr_t = float(rt @ rt)
            if ssr_t <= ssr * (1 + 1e-14):
                break
            lam *= 0.5
        else:
            converged = grad_norm <= 1e-6 * max(1.0, np.sqrt(ssr))
            break
        theta, r, ssr = trial, rt, ssr_t

    if not converged:
        logger.warning(
            "Gauss-Newton did not converge in %d iterations (|grad| = %.3e)",
            it,
            grad_norm,
        )

    J = jac(theta, r)
    U, s, Vt, rank = _thin_svd(J)
    bread = (Vt.T / s**2) @ Vt if rank else np.zeros((k, k))
    Je = J * r[:, None]
    meat = Je.T @ Je
    dof = max(n - rank, 1)
    cov = bread @ meat @ bread * (n / dof)
    cov = 0.5 * (cov + cov.T)
    return NlsResult(
        coefficients=theta,
        covariance=cov,
        residuals=r,
        converged=converged,
        iterations=it,
        gradient_norm=grad_norm,
        nobs=n,
        names=tuple(names),
    )
