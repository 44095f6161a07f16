"""Natural-gradient regression engines (Gaussian and Student-t) with hybrid
finalization.

Each engine carries linear-model parameters theta = (beta, tau^2) and evolves
by self-simulation: draw a covariate row from the observed rows, draw a
response from the current parameters, and take a step of size 1/N along the
natural gradient of the corresponding log-likelihood.  Runs are truncated
after a short horizon and completed with a Gaussian tail correction
theta_N + V_N @ eps whose covariance is estimated from continuation paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import polygamma

__all__ = [
    "RegressionEngine",
    "CovariateResampler",
    "TailCorrection",
    "gauss_reg_init",
    "treg_init",
    "natural_gradient",
    "reg_step",
    "advance_regression_paths",
    "estimate_tail_covariance",
    "hybrid_finalize",
]

DEFAULT_TAU2_FLOOR = 1e-12


@dataclass(frozen=True)
class CovariateResampler:
    """Uniform with-replacement draws over the observed covariate rows."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("covariate rows must form a nonempty 2-D array")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.rows[rng.integers(0, self.rows.shape[0])]

    def draw_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.rows[rng.integers(0, self.rows.shape[0], size=size)]


@dataclass(frozen=True)
class RegressionEngine:
    """State (beta, tau2) plus the fixed design second-moment matrix.

    ``nu`` is the Student-t degrees of freedom; ``math.inf`` selects the
    Gaussian gradients.  ``sigma_nx`` = mean of x_i x_i^T over the observed
    rows is fixed at initialization and never updated during resampling.
    """

    beta: np.ndarray
    tau2: float
    sigma_nx: np.ndarray
    nu: float
    step: int
    tau2_floor: float = DEFAULT_TAU2_FLOOR
    floored: bool = False

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        beta.flags.writeable = False
        sig = np.asarray(self.sigma_nx, dtype=float)
        sig.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma_nx", sig)
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.beta, [self.tau2]])

    @property
    def dim(self) -> int:
        return self.beta.size

    def predictive_sd(self) -> float:
        """Standard deviation of the engine's response distribution."""
        if math.isinf(self.nu):
            return math.sqrt(self.tau2)
        if self.nu <= 2:
            raise ValueError("predictive sd undefined for nu <= 2")
        return math.sqrt(self.tau2 * self.nu / (self.nu - 2.0))

    def draw_residual(self, rng: np.random.Generator, size=None):
        if math.isinf(self.nu):
            return rng.standard_normal(size)
        return rng.standard_t(self.nu, size)


def _design(X: np.ndarray, y: np.ndarray):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("design matrix and response have incompatible shapes")
    return X, y


def _check_rank(X: np.ndarray, cond_cap: float) -> None:
    if np.linalg.cond(X.T @ X) > cond_cap or X.shape[0] < X.shape[1]:
        raise ValueError("rank-deficient design matrix")


def gauss_reg_init(X: np.ndarray, y: np.ndarray, cond_cap: float = 1e12,
                   tau2_floor: float = DEFAULT_TAU2_FLOOR) -> RegressionEngine:
    """OLS fit: beta = (X'X)^{-1} X'y, tau2 = ML residual variance."""
    X, y = _design(X, y)
    _check_rank(X, cond_cap)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    tau2 = max(float(np.mean(resid**2)), tau2_floor)
    sigma_nx = (X.T @ X) / X.shape[0]
    return RegressionEngine(beta=beta, tau2=tau2, sigma_nx=sigma_nx,
                            nu=math.inf, step=X.shape[0], tau2_floor=tau2_floor,
                            floored=tau2 <= tau2_floor)


def _t_mle_irls(X, y, nu, beta0, tau20, max_iter, tol):
    """One IRLS/EM ascent of the Student-t likelihood from a given start."""
    beta, tau2 = beta0.copy(), tau20
    for _ in range(max_iter):
        resid = y - X @ beta
        w = (nu + 1.0) / (nu + resid**2 / tau2)
        Xw = X * w[:, None]
        beta_new = np.linalg.solve(X.T @ Xw, Xw.T @ y)
        resid_new = y - X @ beta_new
        tau2_new = float(np.mean(w * resid_new**2))
        scale = max(abs(tau2), 1e-12)
        done = (np.max(np.abs(beta_new - beta)) < tol * max(1.0, np.max(np.abs(beta)))
                and abs(tau2_new - tau2) < tol * scale)
        beta, tau2 = beta_new, tau2_new
        if done:
            return beta, tau2, True
    return beta, tau2, False


def treg_init(X: np.ndarray, y: np.ndarray, nu: float = 5.0, starts: int = 10,
              seed: int = 0, max_iter: int = 500, tol: float = 1e-8,
              cond_cap: float = 1e12,
              tau2_floor: float = DEFAULT_TAU2_FLOOR) -> RegressionEngine:
    """Student-t fit: average of ``starts`` randomly started IRLS ascents.

    Starts perturb the OLS coefficients by Normal(0, 0.25 * diag cov(beta_OLS));
    non-converged starts are dropped.  Raises if every start fails, with the
    per-start diagnostics in the message.
    """
    X, y = _design(X, y)
    _check_rank(X, cond_cap)
    ols = gauss_reg_init(X, y, cond_cap=cond_cap, tau2_floor=tau2_floor)
    xtx_inv = np.linalg.inv(X.T @ X)
    beta_sd = np.sqrt(np.maximum(np.diag(xtx_inv) * ols.tau2, 0.0)) * 0.5
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xACE])))

    fits, failures = [], []
    for s in range(starts):
        beta0 = ols.beta + (0.0 if s == 0 else rng.standard_normal(ols.dim) * beta_sd)
        beta_hat, tau2_hat, ok = _t_mle_irls(X, y, nu, np.asarray(beta0), ols.tau2,
                                             max_iter, tol)
        if ok and tau2_hat > 0:
            fits.append((beta_hat, tau2_hat))
        else:
            failures.append(f"start {s}: converged={ok}, tau2={tau2_hat:.3e}")
    if not fits:
        raise RuntimeError("Student-t MLE failed for every start: " + "; ".join(failures))
    beta = np.mean([f[0] for f in fits], axis=0)
    tau2 = max(float(np.mean([f[1] for f in fits])), tau2_floor)
    return RegressionEngine(beta=beta, tau2=tau2, sigma_nx=ols.sigma_nx, nu=nu,
                            step=X.shape[0], tau2_floor=tau2_floor)


def natural_gradient(state: RegressionEngine, x: np.ndarray, y: float):
    """Natural-gradient increments (z_beta, z_tau2) for one simulated pair.

    Student-t:  z_beta = tau (nu+3) R / (nu + R^2) * Sigma^{-1} x,
                z_tau2 = tau^2 (nu+3) (R^2 - 1) / (nu + R^2),
    with R the standardized residual.  Gaussian (nu = inf) reduces to
    z_beta = (y - beta'x) Sigma^{-1} x and z_tau2 = (y - beta'x)^2 - tau2.
    """
    resid = float(y - state.beta @ x)
    six = np.linalg.solve(state.sigma_nx, x)
    if math.isinf(state.nu):
        return resid * six, resid * resid - state.tau2
    tau = math.sqrt(state.tau2)
    r = resid / tau
    denom = state.nu + r * r
    z_beta = (tau * (state.nu + 3.0) * r / denom) * six
    z_tau2 = state.tau2 * (state.nu + 3.0) * (r * r - 1.0) / denom
    return z_beta, z_tau2


def reg_step(state: RegressionEngine, resampler: CovariateResampler,
             rng: np.random.Generator) -> RegressionEngine:
    """One self-simulated update theta_N = theta_{N-1} + Z / N."""
    x = resampler.draw(rng)
    y = float(x @ state.beta) + math.sqrt(state.tau2) * float(state.draw_residual(rng))
    z_beta, z_tau2 = natural_gradient(state, x, y)
    n_new = state.step + 1
    beta = state.beta + z_beta / n_new
    tau2 = state.tau2 + z_tau2 / n_new
    floored = tau2 < state.tau2_floor
    if floored:
        tau2 = state.tau2_floor
    return replace(state, beta=beta, tau2=tau2, step=n_new,
                   floored=state.floored or floored)


def advance_regression_paths(state: RegressionEngine, resampler: CovariateResampler,
                             n_steps: int, rng: np.random.Generator,
                             n_paths: int):
    """Advance ``n_paths`` independent copies of the engine, vectorized.

    Returns (betas, tau2s) with shapes (n_paths, d) and (n_paths,).  All
    paths share the step counter, so the 1/N schedule is common.
    """
    d = state.dim
    betas = np.tile(state.beta, (n_paths, 1))
    tau2s = np.full(n_paths, state.tau2)
    inv = np.linalg.inv(state.sigma_nx)
    gaussian = math.isinf(state.nu)
    for j in range(n_steps):
        n_new = state.step + j + 1
        xs = resampler.draw_many(rng, n_paths)
        r = state.draw_residual(rng, n_paths) if not gaussian else rng.standard_normal(n_paths)
        tau = np.sqrt(tau2s)
        six = xs @ inv.T
        if gaussian:
            resid = tau * r
            z_beta = resid[:, None] * six
            z_tau2 = resid * resid - tau2s
        else:
            denom = state.nu + r * r
            z_beta = (tau * (state.nu + 3.0) * r / denom)[:, None] * six
            z_tau2 = tau2s * (state.nu + 3.0) * (r * r - 1.0) / denom
        betas += z_beta / n_new
        tau2s = np.maximum(tau2s + z_tau2 / n_new, state.tau2_floor)
    return betas, tau2s


@dataclass(frozen=True)
class TailCorrection:
    """Recipe for the Gaussian tail-correction covariance.

    ``empirical`` runs ``paths`` continuation paths of ``length`` steps from
    the truncated state, takes the endpoint covariance of theta, and rescales
    it by the ratio of remaining step mass sum_{j>N} j^-2 to the mass the
    continuation actually covered.  Alternatively pass a fixed covariance
    (scalar variance or matrix) straight to :func:`hybrid_finalize`.
    """

    paths: int = 50
    length: int | None = None


def _remaining_mass_ratio(n_now: int, length: int) -> float:
    # step-size mass: trigamma(N+1) = sum_{j>N} 1/j^2 is the full tail,
    # the continuation paths only covered j = N+1 .. N+length of it
    covered = float(np.sum(1.0 / np.arange(n_now + 1, n_now + length + 1, dtype=float) ** 2))
    remaining = float(polygamma(1, n_now + 1))
    return remaining / covered


def estimate_tail_covariance(state: RegressionEngine, resampler: CovariateResampler,
                             correction: TailCorrection,
                             rng: np.random.Generator) -> np.ndarray:
    """Empirical covariance of the infinite tail of the parameter recursion."""
    length = correction.length if correction.length is not None else state.step
    betas, tau2s = advance_regression_paths(state, resampler, length, rng,
                                            correction.paths)
    theta = np.column_stack([betas, tau2s])
    cov = np.cov(theta, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return cov * _remaining_mass_ratio(state.step, length)


def _psd_sqrt(cov: np.ndarray) -> tuple[np.ndarray, bool]:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    projected = bool(np.any(vals < -1e-12 * max(1.0, float(np.max(np.abs(vals))))))
    vals = np.maximum(vals, 0.0)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T, projected


def hybrid_finalize(state: RegressionEngine, correction, rng: np.random.Generator,
                    resampler: CovariateResampler | None = None):
    """Finish a truncated run: return theta_N + V_N @ eps, eps ~ N(0, I).

    ``correction`` is a covariance for the tail; accepted forms are a scalar
    variance, a (d+1, d+1) matrix, or a :class:`TailCorrection` recipe (which
    needs ``resampler``).  Returns (theta_draw, projected_flag).
    """
    k = state.dim + 1
    if isinstance(correction, TailCorrection):
        if resampler is None:
            raise ValueError("empirical tail correction needs the covariate resampler")
        cov = estimate_tail_covariance(state, resampler, correction, rng)
    elif np.isscalar(correction):
        cov = float(correction) * np.eye(k)
    else:
        cov = np.asarray(correction, dtype=float)
        if cov.shape != (k, k):
            raise ValueError(f"tail covariance must have shape {(k, k)}")
    root, projected = _psd_sqrt(cov)
    return state.theta + root @ rng.standard_normal(k), projected
