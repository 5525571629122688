"""Stochastic Gaussian message sender under additive privacy noise.

A sender draws its message from N(mu, Sigma) and the channel adds independent
N(0, noise_var * I), so the receiver sees N(mu, Sigma + noise_var * I). Given
a target message distribution N(mu*, Sigma*), a noise-oblivious sender
matches the target before the noise (and eats the mismatch after it), while a
noise-aware sender shapes (mu, Sigma) so that the post-noise distribution is
as close as possible to the target in KL. The aware optimum has a closed
form: mu = mu* and Sigma the positive part of (Sigma* - noise_var * I) in the
target's eigenbasis, which cancels the noise exactly whenever the target
covariance dominates it. The aware sender is never worse than the oblivious
one, and strictly better whenever noise_var > 0.

``aware_optimum_gd`` reproduces the closed form with projected gradient
descent (mean plus diagonal variances, or a full covariance factor), mirroring
how a learned sender would optimize the same objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SingularTargetError, StepSizeError
from .rng import substream

_SYM_TOL = 1e-12
_EIG_FLOOR = -1e-12
_TARGET_MIN_EIG = 1e-9


def positive_part(matrix: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone (eigenvalue clipping).

    Idempotent: applying it twice gives the same matrix as applying it once.
    """
    sym = (matrix + matrix.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    return (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T


@dataclass(frozen=True, eq=False)
class GaussianMessageDist:
    """Mean and covariance of a stochastic message."""

    mean: np.ndarray
    cov: np.ndarray
    diagonal_flag: bool = False

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise InvalidParameterError(
                f"covariance shape {cov.shape} does not match dimension {mean.size}"
            )
        if not np.allclose(cov, cov.T, atol=_SYM_TOL, rtol=0.0):
            raise InvalidParameterError("covariance must be symmetric")
        eigvals = np.linalg.eigvalsh((cov + cov.T) / 2.0)
        if eigvals.min(initial=0.0) < _EIG_FLOOR:
            raise InvalidParameterError(
                f"covariance has negative eigenvalue {eigvals.min():.3g}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", positive_part(cov))

    @classmethod
    def from_diagonal(cls, mean, variances) -> "GaussianMessageDist":
        return cls(np.asarray(mean, dtype=float), np.diag(np.asarray(variances, dtype=float)),
                   diagonal_flag=True)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class SenderProblem:
    """A target message distribution and the channel's noise variance."""

    target: GaussianMessageDist
    noise_var: float

    def __post_init__(self):
        if self.noise_var < 0:
            raise InvalidParameterError(f"noise_var must be nonnegative, got {self.noise_var}")
        eigvals = np.linalg.eigvalsh(self.target.cov)
        if eigvals.min() < _TARGET_MIN_EIG:
            raise InvalidParameterError(
                f"target covariance must be positive-definite (min eigenvalue "
                f"{eigvals.min():.3g} < {_TARGET_MIN_EIG})"
            )

    @property
    def dim(self) -> int:
        return self.target.dim


@dataclass(frozen=True, eq=False)
class SenderSolution:
    dist: GaussianMessageDist  # pre-noise message distribution
    kl: float                  # KL of the post-noise message against the target


def kl_gaussian(p: GaussianMessageDist, q: GaussianMessageDist) -> float:
    """KL(N_p || N_q) between multivariate Gaussians:

        0.5 * ( ln |Sigma_q|/|Sigma_p| + tr(Sigma_q^-1 Sigma_p)
                + (mu_p - mu_q)^T Sigma_q^-1 (mu_p - mu_q) - d )

    Requires a positive-definite q covariance; a singular p covariance gives
    +inf (a degenerate distribution has no density against q).
    """
    if p.dim != q.dim:
        raise InvalidParameterError("distributions must share one dimension")
    sign_q, logdet_q = np.linalg.slogdet(q.cov)
    if sign_q <= 0 or np.linalg.eigvalsh(q.cov).min() <= 0:
        raise SingularTargetError("q covariance must be positive-definite")
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        return math.inf
    diff = p.mean - q.mean
    solve = np.linalg.solve
    trace = float(np.trace(solve(q.cov, p.cov)))
    quad = float(diff @ solve(q.cov, diff))
    return 0.5 * (logdet_q - logdet_p + trace + quad - p.dim)


def _sent(dist: GaussianMessageDist, noise_var: float) -> GaussianMessageDist:
    """Post-noise message distribution, N(mu, Sigma + noise_var * I)."""
    return GaussianMessageDist(
        dist.mean, dist.cov + noise_var * np.eye(dist.dim), dist.diagonal_flag
    )


def oblivious_optimum(problem: SenderProblem) -> SenderSolution:
    """Sender that ignores the noise: emits the target distribution itself.

    Returned KL is the divergence actually incurred by the post-noise message
    N(mu*, Sigma* + noise_var * I) from the target.
    """
    dist = GaussianMessageDist(problem.target.mean, problem.target.cov,
                               problem.target.diagonal_flag)
    return SenderSolution(dist, kl_gaussian(_sent(dist, problem.noise_var), problem.target))


def aware_optimum(problem: SenderProblem) -> SenderSolution:
    """Noise-aware sender: minimizes the post-noise KL in closed form.

    mu = mu*, Sigma = positive part of (Sigma* - noise_var * I) in the
    target's eigenbasis. The KL is 0 exactly when Sigma* - noise_var * I is
    PSD; otherwise only the over-noised eigendirections contribute.
    """
    eigvals, eigvecs = np.linalg.eigh(problem.target.cov)
    shrunk = np.clip(eigvals - problem.noise_var, 0.0, None)
    cov = (eigvecs * shrunk) @ eigvecs.T
    dist = GaussianMessageDist(problem.target.mean, cov, problem.target.diagonal_flag)
    return SenderSolution(dist, kl_gaussian(_sent(dist, problem.noise_var), problem.target))


def objective_grad_diag(problem: SenderProblem, mean: np.ndarray, variances: np.ndarray):
    """Post-noise KL objective and its analytic gradient for a diagonal sender.

    The sender is N(mean, diag(variances)); the objective is
    KL(N(mean, diag(variances) + noise_var * I) || target). Returns
    (value, d/dmean, d/dvariances).
    """
    mean = np.asarray(mean, dtype=float)
    variances = np.asarray(variances, dtype=float)
    dist = GaussianMessageDist.from_diagonal(mean, variances)
    value = kl_gaussian(_sent(dist, problem.noise_var), problem.target)
    sent_cov = np.diag(variances + problem.noise_var)
    target_inv = np.linalg.inv(problem.target.cov)
    grad_mean = target_inv @ (mean - problem.target.mean)
    grad_var = 0.5 * (np.diag(target_inv) - 1.0 / np.diag(sent_cov))
    return value, grad_mean, grad_var


def aware_optimum_gd(problem: SenderProblem, steps: int = 5000, learning_rate: float = 0.1,
                     mode: str = "diagonal") -> SenderSolution:
    """Noise-aware optimization by projected gradient descent.

    ``diagonal`` mode descends on (mean, per-coordinate variances) with the
    variances projected back onto [0, inf) after every step, so the solver
    can reach the boundary exactly; on diagonal targets it matches
    ``aware_optimum`` to high accuracy. ``full`` mode descends on a dense
    covariance factor A with Sigma = A A^T. Raises StepSizeError when the
    objective increases for 10 consecutive steps.
    """
    if mode not in ("diagonal", "full"):
        raise InvalidParameterError("mode must be 'diagonal' or 'full'")
    d = problem.dim
    noise = problem.noise_var
    target_inv = np.linalg.inv(problem.target.cov)
    mean = np.zeros(d)
    if mode == "diagonal":
        variances = np.ones(d)
    else:
        factor = np.eye(d)

    def current() -> GaussianMessageDist:
        if mode == "diagonal":
            return GaussianMessageDist.from_diagonal(mean, variances)
        return GaussianMessageDist(mean, factor @ factor.T)

    def objective() -> float:
        return kl_gaussian(_sent(current(), noise), problem.target)

    prev = objective()
    bad_steps = 0
    for _ in range(steps):
        if mode == "diagonal":
            _, grad_mean, grad_var = objective_grad_diag(problem, mean, variances)
            mean = mean - learning_rate * grad_mean
            variances = np.clip(variances - learning_rate * grad_var, 0.0, None)
        else:
            sent_cov = factor @ factor.T + noise * np.eye(d)
            grad_sigma = 0.5 * (target_inv - np.linalg.inv(sent_cov))
            grad_mean = target_inv @ (mean - problem.target.mean)
            mean = mean - learning_rate * grad_mean
            factor = factor - learning_rate * 2.0 * (grad_sigma @ factor)
        value = objective()
        if math.isnan(value) or value > prev:
            bad_steps += 1
            if bad_steps >= 10:
                raise StepSizeError(
                    f"objective increased for {bad_steps} consecutive steps; "
                    "reduce the learning rate"
                )
        else:
            bad_steps = 0
        prev = value
    return SenderSolution(current(), prev)


def sample_message(dist: GaussianMessageDist, noise_var: float, rng_seed: int,
                   size: int | None = None):
    """Draw a message by the reparameterized path and add channel noise.

    p = mu + Sigma^{1/2} xi with xi standard normal, then u ~ N(0,
    noise_var * I) is added, so the output is distributed
    N(mu, Sigma + noise_var * I). Deterministic given the seed.
    """
    if noise_var < 0:
        raise InvalidParameterError(f"noise_var must be nonnegative, got {noise_var}")
    rng = substream(rng_seed)
    d = dist.dim
    n = 1 if size is None else int(size)
    if dist.diagonal_flag:
        root = np.diag(np.sqrt(np.clip(np.diag(dist.cov), 0.0, None)))
    else:
        eigvals, eigvecs = np.linalg.eigh(dist.cov)
        root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    xi = rng.standard_normal((n, d))
    out = dist.mean + xi @ root.T
    if noise_var > 0:
        out = out + math.sqrt(noise_var) * rng.standard_normal((n, d))
    return out[0] if size is None else out
