"""Multivariate Gaussians and the divergences used as association costs.

Detections, tracks, and mixture approximations are all represented as
full-covariance Gaussians.  The Jensen-Shannon divergence between two
Gaussians has no closed form (the midpoint mixture is not Gaussian), so
``js_divergence`` moment-matches the mixture and applies the closed-form
KL twice; ``js_divergence_mc`` is the Monte Carlo estimator used to bound
the approximation error.  All divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError

_SYM_RTOL = 1e-9


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; one trace-scaled jitter retry, then fail."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    eps = 1e-9 * np.trace(cov) / cov.shape[0]
    try:
        return np.linalg.cholesky(cov + eps * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"covariance not positive definite (jitter {eps:.3e} did not help)"
        ) from exc


@dataclass(frozen=True, eq=False)
class GaussianNd:
    """Immutable multivariate normal N(mean, cov) with PD covariance."""

    mean: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise InputError(f"covariance must be square, got shape {cov.shape}")
        if cov.shape[0] != mean.shape[0]:
            raise InputError(
                f"mean length {mean.shape[0]} does not match covariance "
                f"dimension {cov.shape[0]}"
            )
        if not np.isfinite(mean).all() or not np.isfinite(cov).all():
            raise InputError("mean/covariance must be finite")
        scale = max(np.abs(cov).max(), 1.0)
        if np.abs(cov - cov.T).max() > _SYM_RTOL * scale:
            raise InputError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", _cholesky_with_jitter(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def log_det_cov(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def log_density(self, x: np.ndarray) -> float:
        """Log of the normal density at a single point ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise InputError(f"point has length {x.shape[0]}, expected {self.dim}")
        return float(self.log_density_many(x[None, :])[0])

    def log_density_many(self, x: np.ndarray) -> np.ndarray:
        """Vectorized log-density for points of shape (n, dim)."""
        x = np.asarray(x, dtype=float)
        diff = x - self.mean
        y = _solve_lower(self._chol, diff.T)
        maha = np.sum(y * y, axis=0)
        return -0.5 * (self.dim * np.log(2.0 * np.pi) + self.log_det_cov + maha)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` samples, shape (n, dim)."""
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._chol.T


def _solve_lower(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    from scipy.linalg import solve_triangular

    return solve_triangular(chol, b, lower=True, check_finite=False)


def _check_same_dim(p: GaussianNd, q: GaussianNd) -> None:
    if p.dim != q.dim:
        raise InputError(f"dimension mismatch: {p.dim} vs {q.dim}")


def log_density(g: GaussianNd, x: np.ndarray) -> float:
    return g.log_density(x)


def kl_divergence(p: GaussianNd, q: GaussianNd) -> float:
    """Closed-form KL(p || q) between Gaussians, in nats.

    0.5 * [ln(|Sq|/|Sp|) - k + (mp-mq)^T Sq^{-1} (mp-mq) + tr(Sq^{-1} Sp)]
    """
    _check_same_dim(p, q)
    k = p.dim
    diff = p.mean - q.mean
    y = _solve_lower(q._chol, diff)
    maha = float(y @ y)
    # tr(Sq^{-1} Sp) via triangular solve against the factor of Sp
    w = _solve_lower(q._chol, p._chol)
    trace_term = float(np.sum(w * w))
    return 0.5 * (q.log_det_cov - p.log_det_cov - k + maha + trace_term)


def moment_matched_mixture(p: GaussianNd, q: GaussianNd) -> GaussianNd:
    """Gaussian with the first two moments of the equal-weight mixture.

    Symmetric in (p, q) bit-for-bit: every term is commutative in the pair.
    """
    _check_same_dim(p, q)
    mean = 0.5 * (p.mean + q.mean)
    diff = p.mean - q.mean
    cov = 0.5 * (p.cov + q.cov) + 0.25 * np.outer(diff, diff)
    cov = 0.5 * (cov + cov.T)
    return GaussianNd(mean, cov)


def js_divergence(p: GaussianNd, q: GaussianNd) -> float:
    """Moment-matched Jensen-Shannon divergence between Gaussians.

    The midpoint mixture is replaced by its moment-matched Gaussian before
    applying the closed-form KL, which keeps the result symmetric and
    nonnegative.  Unlike the exact JS it is not bounded by ln 2.
    """
    m = moment_matched_mixture(p, q)
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def js_divergence_mc(
    p: GaussianNd, q: GaussianNd, samples: int, seed: int
) -> float:
    """Monte Carlo estimate of the exact JS divergence.

    Draws samples/2 points from each component and evaluates the exact
    mixture log-density, so the estimate converges to the true JS
    (bounded by ln 2) rather than to the moment-matched value.
    Deterministic for a fixed seed.
    """
    _check_same_dim(p, q)
    if samples < 10_000:
        raise InputError(f"need at least 10^4 samples, got {samples}")
    rng = np.random.default_rng(seed)
    half = samples // 2

    def mean_log_ratio(src: GaussianNd) -> float:
        x = src.sample(rng, half)
        lp = p.log_density_many(x)
        lq = q.log_density_many(x)
        ls = lp if src is p else lq
        lm = np.logaddexp(lp, lq) - np.log(2.0)
        return float(np.mean(ls - lm))

    return 0.5 * mean_log_ratio(p) + 0.5 * mean_log_ratio(q)
