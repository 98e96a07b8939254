"""Gaussian and Gaussian-mixture models with reproducible sampling.

The covariance container carries the pieces every downstream computation
needs (inverse, whitening factor, log determinant) so they are computed
once, validated once, and shared.  Sampling goes through counter-based
Philox streams addressed by a ``(seed, stream_index)`` pair: equal pairs
replay identical draws, distinct pairs give statistically independent
streams, and substreams can be derived without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric

__all__ = [
    "RandomStream",
    "CovarianceModel",
    "GaussianModel",
    "GaussianMixture",
    "build_covariance",
    "sample_gaussian",
    "sample_mixture",
    "gaussian_log_density",
    "mills_bounds",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Relative tolerance for the symmetry check in build_covariance.
SYMMETRY_RTOL = 1e-12
# A Cholesky pivot at or below this value counts as numerically singular.
PIVOT_FLOOR = 1e-12


def _mix64(value: int) -> int:
    """SplitMix64 finalizer; bijective mixing on 64-bit words."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RandomStream:
    """Value-type handle on a counter-based random stream.

    Parameters
    ----------
    seed : int
        64-bit experiment seed.  Shared by all streams of one run.
    stream_index : int
        Substream selector.  Streams with distinct indices use distinct
        Philox keys and are independent by construction.
    """

    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (self.seed & _MASK64) | ((self.stream_index & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RandomStream":
        """Derive a child stream; children of distinct indices differ."""
        child = _mix64((self.stream_index + (index + 1) * _GOLDEN) & _MASK64)
        return RandomStream(self.seed, child)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceModel:
    """Validated covariance with its inverse and whitening factor.

    Attributes
    ----------
    dimension : int
    sigma : ndarray, shape (d, d)
        The covariance matrix.
    sigma_inv : ndarray, shape (d, d)
        Its inverse, assembled from the whitener.
    whitener : ndarray, shape (d, d)
        Lower-triangular ``L`` with ``L.T @ L = sigma_inv``; the squared
        whitened norm ``|L x|^2`` equals ``x.T @ sigma_inv @ x``.
    chol_lower : ndarray, shape (d, d)
        Cholesky factor ``C`` with ``C @ C.T = sigma``; used for sampling.
    log_det : float
        ``log det(sigma)``.
    """

    dimension: int
    sigma: np.ndarray
    sigma_inv: np.ndarray
    whitener: np.ndarray
    chol_lower: np.ndarray
    log_det: float

    def quad_inv(self, x: np.ndarray) -> float:
        """Quadratic form ``x.T @ sigma_inv @ x``."""
        x = np.asarray(x, dtype=float)
        u = self.whitener @ x
        return float(u @ u)


def build_covariance(sigma) -> CovarianceModel:
    """Validate a covariance matrix and precompute its factorizations.

    Raises
    ------
    NotSymmetric
        If ``|sigma - sigma.T|`` exceeds ``1e-12 * max|sigma|`` anywhere.
    NotPositiveDefinite
        If the Cholesky factorization fails or any pivot is <= 1e-12.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {s.shape}")
    scale = np.abs(s).max()
    if scale == 0.0:
        raise NotPositiveDefinite("covariance is identically zero")
    if np.abs(s - s.T).max() > SYMMETRY_RTOL * scale:
        raise NotSymmetric("covariance is not symmetric within tolerance")
    s = 0.5 * (s + s.T)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {exc}") from None
    pivots = np.diag(chol) ** 2
    if np.any(pivots <= PIVOT_FLOOR):
        raise NotPositiveDefinite(
            f"covariance has a Cholesky pivot <= {PIVOT_FLOOR:g} (min {pivots.min():.3e})"
        )
    d = s.shape[0]
    whitener = solve_triangular(chol, np.eye(d), lower=True)
    sigma_inv = whitener.T @ whitener
    sigma_inv = 0.5 * (sigma_inv + sigma_inv.T)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return CovarianceModel(
        dimension=d,
        sigma=_readonly(s),
        sigma_inv=_readonly(sigma_inv),
        whitener=_readonly(whitener),
        chol_lower=_readonly(chol),
        log_det=log_det,
    )


@dataclass(frozen=True)
class GaussianModel:
    """Multivariate Gaussian given by mean vector and covariance."""

    mean: np.ndarray
    covariance: CovarianceModel

    def __post_init__(self):
        mean = _readonly(np.atleast_1d(self.mean))
        if mean.ndim != 1:
            raise DimensionMismatch("mean must be a vector")
        if mean.shape[0] != self.covariance.dimension:
            raise DimensionMismatch(
                f"mean has dimension {mean.shape[0]}, covariance {self.covariance.dimension}"
            )
        object.__setattr__(self, "mean", mean)

    @property
    def dimension(self) -> int:
        return self.covariance.dimension


@dataclass(frozen=True)
class GaussianMixture:
    """Finite Gaussian mixture with weights summing to one.

    Components share an ambient dimension; weights must be nonnegative
    and sum to 1 within 1e-12.
    """

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = _readonly(np.atleast_1d(self.weights))
        comps = tuple(self.components)
        if len(comps) == 0:
            raise ValueError("mixture needs at least one component")
        if w.shape != (len(comps),):
            raise DimensionMismatch("one weight per component required")
        if np.any(w < 0.0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {w.sum()!r}, expected 1")
        d = comps[0].dimension
        for c in comps:
            if c.dimension != d:
                raise DimensionMismatch("mixture components disagree on dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension


def sample_gaussian(model: GaussianModel, count: int, stream: RandomStream) -> np.ndarray:
    """Draw ``count`` vectors from the model, shape ``(count, d)``.

    The draw is ``mean + C z`` with ``C`` the Cholesky factor of the
    covariance and ``z`` standard normal, so the whitened residual
    ``L (x - mean)`` is standard normal again.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = stream.generator()
    z = rng.standard_normal((count, model.dimension))
    return model.mean + z @ model.covariance.chol_lower.T


def sample_mixture(mixture: GaussianMixture, count: int, stream: RandomStream) -> np.ndarray:
    """Draw ``count`` vectors from the mixture, shape ``(count, d)``.

    Component selection uses inverse-CDF lookup on a dedicated
    substream, and the Gaussian noise comes from a second substream.
    The selection draws therefore stay aligned with sample indices even
    when weights change, keeping runs comparable across configurations.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    u = stream.substream(0).generator().random(count)
    edges = np.cumsum(mixture.weights)
    edges[-1] = 1.0
    picks = np.searchsorted(edges, u, side="right")
    picks = np.minimum(picks, len(mixture.components) - 1)
    z = stream.substream(1).generator().standard_normal((count, mixture.dimension))
    out = np.empty_like(z)
    for j, comp in enumerate(mixture.components):
        mask = picks == j
        if np.any(mask):
            out[mask] = comp.mean + z[mask] @ comp.covariance.chol_lower.T
    return out


def gaussian_log_density(model: GaussianModel, x) -> float | np.ndarray:
    """Log density of the model at ``x`` (a vector or an ``(m, d)`` batch)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != model.dimension:
        raise DimensionMismatch(
            f"points have dimension {pts.shape[1]}, model {model.dimension}"
        )
    diff = pts - model.mean
    u = diff @ model.covariance.whitener.T
    quad = np.einsum("ij,ij->i", u, u)
    d = model.dimension
    out = -0.5 * d * math.log(2.0 * math.pi) - 0.5 * model.covariance.log_det - 0.5 * quad
    return float(out[0]) if single else out


def mills_bounds(t: float) -> tuple[float, float]:
    """Two-sided bounds on the standard normal upper tail at ``t > 0``.

    Returns ``(lower, upper)`` with
    ``phi(t) (1/t - 1/t**3) <= P(Z > t) <= phi(t) / t``.
    The lower bound is vacuous (negative) for t < 1 but still valid.
    """
    if t <= 0.0:
        raise ValueError(f"mills_bounds requires t > 0, got {t}")
    phi = math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    lower = phi * (1.0 / t - 1.0 / t**3)
    upper = phi / t
    return lower, upper
