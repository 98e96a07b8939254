"""Probability estimators for the scaled maximum events.

Two crude Monte Carlo estimators target the two event definitions (the
componentwise maximum landing in the scaled set; at least one of the n
vectors landing in it), a mean-shift importance sampler targets the
single-vector probability, and closed-form references cover diagonal
covariances with block sets.  A small regression helper turns a ladder
of log probabilities into an empirical decay rate.

Determinism contract: every estimator consumes a RandomStream and draws
in fixed-size chunks, chunk ``i`` from ``stream.substream(i)``.  Results
are therefore a pure function of (arguments, stream) regardless of how
callers schedule the work, and partial sums are combined with
``math.fsum`` so accumulation order cannot leak in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .dominate import LadderEntry
from .model import GaussianMixture, GaussianModel, RandomStream, sample_gaussian, sample_mixture
from .sets import ConvexSet

__all__ = [
    "Method",
    "EstimateReport",
    "SlopeFit",
    "mc_componentwise",
    "mc_at_least_one",
    "is_single",
    "union_combine",
    "union_combined_report",
    "exact_block_diagonal",
    "exact_block_diagonal_log",
    "exact_block_reports",
    "slope_fit",
    "conspiracy_rate",
]

# Upper bound on scalars drawn per chunk; chunk boundaries depend only on
# the problem shape, never on timing, so runs replay exactly.
CHUNK_SCALARS = 4_000_000


class Method(str, enum.Enum):
    CRUDE_COMPONENTWISE = "crude_componentwise"
    CRUDE_AT_LEAST_ONE = "crude_at_least_one"
    IMPORTANCE_SAMPLED_SINGLE = "importance_sampled_single"
    UNION_COMBINED = "union_combined"
    EXACT_BLOCK_DIAGONAL = "exact_block_diagonal"


@dataclass(frozen=True)
class EstimateReport:
    """One estimated (or exact) probability with its provenance."""

    p_hat: float
    std_error: float
    log_p_hat: float
    trials: int
    method: Method
    seed: int
    n: int
    scaling_norm_sq: float
    degenerate_weights: bool = False


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of log probability against the speed variable."""

    points: tuple
    slope: float
    intercept: float
    r_squared: float
    predicted_rate: float
    relative_gap: float


def _resolve_entry(entry) -> tuple[int, np.ndarray, float]:
    """Accept a LadderEntry or a raw ``(n, A_n)`` pair."""
    if isinstance(entry, LadderEntry):
        return entry.n, np.asarray(entry.scale_diag, dtype=float), entry.speed
    n, matrix = entry
    n = int(n)
    if n < 1:
        raise ValueError(f"block size must be >= 1, got {n}")
    diag = np.asarray(matrix, dtype=float)
    if diag.ndim == 2:
        off = diag - np.diag(np.diag(diag))
        if np.abs(off).max(initial=0.0) != 0.0:
            raise ValueError("scaling matrix must be diagonal")
        diag = np.diag(diag)
    if np.any(diag <= 0.0):
        raise ValueError("scaling diagonal entries must be positive")
    return n, diag, float(diag.max()) ** 2


def _draw(model, count: int, stream: RandomStream) -> np.ndarray:
    if isinstance(model, GaussianMixture):
        return sample_mixture(model, count, stream)
    return sample_gaussian(model, count, stream)


def _model_dimension(model) -> int:
    return model.dimension


def _finish(p: float, trials: int) -> tuple[float, float]:
    se = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    log_p = math.log(p) if p > 0.0 else -math.inf
    return se, log_p


def mc_componentwise(model, target: ConvexSet, entry, trials: int, stream: RandomStream) -> EstimateReport:
    """Crude Monte Carlo for the componentwise maximum landing in the scaled set.

    Each trial draws ``n`` vectors, forms their componentwise maximum,
    and tests membership in ``scale(target, A_n)``.
    """
    n, diag, speed = _resolve_entry(entry)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    d = _model_dimension(model)
    scaled = target.scale(diag)
    chunk = max(1, CHUNK_SCALARS // (n * d))
    hits = 0
    done = 0
    index = 0
    while done < trials:
        take = min(chunk, trials - done)
        x = _draw(model, take * n, stream.substream(index)).reshape(take, n, d)
        hits += int(scaled.contains_many(x.max(axis=1)).sum())
        done += take
        index += 1
    p = hits / trials
    se, log_p = _finish(p, trials)
    return EstimateReport(p, se, log_p, trials, Method.CRUDE_COMPONENTWISE, stream.seed, n, speed)


def mc_at_least_one(model, target: ConvexSet, entry, trials: int, stream: RandomStream) -> EstimateReport:
    """Crude Monte Carlo for at least one of the n vectors landing in the scaled set."""
    n, diag, speed = _resolve_entry(entry)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    d = _model_dimension(model)
    scaled = target.scale(diag)
    chunk = max(1, CHUNK_SCALARS // (n * d))
    hits = 0
    done = 0
    index = 0
    while done < trials:
        take = min(chunk, trials - done)
        x = _draw(model, take * n, stream.substream(index))
        member = scaled.contains_many(x).reshape(take, n)
        hits += int(member.any(axis=1).sum())
        done += take
        index += 1
    p = hits / trials
    se, log_p = _finish(p, trials)
    return EstimateReport(p, se, log_p, trials, Method.CRUDE_AT_LEAST_ONE, stream.seed, n, speed)


def is_single(
    model: GaussianModel,
    target: ConvexSet,
    shift,
    samples: int,
    stream: RandomStream,
    *,
    n: int = 1,
    scaling_norm_sq: float = math.nan,
) -> EstimateReport:
    """Mean-shift importance sampling of the single-vector probability.

    Samples ``x' ~ Gaussian(mean + shift, sigma)`` and averages the
    likelihood ratio ``exp(-<shift, sigma_inv (x' - shift/2 - mean)>)``
    over hits.  A zero shift reproduces crude Monte Carlo exactly.  If
    no sample lands in the target the report carries ``p_hat = 0`` with
    ``degenerate_weights`` set instead of raising.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if not isinstance(model, GaussianModel):
        raise TypeError("importance sampling requires a single Gaussian model")
    d = model.dimension
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (d,):
        raise ValueError(f"shift must have shape ({d},)")
    theta = model.covariance.sigma_inv @ shift
    shifted_mean = model.mean + shift
    chol = model.covariance.chol_lower
    chunk = max(1, CHUNK_SCALARS // d)
    sums: list[float] = []
    sq_sums: list[float] = []
    hit_count = 0
    done = 0
    index = 0
    while done < samples:
        take = min(chunk, samples - done)
        z = stream.substream(index).generator().standard_normal((take, d))
        x = shifted_mean + z @ chol.T
        hit = target.contains_many(x)
        if hit.any():
            xs = x[hit]
            w = np.exp(-(xs - model.mean - 0.5 * shift) @ theta)
            sums.append(float(w.sum()))
            sq_sums.append(float((w * w).sum()))
            hit_count += int(hit.sum())
        done += take
        index += 1
    if hit_count == 0:
        return EstimateReport(
            0.0, 0.0, -math.inf, samples, Method.IMPORTANCE_SAMPLED_SINGLE,
            stream.seed, n, scaling_norm_sq, degenerate_weights=True,
        )
    total = math.fsum(sums)
    total_sq = math.fsum(sq_sums)
    p = total / samples
    variance = max(total_sq / samples - p * p, 0.0)
    se = math.sqrt(variance / samples)
    log_p = math.log(p) if p > 0.0 else -math.inf
    return EstimateReport(
        p, se, log_p, samples, Method.IMPORTANCE_SAMPLED_SINGLE,
        stream.seed, n, scaling_norm_sq,
    )


def union_combine(q: float, n: int) -> float:
    """Exact identity ``1 - (1 - q)**n`` on stable log1p/expm1 paths."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if q == 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-q))


def _log_union_combine(log_q: float, n: int) -> float:
    """log of ``1 - (1 - q)**n`` from ``log q``, robust below double range."""
    if log_q == -math.inf:
        return -math.inf
    if log_q >= 0.0:
        return 0.0
    if log_q >= -700.0:
        u = n * math.log1p(-math.exp(log_q))
        tail = -math.expm1(u)
        if tail >= 1.0:
            return 0.0
        return math.log(tail)
    # q below double underflow: p = n q to relative accuracy ~ n q.
    return math.log(n) + log_q


def union_combined_report(single: EstimateReport, n: int, scaling_norm_sq: float) -> EstimateReport:
    """Lift a single-vector estimate to the at-least-one event over n draws.

    The standard error propagates through the derivative
    ``n (1 - q)**(n - 1)`` of the combining identity.
    """
    q = single.p_hat
    p = union_combine(q, n)
    derivative = n * math.exp((n - 1) * math.log1p(-q)) if q < 1.0 else 0.0
    se = derivative * single.std_error
    log_p = _log_union_combine(single.log_p_hat, n)
    return EstimateReport(
        p, se, log_p, single.trials, Method.UNION_COMBINED,
        single.seed, n, scaling_norm_sq, degenerate_weights=single.degenerate_weights,
    )


def exact_block_diagonal_log(sigma_diag, corner, a_n: float, n: int) -> tuple[float, float]:
    """Log of both exact block probabilities for a diagonal covariance.

    All tail evaluations and products stay in log space, so results are
    meaningful even when the probabilities underflow double precision.
    """
    sd = np.atleast_1d(np.asarray(sigma_diag, dtype=float))
    cr = np.atleast_1d(np.asarray(corner, dtype=float))
    if sd.shape != cr.shape:
        raise ValueError("sigma_diag and corner must have matching shapes")
    if np.any(sd <= 0.0):
        raise ValueError("diagonal variances must be positive")
    if np.any(cr <= 0.0):
        raise ValueError("block corner must be positive for the exact formulas")
    if a_n <= 0.0:
        raise ValueError(f"scaling a_n must be positive, got {a_n}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    t = a_n * cr / np.sqrt(sd)
    log_q = log_ndtr(-t)
    log_cw = math.fsum(_log_union_combine(float(lq), n) for lq in log_q)
    log_alo = _log_union_combine(math.fsum(float(lq) for lq in log_q), n)
    return log_cw, log_alo


def exact_block_diagonal(sigma_diag, corner, a_n: float, n: int) -> tuple[float, float]:
    """Exact probabilities of both events for diagonal covariance and a block set.

    Returns ``(p_componentwise, p_at_least_one)`` where the first is
    ``prod_i (1 - (1 - q_i)**n)`` and the second ``1 - (1 - prod_i q_i)**n``
    with ``q_i`` the scaled per-coordinate upper tails.
    """
    log_cw, log_alo = exact_block_diagonal_log(sigma_diag, corner, a_n, n)
    return math.exp(log_cw), math.exp(log_alo)


def exact_block_reports(sigma_diag, corner, entry, seed: int) -> tuple[EstimateReport, EstimateReport]:
    """Exact ladder rows: componentwise product and combined at-least-one.

    Both carry zero standard error and zero trials; ``log_p_hat`` comes
    from the log-space path so it stays finite when ``p_hat`` underflows.
    """
    n, diag, speed = _resolve_entry(entry)
    scaled_corner = diag * np.atleast_1d(np.asarray(corner, dtype=float))
    log_cw, log_alo = exact_block_diagonal_log(sigma_diag, scaled_corner, 1.0, n)
    cw = EstimateReport(
        math.exp(log_cw), 0.0, log_cw, 0, Method.EXACT_BLOCK_DIAGONAL, seed, n, speed
    )
    alo = EstimateReport(
        math.exp(log_alo), 0.0, log_alo, 0, Method.UNION_COMBINED, seed, n, speed
    )
    return cw, alo


def slope_fit(points, predicted_rate: float) -> SlopeFit:
    """Least-squares slope of log probability against speed.

    ``points`` is an iterable of ``(speed, log_p)`` pairs; at least three
    distinct speeds with finite log probabilities are required.
    """
    pts = tuple((float(s), float(v)) for s, v in points)
    speeds = np.array([s for s, _ in pts])
    values = np.array([v for _, v in pts])
    if len(pts) < 3 or len(set(speeds.tolist())) < 3:
        raise ValueError("insufficient points: need >= 3 distinct speeds")
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(speeds)):
        raise ValueError("slope fit requires finite speeds and log probabilities")
    slope, intercept = np.polyfit(speeds, values, 1)
    fitted = slope * speeds + intercept
    ss_res = float(((values - fitted) ** 2).sum())
    ss_tot = float(((values - values.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    if predicted_rate != 0.0:
        relative_gap = abs(slope - predicted_rate) / abs(predicted_rate)
    else:
        relative_gap = math.nan
    return SlopeFit(
        points=pts,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        predicted_rate=float(predicted_rate),
        relative_gap=relative_gap,
    )


def conspiracy_rate(
    model, target: ConvexSet, entry, trials: int, stream: RandomStream, exact_union: float | None = None
) -> tuple[float, float]:
    """Estimate how often the maximum lands in the set with no single vector inside.

    Returns ``(p_conspiracy, ratio_to_union)`` where the ratio divides by
    the exact at-least-one probability when provided and by the in-run
    estimate otherwise.  In dimension one the event is impossible.
    """
    n, diag, speed = _resolve_entry(entry)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    d = _model_dimension(model)
    scaled = target.scale(diag)
    chunk = max(1, CHUNK_SCALARS // (n * d))
    conspiracies = 0
    union_hits = 0
    done = 0
    index = 0
    while done < trials:
        take = min(chunk, trials - done)
        x = _draw(model, take * n, stream.substream(index)).reshape(take, n, d)
        member = scaled.contains_many(x.reshape(take * n, d)).reshape(take, n)
        any_in = member.any(axis=1)
        top_in = scaled.contains_many(x.max(axis=1))
        conspiracies += int((top_in & ~any_in).sum())
        union_hits += int(any_in.sum())
        done += take
        index += 1
    p_conspiracy = conspiracies / trials
    denom = exact_union if exact_union is not None else union_hits / trials
    if p_conspiracy == 0.0:
        ratio = 0.0
    elif denom == 0.0:
        ratio = math.inf
    else:
        ratio = p_conspiracy / denom
    return p_conspiracy, ratio
