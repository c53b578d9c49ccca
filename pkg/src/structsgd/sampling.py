"""Weighted with-replacement index sampling and the batched gradient estimator.

Randomness contract
-------------------
All randomness flows through :class:`RngStream`, a thin wrapper over
numpy's counter-based Philox-4x64-10 bit generator.  The 128-bit Philox
key is ``seed | stream_id << 64``, so distinct (seed, stream_id) pairs
index non-overlapping streams by construction and the same pair always
replays the same sequence.  Normal variates drawn from these streams use
numpy's ziggurat implementation (``Generator.standard_normal``).

Index draws use Walker's alias method with tables built by Vose's
algorithm: O(n) setup, O(1) per draw.  One draw consumes one bounded
integer and one uniform double from the stream, in that order; batch
draws consume ``integers(size)`` then ``random(size)``.  Long index
plans are drawn in fixed blocks of ``PLAN_BLOCK`` draws so that the
stream mapping is independent of how callers chunk their requests.
"""

from dataclasses import dataclass, field

import numpy as np

from . import problem as _problem
from .errors import InvalidDistributionError, InvalidInputError

_MASK64 = (1 << 64) - 1

# Block length for pre-drawn index plans.  Part of the determinism
# contract: changing it reshuffles which raw Philox outputs feed which
# iteration, so it is fixed here and nowhere else.
PLAN_BLOCK = 1 << 16


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    The generator is created lazily and owned by this object; callers that
    need a replay construct a fresh stream with the same key.
    """

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._gen = None

    @property
    def key(self):
        return (self.seed & _MASK64) | ((self.stream_id & _MASK64) << 64)

    @property
    def generator(self):
        if self._gen is None:
            self._gen = np.random.Generator(np.random.Philox(key=self.key))
        return self._gen

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _validated_probs(probs):
    p = np.ascontiguousarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistributionError("probabilities must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)):
        raise InvalidDistributionError("probabilities contain non-finite entries")
    if np.any(p <= 0.0):
        raise InvalidDistributionError("every sampling probability must be > 0")
    total = float(np.sum(p))
    if abs(total - 1.0) > 1e-12:
        raise InvalidDistributionError(
            f"probabilities sum to {total!r}; more than 1e-12 away from 1"
        )
    return p / total


@dataclass
class SamplingScheme:
    """Index distribution p (positive, summing to 1) and batch size B.

    Inputs whose sum is within 1e-12 of 1 are renormalized exactly once at
    construction.  ``weights`` caches the importance factors 1/(n p_i)
    used by the unbiased gradient estimator.
    """

    probs: np.ndarray
    batch_size: int = 1
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.probs = _validated_probs(self.probs)
        self.batch_size = int(self.batch_size)
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        self.weights = 1.0 / (self.probs.size * self.probs)

    @property
    def n(self):
        return self.probs.size

    def is_uniform(self, rtol=1e-9):
        target = 1.0 / self.n
        return bool(np.all(np.abs(self.probs - target) <= rtol * target))


def uniform_scheme(n, batch_size=1):
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return SamplingScheme(np.full(n, 1.0 / n), batch_size)


def scheme_proportional_to(values, batch_size=1):
    """Scheme with p_i proportional to the given nonnegative values.

    Zero entries are rejected: a sample that can never be drawn breaks the
    unbiasedness of the weighted estimator.
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidDistributionError("values must be a non-empty 1-d array")
    if not np.all(np.isfinite(v)) or np.any(v < 0.0):
        raise InvalidDistributionError("values must be finite and >= 0")
    if np.any(v == 0.0):
        raise InvalidDistributionError(
            "cannot weight sampling by values with zero entries; "
            "degenerate samples would never be drawn"
        )
    return SamplingScheme(v / float(np.sum(v)), batch_size)


class AliasSampler:
    """Walker alias tables for O(1) draws from a finite distribution."""

    def __init__(self, probs):
        p = _validated_probs(probs)
        n = p.size
        prob = np.ones(n)
        alias = np.arange(n)
        scaled = (p * n).tolist()
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        # Vose's construction: pair each under-full cell with an over-full
        # donor; leftovers keep probability 1 (pure rounding residue).
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        for i in large:
            prob[i] = 1.0
        for i in small:
            prob[i] = 1.0
        self.n = n
        self.probs = p
        self._prob = prob
        self._alias = alias

    def draw(self, rng, size):
        """Draw ``size`` indices; consumes integers(size) then random(size)."""
        gen = rng.generator
        j = gen.integers(0, self.n, size=size)
        u = gen.random(size)
        return np.where(u < self._prob[j], j, self._alias[j])


def build_sampler(probs):
    """Alias sampler for a validated probability vector."""
    return AliasSampler(probs)


def draw_batch(sampler, rng, batch_size):
    """One batch of i.i.d. indices, drawn with replacement."""
    if batch_size < 1:
        raise InvalidInputError("batch_size must be >= 1")
    return sampler.draw(rng, batch_size)


def draw_index_plan(sampler, rng, count):
    """``count`` indices drawn in fixed PLAN_BLOCK-sized blocks.

    The block schedule makes the plan independent of downstream chunking:
    a run that needs K*B indices always consumes the stream the same way.
    """
    if count < 0:
        raise InvalidInputError("count must be >= 0")
    parts = []
    remaining = count
    while remaining > 0:
        m = min(PLAN_BLOCK, remaining)
        parts.append(sampler.draw(rng, m))
        remaining -= m
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)


def batch_gradient(family, features, labels, weights, x, idx):
    """(1/B) sum_j weights[idx_j] * grad f_{idx_j}(x); data term only.

    Duplicate indices are grouped, so each distinct row costs one margin
    and the estimator for a single-sample problem reproduces grad f_0
    bit for bit at any batch size (count/B is exactly 1.0 there).
    No validation: hot path, callers vet idx once.
    """
    B = idx.shape[0]
    if B == 1:
        j = idx[0]
        rows = features[j : j + 1]
        c = _problem.grad_scalars(family, rows @ x, labels[j : j + 1])
        return (weights[j] * c[0]) * rows[0]
    uniq, counts = np.unique(idx, return_counts=True)
    rows = features[uniq]
    c = _problem.grad_scalars(family, rows @ x, labels[uniq])
    coefs = (counts / B) * weights[uniq] * c
    return coefs @ rows


def minibatch_gradient(p, x, batch, scheme):
    """Unbiased estimator of grad F(x) from one batch of indices.

    g = (1/B) sum_j (1 / (n p_{i_j})) grad f_{i_j}(x).  The regularizer
    gradient is exact and added by the optimizer, not here.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.d,):
        raise InvalidInputError(f"point has shape {x.shape}, expected ({p.d},)")
    idx = np.asarray(batch)
    if idx.ndim != 1 or idx.size == 0:
        raise InvalidInputError("batch must be a non-empty 1-d index array")
    if not np.issubdtype(idx.dtype, np.integer):
        raise InvalidInputError("batch indices must be integers")
    if scheme.n != p.n:
        raise InvalidInputError(
            f"scheme covers {scheme.n} samples but problem has {p.n}"
        )
    if np.any(idx < 0) or np.any(idx >= p.n):
        raise IndexError("batch contains indices outside [0, n)")
    return batch_gradient(
        p.family, p.data.features, p.data.labels, scheme.weights, x, idx
    )
