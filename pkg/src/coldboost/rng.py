"""Counter-based deterministic random streams.

Event-level randomness (clicks, pays, arrivals, ranking noise) is derived by
hashing ``(seed, stream, keys...)`` with a splitmix64-style mixer instead of
drawing from a stateful generator. Two runs that evaluate the same
(user, item, slot) event therefore consume identical draws even if the
surrounding policy differs — common random numbers across ablation arms —
and reruns are bitwise reproducible by construction.

Bulk world generation (latent vectors, qualities, ...) still uses
``numpy.random.default_rng`` seeded once; only per-event draws go through
the hash.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Stream tags keep draws for different purposes independent.
STREAM_CLICK = 1
STREAM_PAY = 2
STREAM_GMV = 3
STREAM_ARRIVAL = 4
STREAM_RANK_NOISE = 5
STREAM_PROBE_LABEL = 6
STREAM_PROBE_USERS = 7
STREAM_HOLDOUT = 8
STREAM_SAMPLE_USERS = 9

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_INV53 = float(2.0**-53)


def _mix(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    z = (z ^ (z >> _U30)) * _M1
    z = (z ^ (z >> _U27)) * _M2
    return z ^ (z >> _U31)


def hash_u64(seed: int, stream: int, *keys: int | np.ndarray) -> np.ndarray | np.uint64:
    """Mix seed, stream tag and integer keys into 64 uniform bits.

    Any key may be an integer array; arrays broadcast against each other.
    """
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed) ^ (np.uint64(stream) * _GOLDEN))
        for k in keys:
            k64 = np.asarray(k).astype(np.uint64) if isinstance(k, np.ndarray) else np.uint64(int(k) & 0xFFFFFFFFFFFFFFFF)
            h = _mix((h + _GOLDEN) ^ (k64 * _M1))
    return h


def uniform(seed: int, stream: int, *keys: int | np.ndarray) -> np.ndarray | float:
    """Deterministic uniform draw(s) in [0, 1)."""
    h = hash_u64(seed, stream, *keys)
    u = (h >> _U11).astype(np.float64) * _INV53 if isinstance(h, np.ndarray) else float(h >> _U11) * _INV53
    return u


def normal(seed: int, stream: int, *keys: int | np.ndarray) -> np.ndarray | float:
    """Deterministic standard-normal draw(s) via the inverse CDF."""
    u = uniform(seed, stream, *keys)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    out = ndtri(u)
    return float(out) if np.ndim(out) == 0 else out


def bernoulli(p: np.ndarray | float, seed: int, stream: int, *keys: int | np.ndarray) -> np.ndarray | bool:
    """Deterministic Bernoulli draw(s) with probability ``p``."""
    u = uniform(seed, stream, *keys)
    out = u < np.asarray(p)
    return bool(out) if np.ndim(out) == 0 else out


def poisson(rate: np.ndarray, seed: int, stream: int, *keys: int | np.ndarray) -> np.ndarray:
    """Deterministic Poisson draws by inverse-CDF search (small rates)."""
    rate = np.asarray(rate, dtype=np.float64)
    u = np.asarray(uniform(seed, stream, *keys), dtype=np.float64)
    u = np.broadcast_to(u, rate.shape).copy()
    pmf = np.exp(-rate)
    cdf = pmf.copy()
    counts = np.zeros(rate.shape, dtype=np.int64)
    pending = u >= cdf
    k = 0
    while pending.any():
        k += 1
        pmf = pmf * rate / k
        cdf = cdf + pmf
        counts[pending] = k
        pending = u >= cdf
        if k > 1000:  # rates here are O(1); this only trips on misuse
            break
    return counts
