"""Counter-based random draws.

Every uniform variate is a pure function of its key, hashed with the
SplitMix64 finaliser; a cheat draw is keyed by ``(seed, stream, trial,
process, step, question)``.  A single trial can be replayed in isolation, and
a batch of trials can be drawn as one numpy array with bit-identical results,
regardless of execution order.
"""

from __future__ import annotations

import enum

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TO_UNIT = 2.0**-53


class Stream(enum.IntEnum):
    CHEAT = 1
    ANSWER = 2
    GROUP = 3


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _u64(x) -> np.ndarray:
    if isinstance(x, int):
        return np.asarray(x & _MASK, dtype=np.uint64)
    return np.asarray(x).astype(np.uint64)


def extend(h: np.ndarray, *parts) -> np.ndarray:
    """Fold further key parts into a partial hash."""
    with np.errstate(over="ignore"):
        for part in parts:
            h = _mix(h ^ _u64(part))
    return h


def hash_key(seed, *parts) -> np.ndarray:
    """64-bit hash of ``(seed, *parts)``; parts broadcast like numpy arrays.

    ``extend(hash_key(seed, a), b)`` equals ``hash_key(seed, a, b)``.
    """
    with np.errstate(over="ignore"):
        h = _mix(_u64(seed))
    return extend(h, *parts)


def to_unit(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to floats in ``[0, 1)`` keeping the top 53 bits."""
    return (h >> _S11).astype(np.float64) * _TO_UNIT


def uniform(seed, *parts) -> np.ndarray:
    """Uniform variate(s) in ``[0, 1)`` keyed by ``(seed, *parts)``."""
    return to_unit(hash_key(seed, *parts))


class DrawSource:
    """Seeded source of protocol randomness for one trial.

    ``spawn`` derives the source of another trial from the same master seed;
    sources never share state, so trials may run in any order or in parallel.
    """

    def __init__(self, seed: int, trial: int = 0):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self.trial = int(trial)

    def __repr__(self) -> str:
        return f"DrawSource(seed={self.seed}, trial={self.trial})"

    def spawn(self, trial: int) -> "DrawSource":
        return DrawSource(self.seed, trial)

    def cheat_uniform(self, process: int, step: int, question: int | None = None) -> float:
        q = step if question is None else question
        return float(uniform(self.seed, Stream.CHEAT, self.trial, process, step, q))

    def correct_answer(self, step: int) -> int:
        return int(uniform(self.seed, Stream.ANSWER, self.trial, 0, step) < 0.5)

    def group_keys(self, day: int, n: int) -> np.ndarray:
        """One sort key per process id ``1..n``; the ``k`` smallest form a uniform sample."""
        ids = np.arange(1, n + 1)
        return uniform(self.seed, Stream.GROUP, self.trial, ids, day)
