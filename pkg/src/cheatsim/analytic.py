"""Closed-form certainty levels for probabilistic cheaters.

A process that gives a wrong answer with probability ``eps`` on every step
escapes detection for ``d`` steps with probability ``(1 - eps) ** d``; the
certainty that an observer knows it is a cheater is the complement.  The
who-knows-whom matrix stacks these certainties column by column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a certainty formula."""


class Extension(enum.Enum):
    """How a varying schedule is extended past its last entry."""

    CYCLE = "cycle"
    HOLD_LAST = "hold-last"


def check_probability(eps: float, what: str = "eps") -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:  # also rejects NaN
        raise DomainError(f"{what}={eps!r} outside [0, 1]")
    return eps


def _check_steps(d: int) -> int:
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise DomainError(f"step count d={d!r} must be a positive integer")
    return int(d)


@dataclass(frozen=True)
class CheatSchedule:
    """Per-step cheating probability of one process.

    A constant schedule has ``varying=False`` and a single value.  A varying
    schedule lists the probabilities for steps ``1..len(values)`` and is
    extended beyond that according to ``extension``.
    """

    values: tuple[float, ...]
    varying: bool = False
    extension: Extension = Extension.CYCLE

    def __post_init__(self) -> None:
        if not self.values:
            raise DomainError("varying schedule needs at least one probability")
        if not self.varying and len(self.values) != 1:
            raise DomainError("constant schedule holds exactly one probability")
        vals = tuple(
            check_probability(v, f"probability[{i + 1}]") for i, v in enumerate(self.values)
        )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "extension", Extension(self.extension))

    @classmethod
    def constant(cls, eps: float) -> "CheatSchedule":
        return cls((eps,))

    @classmethod
    def sequence(
        cls, values: Sequence[float], extension: Extension | str = Extension.CYCLE
    ) -> "CheatSchedule":
        return cls(tuple(values), varying=True, extension=Extension(extension))

    @property
    def is_honest(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def probability_at(self, step: int) -> float:
        """Cheating probability on step ``step`` (1-based)."""
        if step < 1:
            raise DomainError(f"step={step!r} must be >= 1")
        if not self.varying:
            return self.values[0]
        idx = step - 1
        if idx < len(self.values):
            return self.values[idx]
        if self.extension is Extension.CYCLE:
            return self.values[idx % len(self.values)]
        return self.values[-1]

    def probabilities(self, steps: int) -> np.ndarray:
        """Probabilities for steps ``1..steps`` as a float array."""
        return np.array([self.probability_at(s) for s in range(1, steps + 1)], dtype=float)

    def mean_probability(self) -> float:
        return sum(self.values) / len(self.values)


def _as_schedule(s: CheatSchedule | float) -> CheatSchedule:
    if isinstance(s, CheatSchedule):
        return s
    return CheatSchedule.constant(s)


def certainty_constant(eps: float, d: int) -> float:
    """Certainty ``1 - (1 - eps)**d`` that a constant cheater is known after ``d`` steps."""
    eps = check_probability(eps)
    d = _check_steps(d)
    return 1.0 - (1.0 - eps) ** d


def survival_varying(schedule: CheatSchedule, d: int) -> float:
    """Probability that the process never cheated during steps ``1..d``."""
    d = _check_steps(d)
    return math.prod(1.0 - schedule.probability_at(step) for step in range(1, d + 1))


def certainty_varying(schedule: CheatSchedule | float, d: int) -> float:
    """Certainty ``1 - prod_l (1 - eps_l)`` for a possibly time-varying schedule."""
    schedule = _as_schedule(schedule)
    if not schedule.varying:
        return certainty_constant(schedule.values[0], d)
    return 1.0 - survival_varying(schedule, d)


@dataclass(frozen=True)
class KnowledgeMatrix:
    """Who-knows-whom matrix after ``d`` steps; row = observer, column = target."""

    d: int
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def column(self, target: int) -> np.ndarray:
        return self.entries[:, target - 1]

    def __getitem__(self, key: tuple[int, int]) -> float:
        i, j = key
        return float(self.entries[i - 1, j - 1])


def indicator(n: int, i: int) -> np.ndarray:
    """``n x n`` matrix whose ``i``-th column (1-based) is all ones."""
    if n < 1:
        raise DomainError(f"n={n!r} must be >= 1")
    if not 1 <= i <= n:
        raise DomainError(f"column index {i!r} outside [1, {n}]")
    out = np.zeros((n, n))
    out[:, i - 1] = 1.0
    return out


def column_certainties(schedules: Sequence[CheatSchedule | float], d: int) -> np.ndarray:
    return np.array([certainty_varying(s, d) for s in schedules], dtype=float)


def knowledge_matrix(schedules: Sequence[CheatSchedule | float], d: int) -> KnowledgeMatrix:
    """Analytic who-knows-whom matrix; every row is the vector of column certainties."""
    if len(schedules) == 0:
        raise DomainError("knowledge_matrix needs at least one schedule")
    cols = column_certainties(schedules, d)
    n = len(cols)
    entries = np.broadcast_to(cols, (n, n)).copy()
    entries.setflags(write=False)
    return KnowledgeMatrix(d=int(d), entries=entries)


def knowledge_matrix_by_indicators(
    schedules: Sequence[CheatSchedule | float], d: int
) -> np.ndarray:
    """Same matrix assembled as ``sum_j certainty_j * indicator(n, j)``."""
    if len(schedules) == 0:
        raise DomainError("knowledge_matrix needs at least one schedule")
    n = len(schedules)
    total = np.zeros((n, n))
    for j, s in enumerate(schedules, start=1):
        total += certainty_varying(s, d) * indicator(n, j)
    return total


def detection_gap(eps_i: float, eps_j: float, d: int) -> float:
    """``k(m,i) - k(m,j)`` for two constant cheaters, i.e. ``(1-eps_j)**d - (1-eps_i)**d``."""
    eps_i = check_probability(eps_i, "eps_i")
    eps_j = check_probability(eps_j, "eps_j")
    d = _check_steps(d)
    return (1.0 - eps_j) ** d - (1.0 - eps_i) ** d


def detection_gap_factored(eps_i: float, eps_j: float, d: int) -> float:
    """The same gap through the factorisation of a difference of ``d``-th powers.

    ``x**d - y**d = (x - y) * sum_{t=0}^{d-1} y**t * x**(d-1-t)`` with
    ``x = 1 - eps_j`` and ``y = 1 - eps_i``.
    """
    eps_i = check_probability(eps_i, "eps_i")
    eps_j = check_probability(eps_j, "eps_j")
    d = _check_steps(d)
    x, y = 1.0 - eps_j, 1.0 - eps_i
    total = math.fsum(y**t * x ** (d - 1 - t) for t in range(d))
    return (eps_i - eps_j) * total


def detection_gap_varying(
    sched_i: CheatSchedule | float, sched_j: CheatSchedule | float, d: int
) -> float:
    """``prod_l (1 - eps_j^(l)) - prod_l (1 - eps_i^(l))``."""
    sched_i, sched_j = _as_schedule(sched_i), _as_schedule(sched_j)
    return survival_varying(sched_j, d) - survival_varying(sched_i, d)


def steps_to_certainty(eps: float, delta: float) -> int:
    """Smallest ``d`` guaranteed by ``ceil(ln delta / ln(1 - eps))`` to reach ``1 - delta``."""
    eps = check_probability(eps)
    if eps == 0.0:
        raise DomainError("an honest process is never detected")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta={delta!r} outside (0, 1)")
    if eps == 1.0:
        return 1
    return max(1, math.ceil(math.log(delta) / math.log(1.0 - eps)))
