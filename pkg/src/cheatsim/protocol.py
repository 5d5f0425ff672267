"""Synchronous cheater protocol.

Each day every process answers the same binary question.  If a supermajority
(strictly more than two thirds) agrees on an answer, everyone who gave the
other answer is exposed and the finding is gossiped to all processes the same
day.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .analytic import CheatSchedule
from .rng import DrawSource


@dataclass(frozen=True)
class ProcessProfile:
    id: int
    schedule: CheatSchedule

    @property
    def honest(self) -> bool:
        return self.schedule.is_honest


def make_profiles(schedules: Iterable[CheatSchedule | float]) -> list[ProcessProfile]:
    out = []
    for i, s in enumerate(schedules, start=1):
        if not isinstance(s, CheatSchedule):
            s = CheatSchedule.constant(s)
        out.append(ProcessProfile(i, s))
    return out


def check_profiles(profiles: Sequence[ProcessProfile]) -> None:
    if not profiles:
        raise ValueError("at least one process is required")
    ids = [p.id for p in profiles]
    if ids != list(range(1, len(profiles) + 1)):
        raise ValueError(f"process ids must be 1..n in order, got {ids}")


def warn_if_cheat_mass_high(profiles: Sequence[ProcessProfile]) -> bool:
    """Warn when the expected number of simultaneous cheaters reaches n/3."""
    n = len(profiles)
    mass = sum(p.schedule.mean_probability() for p in profiles)
    if 3 * mass >= n:
        warnings.warn(
            f"expected simultaneous cheat mass {mass:g} >= n/3 = {n / 3:g}; "
            "supermajority detection will break down on some steps",
            RuntimeWarning,
            stacklevel=2,
        )
        return True
    return False


@dataclass(frozen=True)
class AnswerVector:
    question_id: int
    answers: tuple[int, ...]
    correct_answer: int

    def __post_init__(self) -> None:
        if not self.answers:
            raise ValueError("answer vector is empty")
        if any(a not in (0, 1) for a in self.answers):
            raise ValueError(f"answers must be 0/1, got {self.answers}")

    @property
    def n(self) -> int:
        return len(self.answers)

    def wrong(self) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.answers, 1) if a != self.correct_answer)


@dataclass(frozen=True)
class CommonAnswer:
    """Outcome of the supermajority vote; ``value`` is None when none exists."""

    value: int | None

    @property
    def supermajority(self) -> bool:
        return self.value is not None


NO_SUPERMAJORITY = CommonAnswer(None)


def _answers(v: AnswerVector | Sequence[int]) -> tuple[int, ...]:
    if isinstance(v, AnswerVector):
        return v.answers
    if len(v) == 0:
        raise ValueError("answer vector is empty")
    return tuple(v)


def mean_answer(v: AnswerVector | Sequence[int]) -> float:
    a = _answers(v)
    return sum(a) / len(a)


def common_answer(v: AnswerVector | Sequence[int]) -> CommonAnswer:
    a = _answers(v)
    ones, n = sum(a), len(a)
    # integer form of mean > 2/3 and mean < 1/3
    if 3 * ones > 2 * n:
        return CommonAnswer(1)
    if 3 * ones < n:
        return CommonAnswer(0)
    return NO_SUPERMAJORITY


def detect_cheaters(v: AnswerVector | Sequence[int]) -> frozenset[int] | None:
    """Ids (1-based) that disagree with the supermajority, or None without one."""
    a = _answers(v)
    common = common_answer(a)
    if not common.supermajority:
        return None
    return frozenset(i for i, x in enumerate(a, 1) if x != common.value)


def cheats_this_step(
    profile: ProcessProfile, step: int, randomness: DrawSource, question: int | None = None
) -> bool:
    if step < 1:
        raise ValueError(f"step={step!r} must be >= 1")
    return randomness.cheat_uniform(profile.id, step, question) < profile.schedule.probability_at(
        step
    )


def draw_answers(
    profiles: Sequence[ProcessProfile], step: int, correct_answer: int, randomness: DrawSource
) -> AnswerVector:
    if not profiles:
        raise ValueError("profiles must be non-empty")
    wrong = 1 - correct_answer
    answers = tuple(
        wrong if cheats_this_step(p, step, randomness) else correct_answer for p in profiles
    )
    return AnswerVector(step, answers, correct_answer)


@dataclass(frozen=True)
class BeliefState:
    """Cheaters known to one observer, mapped to the step they were first detected."""

    observer_id: int
    known_cheaters: dict[int, int] = field(default_factory=dict)

    def knows(self, target: int, by_step: int | None = None) -> bool:
        first = self.known_cheaters.get(target)
        return first is not None and (by_step is None or first <= by_step)


def fresh_beliefs(n: int) -> list[BeliefState]:
    return [BeliefState(i) for i in range(1, n + 1)]


def gossip_update(
    beliefs: Sequence[BeliefState], detected: Iterable[int] | None, step: int
) -> list[BeliefState]:
    """Broadcast ``detected`` to every observer; first-detection steps never change."""
    detected = sorted(detected or ())
    out = []
    for b in beliefs:
        new = [j for j in detected if j not in b.known_cheaters]
        if new:
            known = dict(b.known_cheaters)
            known.update((j, step) for j in new)
            b = BeliefState(b.observer_id, known)
        out.append(b)
    return out


@dataclass(frozen=True)
class StepRecord:
    step: int
    day: int
    answers: AnswerVector
    common: CommonAnswer
    detected: frozenset[int] | None
    delivered: tuple[int, ...]

    @property
    def no_supermajority(self) -> bool:
        return not self.common.supermajority

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "day": self.day,
            "question": self.answers.question_id,
            "correct_answer": self.answers.correct_answer,
            "answers": list(self.answers.answers),
            "wrong_count": len(self.answers.wrong()),
            "mean": mean_answer(self.answers),
            "common_answer": self.common.value,
            "no_supermajority": self.no_supermajority,
            "detected": None if self.detected is None else sorted(self.detected),
            "gossip_delivered": list(self.delivered),
        }


@dataclass
class SimulationTrace:
    mode: str
    seed: int
    trial: int
    config: dict
    steps: list[StepRecord] = field(default_factory=list)
    beliefs: list[BeliefState] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def no_supermajority_count(self) -> int:
        return sum(r.no_supermajority for r in self.steps)

    @property
    def detection_count(self) -> int:
        return sum(len(r.detected) for r in self.steps if r.detected)

    def known_by(self, step: int) -> set[int]:
        """Targets any observer knew by ``step`` (beliefs are identical across observers)."""
        return {j for b in self.beliefs for j, s in b.known_cheaters.items() if s <= step}

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "trial": self.trial,
            "config": self.config,
            # a process observes its own deviation, so diagonal entries are populated
            "self_knowledge_included": True,
            "no_supermajority_count": self.no_supermajority_count,
            "detection_count": self.detection_count,
            **self.extra,
            "steps": [r.to_dict() for r in self.steps],
            "beliefs": [
                {
                    "observer": b.observer_id,
                    "known_cheaters": {str(j): s for j, s in sorted(b.known_cheaters.items())},
                }
                for b in self.beliefs
            ],
        }


def profile_summary(profiles: Sequence[ProcessProfile]) -> list[dict]:
    out = []
    for p in profiles:
        s = p.schedule
        entry = {"id": p.id}
        if s.varying:
            entry["sequence"] = list(s.values)
            entry["extension"] = s.extension.value
        else:
            entry["epsilon"] = s.values[0]
        out.append(entry)
    return out


def run_synchronous(
    profiles: Sequence[ProcessProfile],
    days: int,
    seed: int,
    trial: int = 0,
    fixed_answer: int | None = None,
) -> SimulationTrace:
    """Run ``days`` steps of answer, detect, gossip for one trial."""
    check_profiles(profiles)
    if days < 1:
        raise ValueError(f"days={days!r} must be >= 1")
    rng = DrawSource(seed, trial)
    n = len(profiles)
    beliefs = fresh_beliefs(n)
    trace = SimulationTrace(
        mode="sync",
        seed=seed,
        trial=trial,
        config={"n": n, "days": days, "fixed_answer": fixed_answer,
                "processes": profile_summary(profiles)},
    )
    for day in range(1, days + 1):
        correct = rng.correct_answer(day) if fixed_answer is None else fixed_answer
        vec = draw_answers(profiles, day, correct, rng)
        common = common_answer(vec)
        wrong = vec.wrong()
        if 3 * len(wrong) < n:
            assert common.value == correct, "minority of wrong answers must leave a supermajority"
        detected = detect_cheaters(vec)
        before = set(beliefs[0].known_cheaters)
        beliefs = gossip_update(beliefs, detected, day)
        delivered = tuple(sorted(set(beliefs[0].known_cheaters) - before))
        trace.steps.append(StepRecord(day, day, vec, common, detected, delivered))
    trace.beliefs = beliefs
    return trace
