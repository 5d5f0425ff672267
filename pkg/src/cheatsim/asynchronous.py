"""Asynchronous cheater protocol.

One question is issued per day, but only a group of ``k`` processes shows up.
Each member answers today's question and every older question it has not
answered yet.  A question whose answers are complete closes a *round*; only
then are the answers checked for a supermajority and detections gossiped.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .protocol import (
    AnswerVector,
    BeliefState,
    ProcessProfile,
    SimulationTrace,
    StepRecord,
    check_profiles,
    common_answer,
    detect_cheaters,
    fresh_beliefs,
    gossip_update,
    profile_summary,
)
from .rng import DrawSource


class ConfigError(ValueError):
    pass


class GroupPolicy(enum.Enum):
    ROUND_ROBIN = "round-robin"
    SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class GroupSchedule:
    k: int
    policy: GroupPolicy = GroupPolicy.ROUND_ROBIN

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy", GroupPolicy(self.policy))
        if self.k < 1:
            raise ConfigError(f"group size k={self.k} must be >= 1")

    def check(self, n: int) -> None:
        if self.k > n:
            raise ConfigError(f"k > n (k={self.k}, n={n})")


def select_group(day: int, n: int, sched: GroupSchedule, randomness: DrawSource) -> list[int]:
    """Ids of the ``k`` processes that show up on ``day``, in the order they write."""
    sched.check(n)
    k = sched.k
    if sched.policy is GroupPolicy.ROUND_ROBIN:
        return [((day - 1) * k + t) % n + 1 for t in range(k)]
    keys = randomness.group_keys(day, n)
    return sorted(int(i) + 1 for i in keys.argsort(kind="stable")[:k])


def round_robin_days_needed(n: int, k: int, rounds: int) -> int:
    """Days after which the first ``rounds`` questions are complete under round-robin."""
    return rounds + -(-n // k) - 1


@dataclass
class Question:
    id: int
    issue_day: int
    answers: dict[int, int] = field(default_factory=dict)
    completion_day: int | None = None
    correct_answer: int = 0


@dataclass
class QuestionLedger:
    n: int
    questions: list[Question] = field(default_factory=list)

    def issue(self, day: int, correct_answer: int) -> Question:
        q = Question(len(self.questions) + 1, day, correct_answer=correct_answer)
        self.questions.append(q)
        return q

    def open_questions(self) -> list[Question]:
        return [q for q in self.questions if q.completion_day is None]

    def backlog_depth(self) -> int:
        return len(self.open_questions())


def answer_backlog(
    process: ProcessProfile, ledger: QuestionLedger, day: int, randomness: DrawSource
) -> QuestionLedger:
    """``process`` answers every open question it has not answered; mutates and returns ``ledger``.

    The cheat probability is taken from the schedule at ``day``, the day of
    writing, not the question's issue day.
    """
    eps = process.schedule.probability_at(day)
    for q in ledger.open_questions():
        if process.id in q.answers:
            continue
        cheat = randomness.cheat_uniform(process.id, day, q.id) < eps
        q.answers[process.id] = 1 - q.correct_answer if cheat else q.correct_answer
    return ledger


@dataclass(frozen=True)
class RoundEvent:
    question_id: int
    round_index: int
    completion_day: int
    answers: AnswerVector
    detected: frozenset[int] | None


def completed_rounds(ledger: QuestionLedger, day: int) -> list[RoundEvent]:
    """Close every open question that now has all ``n`` answers, in issue order.

    Round indices follow question-issue order, so the round index of a question
    equals its id.
    """
    events = []
    for q in ledger.questions:
        if q.completion_day is not None or len(q.answers) < ledger.n:
            continue
        q.completion_day = day
        vec = AnswerVector(q.id, tuple(q.answers[i] for i in range(1, ledger.n + 1)),
                           q.correct_answer)
        events.append(RoundEvent(q.id, q.id, day, vec, detect_cheaters(vec)))
    return events


class AsyncProtocol:
    """Day-by-day state of one asynchronous run."""

    def __init__(
        self,
        profiles: Sequence[ProcessProfile],
        group: GroupSchedule,
        seed: int,
        trial: int = 0,
        fixed_answer: int | None = None,
    ):
        check_profiles(profiles)
        group.check(len(profiles))
        self.profiles = list(profiles)
        self.group = group
        self.rng = DrawSource(seed, trial)
        self.fixed_answer = fixed_answer
        self.ledger = QuestionLedger(len(profiles))
        self.beliefs: list[BeliefState] = fresh_beliefs(len(profiles))
        self.day = 0
        self.events: list[RoundEvent] = []
        self.records: list[StepRecord] = []
        self.max_backlog = 0

    def step_day(self) -> list[RoundEvent]:
        self.day += 1
        day = self.day
        correct = self.rng.correct_answer(day) if self.fixed_answer is None else self.fixed_answer
        self.ledger.issue(day, correct)
        self.max_backlog = max(self.max_backlog, self.ledger.backlog_depth())
        for pid in select_group(day, len(self.profiles), self.group, self.rng):
            answer_backlog(self.profiles[pid - 1], self.ledger, day, self.rng)
        self._check_ledger()
        events = completed_rounds(self.ledger, day)
        for ev in events:
            before = set(self.beliefs[0].known_cheaters)
            self.beliefs = gossip_update(self.beliefs, ev.detected, ev.round_index)
            delivered = tuple(sorted(set(self.beliefs[0].known_cheaters) - before))
            self.records.append(
                StepRecord(ev.round_index, day, ev.answers, common_answer(ev.answers),
                           ev.detected, delivered)
            )
        self.events.extend(events)
        return events

    def _check_ledger(self) -> None:
        for q in self.ledger.questions:
            assert len(q.answers) <= self.ledger.n
            assert set(q.answers) <= set(range(1, self.ledger.n + 1))

    @property
    def rounds_completed(self) -> int:
        return len(self.events)

    def trace(self) -> SimulationTrace:
        ledger = self.ledger
        return SimulationTrace(
            mode="async",
            seed=self.rng.seed,
            trial=self.rng.trial,
            config={
                "n": len(self.profiles),
                "days": self.day,
                "group_size": self.group.k,
                "group_policy": self.group.policy.value,
                "fixed_answer": self.fixed_answer,
                "processes": profile_summary(self.profiles),
            },
            steps=list(self.records),
            beliefs=list(self.beliefs),
            extra={
                "rounds_completed": self.rounds_completed,
                "max_backlog": self.max_backlog,
                "questions": [
                    {"id": q.id, "issue_day": q.issue_day, "completion_day": q.completion_day}
                    for q in ledger.questions
                ],
            },
        )


def run_asynchronous(
    profiles: Sequence[ProcessProfile],
    group: GroupSchedule,
    days: int,
    seed: int,
    trial: int = 0,
    fixed_answer: int | None = None,
) -> SimulationTrace:
    if days < 1:
        raise ValueError(f"days={days!r} must be >= 1")
    run = AsyncProtocol(profiles, group, seed, trial, fixed_answer)
    for _ in range(days):
        run.step_day()
    return run.trace()
