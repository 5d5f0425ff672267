"""Monte Carlo estimation of the who-knows-whom matrix.

Trials are independent and keyed by ``(master seed, trial index)``.  The
vectorised engines draw a whole block of trials at once from the same
counter-based hash the single-trial simulators use, so block size, block
order and worker count never change the counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytic import CheatSchedule, DomainError, certainty_varying
from .asynchronous import (
    AsyncProtocol,
    ConfigError,
    GroupPolicy,
    GroupSchedule,
    round_robin_days_needed,
    select_group,
)
from .protocol import ProcessProfile, make_profiles, run_synchronous, warn_if_cheat_mass_high
from .rng import Stream, extend, hash_key, to_unit

DEFAULT_FLOOR = 0.005
DEFAULT_SIGMAS = 3.0
MODES = ("sync", "async")


@dataclass(frozen=True)
class TrialConfig:
    mode: str
    schedules: tuple[CheatSchedule, ...]
    horizon: int
    trials: int
    seed: int
    checkpoints: tuple[int, ...] = ()
    group: GroupSchedule | None = None
    tolerance_floor: float = DEFAULT_FLOOR
    fixed_answer: int | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "schedules", tuple(self.schedules))
        if self.mode not in MODES:
            raise ConfigError(f"mode={self.mode!r} must be one of {MODES}")
        if not self.schedules:
            raise ConfigError("n must be >= 1")
        if self.horizon < 1:
            raise ConfigError(f"horizon={self.horizon} must be >= 1")
        if self.trials < 1:
            raise ConfigError(f"trials={self.trials} must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed={self.seed} must be non-negative")
        cps = tuple(self.checkpoints) or (self.horizon,)
        if list(cps) != sorted(set(cps)):
            raise ConfigError(f"checkpoints {list(cps)} must be strictly increasing")
        if cps[0] < 1 or cps[-1] > self.horizon:
            raise ConfigError(f"checkpoints must lie in [1, horizon={self.horizon}]")
        object.__setattr__(self, "checkpoints", cps)
        if self.tolerance_floor < 0:
            raise ConfigError("tolerance_floor must be >= 0")
        if self.fixed_answer not in (None, 0, 1):
            raise ConfigError("fixed_answer must be 0 or 1")
        if self.mode == "async":
            if self.group is None:
                object.__setattr__(self, "group", GroupSchedule(self.n))
            self.group.check(self.n)

    @property
    def n(self) -> int:
        return len(self.schedules)

    @property
    def profiles(self) -> list[ProcessProfile]:
        return make_profiles(self.schedules)

    def summary(self) -> dict:
        out = {
            "mode": self.mode,
            "n": self.n,
            "horizon": self.horizon,
            "trials": self.trials,
            "seed": self.seed,
            "checkpoints": list(self.checkpoints),
            "tolerance_floor": self.tolerance_floor,
        }
        if self.group is not None:
            out["group_size"] = self.group.k
            out["group_policy"] = self.group.policy.value
        return out


@dataclass
class EmpiricalMatrix:
    """Detection counts at one checkpoint: cell (i, j) counts trials where i knows j."""

    step: int
    counts: np.ndarray
    trials: int
    no_supermajority_steps: int = 0

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.trials


def binomial_halfwidth(p_hat: float, trials: int, sigmas: float = DEFAULT_SIGMAS) -> float:
    if trials < 1:
        raise DomainError("trials must be >= 1")
    return sigmas * math.sqrt(p_hat * (1.0 - p_hat) / trials)


@dataclass(frozen=True)
class CellComparison:
    observer: int
    target: int
    empirical: float
    analytic: float
    deviation: float
    halfwidth: float
    tolerance: float
    passed: bool

    @property
    def diagonal(self) -> bool:
        return self.observer == self.target


@dataclass
class ComparisonReport:
    step: int
    trials: int
    cells: list[CellComparison] = field(default_factory=list)
    no_supermajority_steps: int = 0

    def off_diagonal(self) -> list[CellComparison]:
        return [c for c in self.cells if not c.diagonal]

    @property
    def max_deviation(self) -> float:
        return max((c.deviation for c in self.off_diagonal()), default=0.0)

    @property
    def fail_count(self) -> int:
        return sum(not c.passed for c in self.off_diagonal())

    @property
    def diagonal_fail_count(self) -> int:
        return sum(not c.passed for c in self.cells if c.diagonal)

    @property
    def pass_rate(self) -> float:
        cells = self.off_diagonal()
        return sum(c.passed for c in cells) / len(cells) if cells else 1.0

    @property
    def passed(self) -> bool:
        return self.fail_count == 0

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "trials": self.trials,
            "max_deviation": self.max_deviation,
            "fail_count": self.fail_count,
            "diagonal_fail_count": self.diagonal_fail_count,
            "pass_rate": self.pass_rate,
            "no_supermajority_steps": self.no_supermajority_steps,
            "cells": [
                {
                    "observer": c.observer,
                    "target": c.target,
                    "diagonal": c.diagonal,
                    "empirical": c.empirical,
                    "analytic": c.analytic,
                    "deviation": c.deviation,
                    "halfwidth": c.halfwidth,
                    "tolerance": c.tolerance,
                    "pass": c.passed,
                }
                for c in self.cells
            ],
        }


def compare_to_analytic(
    emp: EmpiricalMatrix,
    schedules: Sequence[CheatSchedule | float],
    tolerance_floor: float = DEFAULT_FLOOR,
    sigmas: float = DEFAULT_SIGMAS,
) -> ComparisonReport:
    """Check every cell against ``certainty_varying(schedule_j, step)``."""
    if emp.n != len(schedules):
        raise DomainError(f"matrix has n={emp.n} but {len(schedules)} schedules were given")
    analytic = [certainty_varying(s, emp.step) for s in schedules]
    freq = emp.frequencies
    report = ComparisonReport(emp.step, emp.trials, no_supermajority_steps=emp.no_supermajority_steps)
    for i in range(emp.n):
        for j in range(emp.n):
            p_hat = float(freq[i, j])
            dev = abs(p_hat - analytic[j])
            hw = binomial_halfwidth(p_hat, emp.trials, sigmas)
            tol = max(hw, tolerance_floor)
            report.cells.append(
                CellComparison(i + 1, j + 1, p_hat, analytic[j], dev, hw, tol, dev <= tol)
            )
    return report


# -- engines -----------------------------------------------------------------
#
# Each engine maps a block of trial indices to (known, nosup):
#   known[c, j]  number of trials in the block where target j is known by checkpoint c
#   nosup[c]     NoSupermajority steps (rounds) up to checkpoint c, summed over the block
# Instantaneous gossip makes every observer row identical, so one row suffices.


def _eps_table(schedules: Sequence[CheatSchedule], days: int) -> np.ndarray:
    """``table[day - 1, p]`` is the cheat probability of process ``p + 1`` on ``day``."""
    return np.stack([s.probabilities(days) for s in schedules], axis=1)


def _detect_block(answers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised supermajority detection over rows of a ``(trials, n)`` 0/1 array."""
    n = answers.shape[1]
    ones = answers.sum(axis=1)
    sup1 = 3 * ones > 2 * n
    has = sup1 | (3 * ones < n)
    detected = has[:, None] & (answers != sup1[:, None])
    return detected, ~has


def _correct_answers(cfg: TrialConfig, trials: np.ndarray, step: int) -> np.ndarray:
    if cfg.fixed_answer is not None:
        return np.full(trials.shape, bool(cfg.fixed_answer))
    return to_unit(hash_key(cfg.seed, Stream.ANSWER, trials, 0, step)) < 0.5


def _sync_block(cfg: TrialConfig, trials: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, horizon = cfg.n, cfg.horizon
    eps = _eps_table(cfg.schedules, horizon)
    pids = np.arange(1, n + 1)
    prefix = hash_key(cfg.seed, Stream.CHEAT, trials)[:, None]
    known = np.zeros((len(trials), n), dtype=bool)
    nosup = 0
    out_known, out_nosup = [], []
    for step in range(1, horizon + 1):
        u = to_unit(extend(prefix, pids, step, step))
        cheat = u < eps[step - 1]
        correct = _correct_answers(cfg, trials, step)
        answers = cheat ^ correct[:, None]
        detected, no_sup = _detect_block(answers)
        known |= detected
        nosup += int(no_sup.sum())
        if step in cfg.checkpoints:
            out_known.append(known.sum(axis=0))
            out_nosup.append(nosup)
    return np.array(out_known), np.array(out_nosup)


def round_robin_write_days(n: int, k: int, rounds: int) -> np.ndarray:
    """``w[q - 1, p - 1]``: day on which process ``p`` answers question ``q`` under round-robin."""
    sched = GroupSchedule(k, GroupPolicy.ROUND_ROBIN)
    days = round_robin_days_needed(n, k, rounds)
    w = np.zeros((rounds, n), dtype=np.int64)
    answered_through = np.zeros(n, dtype=np.int64)  # highest question id answered
    for day in range(1, days + 1):
        for pid in select_group(day, n, sched, None):
            hi = min(day, rounds)
            lo = answered_through[pid - 1]
            if hi > lo:
                w[lo:hi, pid - 1] = day
                answered_through[pid - 1] = hi
    return w


def _async_block(cfg: TrialConfig, trials: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, rounds = cfg.n, cfg.horizon
    w = round_robin_write_days(n, cfg.group.k, rounds)
    eps = _eps_table(cfg.schedules, int(w.max()))
    pids = np.arange(1, n + 1)
    prefix = hash_key(cfg.seed, Stream.CHEAT, trials)[:, None]
    known = np.zeros((len(trials), n), dtype=bool)
    nosup = 0
    out_known, out_nosup = [], []
    for q in range(1, rounds + 1):
        wq = w[q - 1]
        u = to_unit(extend(prefix, pids, wq, q))
        cheat = u < eps[wq - 1, pids - 1]
        correct = _correct_answers(cfg, trials, q)
        answers = cheat ^ correct[:, None]
        detected, no_sup = _detect_block(answers)
        known |= detected
        nosup += int(no_sup.sum())
        if q in cfg.checkpoints:
            out_known.append(known.sum(axis=0))
            out_nosup.append(nosup)
    return np.array(out_known), np.array(out_nosup)


def run_trial(cfg: TrialConfig, trial: int):
    """Single-trial simulation; returns the trace (sync) or the finished AsyncProtocol."""
    profiles = cfg.profiles
    if cfg.mode == "sync":
        return run_synchronous(profiles, cfg.horizon, cfg.seed, trial, cfg.fixed_answer)
    run = AsyncProtocol(profiles, cfg.group, cfg.seed, trial, cfg.fixed_answer)
    if cfg.group.policy is GroupPolicy.ROUND_ROBIN:
        days = round_robin_days_needed(cfg.n, cfg.group.k, cfg.horizon)
    else:
        days = 10_000 * cfg.horizon
    while run.rounds_completed < cfg.horizon:
        if run.day >= days:
            raise RuntimeError(f"trial {trial}: only {run.rounds_completed} rounds in {days} days")
        run.step_day()
    return run.trace()


def _scalar_block(cfg: TrialConfig, trials: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial engine that reads the full per-observer belief states."""
    n = cfg.n
    counts = np.zeros((len(cfg.checkpoints), n, n), dtype=np.int64)
    nosup = np.zeros(len(cfg.checkpoints), dtype=np.int64)
    for t in trials:
        trace = run_trial(cfg, int(t))
        for c, d in enumerate(cfg.checkpoints):
            for b in trace.beliefs:
                for j, first in b.known_cheaters.items():
                    if first <= d:
                        counts[c, b.observer_id - 1, j - 1] += 1
            nosup[c] += sum(r.no_supermajority for r in trace.steps if r.step <= d)
    return counts, nosup


def choose_engine(cfg: TrialConfig, engine: str = "auto") -> str:
    if engine not in ("auto", "vector", "scalar"):
        raise ValueError(f"unknown engine {engine!r}")
    vectorisable = cfg.mode == "sync" or cfg.group.policy is GroupPolicy.ROUND_ROBIN
    if engine == "vector" and not vectorisable:
        raise ValueError("the vector engine supports only round-robin groups in async mode")
    if engine == "auto":
        return "vector" if vectorisable else "scalar"
    return engine


def estimate_certainty(
    cfg: TrialConfig,
    block_size: int = 20_000,
    workers: int = 1,
    engine: str = "auto",
) -> list[EmpiricalMatrix]:
    """One empirical matrix per checkpoint, counted over ``cfg.trials`` trials."""
    engine = choose_engine(cfg, engine)
    warn_if_cheat_mass_high(cfg.profiles)
    n, ncp = cfg.n, len(cfg.checkpoints)
    blocks = [
        np.arange(lo, min(lo + block_size, cfg.trials), dtype=np.int64)
        for lo in range(0, cfg.trials, block_size)
    ]
    if engine == "scalar":
        fn = _scalar_block
    else:
        fn = _sync_block if cfg.mode == "sync" else _async_block

    def run(block):
        return fn(cfg, block)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    counts = np.zeros((ncp, n, n), dtype=np.int64)
    nosup = np.zeros(ncp, dtype=np.int64)
    for known, ns in results:
        if engine == "scalar":
            counts += known
        else:
            counts += known[:, None, :]
        nosup += ns
    return [
        EmpiricalMatrix(d, counts[c], cfg.trials, int(nosup[c]))
        for c, d in enumerate(cfg.checkpoints)
    ]


def compare_all(
    cfg: TrialConfig, matrices: Sequence[EmpiricalMatrix], sigmas: float = DEFAULT_SIGMAS
) -> list[ComparisonReport]:
    return [compare_to_analytic(m, cfg.schedules, cfg.tolerance_floor, sigmas) for m in matrices]
