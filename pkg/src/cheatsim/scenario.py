"""Scenario files.

A scenario is an INI file with one ``[scenario]`` section and one
``[process.<id>]`` section per process that cheats.  Processes without a
section are honest::

    [scenario]
    mode = sync            ; or async
    n = 8
    horizon = 10           ; days (sync) or rounds (async)
    trials = 100000
    seed = 7
    checkpoints = 1, 5, 10 ; default: horizon
    tolerance_floor = 0.005
    group_size = 2         ; async only
    group_policy = round-robin

    [process.3]
    epsilon = 0.3

    [process.5]
    sequence = 0.1, 0.5
    extension = cycle      ; or hold-last
"""

from __future__ import annotations

import configparser
import io
import re
from pathlib import Path

from .analytic import CheatSchedule, DomainError, Extension
from .asynchronous import ConfigError, GroupPolicy, GroupSchedule
from .montecarlo import DEFAULT_FLOOR, MODES, TrialConfig


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending section and field."""


_PROC = re.compile(r"process\.(\d+)$")
_SCENARIO_KEYS = {
    "mode", "n", "horizon", "trials", "seed", "checkpoints", "tolerance_floor",
    "group_size", "group_policy", "fixed_answer", "output_dir",
}
_PROCESS_KEYS = {"epsilon", "sequence", "extension"}


def _get(sec: configparser.SectionProxy, key: str, conv, default=None, required=False):
    where = f"[{sec.name}] {key}"
    if key not in sec:
        if required:
            raise ScenarioError(f"{where}: missing required field")
        return default
    raw = sec[key].strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ScenarioError(f"{where}: cannot parse {raw!r} ({exc})") from None


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _float_list(raw: str) -> tuple[float, ...]:
    vals = tuple(float(x) for x in raw.replace(",", " ").split())
    if not vals:
        raise ValueError("empty sequence")
    return vals


def _schedule(sec: configparser.SectionProxy, pid: int) -> CheatSchedule:
    unknown = set(sec) - _PROCESS_KEYS
    if unknown:
        raise ScenarioError(f"[{sec.name}]: unknown field(s) {sorted(unknown)}")
    has_eps, has_seq = "epsilon" in sec, "sequence" in sec
    if has_eps == has_seq:
        raise ScenarioError(f"[{sec.name}]: give exactly one of 'epsilon' or 'sequence'")
    try:
        if has_eps:
            eps = _get(sec, "epsilon", float)
            if not 0.0 <= eps <= 1.0:
                raise ScenarioError(
                    f"[{sec.name}] epsilon: process {pid} has epsilon={eps!r} outside [0, 1]"
                )
            return CheatSchedule.constant(eps)
        values = _get(sec, "sequence", _float_list)
        bad = [v for v in values if not 0.0 <= v <= 1.0]
        if bad:
            raise ScenarioError(
                f"[{sec.name}] sequence: process {pid} has probability {bad[0]!r} outside [0, 1]"
            )
        ext = _get(sec, "extension", Extension, Extension.CYCLE)
        return CheatSchedule.sequence(values, ext)
    except DomainError as exc:
        raise ScenarioError(f"[{sec.name}]: {exc}") from None


def parse_scenario_text(text: str, source: str = "<scenario>") -> TrialConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: malformed scenario: {exc}") from None
    if "scenario" not in cp:
        raise ScenarioError(f"{source}: missing [scenario] section")
    sec = cp["scenario"]
    unknown = set(sec) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"[scenario]: unknown field(s) {sorted(unknown)}")

    mode = _get(sec, "mode", str, required=True)
    if mode not in MODES:
        raise ScenarioError(f"[scenario] mode: {mode!r} is not one of {MODES}")
    n = _get(sec, "n", int, required=True)
    if n < 1:
        raise ScenarioError(f"[scenario] n: must be >= 1, got {n}")
    horizon = _get(sec, "horizon", int, required=True)
    if horizon < 1:
        raise ScenarioError(f"[scenario] horizon: must be >= 1, got {horizon}")
    trials = _get(sec, "trials", int, 1)
    if trials < 1:
        raise ScenarioError(f"[scenario] trials: must be >= 1, got {trials}")
    seed = _get(sec, "seed", int, required=True)
    if seed < 0:
        raise ScenarioError(f"[scenario] seed: must be non-negative, got {seed}")
    checkpoints = _get(sec, "checkpoints", _int_list, (horizon,))
    bad = [c for c in checkpoints if not 1 <= c <= horizon]
    if bad:
        raise ScenarioError(
            f"[scenario] checkpoints: {bad[0]} outside [1, horizon={horizon}]"
        )
    floor = _get(sec, "tolerance_floor", float, DEFAULT_FLOOR)
    if not floor >= 0:
        raise ScenarioError(f"[scenario] tolerance_floor: must be >= 0, got {floor}")
    fixed = _get(sec, "fixed_answer", int)
    if fixed not in (None, 0, 1):
        raise ScenarioError(f"[scenario] fixed_answer: must be 0 or 1, got {fixed}")

    group = None
    if mode == "async":
        k = _get(sec, "group_size", int, required=True)
        if not 1 <= k:
            raise ScenarioError(f"[scenario] group_size: must be >= 1, got {k}")
        if k > n:
            raise ScenarioError(f"[scenario] group_size: k > n (k={k}, n={n})")
        policy = _get(sec, "group_policy", GroupPolicy, GroupPolicy.ROUND_ROBIN)
        group = GroupSchedule(k, policy)

    schedules = [CheatSchedule.constant(0.0)] * n
    for name in cp.sections():
        if name == "scenario":
            continue
        m = _PROC.match(name)
        if not m:
            raise ScenarioError(f"[{name}]: unknown section (expected [process.<id>])")
        pid = int(m.group(1))
        if not 1 <= pid <= n:
            raise ScenarioError(f"[{name}]: process id {pid} outside [1, n={n}]")
        schedules[pid - 1] = _schedule(cp[name], pid)

    try:
        return TrialConfig(
            mode=mode,
            schedules=tuple(schedules),
            horizon=horizon,
            trials=trials,
            seed=seed,
            checkpoints=checkpoints,
            group=group,
            tolerance_floor=floor,
            fixed_answer=fixed,
            output_dir=_get(sec, "output_dir", str),
        )
    except ConfigError as exc:
        raise ScenarioError(f"[scenario]: {exc}") from None


def parse_scenario(path: str | Path) -> TrialConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    return parse_scenario_text(text, str(path))


def serialize_scenario(cfg: TrialConfig) -> str:
    """INI text that parses back to an equivalent config."""
    cp = configparser.ConfigParser(interpolation=None)
    sec = {
        "mode": cfg.mode,
        "n": str(cfg.n),
        "horizon": str(cfg.horizon),
        "trials": str(cfg.trials),
        "seed": str(cfg.seed),
        "checkpoints": ", ".join(map(str, cfg.checkpoints)),
        "tolerance_floor": repr(cfg.tolerance_floor),
    }
    if cfg.group is not None:
        sec["group_size"] = str(cfg.group.k)
        sec["group_policy"] = cfg.group.policy.value
    if cfg.fixed_answer is not None:
        sec["fixed_answer"] = str(cfg.fixed_answer)
    if cfg.output_dir is not None:
        sec["output_dir"] = cfg.output_dir
    cp["scenario"] = sec
    for pid, s in enumerate(cfg.schedules, start=1):
        if not s.varying and s.values[0] == 0.0:
            continue
        if s.varying:
            cp[f"process.{pid}"] = {
                "sequence": ", ".join(repr(v) for v in s.values),
                "extension": s.extension.value,
            }
        else:
            cp[f"process.{pid}"] = {"epsilon": repr(s.values[0])}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
