"""Simulator and closed-form toolkit for probabilistic Byzantine cheaters."""

from .analytic import (
    CheatSchedule,
    DomainError,
    Extension,
    KnowledgeMatrix,
    certainty_constant,
    certainty_varying,
    detection_gap,
    detection_gap_factored,
    detection_gap_varying,
    indicator,
    knowledge_matrix,
)
from .asynchronous import GroupPolicy, GroupSchedule, run_asynchronous
from .montecarlo import TrialConfig, compare_to_analytic, estimate_certainty
from .protocol import ProcessProfile, make_profiles, run_synchronous

__version__ = "0.1.0"

__all__ = [
    "CheatSchedule",
    "DomainError",
    "Extension",
    "GroupPolicy",
    "GroupSchedule",
    "KnowledgeMatrix",
    "ProcessProfile",
    "TrialConfig",
    "certainty_constant",
    "certainty_varying",
    "compare_to_analytic",
    "detection_gap",
    "detection_gap_factored",
    "detection_gap_varying",
    "estimate_certainty",
    "indicator",
    "knowledge_matrix",
    "make_profiles",
    "run_asynchronous",
    "run_synchronous",
]
