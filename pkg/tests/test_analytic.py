import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cheatsim.analytic import (
    CheatSchedule,
    DomainError,
    Extension,
    certainty_constant,
    certainty_varying,
    detection_gap,
    detection_gap_factored,
    detection_gap_varying,
    indicator,
    knowledge_matrix,
    knowledge_matrix_by_indicators,
    steps_to_certainty,
)

probs = st.floats(0.0, 1.0, allow_nan=False)
open_probs = st.floats(1e-3, 1 - 1e-3)


def enumerate_detection(probabilities):
    """Oracle: sum the probability of every cheat/no-cheat path with at least one cheat."""
    total = 0.0
    for path in itertools.product((0, 1), repeat=len(probabilities)):
        weight = 1.0
        for cheated, p in zip(path, probabilities):
            weight *= p if cheated else 1.0 - p
        if any(path):
            total += weight
    return total


# -- certainty_constant -----------------------------------------------------------


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.37, 1.0])
def test_first_day_certainty_is_eps(eps):
    assert certainty_constant(eps, 1) == pytest.approx(eps, abs=1e-15)


def test_constant_examples():
    assert certainty_constant(0.0, 1000) == 0.0
    assert certainty_constant(0.5, 3) == 0.875
    assert certainty_constant(1.0, 1) == 1.0


@pytest.mark.parametrize("eps,d", [(0.5, 0), (-0.1, 3), (1.5, 1), (float("nan"), 1), (0.2, 2.5)])
def test_constant_domain_errors(eps, d):
    with pytest.raises(DomainError):
        certainty_constant(eps, d)


@given(probs, st.integers(1, 1000))
def test_certainty_in_unit_interval(eps, d):
    assert 0.0 <= certainty_constant(eps, d) <= 1.0


@given(probs, st.integers(1, 999), st.integers(1, 500))
def test_monotone_in_time(eps, d1, gap):
    d2 = d1 + gap
    lo, hi = certainty_constant(eps, d1), certainty_constant(eps, d2)
    assert lo <= hi
    if 0.0 < eps < 1.0:
        # strictness is only observable while the survival term is representable
        assume(1.0 - eps < 1.0 and (1 - eps) ** d2 > 0.0 and lo < 1.0 - 1e-12)
        assert lo < hi


@given(open_probs, open_probs, st.integers(1, 200))
def test_monotone_in_eps(a, b, d):
    assume(a != b)
    hi_eps, lo_eps = max(a, b), min(a, b)
    hi, lo = certainty_constant(hi_eps, d), certainty_constant(lo_eps, d)
    assert hi >= lo
    assume(lo < 1.0 - 1e-12)
    assert hi > lo


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_limit_reaches_one_minus_delta(eps):
    delta = 1e-6
    d0 = math.ceil(math.log(delta) / math.log(1 - eps))
    assert steps_to_certainty(eps, delta) == d0
    for d in (d0, d0 + 1, d0 + 50, 10 * d0):
        assert certainty_constant(eps, d) >= 1 - delta


def test_steps_to_certainty_errors():
    with pytest.raises(DomainError):
        steps_to_certainty(0.0, 1e-6)
    with pytest.raises(DomainError):
        steps_to_certainty(0.5, 1.0)
    assert steps_to_certainty(1.0, 1e-6) == 1


# -- schedules and certainty_varying -----------------------------------------------


def test_schedule_extension_policies():
    cyc = CheatSchedule.sequence([0.1, 0.5])
    hold = CheatSchedule.sequence([0.1, 0.5], Extension.HOLD_LAST)
    assert [cyc.probability_at(l) for l in range(1, 6)] == [0.1, 0.5, 0.1, 0.5, 0.1]
    assert [hold.probability_at(l) for l in range(1, 6)] == [0.1, 0.5, 0.5, 0.5, 0.5]
    assert CheatSchedule.constant(0.3).probability_at(10**6) == 0.3


def test_schedule_validation():
    with pytest.raises(DomainError):
        CheatSchedule.sequence([])
    with pytest.raises(DomainError):
        CheatSchedule.sequence([0.2, 1.2])
    with pytest.raises(DomainError):
        CheatSchedule.constant(-0.01)
    with pytest.raises(DomainError):
        CheatSchedule.constant(0.2).probability_at(0)


def test_varying_examples():
    assert certainty_varying(CheatSchedule.sequence([0.5, 0.5, 0.5]), 3) == pytest.approx(
        certainty_constant(0.5, 3), abs=1e-15
    )
    assert certainty_varying(CheatSchedule.sequence([0.0, 1.0]), 2) == 1.0
    expected = enumerate_detection([0.2, 0.4])
    assert expected == pytest.approx(0.52, abs=1e-15)
    assert certainty_varying(CheatSchedule.sequence([0.2, 0.4]), 2) == pytest.approx(expected, abs=1e-15)


@given(st.lists(probs, min_size=1, max_size=5), st.integers(1, 10), st.sampled_from(list(Extension)))
def test_varying_matches_path_enumeration(values, d, ext):
    sched = CheatSchedule.sequence(values, ext)
    oracle = enumerate_detection([sched.probability_at(l) for l in range(1, d + 1)])
    assert certainty_varying(sched, d) == pytest.approx(oracle, abs=1e-12)


@given(probs, st.integers(1, 1000))
def test_constant_schedule_is_bitwise_consistent(eps, d):
    assert certainty_varying(CheatSchedule.constant(eps), d) == certainty_constant(eps, d)


@given(st.lists(probs, min_size=1, max_size=6), st.integers(1, 60))
def test_varying_monotone_in_time(values, d):
    sched = CheatSchedule.sequence(values)
    assert certainty_varying(sched, d) <= certainty_varying(sched, d + 1)
    assert 0.0 <= certainty_varying(sched, d) <= 1.0


# -- matrices -------------------------------------------------------------------------


def test_indicator_examples():
    np.testing.assert_array_equal(indicator(1, 1), [[1]])
    np.testing.assert_array_equal(indicator(2, 2), [[0, 1], [0, 1]])
    np.testing.assert_array_equal(indicator(3, 1), [[1, 0, 0], [1, 0, 0], [1, 0, 0]])
    for bad in (0, 4):
        with pytest.raises(DomainError):
            indicator(3, bad)


def test_knowledge_matrix_examples():
    np.testing.assert_array_equal(knowledge_matrix([0.0, 0.0], 5).entries, np.zeros((2, 2)))
    km = knowledge_matrix([0.0, 1.0, 0.0], 1)
    np.testing.assert_array_equal(km.entries, [[0, 1, 0]] * 3)
    assert km[3, 2] == 1.0
    km = knowledge_matrix([CheatSchedule.constant(0.3)] * 2, 2)
    np.testing.assert_allclose(km.entries, np.full((2, 2), 0.51), atol=1e-15)
    with pytest.raises(DomainError):
        knowledge_matrix([], 3)


def test_knowledge_matrix_oracle_by_bernoulli_simulation():
    # every cheat observed: k(i,j) is the chance j cheated at least once in d steps
    rng = np.random.default_rng(20261019)
    trials, d = 200_000, 2
    cheated = (rng.random((trials, d, 2)) < 0.3).any(axis=1).mean(axis=0)
    hw = 3 * math.sqrt(0.51 * 0.49 / trials)
    km = knowledge_matrix([0.3, 0.3], d)
    for j in range(2):
        assert abs(cheated[j] - km.entries[0, j]) <= hw


@given(st.lists(probs, min_size=1, max_size=12), st.integers(1, 100))
def test_rows_identical_and_decomposition(eps, d):
    km = knowledge_matrix(eps, d)
    assert (km.entries == km.entries[0]).all()
    np.testing.assert_allclose(km.entries, knowledge_matrix_by_indicators(eps, d), atol=1e-12, rtol=0)


# -- detection gaps ----------------------------------------------------------------------


def test_gap_examples():
    for d in (1, 7, 100):
        assert detection_gap(0.5, 0.5, d) == 0.0
    assert detection_gap(0.5, 0.25, 2) == pytest.approx(0.3125, abs=1e-15)
    assert detection_gap_factored(0.5, 0.25, 2) == pytest.approx(0.25 * (0.5 + 0.75), abs=1e-15)
    assert detection_gap(0.1, 0.9, 3) < 0


@given(probs, probs, st.integers(1, 100))
def test_gap_factorisation_and_sign(a, b, d):
    direct = detection_gap(a, b, d)
    assert abs(direct - detection_gap_factored(a, b, d)) <= 1e-9
    assert direct == pytest.approx(certainty_constant(a, d) - certainty_constant(b, d), abs=1e-12)
    if a == b:
        assert direct == 0.0
    elif 1 - a != 1 - b and (1 - min(a, b)) ** d > 0:
        # sign is only resolvable once the survival terms differ in double precision
        assert math.copysign(1, direct) == math.copysign(1, a - b) and direct != 0.0


def test_gap_varying_examples():
    s = CheatSchedule.sequence([0.3, 0.7])
    assert detection_gap_varying(s, s, 9) == 0.0
    i, j = CheatSchedule.sequence([0.4, 0.4]), CheatSchedule.sequence([0.2, 0.2])
    oracle = enumerate_detection([0.4, 0.4]) - enumerate_detection([0.2, 0.2])
    assert oracle == pytest.approx(0.28, abs=1e-15)
    assert detection_gap_varying(i, j, 2) == pytest.approx(oracle, abs=1e-15)
    assert detection_gap_varying(CheatSchedule.sequence([1.0]), CheatSchedule.sequence([0.0]), 1) == 1.0


@given(st.lists(st.tuples(open_probs, open_probs), min_size=1, max_size=5), st.integers(1, 30))
def test_gap_varying_positive_when_dominating(pairs, d):
    hi = CheatSchedule.sequence([max(a, b) + 1e-3 for a, b in pairs])
    lo = CheatSchedule.sequence([min(a, b) for a, b in pairs])
    assume(certainty_varying(lo, d) < 1 - 1e-9)
    assert detection_gap_varying(hi, lo, d) > 0


def test_gap_domain_errors():
    with pytest.raises(DomainError):
        detection_gap(1.2, 0.1, 3)
    with pytest.raises(DomainError):
        detection_gap_factored(0.1, 0.1, 0)
