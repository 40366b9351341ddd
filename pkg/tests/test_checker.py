import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featmc.checker import (
    MAX,
    MIN,
    CheckOptions,
    bounded_reach_probability,
    evaluate_property,
    expected_reward,
    format_value,
    invariant_probability,
    qualitative_reach,
    reach_probability,
    run_experiment,
)
from featmc.errors import CheckError, ConvergenceError
from featmc.language import parse_properties
from featmc.oracle import exhaustive_bounded

from conftest import compile_text
from small_mdps import CASES, SmallCase, exact_bounded, exact_reach, exact_reward, explicit_mdp

TIGHT = 1e-12


def mask(n, states):
    m = np.zeros(n, dtype=bool)
    m[list(states)] = True
    return m


GEOMETRIC = explicit_mdp([[{0: F(1, 2), 1: F(1, 2)}], [{1: 1}]], transition_rewards={"r": [[1], [0]]})
LOOP_OR_EXIT = explicit_mdp([[{1: 1}, {0: 1}], [{1: 1}]])


# ---- qualitative ----------------------------------------------------------------


def test_chain_is_certain():
    mdp = explicit_mdp([[{1: 1}], [{1: 1}]])
    for mode in (MIN, MAX):
        zero, one = qualitative_reach(mdp, mask(2, {1}), mode)
        assert one.all() and not zero.any()


def test_loop_or_exit_qualitative():
    target = mask(2, {1})
    assert qualitative_reach(LOOP_OR_EXIT, target, MAX)[1][0]
    assert qualitative_reach(LOOP_OR_EXIT, target, MIN)[0][0]


# ---- unbounded reachability -------------------------------------------------------


def test_geometric_pinned_to_one():
    assert reach_probability(GEOMETRIC, mask(2, {1}), MIN)[0] == 1.0


def test_loop_or_exit_values():
    target = mask(2, {1})
    assert reach_probability(LOOP_OR_EXIT, target, MIN)[0] == 0.0
    assert reach_probability(LOOP_OR_EXIT, target, MAX)[0] == 1.0


def test_single_split():
    mdp = explicit_mdp([[{1: F(3, 10), 2: F(7, 10)}], [{1: 1}], [{2: 1}]])
    assert reach_probability(mdp, mask(3, {1}), MAX)[0] == pytest.approx(0.3, abs=1e-6)


def test_nonpositive_epsilon():
    with pytest.raises(CheckError):
        reach_probability(GEOMETRIC, mask(2, {1}), MIN, epsilon=0)


def test_non_convergence_reports_residual():
    case = next(c for c in CASES if c.name == "random_walk")
    with pytest.raises(ConvergenceError, match="residual"):
        reach_probability(case.mdp(), case.target_mask(), MAX, epsilon=1e-12, max_iters=2)


# ---- bounded reachability and invariants ---------------------------------------------


def test_bounded_k0_is_indicator():
    case = CASES[-1]
    for mode in (MIN, MAX):
        assert (bounded_reach_probability(case.mdp(), case.target_mask(), 0, mode) == case.target_mask()).all()


def test_bounded_two_steps():
    assert bounded_reach_probability(GEOMETRIC, mask(2, {1}), 2, MIN)[0] == 0.75


def test_negative_bound():
    with pytest.raises(CheckError):
        bounded_reach_probability(GEOMETRIC, mask(2, {1}), -1, MIN)


def test_all_safe_invariant():
    assert (invariant_probability(GEOMETRIC, mask(2, {0, 1}), MIN) == 1.0).all()


def test_unsafe_start_invariant():
    assert invariant_probability(GEOMETRIC, mask(2, {1}), MIN)[0] == 0.0


def test_geometric_escape_invariant():
    # G {0} fails almost surely
    assert invariant_probability(GEOMETRIC, mask(2, {0}), MIN)[0] == 0.0


# ---- rewards ----------------------------------------------------------------------------


def test_geometric_reward_is_two():
    assert expected_reward(GEOMETRIC, "r", mask(2, {1}), MIN, epsilon=1e-10)[0] == pytest.approx(2.0, rel=1e-8)


def test_reward_at_target_is_zero():
    assert expected_reward(GEOMETRIC, "r", mask(2, {0}), MIN)[0] == 0.0


def test_reward_infinite_without_iteration():
    mdp = explicit_mdp([[{1: 1}, {0: 1}], [{1: 1}]], transition_rewards={"r": [[1, 1], [0]]})
    assert expected_reward(mdp, "r", mask(2, {1}), MAX, max_iters=1)[0] == math.inf
    assert expected_reward(mdp, "r", mask(2, {1}), MIN)[0] == 1.0


def test_unknown_structure():
    with pytest.raises(CheckError, match="unknown reward structure"):
        expected_reward(GEOMETRIC, "energy", mask(2, {1}), MIN)


# ---- exact oracle on hand-built cases -------------------------------------------------


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_reach_matches_exact(case: SmallCase):
    mdp = case.mdp()
    for mode in (MIN, MAX):
        got = reach_probability(mdp, case.target_mask(), mode, epsilon=TIGHT)
        want = exact_reach(case.choices, case.target, mode)
        assert np.allclose(got, [float(v) for v in want], atol=1e-9, rtol=0)


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_reward_matches_exact(case: SmallCase):
    mdp = case.mdp()
    for mode in (MIN, MAX):
        got = expected_reward(mdp, "r", case.target_mask(), mode, epsilon=TIGHT)
        want = exact_reward(case.choices, case.target, mode, case.state_rewards, case.transition_rewards)
        for g, w in zip(got, want):
            assert (g == w == math.inf) or abs(g - float(w)) <= 1e-9 * max(1.0, float(w))


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_bounded_matches_exhaustive(case: SmallCase):
    mdp = case.mdp()
    for mode in (MIN, MAX):
        for k in range(8):
            got = bounded_reach_probability(mdp, case.target_mask(), k, mode)
            want = exhaustive_bounded(mdp, case.target_mask(), k, mode, states=range(mdp.num_states))
            assert max(abs(got[s] - float(want[s])) for s in want) <= 1e-12
            if k < 5:
                assert [want[s] for s in range(mdp.num_states)] == exact_bounded(case.choices, case.target, k, mode)


# ---- random small MDPs ------------------------------------------------------------------


@st.composite
def small_mdps(draw):
    n = draw(st.integers(2, 5))
    choices = []
    for _ in range(n):
        dists = []
        for _ in range(draw(st.integers(1, 2))):
            succ = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=3, unique=True))
            weights = [draw(st.integers(1, 6)) for _ in succ]
            total = sum(weights)
            dists.append({t: F(w, total) for t, w in zip(succ, weights)})
        choices.append(dists)
    target = frozenset(draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1)))
    rewards = [draw(st.integers(0, 3)) for _ in range(n)]
    return SmallCase("random", choices, target, state_rewards=rewards)


@settings(max_examples=40, deadline=None)
@given(small_mdps())
def test_random_reach_and_reward_vs_exact(case):
    mdp = case.mdp()
    for mode in (MIN, MAX):
        got = reach_probability(mdp, case.target_mask(), mode, epsilon=TIGHT)
        want = exact_reach(case.choices, case.target, mode)
        assert np.allclose(got, [float(v) for v in want], atol=1e-9, rtol=0)
        got = expected_reward(mdp, "r", case.target_mask(), mode, epsilon=TIGHT)
        want = exact_reward(case.choices, case.target, mode, case.state_rewards)
        for g, w in zip(got, want):
            assert (g == w == math.inf) or abs(g - float(w)) <= 1e-8 * max(1.0, float(w))


@settings(max_examples=60, deadline=None)
@given(small_mdps(), st.integers(0, 12))
def test_random_bounds_and_duality(case, k):
    mdp = case.mdp()
    target = case.target_mask()
    lo = reach_probability(mdp, target, MIN)
    hi = reach_probability(mdp, target, MAX)
    assert (lo <= hi + 1e-12).all()
    b_lo = bounded_reach_probability(mdp, target, k, MIN)
    b_hi = bounded_reach_probability(mdp, target, k, MAX)
    assert (b_lo <= b_hi).all()
    assert (bounded_reach_probability(mdp, target, k + 1, MAX) >= b_hi).all()
    assert (b_hi <= hi + 1e-9).all()
    safe = ~target
    g = invariant_probability(mdp, safe, MIN, epsilon=TIGHT)
    f = reach_probability(mdp, target, MAX, epsilon=TIGHT)
    assert np.allclose(g + f, 1.0, atol=1e-10, rtol=0)
    # one sets are exact, never approximate
    _, one = qualitative_reach(mdp, target, MIN)
    assert (lo[one] == 1.0).all()


@settings(max_examples=40, deadline=None)
@given(small_mdps())
def test_bounded_converges_to_unbounded(case):
    mdp = case.mdp()
    target = case.target_mask()
    for mode in (MIN, MAX):
        limit = reach_probability(mdp, target, mode, epsilon=1e-10)
        far = bounded_reach_probability(mdp, target, 2000, mode)
        assert np.allclose(far, limit, atol=1e-6, rtol=0)


@settings(max_examples=40, deadline=None)
@given(small_mdps())
def test_zero_rewards_give_zero(case):
    mdp = explicit_mdp(case.choices, {"r": [0] * len(case.choices)})
    for mode in (MIN, MAX):
        got = expected_reward(mdp, "r", case.target_mask(), mode)
        assert all(v == 0.0 or v == math.inf for v in got)


# ---- properties on the case study -------------------------------------------------------


def test_done_pinned_to_one(auv1):
    (prop,) = parse_properties("Pmin=? [F s=12];")
    assert evaluate_property(auv1.mdp, prop, labels=auv1.labels).value == 1.0
    _, one = qualitative_reach(auv1.mdp, auv1.states("s=12"), MIN)
    assert one[auv1.mdp.initial]


def test_filter_at_zero_steps(auv1):
    (prop,) = parse_properties('filter(min, Pmin=? [F<=0 "safe"], "unsafe");')
    assert evaluate_property(auv1.mdp, prop, labels=auv1.labels).value == 0.0


def test_safe_unsafe_partition(auv1, auv2):
    for auv in (auv1, auv2):
        safe, unsafe = auv.states('"safe"'), auv.states('"unsafe"')
        assert not (safe & unsafe).any() and (safe | unsafe).all()


def test_corpus_duality(auv1):
    safe = auv1.states('"safe"')
    g = invariant_probability(auv1.mdp, safe, MIN, epsilon=1e-10)
    f = reach_probability(auv1.mdp, ~safe, MAX, epsilon=1e-10)
    assert np.allclose(g + f, 1.0, atol=1e-10, rtol=0)
    lo = reach_probability(auv1.mdp, ~safe, MIN)
    assert (lo <= f + 1e-12).all()


def test_filter_empty():
    _, mdp = compile_text("root feature modules m; endfeature module m x : [0..1] init 0; [a] true -> (x'=1-x); endmodule")
    (prop,) = parse_properties("filter(avg, Pmax=? [F x=1], x=2);")
    with pytest.raises(CheckError, match="filter matches no states"):
        evaluate_property(mdp, prop)


def test_unknown_label():
    _, mdp = compile_text("root feature modules m; endfeature module m x : [0..1] init 0; [a] true -> (x'=1-x); endmodule")
    (prop,) = parse_properties('Pmax=? [F "goal"];')
    with pytest.raises(Exception, match="goal"):
        evaluate_property(mdp, prop)


def test_unbound_parameter():
    _, mdp = compile_text("root feature modules m; endfeature module m x : [0..1] init 0; [a] true -> (x'=1-x); endmodule")
    (prop,) = parse_properties("Pmax=? [F<=k x=1];")
    with pytest.raises(CheckError, match="not bound"):
        evaluate_property(mdp, prop, {})


def test_experiment_series_matches_pointwise(auv1):
    (prop,) = parse_properties('filter(min, Pmin=? [F<=k "safe"], "unsafe");')
    series = run_experiment(auv1.mdp, prop, "k", 0, 10, labels=auv1.labels).series
    values = [v for _, v in series]
    assert [k for k, _ in series] == list(range(11))
    assert values == sorted(values)
    for k in (0, 3, 10):
        assert evaluate_property(auv1.mdp, prop, {"k": k}, auv1.labels).value == values[k]


def test_experiment_threads_identical():
    _, mdp = compile_text(
        "root feature modules m; endfeature module m x : [0..6] init 0;"
        " [a] x<6 -> 0.5:(x'=x+1) + 0.5:true; [a] x=6 -> true; endmodule",
    )
    (prop,) = parse_properties("Pmin=? [F<=10 x>=n];")
    one = run_experiment(mdp, prop, "n", 0, 6)
    many = run_experiment(mdp, prop, "n", 0, 6, options=CheckOptions(threads=4))
    assert one == many


def test_empty_experiment_range():
    with pytest.raises(CheckError, match="empty"):
        run_experiment(GEOMETRIC, None, "k", 3, 2)


@pytest.mark.parametrize("value, text", [(1.0, "1.0"), (math.inf, "inf"), (0.1 + 0.2, "0.30000000000000004")])
def test_format_value(value, text):
    assert format_value(value) == text
