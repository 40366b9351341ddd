from fractions import Fraction

import pytest

from featmc.compiler import Explorer, compile_model, default_state_cap, joint_choices
from featmc.errors import CompileError
from featmc.language import parse_model, typecheck

from conftest import SCENARIO_1, compile_text

BASE = {"root", "robot", "navigation", "pipeline_inspection"}
S = {"start_task": 0, "search_high": 2, "search_med": 3, "found": 8, "following": 9, "recover_high": 5}


def state(auv, leaves, s, water_visib=5, d_insp=0, t_failed=0):
    mask = auv.model.feature_model.config(BASE | set(leaves)).mask
    return (s, d_insp, t_failed, water_visib, mask)


def auv_marginal(choice):
    """Probability of each successor `s` value, summed over the environment."""
    out = {}
    for target, p in choice.branches:
        out[target[0]] = out.get(target[0], Fraction(0)) + p
    return out


def test_search_high_marginal(auv1):
    ex = Explorer(auv1.model)
    src = state(auv1, {"high", "search"}, S["search_high"], water_visib=8)
    choices = joint_choices(ex, src)
    assert choices
    for c in choices:
        assert auv_marginal(c) == {
            S["found"]: Fraction(59, 100),
            S["search_high"]: Fraction(2, 5),
            S["recover_high"]: Fraction(1, 100),
        }
        # each auv branch splits into the three environment outcomes
        assert len(c.branches) == 9


def test_search_high_descends_to_med(auv1):
    ex = Explorer(auv1.model)
    src = state(auv1, {"med", "search"}, S["search_high"], water_visib=5)
    for c in joint_choices(ex, src):
        assert auv_marginal(c) == {S["search_med"]: 1}


def test_found_has_single_switch(auv1):
    ex = Explorer(auv1.model)
    (c,) = joint_choices(ex, state(auv1, {"high", "search"}, S["found"], water_visib=8))
    assert {"low", "follow"} <= c.activates
    assert "search" in c.deactivates
    assert all(ex.describe(t).endswith("{low, follow}") for t, _ in c.branches)


def test_following_only_noop_switch(auv1):
    ex = Explorer(auv1.model)
    choices = joint_choices(ex, state(auv1, {"low", "follow"}, S["following"]))
    assert len(choices) == 1
    assert choices[0].activates == frozenset() and choices[0].deactivates == frozenset()


def test_high_visibility_offers_three_altitudes(auv1):
    ex = Explorer(auv1.model)
    choices = joint_choices(ex, state(auv1, {"low", "search"}, S["search_med"], water_visib=10))
    assert len(choices) == 3
    picked = [c.activates & {"low", "med", "high"} for c in choices]
    assert sorted(map(sorted, picked)) == [["high"], ["low"], ["med"]]


def test_no_high_configuration_below_threshold(auv1):
    # after any controller move, high altitude is only chosen at high visibility
    high_visib = Fraction(2 * (10 - 1), 3)
    mdp = auv1.mdp
    for c, sw in enumerate(mdp.switches):
        if sw is not None and "high" in sw.activate:
            src = mdp.valuation(int(mdp.choice_state[c]))
            assert src["water_visib"] >= high_visib


def test_product_of_independent_halves():
    text = """
    root feature modules a, b; endfeature
    module a x : [0..1] init 0; [step] true -> 0.5:(x'=0) + 0.5:(x'=1); endmodule
    module b y : [0..1] init 0; [step] true -> 0.5:(y'=0) + 0.5:(y'=1); endmodule
    """
    model, _ = compile_text(text)
    ex = Explorer(model)
    (c,) = joint_choices(ex, ex.initial_state())
    assert len(c.branches) == 4
    assert all(p == Fraction(1, 4) for _, p in c.branches)


def test_auv_state_space(auv1):
    mdp = auv1.mdp
    assert {mdp.valuation(s)["s"] for s in range(mdp.num_states)} == set(range(13))
    # 13 * (inspect+1) * (infl_tf+1) * |visibility| * 4 configurations
    assert mdp.num_states <= 13 * 11 * 3 * 10 * 4
    assert mdp.num_choices >= mdp.num_states


def test_every_state_has_choice_and_distributions_sum_to_one(auv1, auv2):
    for auv in (auv1, auv2):
        mdp = auv.mdp
        for s in range(mdp.num_states):
            assert len(mdp.choices(s)) >= 1
        for c in range(mdp.num_choices):
            assert sum(p for _, p in mdp.distribution(c)) == 1


def test_configurations_valid(auv1):
    from featmc.features import validate_configuration

    fm = auv1.model.feature_model
    assert all(validate_configuration(fm, auv1.mdp.config(s)) for s in range(auv1.mdp.num_states))


def test_recompile_identical(auv1):
    again = compile_model(auv1.model)
    assert again.states == auv1.mdp.states
    assert again.probs == auv1.mdp.probs
    assert (again.targets == auv1.mdp.targets).all()


def test_reward_values(auv1):
    mdp = auv1.mdp
    time = mdp.transition_reward_array("time")
    assert set(time.tolist()) == {1.0}
    energy = mdp.state_reward_array("energy")
    assert set(energy.tolist()) <= {1.0, 2.0, 4.0}


# ---- compile errors -------------------------------------------------------------


def _one_module(body: str, header: str = "") -> str:
    return header + "root feature modules m; endfeature\nmodule m\n  x : [0..3] init 0;\n" + body + "endmodule\n"


def test_deadlock_has_witness():
    with pytest.raises(CompileError, match="deadlock") as err:
        compile_text(_one_module("  [a] x<2 -> (x'=x+1);\n"))
    assert "x=2" in str(err.value)


def test_probability_sum():
    with pytest.raises(CompileError, match="sum"):
        compile_text(_one_module("  [a] true -> 0.5:(x'=1) + 0.3:(x'=0);\n"))


def test_update_out_of_range():
    with pytest.raises(CompileError, match="outside"):
        compile_text(_one_module("  [a] true -> (x'=x+1);\n"))


def test_invalid_switch():
    text = (
        "root feature one of a, b; modules m; initial constraint active(a); endfeature\n"
        "feature a endfeature feature b endfeature\n"
        "module m x : [0..1] init 0; [t] true -> true; endmodule\n"
        "controller [t] true -> activate(b); endcontroller\n"
    )
    with pytest.raises(CompileError):
        compile_text(text)


def test_state_cap():
    model = typecheck(parse_model(_one_module("  [a] true -> 0.5:(x'=min(x+1,3)) + 0.5:(x'=0);\n")))
    assert compile_model(model, state_cap=4).num_states == 4
    with pytest.raises(CompileError, match="cap"):
        compile_model(model, state_cap=3)


def test_state_cap_environment(monkeypatch, auv_text):
    monkeypatch.setenv("FEATMC_STATE_CAP", "100")
    assert default_state_cap() == 100
    with pytest.raises(CompileError, match="cap"):
        compile_model(typecheck(parse_model(auv_text), SCENARIO_1))
    monkeypatch.setenv("FEATMC_STATE_CAP", "lots")
    with pytest.raises(CompileError):
        default_state_cap()
