import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featmc.errors import FeatureModelError
from featmc.features import (
    ALL_OF,
    ONE_OF,
    FeatureModel,
    apply_switch,
    build_feature_model,
    enumerate_configurations,
    initial_configuration,
    validate_configuration,
)
from featmc.language import parse_expression


def auv_fm():
    return build_feature_model(
        "root",
        {
            "root": (ALL_OF, ["robot"]),
            "robot": (ALL_OF, ["navigation", "pipeline_inspection"]),
            "navigation": (ONE_OF, ["low", "med", "high"]),
            "pipeline_inspection": (ONE_OF, ["search", "follow"]),
        },
        constraints=[parse_expression("active(follow) => active(low)")],
        initial=[parse_expression("active(search) & active(low)")],
    )


BASE = {"root", "robot", "navigation", "pipeline_inspection"}


def leaves(config, fm):
    return {f for f in fm.leaves() if f in config}


def test_valid_configuration():
    fm = auv_fm()
    assert validate_configuration(fm, BASE | {"low", "search"})


def test_follow_requires_low():
    assert not validate_configuration(auv_fm(), BASE | {"high", "follow"})


def test_empty_configuration_invalid():
    assert not validate_configuration(auv_fm(), set())


def test_unknown_feature_rejected_by_name():
    with pytest.raises(FeatureModelError, match="unknown feature hover"):
        validate_configuration(auv_fm(), BASE | {"hover"})


def test_auv_has_four_configurations():
    fm = auv_fm()
    got = [leaves(c, fm) for c in enumerate_configurations(fm)]
    assert got == [{"low", "search"}, {"med", "search"}, {"high", "search"}, {"low", "follow"}]


def test_single_mandatory_child():
    fm = build_feature_model("r", {"r": (ALL_OF, ["a"])})
    assert len(enumerate_configurations(fm)) == 1


def test_one_of_three():
    fm = build_feature_model("r", {"r": (ONE_OF, ["a", "b", "c"])})
    assert len(enumerate_configurations(fm)) == 3


def test_switch_altitude():
    fm = auv_fm()
    start = fm.config(BASE | {"low", "search"})
    out = apply_switch(fm, start, {"med"}, {"low", "high"})
    assert leaves(out, fm) == {"med", "search"}


def test_switch_noop_reactivation():
    fm = auv_fm()
    start = fm.config(BASE | {"low", "search"})
    assert apply_switch(fm, start, {"low"}, set()) == start


def test_switch_violating_one_of():
    fm = auv_fm()
    start = fm.config(BASE | {"low", "search"})
    with pytest.raises(FeatureModelError, match="one-of group of pipeline_inspection"):
        apply_switch(fm, start, {"follow"}, set())


def test_switch_violating_constraint_names_it():
    fm = auv_fm()
    start = fm.config(BASE | {"high", "search"})
    with pytest.raises(FeatureModelError, match="constraint"):
        apply_switch(fm, start, {"follow"}, {"search"})


def test_switch_overlapping_sets():
    fm = auv_fm()
    with pytest.raises(FeatureModelError):
        apply_switch(fm, fm.config(BASE | {"low", "search"}), {"low"}, {"low"})


def test_initial_configuration_unique():
    fm = auv_fm()
    assert leaves(initial_configuration(fm), fm) == {"low", "search"}


def test_ambiguous_initial_configuration():
    fm = FeatureModel(auv_fm().features, auv_fm().groups, initial_constraint=(parse_expression("active(search)"),))
    with pytest.raises(FeatureModelError, match="exactly one"):
        initial_configuration(fm)


@pytest.mark.parametrize(
    "features, groups, message",
    [
        (("r", "a"), {"r": (ALL_OF, ("a",)), "a": (ALL_OF, ("r",))}, "one root"),
        (("r", "a", "b"), {"r": (ALL_OF, ("a",)), "b": (ALL_OF, ("a",))}, "two parents"),
        (("r", "a"), {"r": ("some", ("a",))}, "group kind"),
        (("r", "a"), {"r": (ALL_OF, ("a", "zz"))}, "unknown feature"),
    ],
)
def test_malformed_trees(features, groups, message):
    with pytest.raises(FeatureModelError, match=message):
        FeatureModel(features, groups)


def test_constraint_on_unknown_feature():
    with pytest.raises(FeatureModelError, match="unknown feature"):
        FeatureModel(("r", "a"), {"r": (ALL_OF, ("a",))}, (parse_expression("active(b)"),))


# random trees: enumeration equals a brute-force filter of every subset


@st.composite
def feature_trees(draw):
    n = draw(st.integers(2, 9))
    names = [f"f{i}" for i in range(n)]
    children = {}
    for i in range(1, n):
        parent = draw(st.integers(0, i - 1))
        children.setdefault(names[parent], []).append(names[i])
    groups = {p: (draw(st.sampled_from([ALL_OF, ONE_OF])), tuple(c)) for p, c in children.items()}
    constraints = []
    if draw(st.booleans()):
        a, b = draw(st.sampled_from(names)), draw(st.sampled_from(names))
        constraints.append(parse_expression(f"active({a}) => !active({b})"))
    return build_feature_model("f0", groups, constraints)


@settings(max_examples=60, deadline=None)
@given(feature_trees())
def test_enumeration_matches_brute_force(fm):
    brute = []
    for bits in itertools.product([0, 1], repeat=len(fm.features)):
        names = {f for f, b in zip(fm.features, bits) if b}
        if validate_configuration(fm, names):
            brute.append(fm.config(names).mask)
    got = [c.mask for c in enumerate_configurations(fm)]
    assert got == sorted(brute)
    assert all(validate_configuration(fm, c) for c in enumerate_configurations(fm))


@settings(max_examples=40, deadline=None)
@given(feature_trees(), st.data())
def test_switch_idempotent(fm, data):
    configs = enumerate_configurations(fm)
    if not configs:
        return
    c = data.draw(st.sampled_from(configs))
    on = data.draw(st.sets(st.sampled_from(sorted(c.names()))))
    off = data.draw(st.sets(st.sampled_from(sorted(set(fm.features) - c.names())))) if len(c.names()) < len(fm.features) else set()
    assert apply_switch(fm, c, on, off) == c
