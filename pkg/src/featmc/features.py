"""Feature trees, configuration validity and runtime feature switches.

A configuration is a bit mask over the feature model's feature order, so
membership tests and hashing are O(1) regardless of how many features exist.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import FeatureModelError
from .language import syntax as ast
from .language.evaluate import evaluate_expr

ALL_OF, ONE_OF = "all", "one"


@dataclass(frozen=True)
class Configuration:
    mask: int
    index: Mapping[str, int] = field(compare=False, hash=False, repr=False)

    def __contains__(self, feature: str) -> bool:
        return bool(self.mask >> self.index[feature] & 1)

    def names(self) -> frozenset[str]:
        return frozenset(f for f, i in self.index.items() if self.mask >> i & 1)

    def __repr__(self) -> str:
        ordered = sorted(self.names(), key=self.index.__getitem__)
        return "{" + ", ".join(ordered) + "}"


@dataclass(frozen=True)
class FeatureModel:
    features: tuple[str, ...]
    groups: Mapping[str, tuple[str, tuple[str, ...]]]  # parent -> (kind, children)
    constraints: tuple[ast.Expr, ...] = ()
    initial_constraint: tuple[ast.Expr, ...] = ()
    index: Mapping[str, int] = field(init=False, compare=False, repr=False)
    parent: Mapping[str, str] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if len(set(self.features)) != len(self.features):
            raise FeatureModelError("duplicate feature names")
        object.__setattr__(self, "index", {f: i for i, f in enumerate(self.features)})
        parent: dict[str, str] = {}
        for p, (kind, children) in self.groups.items():
            if kind not in (ALL_OF, ONE_OF):
                raise FeatureModelError(f"unknown group kind {kind!r} for feature {p}")
            for f in (p, *children):
                if f not in self.index:
                    raise FeatureModelError(f"unknown feature {f}")
            for c in children:
                if c in parent:
                    raise FeatureModelError(f"feature {c} has two parents ({parent[c]}, {p})")
                parent[c] = p
        roots = [f for f in self.features if f not in parent]
        if len(roots) != 1:
            raise FeatureModelError(f"feature tree must have exactly one root, found {roots}")
        # every feature must be reachable from the root (rules out cycles)
        seen, stack = set(), [roots[0]]
        while stack:
            f = stack.pop()
            seen.add(f)
            stack.extend(self.groups.get(f, (None, ()))[1])
        if seen != set(self.features):
            raise FeatureModelError(f"features not connected to the root: {sorted(set(self.features) - seen)}")
        object.__setattr__(self, "parent", parent)
        for expr in (*self.constraints, *self.initial_constraint):
            for name in _active_atoms(expr):
                if name not in self.index:
                    raise FeatureModelError(f"constraint references unknown feature {name}", expr.pos)

    @property
    def root(self) -> str:
        return next(f for f in self.features if f not in self.parent)

    def leaves(self) -> tuple[str, ...]:
        return tuple(f for f in self.features if f not in self.groups)

    def config(self, names: Iterable[str]) -> Configuration:
        mask = 0
        for name in names:
            try:
                mask |= 1 << self.index[name]
            except KeyError:
                raise FeatureModelError(f"unknown feature {name}") from None
        return Configuration(mask, self.index)

    def from_mask(self, mask: int) -> Configuration:
        return Configuration(mask, self.index)


def _active_atoms(expr: ast.Expr) -> set[str]:
    found: set[str] = set()

    def walk(e):
        if isinstance(e, ast.Active):
            found.add(e.feature)
        for child in getattr(e, "__dict__", {}).values():
            if isinstance(child, ast.Expr):
                walk(child)
            elif isinstance(child, tuple):
                for c in child:
                    if isinstance(c, ast.Expr):
                        walk(c)

    walk(expr)
    return found


def violations(fm: FeatureModel, config: Configuration) -> list[str]:
    """Human-readable reasons why ``config`` is invalid (empty if valid)."""
    out = []
    if fm.root not in config:
        out.append(f"root feature {fm.root} is inactive")
    for f in fm.features:
        p = fm.parent.get(f)
        if p is not None and f in config and p not in config:
            out.append(f"feature {f} is active but its parent {p} is not")
    for p, (kind, children) in fm.groups.items():
        if p not in config:
            continue
        active = [c for c in children if c in config]
        if kind == ALL_OF and len(active) != len(children):
            missing = [c for c in children if c not in config]
            out.append(f"all-of group of {p} requires {', '.join(missing)}")
        elif kind == ONE_OF and len(active) != 1:
            out.append(f"one-of group of {p} has {len(active)} active children ({', '.join(active) or 'none'})")
    for expr in fm.constraints:
        if not evaluate_expr(expr, {}, config):
            from .language.printer import print_expr

            out.append(f"constraint {print_expr(expr)} is violated")
    return out


def validate_configuration(fm: FeatureModel, config: Configuration | Iterable[str]) -> bool:
    if not isinstance(config, Configuration):
        config = fm.config(config)
    elif config.mask >> len(fm.features):
        raise FeatureModelError("configuration references features outside the model")
    return not violations(fm, config)


def _tree_candidates(fm: FeatureModel, feature: str) -> list[int]:
    """Masks of the subtree under an active ``feature`` satisfying all group rules."""
    bit = 1 << fm.index[feature]
    if feature not in fm.groups:
        return [bit]
    kind, children = fm.groups[feature]
    if kind == ALL_OF:
        parts = [_tree_candidates(fm, c) for c in children]
        return [bit | sum(combo) for combo in itertools.product(*parts)]
    return [bit | m for c in children for m in _tree_candidates(fm, c)]


def enumerate_configurations(fm: FeatureModel) -> list[Configuration]:
    """All valid configurations, ordered by ascending bit mask (bit i = feature i)."""
    masks = sorted(_tree_candidates(fm, fm.root))
    out = []
    for mask in masks:
        config = fm.from_mask(mask)
        if all(evaluate_expr(c, {}, config) for c in fm.constraints):
            out.append(config)
    return out


def apply_switch(
    fm: FeatureModel,
    config: Configuration,
    activate: Iterable[str] = (),
    deactivate: Iterable[str] = (),
) -> Configuration:
    activate, deactivate = set(activate), set(deactivate)
    both = activate & deactivate
    if both:
        raise FeatureModelError(f"features both activated and deactivated: {', '.join(sorted(both))}")
    on = fm.config(activate).mask
    off = fm.config(deactivate).mask
    result = fm.from_mask((config.mask | on) & ~off)
    problems = violations(fm, result)
    if problems:
        raise FeatureModelError(f"feature switch to {result!r} is invalid: " + "; ".join(problems))
    return result


def initial_configuration(fm: FeatureModel) -> Configuration:
    """The unique valid configuration satisfying the initial constraint."""
    matches = [c for c in enumerate_configurations(fm) if all(evaluate_expr(e, {}, c) for e in fm.initial_constraint)]
    if len(matches) != 1:
        shown = ", ".join(repr(c) for c in matches) or "none"
        raise FeatureModelError(
            f"initial constraint must select exactly one valid configuration, found {len(matches)}: {shown}"
        )
    return matches[0]


def build_feature_model(
    root: str,
    groups: Mapping[str, tuple[str, Sequence[str]]],
    constraints: Sequence[ast.Expr] = (),
    initial: Sequence[ast.Expr] = (),
) -> FeatureModel:
    """Construct a model with features numbered breadth-first from ``root``."""
    order, queue = [], [root]
    while queue:
        f = queue.pop(0)
        if f in order:
            raise FeatureModelError(f"feature {f} appears twice in the tree")
        order.append(f)
        queue.extend(groups.get(f, (None, ()))[1])
    frozen = {p: (k, tuple(c)) for p, (k, c) in groups.items()}
    return FeatureModel(tuple(order), frozen, tuple(constraints), tuple(initial))
