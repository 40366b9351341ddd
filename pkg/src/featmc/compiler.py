"""Explicit-state MDP construction.

States are flat int tuples ``(*variable_values, feature_mask)``; the feature
configuration is part of the state because the controller switches features
at runtime. Exploration is breadth-first from the unique initial state, so
recompiling a model always yields the same state numbering.
"""

from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import CompileError, FeatureModelError
from .features import Configuration, apply_switch
from .language import syntax as ast
from .language.evaluate import compile_expr
from .language.printer import print_expr
from .language.typecheck import TypedCommand, TypedModel, TypedSwitch

DEFAULT_STATE_CAP = 10**7


def default_state_cap() -> int:
    """The state-space cap, overridable through FEATMC_STATE_CAP."""
    value = os.environ.get("FEATMC_STATE_CAP", "").strip()
    if not value:
        return DEFAULT_STATE_CAP
    try:
        cap = int(value)
    except ValueError:
        cap = 0
    if cap < 1:
        raise CompileError(f"FEATMC_STATE_CAP must be a positive integer, got {value!r}")
    return cap


@dataclass(frozen=True)
class JointChoice:
    action: str | None
    commands: tuple[TypedCommand, ...]
    switch: TypedSwitch | None
    branches: tuple[tuple[tuple, Fraction], ...]  # (target state, probability), duplicates merged

    @property
    def activates(self) -> frozenset[str]:
        return self.switch.activate if self.switch else frozenset()

    @property
    def deactivates(self) -> frozenset[str]:
        return self.switch.deactivate if self.switch else frozenset()


@dataclass
class _Cmd:
    typed: TypedCommand
    guard: Callable
    branches: list  # [(prob, [(slot, fn, update_expr)])]


@dataclass
class _Switch:
    typed: TypedSwitch
    guard: Callable


class Explorer:
    """Per-state synchronisation of modules and controller; drives ``compile``."""

    def __init__(self, model: TypedModel):
        self.model = model
        fm = model.feature_model
        self.mask_slot = len(model.variables)
        self.feature_bits = dict(fm.index)
        self._switch_cache: dict[tuple[int, int], int] = {}
        self._checked: set[int] = set()
        self._prob_cache: dict[tuple, list] = {}

        def fn(expr):
            return compile_expr(expr, self.feature_bits, self.mask_slot)

        self.modules: list[tuple[str, list[_Cmd]]] = []
        for m in model.modules:
            cmds = []
            for c in m.commands:
                branches = [(b.prob, [(slot, fn(e), e) for slot, e in b.updates]) for b in c.branches]
                cmds.append(_Cmd(c, fn(c.guard), branches))
            self.modules.append((m.name, cmds))
        self.switches = [_Switch(s, fn(s.guard)) for s in (model.controller or ())]

        # labelled actions in order of first appearance; modules first, controller last
        self.actions: list[str] = []
        for _, cmds in self.modules:
            for c in cmds:
                if c.typed.action is not None and c.typed.action not in self.actions:
                    self.actions.append(c.typed.action)
        for s in self.switches:
            if s.typed.action is not None and s.typed.action not in self.actions:
                self.actions.append(s.typed.action)
        self.components: dict[str, tuple[list[list[_Cmd]], list[_Switch] | None]] = {}
        for a in self.actions:
            mods = [[c for c in cmds if c.typed.action == a] for _, cmds in self.modules]
            mods = [cs for cs in mods if cs]
            sws = [s for s in self.switches if s.typed.action == a]
            ctrl_has = any(s.typed.action == a for s in self.switches)
            self.components[a] = (mods, sws if ctrl_has else None)
        self.unlabelled = [c for _, cmds in self.modules for c in cmds if c.typed.action is None]
        self.unlabelled_switches = [s for s in self.switches if s.typed.action is None]
        self.bounds = [(v.low, v.high, v.name) for v in model.variables]

    def initial_state(self) -> tuple:
        return tuple(v.init for v in self.model.variables) + (self.model.initial_config.mask,)

    def describe(self, state: tuple) -> str:
        fm = self.model.feature_model
        vals = ", ".join(f"{v.name}={x}" for v, x in zip(self.model.variables, state))
        leaves = [f for f in fm.leaves() if state[self.mask_slot] >> fm.index[f] & 1]
        return f"({vals}) {{{', '.join(leaves)}}}"

    # ------------------------------------------------------------------

    def _check_distribution(self, cmd: _Cmd):
        key = id(cmd)
        if key in self._checked:
            return
        total = sum((p for p, _ in cmd.branches), Fraction(0))
        if any(p < 0 for p, _ in cmd.branches):
            raise CompileError(f"negative probability in {cmd.typed.describe()}")
        if total != 1:
            raise CompileError(f"probabilities of {cmd.typed.describe()} sum to {total}, not 1")
        self._checked.add(key)

    def _switch(self, state: tuple, sw: _Switch | None) -> int:
        mask = state[self.mask_slot]
        if sw is None:
            return mask
        key = (mask, sw.typed.number)
        cached = self._switch_cache.get(key)
        if cached is None:
            fm = self.model.feature_model
            try:
                cached = apply_switch(fm, fm.from_mask(mask), sw.typed.activate, sw.typed.deactivate).mask
            except FeatureModelError as exc:
                raise CompileError(f"{sw.typed.describe()} in state {self.describe(state)}: {exc.message}") from None
            self._switch_cache[key] = cached
        return cached

    def _joint_branches(self, cmds: tuple[_Cmd, ...]) -> list:
        key = tuple(id(c) for c in cmds)
        cached = self._prob_cache.get(key)
        if cached is None:
            cached = []
            for combo in itertools.product(*(c.branches for c in cmds)):
                prob = Fraction(1)
                for p, _ in combo:
                    prob *= p
                if prob:
                    cached.append((prob, [u for _, ups in combo for u in ups]))
            self._prob_cache[key] = cached
        return cached

    def _combine(self, state, action, cmds: tuple[_Cmd, ...], sw: _Switch | None) -> JointChoice:
        for c in cmds:
            self._check_distribution(c)
        new_mask = self._switch(state, sw)
        merged: dict[tuple, Fraction] = {}
        base = list(state)
        for prob, updates in self._joint_branches(cmds):
            vals = base.copy()
            for slot, f, expr in updates:
                value = f(state)
                low, high, name = self.bounds[slot]
                if not (isinstance(value, int) and low <= value <= high):
                    owner = next(c.typed for c in cmds if any(u[0] == slot for b in c.branches for u in b[1]))
                    raise CompileError(
                        f"update ({name}'={print_expr(expr)}) in {owner.describe()} yields {value}, "
                        f"outside [{low}..{high}], in state {self.describe(state)}"
                    )
                vals[slot] = value
            vals[self.mask_slot] = new_mask
            target = tuple(vals)
            merged[target] = merged.get(target, Fraction(0)) + prob
        return JointChoice(action, tuple(c.typed for c in cmds), sw.typed if sw else None, tuple(merged.items()))

    def joint_choices(self, state: tuple) -> list[JointChoice]:
        """All nondeterministic choices of ``state`` in deterministic order."""
        out = []
        for action in self.actions:
            mods, sws = self.components[action]
            enabled = []
            for cmds in mods:
                en = [c for c in cmds if c.guard(state)]
                if not en:
                    break
                enabled.append(en)
            else:
                if sws is not None:
                    en_sw = [s for s in sws if s.guard(state)]
                    if not en_sw:
                        continue
                else:
                    en_sw = [None]
                for combo in itertools.product(*enabled):
                    for sw in en_sw:
                        out.append(self._combine(state, action, combo, sw))
        for c in self.unlabelled:
            if c.guard(state):
                out.append(self._combine(state, None, (c,), None))
        for s in self.unlabelled_switches:
            if s.guard(state):
                out.append(self._combine(state, None, (), s))
        return out


def joint_choices(explorer: Explorer, state: tuple) -> list[JointChoice]:
    return explorer.joint_choices(state)


# --------------------------------------------------------------------------


@dataclass(eq=False)
class CompiledMdp:
    model: TypedModel
    states: list[tuple]
    choice_offsets: np.ndarray  # state -> first choice; length n+1
    actions: list[str | None]
    trans_offsets: np.ndarray  # choice -> first transition; length m+1
    targets: np.ndarray
    probs: list[Fraction]
    state_rewards: dict[str, list[Fraction]]
    transition_rewards: dict[str, list[Fraction]]
    labels: dict[str, np.ndarray]
    switches: list[TypedSwitch | None] = field(default_factory=list)

    initial: int = 0

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_choices(self) -> int:
        return len(self.actions)

    @property
    def num_transitions(self) -> int:
        return len(self.targets)

    @property
    def mask_slot(self) -> int:
        return len(self.model.variables)

    def choices(self, s: int) -> range:
        return range(int(self.choice_offsets[s]), int(self.choice_offsets[s + 1]))

    def distribution(self, c: int) -> list[tuple[int, Fraction]]:
        lo, hi = int(self.trans_offsets[c]), int(self.trans_offsets[c + 1])
        return [(int(self.targets[i]), self.probs[i]) for i in range(lo, hi)]

    def valuation(self, s: int) -> dict[str, int]:
        return {v.name: x for v, x in zip(self.model.variables, self.states[s])}

    def config(self, s: int) -> Configuration:
        return self.model.feature_model.from_mask(self.states[s][self.mask_slot])

    def describe(self, s: int) -> str:
        if self.model is None:
            return str(self.states[s])
        fm = self.model.feature_model
        vals = ", ".join(f"{k}={v}" for k, v in self.valuation(s).items())
        leaves = [f for f in fm.leaves() if f in self.config(s)]
        return f"{vals} {{{', '.join(leaves)}}}"

    # numeric views used by the checker -------------------------------------

    @cached_property
    def choice_state(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_states), np.diff(self.choice_offsets))

    @cached_property
    def prob_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs], dtype=np.float64)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Choice-by-state transition matrix with float probabilities."""
        return sp.csr_matrix(
            (self.prob_array, self.targets, self.trans_offsets), shape=(self.num_choices, self.num_states)
        )

    @cached_property
    def pattern(self) -> sp.csr_matrix:
        """0/1 successor pattern of ``matrix``."""
        return sp.csr_matrix(
            (np.ones(self.num_transitions), self.targets, self.trans_offsets),
            shape=(self.num_choices, self.num_states),
        )

    def state_reward_array(self, name: str) -> np.ndarray:
        return np.array([float(x) for x in self.state_rewards[name]], dtype=np.float64)

    def transition_reward_array(self, name: str) -> np.ndarray:
        return np.array([float(x) for x in self.transition_rewards[name]], dtype=np.float64)

    # state sets ---------------------------------------------------------------

    def state_set(self, expr: ast.Expr, labels: Mapping[str, ast.Expr] | None = None) -> np.ndarray:
        """Boolean vector of states satisfying a typed state formula."""
        labels = labels or {}
        if isinstance(expr, ast.LabelRef):
            if expr.name in self.labels:
                return self.labels[expr.name].copy()
            if expr.name in labels:
                return self.state_set(labels[expr.name], labels)
            raise CompileError(f'unknown label "{expr.name}"', expr.pos)
        if isinstance(expr, ast.Literal):
            return np.full(self.num_states, bool(expr.value))
        if isinstance(expr, ast.Unary) and expr.op == "!":
            return ~self.state_set(expr.operand, labels)
        if isinstance(expr, ast.Binary) and expr.op in ("&", "|", "=>"):
            a = self.state_set(expr.left, labels)
            b = self.state_set(expr.right, labels)
            if expr.op == "&":
                return a & b
            if expr.op == "|":
                return a | b
            return ~a | b
        f = compile_expr(expr, self.model.feature_model.index, self.mask_slot)
        return np.fromiter((bool(f(s)) for s in self.states), dtype=bool, count=self.num_states)

    def stats(self) -> dict[str, int]:
        out = {
            "states": self.num_states,
            "choices": self.num_choices,
            "transitions": self.num_transitions,
        }
        for name in sorted(self.labels):
            out[f"label.{name}"] = int(self.labels[name].sum())
        return out


def _witness(parents: dict, state: tuple, explorer: Explorer) -> str:
    path = []
    cur = state
    while cur is not None:
        path.append(explorer.describe(cur))
        cur = parents[cur]
    return " -> ".join(reversed(path))


def compile_model(model: TypedModel, state_cap: int | None = None) -> CompiledMdp:
    """Build the reachable MDP of a typed model."""
    cap = default_state_cap() if state_cap is None else state_cap
    ex = Explorer(model)
    init = ex.initial_state()
    index: dict[tuple, int] = {init: 0}
    states = [init]
    parents: dict[tuple, tuple | None] = {init: None}
    choice_offsets = [0]
    actions: list[str | None] = []
    switches: list[TypedSwitch | None] = []
    trans_offsets = [0]
    targets: list[int] = []
    probs: list[Fraction] = []
    choice_sources: list[tuple] = []

    queue = deque([init])
    while queue:
        state = queue.popleft()
        choices = ex.joint_choices(state)
        if not choices:
            raise CompileError(f"deadlock in state {ex.describe(state)}; witness path: {_witness(parents, state, ex)}")
        for ch in choices:
            dist = []
            for target, prob in ch.branches:
                t = index.get(target)
                if t is None:
                    t = len(states)
                    if t >= cap:
                        raise CompileError(f"state space exceeds the cap of {cap} states")
                    index[target] = t
                    states.append(target)
                    parents[target] = state
                    queue.append(target)
                dist.append((t, prob))
            dist.sort()
            for t, p in dist:
                targets.append(t)
                probs.append(p)
            trans_offsets.append(len(targets))
            actions.append(ch.action)
            switches.append(ch.switch)
            choice_sources.append(state)
        choice_offsets.append(len(actions))

    state_rewards, transition_rewards = _rewards(model, ex, states, choice_sources, actions)
    labels = {}
    for name, expr in model.labels.items():
        f = compile_expr(expr, ex.feature_bits, ex.mask_slot)
        labels[name] = np.fromiter((bool(f(s)) for s in states), dtype=bool, count=len(states))

    return CompiledMdp(
        model=model,
        states=states,
        choice_offsets=np.asarray(choice_offsets, dtype=np.int64),
        actions=actions,
        trans_offsets=np.asarray(trans_offsets, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.int64),
        probs=probs,
        state_rewards=state_rewards,
        transition_rewards=transition_rewards,
        labels=labels,
        switches=switches,
    )


def _rewards(model, ex: Explorer, states, choice_sources, actions):
    state_rewards: dict[str, list[Fraction]] = {}
    transition_rewards: dict[str, list[Fraction]] = {}
    for name, items in model.rewards.items():
        compiled = [
            (it, compile_expr(it.guard, ex.feature_bits, ex.mask_slot), compile_expr(it.value, ex.feature_bits, ex.mask_slot))
            for it in items
        ]
        s_items = [(g, v, it) for it, g, v in compiled if not it.transition]
        t_items = [(g, v, it) for it, g, v in compiled if it.transition]
        sr = []
        for s in states:
            total = Fraction(0)
            for g, v, it in s_items:
                if g(s):
                    total += _reward_value(v, it, s, ex, name)
            sr.append(total)
        tr = []
        for s, a in zip(choice_sources, actions):
            total = Fraction(0)
            for g, v, it in t_items:
                if it.action == a and g(s):
                    total += _reward_value(v, it, s, ex, name)
            tr.append(total)
        state_rewards[name] = sr
        transition_rewards[name] = tr
    return state_rewards, transition_rewards


def _reward_value(fn, item, state, ex: Explorer, name: str) -> Fraction:
    value = Fraction(fn(state))
    if value < 0:
        raise CompileError(
            f'reward "{name}" item {print_expr(item.guard)} : {print_expr(item.value)} is negative ({value}) '
            f"in state {ex.describe(state)}"
        )
    return value

