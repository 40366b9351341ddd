"""Probability and expected-reward queries on a compiled MDP.

Qualitative (prob0/prob1) sets come from graph fixpoints on the successor
pattern; quantitative values from Jacobi value iteration on float64 vectors.
Every per-state optimisation folds over the contiguous choice block of each
state, so results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .compiler import CompiledMdp
from .errors import CheckError, ConvergenceError
from .language import syntax as ast
from .language.typecheck import TypedProperty, resolve_property

MIN, MAX = ast.MIN, ast.MAX


@dataclass(frozen=True)
class CheckOptions:
    epsilon: float = 1e-6
    max_iters: int = 10**6
    relative: bool = True
    threads: int = 1


@dataclass(frozen=True)
class CheckResult:
    kind: str  # "scalar" | "aggregate" | "series"
    value: float | None = None
    series: tuple[tuple[int, float], ...] = ()
    vector: np.ndarray | None = field(default=None, compare=False, repr=False)


def _check_mode(mode: str) -> str:
    if mode not in (MIN, MAX):
        raise CheckError(f"mode must be 'min' or 'max', got {mode!r}")
    return mode


def _starts(mdp: CompiledMdp) -> np.ndarray:
    return mdp.choice_offsets[:-1]


class _Optimizer:
    """Per-state min/max over contiguous choice blocks.

    Folds the j-th choice of every state with at least j+1 choices into the
    running optimum; on typical models (few choices per state) this beats
    ``ufunc.reduceat`` and gives the same result.
    """

    def __init__(self, offsets: np.ndarray, num_choices: int, mode: str):
        self.combine = np.minimum if _check_mode(mode) == MIN else np.maximum
        self.first = offsets
        counts = np.diff(np.append(offsets, num_choices))
        width = int(counts.max()) if counts.size else 0
        self.columns = []
        for j in range(1, width):
            sel = np.flatnonzero(counts > j)
            self.columns.append((sel, offsets[sel] + j))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        out = values[self.first]
        for sel, idx in self.columns:
            out[sel] = self.combine(out[sel], values[idx])
        return out


def _as_mask(mdp: CompiledMdp, states) -> np.ndarray:
    arr = np.asarray(states)
    if arr.dtype == bool:
        if arr.shape != (mdp.num_states,):
            raise CheckError("state set has the wrong length")
        return arr
    mask = np.zeros(mdp.num_states, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


# --------------------------------------------------------------------------
# qualitative analysis


def _some_successor_in(mdp: CompiledMdp, states: np.ndarray) -> np.ndarray:
    return (mdp.pattern @ states.astype(np.float64)) > 0


def _all_successors_in(mdp: CompiledMdp, states: np.ndarray) -> np.ndarray:
    return (mdp.pattern @ (~states).astype(np.float64)) == 0


def _exists(mdp: CompiledMdp, per_choice: np.ndarray) -> np.ndarray:
    return np.logical_or.reduceat(per_choice, _starts(mdp))


def _forall(mdp: CompiledMdp, per_choice: np.ndarray) -> np.ndarray:
    return np.logical_and.reduceat(per_choice, _starts(mdp))


def _prob0e(mdp, target):
    """States that reach ``target`` with positive probability under some policy."""
    reach = target.copy()
    while True:
        new = target | _exists(mdp, _some_successor_in(mdp, reach))
        if np.array_equal(new, reach):
            return reach
        reach = new


def _prob0a(mdp, target):
    """States that reach ``target`` with positive probability under every policy."""
    reach = target.copy()
    while True:
        new = target | _forall(mdp, _some_successor_in(mdp, reach))
        if np.array_equal(new, reach):
            return reach
        reach = new


def _prob1e(mdp, target):
    """States from which some policy reaches ``target`` almost surely."""
    u = np.ones(mdp.num_states, dtype=bool)
    while True:
        stay = _all_successors_in(mdp, u)
        r = target.copy()
        while True:
            ok = stay & _some_successor_in(mdp, r)
            new = target | (u & _exists(mdp, ok))
            if np.array_equal(new, r):
                break
            r = new
        if np.array_equal(r, u):
            return u
        u = r


def _prob1a(mdp, target, zero_min):
    """States from which every policy reaches ``target`` almost surely."""
    bad = zero_min.copy()
    while True:
        new = bad | (~target & _exists(mdp, _some_successor_in(mdp, bad)))
        if np.array_equal(new, bad):
            return ~bad
        bad = new


def qualitative_reach(mdp: CompiledMdp, target, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """(zero_set, one_set) of states whose optimal reachability is exactly 0 / 1."""
    _check_mode(mode)
    target = _as_mask(mdp, target)
    if mode == MAX:
        zero = ~_prob0e(mdp, target)
        one = _prob1e(mdp, target)
    else:
        zero = ~_prob0a(mdp, target)
        one = _prob1a(mdp, target, zero)
    return zero, one


# --------------------------------------------------------------------------
# value iteration


def _residual(new: np.ndarray, old: np.ndarray, relative: bool) -> float:
    if new.size == 0:
        return 0.0
    diff = np.abs(new - old)
    if relative:
        scale = np.abs(new)
        np.divide(diff, scale, out=diff, where=scale > 0)
    return float(diff.max())


def _submodel(mdp: CompiledMdp, states: np.ndarray):
    """Rows of the transition matrix belonging to ``states``, with their block offsets."""
    idx = np.flatnonzero(states)
    rows = np.flatnonzero(states[mdp.choice_state])
    counts = mdp.choice_offsets[idx + 1] - mdp.choice_offsets[idx]
    offsets = (np.cumsum(counts) - counts).astype(np.int64)
    return idx, rows, offsets


def _iterate(step, x: np.ndarray, idx: np.ndarray, options: CheckOptions, what: str) -> np.ndarray:
    x = x.copy()
    res = math.inf
    for _ in range(options.max_iters):
        new_vals = step(x)  # reads only the previous iterate (Jacobi)
        res = _residual(new_vals, x[idx], options.relative)
        x[idx] = new_vals
        if res < options.epsilon:
            return x
    raise ConvergenceError(
        f"{what}: value iteration did not converge within {options.max_iters} iterations (residual {res:.3g})",
        res,
        options.max_iters,
    )


def reach_probability(
    mdp: CompiledMdp,
    target,
    mode: str,
    epsilon: float = 1e-6,
    max_iters: int = 10**6,
    *,
    relative: bool = True,
) -> np.ndarray:
    """Optimal probability of eventually reaching ``target`` from every state."""
    if epsilon <= 0:
        raise CheckError("epsilon must be positive")
    options = CheckOptions(epsilon, max_iters, relative)
    zero, one = qualitative_reach(mdp, target, mode)
    x = one.astype(np.float64)
    maybe = ~(zero | one)
    if not maybe.any():
        return x
    idx, rows, offsets = _submodel(mdp, maybe)
    sub = mdp.matrix[rows]
    opt = _Optimizer(offsets, len(rows), mode)

    def step(v):
        return opt(sub @ v)

    return _iterate(step, x, idx, options, f"P{mode}[F target]")


def bounded_reach_series(mdp: CompiledMdp, target, bounds, mode: str) -> dict[int, np.ndarray]:
    """Step-bounded reachability vectors for every bound in ``bounds`` in one sweep."""
    _check_mode(mode)
    target = _as_mask(mdp, target)
    wanted = sorted(set(int(k) for k in bounds))
    if wanted and wanted[0] < 0:
        raise CheckError("step bound must be non-negative")
    out: dict[int, np.ndarray] = {}
    x = target.astype(np.float64)
    opt = _Optimizer(_starts(mdp), mdp.num_choices, mode)
    for k in range(0, (wanted[-1] if wanted else -1) + 1):
        if k > 0:
            x = np.where(target, 1.0, opt(mdp.matrix @ x))
        if k in wanted:
            out[k] = x.copy()
    return out


def bounded_reach_probability(mdp: CompiledMdp, target, k: int, mode: str) -> np.ndarray:
    """Optimal probability of reaching ``target`` within ``k`` steps."""
    if k < 0:
        raise CheckError("step bound must be non-negative")
    return bounded_reach_series(mdp, target, [k], mode)[k]


def _dual(mode: str) -> str:
    return MAX if mode == MIN else MIN


def invariant_probability(
    mdp: CompiledMdp, safe, mode: str, epsilon: float = 1e-6, max_iters: int = 10**6, *, relative: bool = True
) -> np.ndarray:
    """Optimal probability of staying in ``safe`` forever: 1 - P_dual[F not safe]."""
    safe = _as_mask(mdp, safe)
    return 1.0 - reach_probability(mdp, ~safe, _dual(_check_mode(mode)), epsilon, max_iters, relative=relative)


def expected_reward(
    mdp: CompiledMdp,
    structure: str,
    target,
    mode: str,
    epsilon: float = 1e-6,
    max_iters: int = 10**6,
    *,
    relative: bool = True,
) -> np.ndarray:
    """Optimal expected reward accumulated before reaching ``target``.

    States from which the adversary of the dual mode can avoid ``target``
    with positive probability get +inf.
    """
    if structure not in mdp.state_rewards:
        raise CheckError(f'unknown reward structure "{structure}"')
    if epsilon <= 0:
        raise CheckError("epsilon must be positive")
    _check_mode(mode)
    target = _as_mask(mdp, target)
    _, sure = qualitative_reach(mdp, target, _dual(mode))
    x = np.where(sure, 0.0, math.inf)
    x[target] = 0.0
    live = sure & ~target
    if not live.any():
        return x
    idx, rows, offsets = _submodel(mdp, live)
    sub = mdp.matrix[rows]
    base = mdp.state_reward_array(structure)[mdp.choice_state[rows]] + mdp.transition_reward_array(structure)[rows]
    options = CheckOptions(epsilon, max_iters, relative)
    opt = _Optimizer(offsets, len(rows), mode)
    if mode == MIN:
        # Seeding at 0 could converge to the value of a policy that loops forever
        # through zero-reward states. Start instead from a policy that reaches
        # target almost surely; the iterates then decrease to the proper optimum.
        x[idx] = _proper_policy_values(mdp, target, sure, base, rows, idx)

    def step(v):
        return opt(base + sub @ v)

    return _iterate(step, x, idx, options, f'R{{"{structure}"}}{mode}[F target]')


def _proper_policy_values(mdp, target, sure, base, rows, idx) -> np.ndarray:
    """Expected reward of an attractor policy that reaches ``target`` almost surely from ``sure``."""
    stay = _all_successors_in(mdp, sure)
    chosen = np.full(mdp.num_states, -1, dtype=np.int64)
    reached = target.copy()
    while True:
        ok = stay & _some_successor_in(mdp, reached)
        ok &= ~reached[mdp.choice_state] & sure[mdp.choice_state]
        if not ok.any():
            break
        first = np.flatnonzero(ok)
        states = mdp.choice_state[first]
        states, pos = np.unique(states, return_index=True)
        chosen[states] = first[pos]
        reached[states] = True
    if not reached[idx].all():
        raise CheckError("internal error: attractor does not cover the almost-sure set")
    picks = chosen[idx]
    local = np.searchsorted(rows, picks)  # position of each pick among the live rows
    n = idx.size
    col = np.full(mdp.num_states, -1, dtype=np.int64)
    col[idx] = np.arange(n)
    p = mdp.matrix[picks].tocoo()
    keep = col[p.col] >= 0
    a = sp.identity(n, format="csr") - sp.csr_matrix((p.data[keep], (p.row[keep], col[p.col[keep]])), shape=(n, n))
    return np.atleast_1d(spla.spsolve(a.tocsc(), base[local]))


# --------------------------------------------------------------------------
# properties


def _typed(mdp: CompiledMdp, prop, labels, bindings) -> TypedProperty:
    if isinstance(prop, TypedProperty):
        return prop
    return resolve_property(prop, mdp.model, labels, tuple(bindings or ()))


def _bound_value(expr: ast.Expr, bindings: Mapping[str, int]) -> int:
    if isinstance(expr, ast.Literal):
        return int(expr.value)
    if isinstance(expr, ast.Ident):
        if expr.name not in bindings:
            raise CheckError(f"experiment parameter {expr.name} is not bound")
        return int(bindings[expr.name])
    raise CheckError("unsupported step bound")


def _bind(expr: ast.Expr, bindings: Mapping[str, int]) -> ast.Expr:
    """Replace experiment parameters inside a state formula by their values."""
    if isinstance(expr, ast.Ident):
        if expr.name not in bindings:
            raise CheckError(f"experiment parameter {expr.name} is not bound")
        return ast.Literal(int(bindings[expr.name]), pos=expr.pos, type=ast.INT)
    changes = {}
    for f in fields(expr):
        value = getattr(expr, f.name)
        if isinstance(value, ast.Expr):
            changes[f.name] = _bind(value, bindings)
        elif isinstance(value, tuple) and value and isinstance(value[0], ast.Expr):
            changes[f.name] = tuple(_bind(v, bindings) for v in value)
    return replace(expr, **changes) if changes else expr


def _states(mdp, expr, bindings, labels) -> np.ndarray:
    return mdp.state_set(_bind(expr, bindings or {}), labels)


def _query_vector(mdp, query, bindings, labels, options: CheckOptions) -> np.ndarray:
    eps, iters, rel = options.epsilon, options.max_iters, options.relative
    if isinstance(query, ast.RewardQuery):
        target = _states(mdp, query.target, bindings, labels)
        return expected_reward(mdp, query.structure, target, query.mode, eps, iters, relative=rel)
    path = query.path
    target = _states(mdp, path.target, bindings, labels)
    if isinstance(path, ast.Globally):
        return invariant_probability(mdp, target, query.mode, eps, iters, relative=rel)
    if path.bound is not None:
        return bounded_reach_probability(mdp, target, _bound_value(path.bound, bindings), query.mode)
    return reach_probability(mdp, target, query.mode, eps, iters, relative=rel)


def _aggregate(mdp, prop: ast.Filter, vector: np.ndarray, labels, bindings=None) -> float:
    states = _states(mdp, prop.states, bindings, labels)
    if not states.any():
        raise CheckError("filter matches no states")
    values = vector[states]
    if prop.aggregate == ast.MIN:
        return float(values.min())
    if prop.aggregate == ast.MAX:
        return float(values.max())
    return float(values.mean())


def evaluate_property(
    mdp: CompiledMdp,
    prop,
    bindings: Mapping[str, int] | None = None,
    labels: Mapping[str, ast.Expr] | None = None,
    options: CheckOptions | None = None,
) -> CheckResult:
    """Evaluate a property; plain queries report the initial state's value."""
    bindings = dict(bindings or {})
    options = options or CheckOptions()
    typed = _typed(mdp, prop, labels, bindings)
    missing = [p for p in typed.parameters if p not in bindings]
    if missing:
        raise CheckError(f"experiment parameter(s) not bound: {', '.join(missing)}")
    q = typed.query
    if isinstance(q, ast.Filter):
        vec = _query_vector(mdp, q.query, bindings, labels, options)
        return CheckResult("aggregate", _aggregate(mdp, q, vec, labels, bindings), vector=vec)
    vec = _query_vector(mdp, q, bindings, labels, options)
    return CheckResult("scalar", float(vec[mdp.initial]), vector=vec)


def run_experiment(
    mdp: CompiledMdp,
    prop,
    param: str,
    start: int,
    stop: int,
    step: int = 1,
    labels: Mapping[str, ast.Expr] | None = None,
    options: CheckOptions | None = None,
) -> CheckResult:
    """Evaluate ``prop`` for ``param`` = start, start+step, ..., stop (inclusive)."""
    if step < 1 or start > stop:
        raise CheckError(f"empty experiment range {start}:{stop}:{step}")
    options = options or CheckOptions()
    typed = _typed(mdp, prop, labels, (param,))
    values = list(range(start, stop + 1, step))
    q = typed.query
    inner = q.query if isinstance(q, ast.Filter) else q
    bound = getattr(getattr(inner, "path", None), "bound", None)
    if isinstance(bound, ast.Ident) and bound.name == param:
        # the bound itself is swept: one incremental sweep yields every vector
        target = _states(mdp, inner.path.target, {}, labels)
        vectors = bounded_reach_series(mdp, target, values, inner.mode)
        series = []
        for k in values:
            vec = vectors[k]
            value = _aggregate(mdp, q, vec, labels) if isinstance(q, ast.Filter) else float(vec[mdp.initial])
            series.append((k, value))
        return CheckResult("series", series=tuple(series))

    def one(k):
        return evaluate_property(mdp, typed, {param: k}, labels, options).value

    if options.threads > 1:
        with ThreadPoolExecutor(options.threads) as pool:
            results = list(pool.map(one, values))
    else:
        results = [one(k) for k in values]
    return CheckResult("series", series=tuple(zip(values, results)))


def format_value(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))
