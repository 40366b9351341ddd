"""Independent cross-checks for the checker.

``exhaustive_bounded`` expands bounded path trees in exact rational
arithmetic. ``simulate_paths`` runs Monte-Carlo rollouts under a fixed or
uniformly random policy. Its random numbers come from a counter-based hash
of (seed, trial, step, stream), so any split of the trials over threads gives
the same estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from . import checker
from .compiler import CompiledMdp
from .errors import CheckError

UNIFORM_RANDOM = "uniform"
FIXED_INDEX = "fixed"

DEFAULT_NODE_BUDGET = 10**7


@dataclass(frozen=True)
class Policy:
    """How a rollout resolves nondeterminism: uniformly, or by a per-state choice index."""

    kind: str = UNIFORM_RANDOM
    index: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def uniform(cls) -> "Policy":
        return cls(UNIFORM_RANDOM)

    @classmethod
    def fixed(cls, index: Mapping[int, int]) -> "Policy":
        return cls(FIXED_INDEX, dict(index))

    @classmethod
    def seeded(cls, mdp: CompiledMdp, seed: int) -> "Policy":
        """A fixed policy choosing a pseudo-random choice index in every state."""
        counts = np.diff(mdp.choice_offsets)
        picks = np.random.default_rng(seed).integers(0, counts)
        return cls.fixed({s: int(c) for s, c in enumerate(picks) if counts[s] > 1})

    def choice_indices(self, mdp: CompiledMdp) -> np.ndarray:
        """Local choice index per state (FIXED_INDEX only)."""
        if self.kind != FIXED_INDEX:
            raise CheckError("choice indices exist only for fixed policies")
        counts = np.diff(mdp.choice_offsets)
        out = np.zeros(mdp.num_states, dtype=np.int64)
        for s, c in self.index.items():
            if not 0 <= c < counts[s]:
                raise CheckError(f"policy picks choice {c} in state {s}, which has {counts[s]} choices")
            out[s] = c
        missing = [s for s in np.flatnonzero(counts > 1) if int(s) not in self.index]
        if missing:
            raise CheckError(f"fixed policy leaves state {missing[0]} ({mdp.describe(missing[0])}) unresolved")
        return out


@dataclass(frozen=True)
class SimEstimate:
    estimate: float
    trials: int
    std_error: float
    half_width: float  # 95% normal-approximation half-width, 1.96 * std_error
    seed: int
    truncation_rate: float = 0.0
    samples: np.ndarray | None = field(default=None, compare=False, repr=False)

    def format(self) -> str:
        lo, hi = self.estimate - self.half_width, self.estimate + self.half_width
        return "\n".join(
            [
                f"estimate = {self.estimate!r}",
                f"ci95 = [{lo!r}, {hi!r}]",
                f"std_error = {self.std_error!r}",
                f"trials = {self.trials}",
                f"seed = {self.seed}",
                f"truncation_rate = {self.truncation_rate!r}",
            ]
        )


@dataclass(frozen=True)
class Reach:
    target: np.ndarray


@dataclass(frozen=True)
class CumulatedReward:
    structure: str
    target: np.ndarray


# --------------------------------------------------------------------------
# exact bounded enumeration


def exhaustive_bounded(
    mdp: CompiledMdp,
    target,
    k: int,
    mode: str,
    states: Iterable[int] | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> dict[int, Fraction]:
    """Exact optimal probability of reaching ``target`` within ``k`` steps.

    Memoised on (state, remaining depth): the value at depth r is only
    computed for states within k - r steps of a requested state.
    """
    if k < 0:
        raise CheckError("step bound must be non-negative")
    if mode not in (checker.MIN, checker.MAX):
        raise CheckError(f"mode must be 'min' or 'max', got {mode!r}")
    target = checker._as_mask(mdp, target)
    requested = [mdp.initial] if states is None else [int(s) for s in states]

    # levels[j] = states within j steps of a requested state
    levels = [set(requested)]
    frontier = set(requested)
    for _ in range(k):
        nxt = set()
        for s in frontier:
            for c in mdp.choices(s):
                nxt.update(t for t, _ in mdp.distribution(c))
        nxt -= levels[-1]
        levels.append(levels[-1] | nxt)
        frontier = nxt
    nodes = sum(len(level) for level in levels)
    if nodes > node_budget:
        raise CheckError(f"bounded path enumeration needs {nodes} nodes, budget is {node_budget}")

    pick = min if mode == checker.MIN else max
    values = {s: Fraction(int(target[s])) for s in levels[k]}
    for r in range(1, k + 1):
        new = {}
        for s in levels[k - r]:
            if target[s]:
                new[s] = Fraction(1)
            else:
                new[s] = pick(sum(p * values[t] for t, p in mdp.distribution(c)) for c in mdp.choices(s))
        values = new
    return {s: values[s] for s in requested}


# --------------------------------------------------------------------------
# induced chain


def induced_chain(mdp: CompiledMdp, policy: Policy) -> CompiledMdp:
    """The Markov chain (one choice per state) obtained by fixing ``policy``.

    Under UNIFORM_RANDOM the single choice mixes all choices with equal
    weight; transition rewards are mixed the same way.
    """
    offsets = mdp.choice_offsets
    fixed = policy.choice_indices(mdp) if policy.kind == FIXED_INDEX else None
    trans_offsets = [0]
    targets: list[int] = []
    probs: list[Fraction] = []
    actions = []
    picked_rewards = {name: [] for name in mdp.transition_rewards}
    for s in range(mdp.num_states):
        lo, hi = int(offsets[s]), int(offsets[s + 1])
        chosen = [lo + int(fixed[s])] if fixed is not None else list(range(lo, hi))
        weight = Fraction(1, len(chosen))
        dist: dict[int, Fraction] = {}
        for c in chosen:
            for t, p in mdp.distribution(c):
                dist[t] = dist.get(t, Fraction(0)) + weight * p
        for t in sorted(dist):
            targets.append(t)
            probs.append(dist[t])
        trans_offsets.append(len(targets))
        actions.append(mdp.actions[chosen[0]] if len(chosen) == 1 else None)
        for name, rewards in mdp.transition_rewards.items():
            picked_rewards[name].append(sum((rewards[c] for c in chosen), Fraction(0)) * weight)
    return replace(
        mdp,
        choice_offsets=np.arange(mdp.num_states + 1, dtype=np.int64),
        actions=actions,
        trans_offsets=np.asarray(trans_offsets, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.int64),
        probs=probs,
        transition_rewards=picked_rewards,
        switches=[None] * mdp.num_states,
    )


# --------------------------------------------------------------------------
# Monte-Carlo simulation


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, trials: np.ndarray, step: int, stream: int) -> np.ndarray:
    """Uniform doubles in [0, 1) determined by (seed, trial, step, stream) alone."""
    with np.errstate(over="ignore"):
        key = _splitmix(np.full(1, seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))
        z = _splitmix(key ^ trials.astype(np.uint64))
        z = _splitmix(z ^ np.uint64(((step << 2) | stream) & 0xFFFFFFFFFFFFFFFF))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


class _Sampler:
    def __init__(self, mdp: CompiledMdp, policy: Policy):
        self.mdp = mdp
        self.offsets = mdp.choice_offsets
        self.counts = np.diff(mdp.choice_offsets)
        self.fixed = policy.choice_indices(mdp) if policy.kind == FIXED_INDEX else None
        self.trans_offsets = mdp.trans_offsets
        # cumulative branch probabilities restarted at every choice
        probs = mdp.prob_array
        csum = np.cumsum(probs)
        start = np.repeat(csum[self.trans_offsets[:-1]] - probs[self.trans_offsets[:-1]], np.diff(self.trans_offsets))
        self.cum = csum - start
        self.width = int(np.diff(self.trans_offsets).max())

    def hopeless(self, target: np.ndarray) -> np.ndarray:
        """States from which ``target`` is unreachable using the policy's choices.

        Rollouts stop there: the outcome is already decided.
        """
        mdp = self.mdp
        if self.fixed is not None:
            used = self.offsets[:-1] + self.fixed
        else:
            used = np.arange(mdp.num_choices)
        src = mdp.choice_state[used]
        lo, hi = self.trans_offsets[used], self.trans_offsets[used + 1]
        edges_src = np.repeat(src, hi - lo)
        edges_dst = mdp.targets[np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)])]
        preds: dict[int, list[int]] = {}
        for a, b in zip(edges_src.tolist(), edges_dst.tolist()):
            preds.setdefault(b, []).append(a)
        can = target.copy()
        stack = list(np.flatnonzero(target))
        while stack:
            t = stack.pop()
            for p in preds.get(int(t), ()):
                if not can[p]:
                    can[p] = True
                    stack.append(p)
        return ~can

    def step(self, seed, trial_ids, cur, k):
        if self.fixed is not None:
            local = self.fixed[cur]
        else:
            u0 = uniforms(seed, trial_ids, k, 0)
            local = np.minimum((u0 * self.counts[cur]).astype(np.int64), self.counts[cur] - 1)
        choice = self.offsets[cur] + local
        u1 = uniforms(seed, trial_ids, k, 1)
        idx = self.trans_offsets[choice].copy()
        last = self.trans_offsets[choice + 1] - 1
        for _ in range(self.width - 1):
            move = (idx < last) & (self.cum[idx] <= u1)
            if not move.any():
                break
            idx += move
        return choice, self.mdp.targets[idx]


def _rollouts(sampler: _Sampler, objective, hopeless, seed: int, first: int, count: int, max_steps: int):
    mdp = sampler.mdp
    trial_ids = np.arange(first, first + count, dtype=np.int64)
    cur = np.full(count, mdp.initial, dtype=np.int64)
    value = np.zeros(count)
    reached = objective.target[cur].copy()
    active = ~reached & ~hopeless[cur]
    if isinstance(objective, CumulatedReward):
        sr = mdp.state_reward_array(objective.structure)
        tr = mdp.transition_reward_array(objective.structure)
    for k in range(max_steps):
        live = np.flatnonzero(active)
        if live.size == 0:
            break
        choice, nxt = sampler.step(seed, trial_ids[live], cur[live], k)
        if isinstance(objective, CumulatedReward):
            value[live] += sr[cur[live]] + tr[choice]
        cur[live] = nxt
        hit = objective.target[nxt]
        reached[live] = hit
        active[live] = ~hit & ~hopeless[nxt]
    truncated = active
    if isinstance(objective, Reach):
        value = reached.astype(np.float64)
    return value, truncated


def simulate_paths(
    mdp: CompiledMdp,
    policy: Policy,
    trials: int,
    max_steps: int,
    seed: int,
    objective: Reach | CumulatedReward,
    threads: int = 1,
    keep_samples: bool = False,
) -> SimEstimate:
    """Estimate a reach probability or expected cumulated reward by rollouts.

    Truncated rollouts count as not reaching the target; for reward
    objectives they contribute the reward collected so far.
    """
    if trials < 1:
        raise CheckError("trials must be at least 1")
    if max_steps < 0:
        raise CheckError("max_steps must be non-negative")
    if isinstance(objective, CumulatedReward):
        if objective.structure not in mdp.state_rewards:
            raise CheckError(f'unknown reward structure "{objective.structure}"')
        chain = induced_chain(mdp, policy)
        _, one = checker.qualitative_reach(chain, objective.target, checker.MIN)
        if not one[mdp.initial]:
            raise CheckError("policy does not reach the target almost surely; expected reward is infinite")
    sampler = _Sampler(mdp, policy)
    hopeless = sampler.hopeless(objective.target)
    threads = max(1, int(threads))
    chunk = math.ceil(trials / threads)
    spans = [(a, min(chunk, trials - a)) for a in range(0, trials, chunk)]
    if len(spans) > 1:
        with ThreadPoolExecutor(len(spans)) as pool:
            parts = list(pool.map(lambda sp: _rollouts(sampler, objective, hopeless, seed, sp[0], sp[1], max_steps), spans))
    else:
        parts = [_rollouts(sampler, objective, hopeless, seed, 0, trials, max_steps)]
    values = np.concatenate([p[0] for p in parts])
    truncated = np.concatenate([p[1] for p in parts])
    mean = float(math.fsum(values) / trials)
    if trials > 1:
        var = float(math.fsum((values - mean) ** 2) / (trials - 1))
    else:
        var = 0.0
    se = math.sqrt(var / trials)
    return SimEstimate(
        estimate=mean,
        trials=trials,
        std_error=se,
        half_width=1.96 * se,
        seed=seed,
        truncation_rate=float(truncated.sum()) / trials,
        samples=values if keep_samples else None,
    )
