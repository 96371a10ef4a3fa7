"""Per-step decentralized stages.

Stage A picks locally influential samples and drives the agent toward
their centroid, Stage B moves a fixed mass budget away from the samples
the agent has just covered, and Stage C merges maps with neighbours.
"""
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .control import (AgentState, ControlConfig, LtiModel, receding_horizon_step,
                      weighted_centroid)
from .errors import ConfigError, InsufficientMass
from .sample_map import (RenewalConfig, Sample, SampleSet, farthest_point_downsample,
                         merge_nearby, normalize)

MIN_DIST = 1e-6


@dataclass(frozen=True)
class StageConfig:
    c1: float = 1.0
    c2: float = 1.0
    beta: float = 1.0
    mass_budget: float = 1.0 / 3000
    comm_range: float = 20.0

    def __post_init__(self):
        if min(self.c1, self.c2, self.beta) < 0:
            raise ConfigError("c1, c2 and beta must be >= 0")
        if not self.mass_budget > 0:
            raise ConfigError("mass_budget must be > 0")
        if self.comm_range < 0:
            raise ConfigError("comm_range must be >= 0")


@dataclass(frozen=True)
class LocalSelection:
    ids: np.ndarray
    index: np.ndarray
    coeffs: np.ndarray
    total: float

    @property
    def entries(self):
        return list(zip(self.ids.tolist(), self.coeffs.tolist()))


def importance_score(sample: Sample, cfg: StageConfig) -> float:
    return sample.mean + cfg.c1 * sample.variance + cfg.c2 * sample.virtual_variance


def importance_scores(s: SampleSet, cfg: StageConfig) -> np.ndarray:
    return s.mean + cfg.c1 * s.var + cfg.c2 * s.virtual_var


def removal_priority(sample: Sample, agent_pos, cfg: StageConfig) -> float:
    d = float(np.hypot(*(np.asarray(sample.position) - np.asarray(agent_pos, dtype=float))))
    return d / (1.0 + cfg.beta * (sample.variance + sample.virtual_variance))


def removal_priorities(s: SampleSet, agent_pos, cfg: StageConfig) -> np.ndarray:
    diff = s.pos - np.asarray(agent_pos, dtype=float)
    d = np.hypot(diff[:, 0], diff[:, 1])
    return d / (1.0 + cfg.beta * (s.var + s.virtual_var))


def select_local_samples(s: SampleSet, agent_pos, cfg: StageConfig) -> LocalSelection:
    """Fill the mass budget with samples in decreasing score ``phi / d``.

    Distances are floored at 1e-6 m; ties go to the lowest id. The last
    sample taken is truncated so the coefficients sum to the budget.
    """
    budget = cfg.mass_budget
    diff = s.pos - np.asarray(agent_pos, dtype=float)
    d = np.maximum(np.hypot(diff[:, 0], diff[:, 1]), MIN_DIST)
    score = importance_scores(s, cfg) / d
    live = np.flatnonzero(s.weight > 0.0)
    # ids ascend, so a stable sort on -score breaks ties by lowest id
    order = live[np.argsort(-score[live], kind="stable")]
    cs = np.cumsum(s.weight[order])
    if cs.size == 0 or cs[-1] < budget * (1.0 - 1e-12):
        have = float(cs[-1]) if cs.size else 0.0
        raise InsufficientMass(f"agent {s.owner}: weight {have:.3g} below budget {budget:.3g}")
    k = min(int(np.searchsorted(cs, budget, side="left")), cs.size - 1)
    idx = order[:k + 1]
    coeffs = s.weight[idx].copy()
    coeffs[-1] = budget - (cs[k - 1] if k > 0 else 0.0)
    return LocalSelection(s.ids[idx], idx, coeffs, float(coeffs.sum()))


def stage_a(agent: AgentState, s: SampleSet, model: LtiModel, control_cfg: ControlConfig,
            stage_cfg: StageConfig, domain=None):
    """Select at the current position and take one receding-horizon step.

    Weights stay frozen across the lookahead; only the predicted position
    changes the selection. Returns ``(next_state, selection_at_step_k, plan)``.
    """
    first = []

    def selector(p):
        sel = select_local_samples(s, p, stage_cfg)
        if not first:
            first.append(sel)
        return weighted_centroid(s.pos[sel.index], sel.coeffs)

    nxt, plan = receding_horizon_step(model, agent, selector, control_cfg, domain)
    return nxt, first[0], plan


def stage_b(s: SampleSet, agent_pos, cfg: StageConfig) -> SampleSet:
    """Remove the mass budget from the highest-priority samples and hand it
    to the rest in proportion to their weights (uniformly to all samples if
    every sample was reduced)."""
    budget = cfg.mass_budget
    n = len(s)
    if budget <= 0.0 or n == 0:
        return s.copy()
    r = removal_priorities(s, agent_pos, cfg)
    order = np.argsort(r, kind="stable")
    w = s.weight.copy()
    ws = w[order]
    cs = np.cumsum(ws)
    k = int(np.searchsorted(cs, budget, side="left"))
    if k >= n:
        reduced = order
        removed = float(w.sum())
        w[:] = 0.0
    else:
        reduced = order[:k + 1]
        before = cs[k - 1] if k > 0 else 0.0
        w[order[:k]] = 0.0
        w[order[k]] = ws[k] - (budget - before)
        removed = budget
    inq = np.zeros(n, dtype=bool)
    inq[reduced] = True
    rest = ~inq
    base = w[rest].sum()
    if rest.any() and base > 0.0:
        w[rest] += removed * (w[rest] / base)
    elif rest.any():
        w[rest] += removed / rest.sum()
    else:
        w += removed / n
    np.maximum(w, 0.0, out=w)
    return s.with_weights(w)


def neighbor_set(positions, i: int, r_c: float) -> List[int]:
    """Agents ``j != i`` within distance ``r_c`` (inclusive) of agent ``i``.

    ``positions`` is an ``(N, 2)`` array indexed by agent id or a sequence
    of ``(id, position)`` pairs.
    """
    if isinstance(positions, np.ndarray):
        pairs = list(enumerate(positions))
    else:
        pairs = [(int(k), np.asarray(p, dtype=float)) for k, p in positions]
    pi = dict(pairs)[i]
    out = []
    for j, pj in pairs:
        if j != i and np.hypot(*(np.asarray(pj, dtype=float) - pi)) <= r_c:
            out.append(int(j))
    return sorted(out)


def _union(own: SampleSet, others: Sequence[SampleSet]) -> SampleSet:
    parts = [own] + list(others)
    nid = own.next_id
    ids = [own.ids]
    for o in others:
        ids.append(np.arange(nid, nid + len(o)))
        nid += len(o)
    cat = lambda c: np.concatenate([getattr(p, c) for p in parts])
    return SampleSet(np.concatenate(ids), np.vstack([p.pos for p in parts]), cat("weight"),
                     cat("mean"), cat("var"), cat("vstd"), cat("last_sensed"),
                     owner=own.owner, next_id=nid)


def merge_and_reduce(s: SampleSet, renewal_cfg: RenewalConfig) -> SampleSet:
    s = merge_nearby(s, renewal_cfg.merge_radius)
    s = farthest_point_downsample(s, renewal_cfg.max_samples, renormalize=False)
    return normalize(s)


def stage_c(agent_sets: Sequence[SampleSet], positions, cfg: StageConfig,
            renewal_cfg: RenewalConfig) -> List[SampleSet]:
    """Synchronous exchange round over a snapshot of every agent's map.

    Neighbour samples are copied in with fresh ids (ascending neighbour
    order), then the union is merged, downsampled and normalized.
    """
    snap = [s.copy() for s in agent_sets]
    pos = np.asarray(positions, dtype=float).reshape(len(snap), 2)
    out = []
    for i, own in enumerate(snap):
        nbrs = neighbor_set(pos, i, cfg.comm_range)
        out.append(merge_and_reduce(_union(own, [snap[j] for j in nbrs]), renewal_cfg))
    return out
