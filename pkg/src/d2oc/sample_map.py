"""Sample-based reference maps: container, renewal, merging and downsampling.

A :class:`SampleSet` stores one agent's weighted Dirac atoms as parallel
arrays, always ordered by ascending id. Operations return new sets and
never mutate their input.
"""
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np

from . import kernels
from .errors import AllMassLost, ConfigError
from .field import GroundTruthField, SensorModel, sense_many

NEVER = -1

_COLUMNS = ("ids", "pos", "weight", "mean", "var", "vstd", "last_sensed")


@dataclass(frozen=True)
class Sample:
    id: int
    position: tuple
    weight: float
    mean: float
    variance: float
    virtual_variance: float
    last_sensed_step: int = NEVER


class SampleSet:
    """Struct-of-arrays sample map.

    ``vstd`` holds the virtual standard deviation; the virtual variance
    used by the scores is its square.
    """

    __slots__ = _COLUMNS + ("owner", "next_id")

    def __init__(self, ids, pos, weight, mean, var, vstd, last_sensed, owner=0, next_id=None):
        self.ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        n = self.ids.shape[0]
        self.pos = np.asarray(pos, dtype=float).reshape(n, 2)
        self.weight = np.asarray(weight, dtype=float).reshape(n)
        self.mean = np.asarray(mean, dtype=float).reshape(n)
        self.var = np.asarray(var, dtype=float).reshape(n)
        self.vstd = np.asarray(vstd, dtype=float).reshape(n)
        self.last_sensed = np.asarray(last_sensed, dtype=np.int64).reshape(n)
        self.owner = int(owner)
        top = int(self.ids.max()) + 1 if n else 0
        self.next_id = top if next_id is None else max(int(next_id), top)
        if n > 1 and np.any(np.diff(self.ids) <= 0):
            order = np.argsort(self.ids, kind="stable")
            if np.any(np.diff(self.ids[order]) == 0):
                raise ValueError("sample ids must be unique")
            for c in _COLUMNS:
                setattr(self, c, getattr(self, c)[order])

    def __len__(self):
        return self.ids.shape[0]

    @property
    def virtual_var(self) -> np.ndarray:
        return self.vstd * self.vstd

    @property
    def total_mass(self) -> float:
        return float(self.weight.sum())

    def copy(self) -> "SampleSet":
        return SampleSet(*(getattr(self, c).copy() for c in _COLUMNS), owner=self.owner, next_id=self.next_id)

    def take(self, idx) -> "SampleSet":
        """Subset by index array (or boolean mask); keeps id order."""
        return SampleSet(*(getattr(self, c)[idx] for c in _COLUMNS), owner=self.owner, next_id=self.next_id)

    def with_weights(self, w) -> "SampleSet":
        out = self.copy()
        out.weight = np.asarray(w, dtype=float).reshape(len(self)).copy()
        return out

    @property
    def samples(self) -> List[Sample]:
        return [self[k] for k in range(len(self))]

    def __getitem__(self, k) -> Sample:
        return Sample(int(self.ids[k]), (float(self.pos[k, 0]), float(self.pos[k, 1])),
                      float(self.weight[k]), float(self.mean[k]), float(self.var[k]),
                      float(self.vstd[k] ** 2), int(self.last_sensed[k]))

    @classmethod
    def from_samples(cls, samples, owner=0) -> "SampleSet":
        samples = list(samples)
        return cls([s.id for s in samples],
                   np.array([s.position for s in samples], dtype=float).reshape(-1, 2),
                   [s.weight for s in samples], [s.mean for s in samples],
                   [s.variance for s in samples],
                   [np.sqrt(s.virtual_variance) for s in samples],
                   [s.last_sensed_step for s in samples], owner=owner)

    @classmethod
    def from_positions(cls, pos, weights=None, mean=0.0, var=0.0, owner=0) -> "SampleSet":
        pos = np.asarray(pos, dtype=float).reshape(-1, 2)
        n = pos.shape[0]
        w = np.full(n, 1.0 / max(n, 1)) if weights is None else np.asarray(weights, dtype=float)
        return cls(np.arange(n), pos, w, np.full(n, float(mean)), np.full(n, float(var)),
                   np.zeros(n), np.full(n, NEVER), owner=owner)

    def to_records(self) -> str:
        """Line-oriented text: ``id x y w mean var virtual_var last_sensed``."""
        lines = ["# id x y w mean var virtual_var last_sensed"]
        for k in range(len(self)):
            lines.append("%d %.17g %.17g %.17g %.17g %.17g %.17g %d" % (
                self.ids[k], self.pos[k, 0], self.pos[k, 1], self.weight[k], self.mean[k],
                self.var[k], self.vstd[k] ** 2, self.last_sensed[k]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_records(cls, text: str, owner=0) -> "SampleSet":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            return cls.from_positions(np.zeros((0, 2)), owner=owner)
        a = np.array([[float(v) for v in r] for r in rows])
        return cls(a[:, 0].astype(np.int64), a[:, 1:3], a[:, 3], a[:, 4], a[:, 5],
                   np.sqrt(a[:, 6]), a[:, 7].astype(np.int64), owner=owner)


@dataclass(frozen=True)
class RenewalConfig:
    create_threshold: float = 1e-5
    drop_threshold: float = 2e-6
    candidates_per_step: int = 10
    merge_radius: float = 1.0
    max_samples: int = 300

    def __post_init__(self):
        if not self.drop_threshold < self.create_threshold:
            raise ConfigError("drop_threshold must be below create_threshold")
        if self.candidates_per_step < 0:
            raise ConfigError("candidates_per_step must be >= 0")
        if not self.merge_radius >= 0.0:
            raise ConfigError("merge_radius must be >= 0")
        if self.max_samples < 1:
            raise ConfigError("max_samples must be >= 1")


@dataclass
class RenewalReport:
    births: int = 0
    deaths: int = 0
    reseeded: bool = False
    sensed_ids: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def normalize(s: SampleSet) -> SampleSet:
    """Clamp negative weights to zero and rescale to unit mass."""
    w = np.maximum(s.weight, 0.0)
    total = w.sum()
    if not total > 0.0:
        raise AllMassLost(f"agent {s.owner}: every sample weight is <= 0")
    return s.with_weights(w / total)


def _reseed(s: SampleSet, agent_pos, step: int, noise_var: float) -> SampleSet:
    nid = s.next_id
    return SampleSet([nid], np.asarray(agent_pos, dtype=float).reshape(1, 2), [1.0], [0.0],
                     [noise_var], [0.0], [step], owner=s.owner, next_id=nid + 1)


def renew(s: SampleSet, agent_pos, field: GroundTruthField, sensor: SensorModel,
          cfg: RenewalConfig, step: int, rng: np.random.Generator,
          meanvar=None, report: Optional[RenewalReport] = None) -> SampleSet:
    """Birth/death renewal around ``agent_pos``.

    Random draws, in order: ``2 * candidates_per_step`` uniforms for the
    candidate positions, one normal per candidate reading, then one normal
    per in-range existing sample (id order). Candidates falling outside the
    domain still consume their draws but are discarded.

    ``meanvar`` updates (mean, var) of re-sensed samples; ``None`` keeps the
    latest reading as mean and the previous variance. If every sample dies
    the set is re-seeded with one unit-weight sample at the agent.
    """
    rep = report if report is not None else RenewalReport()
    p = np.asarray(agent_pos, dtype=float).reshape(2)
    rs = sensor.sensing_range
    nc = cfg.candidates_per_step
    u = rng.random((nc, 2))
    rad = rs * np.sqrt(u[:, 0])
    ang = 2.0 * np.pi * u[:, 1]
    cand = p + np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
    cread = sense_many(field, sensor, cand, rng)

    n = len(s)
    d2 = ((s.pos - p) ** 2).sum(axis=1)
    near = np.flatnonzero(d2 <= rs * rs)
    reads = sense_many(field, sensor, s.pos[near], rng)

    out = s.copy()
    if near.size:
        if meanvar is not None:
            mu, var = meanvar.update(out.ids[near], out.pos[near], p, reads, out.var[near])
        else:
            mu, var = reads, out.var[near]
        out.mean[near] = mu
        out.var[near] = var
        out.last_sensed[near] = step
    rep.sensed_ids = out.ids[near].copy()
    dead = np.zeros(n, dtype=bool)
    dead[near[reads < cfg.drop_threshold]] = True
    rep.deaths = int(dead.sum())

    born = field.domain.contains(cand) & (cread >= cfg.create_threshold)
    nb = int(born.sum())
    rep.births = nb
    w_birth = float(s.weight.mean()) if n else 1.0
    keep = out.take(~dead)
    if nb:
        bid = np.arange(out.next_id, out.next_id + nb)
        if meanvar is not None:
            meanvar.seed(bid, cread[born])
        keep = SampleSet(
            np.concatenate((keep.ids, bid)), np.vstack((keep.pos, cand[born])),
            np.concatenate((keep.weight, np.full(nb, w_birth))),
            np.concatenate((keep.mean, cread[born])),
            np.concatenate((keep.var, np.full(nb, sensor.noise_std ** 2))),
            np.concatenate((keep.vstd, np.zeros(nb))),
            np.concatenate((keep.last_sensed, np.full(nb, step))),
            owner=s.owner, next_id=out.next_id + nb)
    try:
        return normalize(keep)
    except AllMassLost:
        rep.reseeded = True
        return _reseed(keep, p, step, sensor.noise_std ** 2)


def _group_mean(values, w, labels, reps, fallback):
    """Weight-averaged column per merge group, falling back to the survivor's value."""
    num = np.zeros(labels.shape[0])
    np.add.at(num, labels, w * values)
    den = np.zeros(labels.shape[0])
    np.add.at(den, labels, w)
    out = fallback.copy()
    ok = den[reps] > 0.0
    out[ok] = num[reps][ok] / den[reps][ok]
    return out


def merge_nearby(s: SampleSet, merge_radius: float) -> SampleSet:
    """Greedy id-order merge of samples closer than ``merge_radius``.

    Each later sample is compared with the running weighted-average position
    of an earlier survivor's group. Weights add, mean/variance are weight
    averaged, virtual variance takes the max and the visit stamp the latest.
    """
    n = len(s)
    if n < 2:
        return s.copy()
    labels, mpos = kernels.greedy_merge(s.pos, s.weight, float(merge_radius))
    reps = np.flatnonzero(labels == np.arange(n))
    if reps.size == n:
        return s.copy()
    w = np.zeros(n)
    np.add.at(w, labels, s.weight)
    mean = _group_mean(s.mean, s.weight, labels, reps, s.mean[reps])
    var = _group_mean(s.var, s.weight, labels, reps, s.var[reps])
    vstd = np.zeros(n)
    np.maximum.at(vstd, labels, s.vstd)
    last = np.full(n, NEVER, dtype=np.int64)
    np.maximum.at(last, labels, s.last_sensed)
    return SampleSet(s.ids[reps], mpos[reps], w[reps], mean, var, vstd[reps], last[reps],
                     owner=s.owner, next_id=s.next_id)


def farthest_point_downsample(s: SampleSet, target: int, renormalize: bool = True) -> SampleSet:
    """Keep ``target`` samples by farthest-point selection.

    Seeded at the heaviest sample (lowest id on ties); discarded mass goes to
    each point's nearest survivor (earliest selected on ties).
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    if len(s) <= target:
        return s.copy()
    sel, assign = kernels.farthest_point_order(s.pos, s.weight, int(target))
    w = np.zeros(sel.shape[0])
    np.add.at(w, assign, s.weight)
    out = SampleSet(s.ids[sel], s.pos[sel], w, s.mean[sel], s.var[sel], s.vstd[sel],
                    s.last_sensed[sel], owner=s.owner, next_id=s.next_id)
    return normalize(out) if renormalize else out
