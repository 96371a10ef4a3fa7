"""Simulation driver: renewal, adaptive variance, Stages A to C, metrics."""
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .control import AgentState, ControlConfig, double_integrator
from .errors import D2ocError, SimulationError
from .field import Domain, GroundTruthField, GaussianComponent, SensorModel
from .mlp import AdaptiveStdNet, MeanVarBackend, MlpParams, adaptive_std_step
from .sample_map import RenewalConfig, RenewalReport, SampleSet, renew
from .scenario import Scenario
from .stages import StageConfig, stage_a, stage_b, stage_c
from .transport import DiscreteMeasure, WarmStart, gt_grid_measure, w2_to_gt

MASS_TOL = 1e-9
COLUMNS = ("step", "agent", "w2_gt", "w2_avg", "loss", "births", "deaths", "pos_x", "pos_y")


@dataclass
class World:
    """Everything derived from a scenario that stays fixed during a run."""

    scenario: Scenario
    domain: Domain
    field: GroundTruthField
    sensor: SensorModel
    renewal: RenewalConfig
    stages: StageConfig
    control: ControlConfig
    model: object
    gt: DiscreteMeasure

    @classmethod
    def build(cls, sc: Scenario) -> "World":
        dom = Domain(0.0, sc.width, 0.0, sc.height)
        fld = GroundTruthField(tuple(GaussianComponent((p.x, p.y), p.amplitude, p.spread)
                                     for p in sc.plumes), dom)
        return cls(
            sc, dom, fld,
            SensorModel(sc.noise_std, sc.sensing_range),
            RenewalConfig(sc.create_threshold, sc.drop_threshold, sc.candidates_per_step,
                          sc.merge_radius, sc.n_samples),
            StageConfig(sc.c1, sc.c2, sc.beta, sc.mass_budget, sc.comm_range),
            ControlConfig(sc.r_weight * np.eye(2), sc.horizon, sc.max_speed, sc.max_accel),
            double_integrator(sc.dt),
            gt_grid_measure(fld, sc.gt_grid),
        )


@dataclass
class MetricsLog:
    """One row per (committed step, agent); NaN marks values not computed."""

    n_agents: int
    rows: List[tuple] = dc_field(default_factory=list)
    initial_w2: Optional[np.ndarray] = None
    initial_w2_avg: float = math.nan

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        k = COLUMNS.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)

    @property
    def n_steps(self) -> int:
        return len(self.rows) // self.n_agents if self.n_agents else 0

    def w2_avg_series(self) -> Tuple[np.ndarray, np.ndarray]:
        """Steps with a computed averaged-map distance, prefixed by step 0."""
        step = self.column("step")[::self.n_agents] if self.rows else np.zeros(0)
        val = self.column("w2_avg")[::self.n_agents] if self.rows else np.zeros(0)
        ok = ~np.isnan(val)
        return (np.concatenate(([0.0], step[ok])), np.concatenate(([self.initial_w2_avg], val[ok])))

    def w2_agent_series(self, agent: int) -> Tuple[np.ndarray, np.ndarray]:
        a = self.column("agent")
        sel = a == agent
        step = self.column("step")[sel]
        val = self.column("w2_gt")[sel]
        ok = ~np.isnan(val)
        init = self.initial_w2[agent] if self.initial_w2 is not None else math.nan
        return np.concatenate(([0.0], step[ok])), np.concatenate(([init], val[ok]))

    def loss_series(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-tick loss averaged over agents."""
        if not self.rows:
            return np.zeros(0), np.zeros(0)
        step = self.column("step").reshape(-1, self.n_agents)[:, 0]
        loss = self.column("loss").reshape(-1, self.n_agents)
        ok = ~np.isnan(loss).all(axis=1)
        return step[ok], np.nanmean(loss[ok], axis=1) if ok.any() else np.zeros(0)


@dataclass
class RunResult:
    scenario: Scenario
    initial_sets: List[SampleSet]
    final_sets: List[SampleSet]
    log: MetricsLog
    trajectories: np.ndarray  # (steps + 1, n_agents, 2)
    reseeds: int = 0
    wall_time: float = 0.0

    @property
    def final_w2(self) -> float:
        return float(self.log.w2_avg_series()[1][-1])

    @property
    def initial_w2(self) -> float:
        return float(self.log.initial_w2_avg)


def _rng(ss) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def initial_sample_set(sc: Scenario, rng: np.random.Generator, owner: int = 0) -> SampleSet:
    """Shared prior map: uniform over the domain or Gaussian blobs displaced
    from every plume by ``init_offset`` (counts proportional to plume mass)."""
    n = sc.n_samples
    if sc.init_mode == "uniform":
        pos = rng.random((n, 2)) * np.array([sc.width, sc.height])
    else:
        mass = np.array([p.amplitude * p.spread ** 2 for p in sc.plumes])
        if not mass.sum() > 0:
            mass = np.ones(len(sc.plumes))
        counts = np.floor(n * mass / mass.sum()).astype(int)
        counts[: n - counts.sum()] += 1
        chunks = []
        for p, c in zip(sc.plumes, counts):
            ctr = np.array([p.x, p.y]) + np.asarray(sc.init_offset, dtype=float)
            chunks.append(ctr + sc.init_spread_factor * p.spread * rng.standard_normal((c, 2)))
        pos = np.vstack(chunks)
        pos = np.clip(pos, [0.0, 0.0], [sc.width, sc.height])
    s = SampleSet.from_positions(pos, var=sc.noise_std ** 2, owner=owner)
    return s


def averaged_measure(sets: Sequence[SampleSet]) -> SampleSet:
    """``(1/N) sum_i rho_i`` as one sample set, coincident atoms combined."""
    n = len(sets)
    pos = np.vstack([s.pos for s in sets])
    w = np.concatenate([s.weight for s in sets]) / n
    labels, _ = kernels.greedy_merge(pos, w, 0.0)
    reps = np.flatnonzero(labels == np.arange(labels.size))
    acc = np.zeros(labels.size)
    np.add.at(acc, labels, w)
    k = reps.size
    out = SampleSet(np.arange(k), pos[reps], acc[reps], np.zeros(k), np.zeros(k), np.zeros(k),
                    np.full(k, -1))
    return out


def empirical_agent_measure(trajectory) -> DiscreteMeasure:
    """Uniform measure over visited positions, repeated visits combined."""
    p = np.asarray(trajectory, dtype=float).reshape(-1, 2)
    K = p.shape[0]
    if K < 1:
        raise ValueError("trajectory must contain at least one position")
    labels, _ = kernels.greedy_merge(p, np.ones(K), 0.0)
    reps = np.flatnonzero(labels == np.arange(K))
    counts = np.bincount(labels, minlength=K)[reps]
    return DiscreteMeasure(p[reps], counts / K)


def _w2_chain(snapshots, gt_points, gt_masses, size_cap, average):
    """Distances for one chain of snapshots, warm-starting each solve from
    the previous one. ``average`` marks the chain of averaged maps."""
    gt = DiscreteMeasure(gt_points, gt_masses)
    warm = WarmStart()
    out = []
    for snap in snapshots:
        if average:
            s = averaged_measure([SampleSet.from_positions(p, weights=w) for p, w in snap])
        else:
            s = SampleSet.from_positions(snap[0], weights=snap[1])
        out.append(w2_to_gt(s, gt, size_cap, warm))
    return out


def _check_mass(sets, stage, step):
    for i, s in enumerate(sets):
        tot = s.weight.sum()
        if not abs(tot - 1.0) <= MASS_TOL or (s.weight < 0).any():
            raise SimulationError(f"mass invariant broken after {stage}: sum = {tot!r}", step, i)


def run(sc: Scenario, *, workers: int = 1, check_mass: bool = True,
        on_row: Optional[Callable[[tuple], None]] = None,
        progress: Optional[Callable[[int, int], None]] = None) -> RunResult:
    """Run the full loop for ``sc.n_steps`` steps.

    Per step: renewal, adaptive virtual-variance tick (every
    ``update_interval`` steps, full network arm only), Stage A, Stage B,
    Stage C. Distances to the ground truth are evaluated every
    ``metric_interval`` steps and at the last step. Each agent's map and
    the averaged map form a chain of solves warm-started from the previous
    one; with ``workers > 1`` the chains run in parallel processes after
    the loop, giving the same numbers as the serial path. ``on_row``
    receives completed rows in order (streamed per step when serial).
    """
    t0 = time.perf_counter()
    world = World.build(sc)
    N = sc.n_agents
    M = sc.n_steps
    root = np.random.SeedSequence(sc.seed)
    init_ss, agent_ss, mlp_ss = root.spawn(3)
    init_rng = _rng(init_ss)
    agent_rngs = [_rng(s) for s in agent_ss.spawn(N)]
    mlp_rngs = [_rng(s) for s in mlp_ss.spawn(N)]

    prior = initial_sample_set(sc, init_rng)
    sets = []
    for i in range(N):
        s = prior.copy()
        s.owner = i
        sets.append(s)
    initial_sets = [s.copy() for s in sets]
    p0 = sc.initial_positions()
    states = [AgentState(i, np.array([p0[i, 0], p0[i, 1], 0.0, 0.0])) for i in range(N)]

    if sc.meanvar_mode == "network":
        with open(sc.meanvar_params, "r", encoding="utf-8") as fh:
            mv_params = MlpParams.from_text(fh.read())
    else:
        mv_params = None
    meanvar = [MeanVarBackend(sc.meanvar_mode, mv_params, max(sc.width, sc.height)) for _ in range(N)]
    nets = None
    if sc.mlp_enabled:
        hidden = (sc.neurons,) * sc.hidden_layers
        nets = [AdaptiveStdNet.create(mlp_rngs[i], hidden, sc.output_scale,
                                      learning_rate=sc.learning_rate,
                                      update_interval=sc.update_interval, kappa=sc.kappa,
                                      scale=max(sc.width, sc.height), horizon=max(M, 1))
                for i in range(N)]

    log = MetricsLog(N)
    gt = world.gt
    warms = [WarmStart() for _ in range(N + 1)]
    serial = workers <= 1
    snapshots = []  # (pos, weight) per agent at every metric point, pool mode only

    def distances(sets_now):
        per = [w2_to_gt(s, gt, sc.size_cap, warms[i]) for i, s in enumerate(sets_now)]
        return per, w2_to_gt(averaged_measure(sets_now), gt, sc.size_cap, warms[N])

    if serial:
        per0, avg0 = distances(sets)
        log.initial_w2 = np.array(per0)
        log.initial_w2_avg = avg0
    else:
        snapshots.append([(s.pos, s.weight) for s in sets])

    traj = np.zeros((M + 1, N, 2))
    traj[0] = p0
    reseeds = 0
    held = []  # rows awaiting pool results

    for k in range(M):
        agent = None
        try:
            reports = []
            for i in range(N):
                agent = i
                rep = RenewalReport()
                sets[i] = renew(sets[i], world.model.C @ states[i].x, world.field, world.sensor,
                                world.renewal, k, agent_rngs[i], meanvar[i], rep)
                reseeds += rep.reseeded
                reports.append(rep)
            agent = None
            if check_mass:
                _check_mass(sets, "renewal", k + 1)

            losses = [math.nan] * N
            if nets is not None and (k + 1) % sc.update_interval == 0:
                for i in range(N):
                    agent = i
                    sets[i], losses[i] = adaptive_std_step(nets[i], sets[i], k)
                agent = None
                if check_mass:
                    _check_mass(sets, "adaptive variance update", k + 1)

            for i in range(N):
                agent = i
                states[i], _, _ = stage_a(states[i], sets[i], world.model, world.control,
                                          world.stages, world.domain)
                sets[i] = stage_b(sets[i], world.model.C @ states[i].x, world.stages)
            agent = None
            if check_mass:
                _check_mass(sets, "stage B", k + 1)

            pos = np.array([world.model.C @ st.x for st in states])
            sets = stage_c(sets, pos, world.stages, world.renewal)
            for i in range(N):
                meanvar[i].prune(sets[i].ids)
            if check_mass:
                _check_mass(sets, "stage C", k + 1)

            traj[k + 1] = pos
            step = k + 1
            rows = [(step, i, math.nan, math.nan, losses[i], reports[i].births,
                     reports[i].deaths, float(pos[i, 0]), float(pos[i, 1])) for i in range(N)]
            if step % sc.metric_interval == 0 or step == M:
                if serial:
                    agent = None
                    per, avg = distances(sets)
                    rows = [r[:2] + (per[i], avg) + r[4:] for i, r in enumerate(rows)]
                else:
                    snapshots.append([(s.pos, s.weight) for s in sets])
        except SimulationError:
            raise
        except (D2ocError, ValueError, np.linalg.LinAlgError) as exc:
            raise SimulationError(f"{type(exc).__name__}: {exc}", k + 1, agent) from exc

        if serial:
            log.rows.extend(rows)
            if on_row is not None:
                for r in rows:
                    on_row(r)
        else:
            held.extend(rows)
        if progress is not None:
            progress(k + 1, M)

    if not serial:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_w2_chain, [snap[i] for snap in snapshots], gt.points, gt.masses,
                                sc.size_cap, False) for i in range(N)]
            futs.append(pool.submit(_w2_chain, snapshots, gt.points, gt.masses, sc.size_cap, True))
            chains = [f.result() for f in futs]
        log.initial_w2 = np.array([c[0] for c in chains[:N]])
        log.initial_w2_avg = chains[N][0]
        point = 0
        for r in held:
            if r[1] == 0 and (r[0] % sc.metric_interval == 0 or r[0] == M):
                point += 1
            if r[0] % sc.metric_interval == 0 or r[0] == M:
                r = r[:2] + (chains[r[1]][point], chains[N][point]) + r[4:]
            log.rows.append(r)
            if on_row is not None:
                on_row(r)

    return RunResult(sc, initial_sets, sets, log, traj, reseeds, time.perf_counter() - t0)


def ablate(sc: Scenario, **kw) -> Tuple[RunResult, RunResult]:
    """Same seed twice: baseline (``c2 = 0``, no adaptive network), then full."""
    base = run(sc.replace(c2=0.0, mlp_enabled=False), **kw)
    full = run(sc.replace(mlp_enabled=True), **kw)
    return base, full
