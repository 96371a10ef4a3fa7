"""Command-line entry point: ``d2oc run|ablate|validate|plot``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
The output directory defaults to ``$D2OC_OUT`` (or ``./d2oc_out``) when
``--out`` is not given.
"""
import argparse
import csv
import json
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__, kernels
from .errors import ConfigError, D2ocError
from .plots import field_svg, series_svg
from .scenario import Scenario, load_scenario, parse_scenario, scenario_to_ini
from .sim import COLUMNS, MetricsLog, RunResult, World, ablate, run

OUT_ENV = "D2OC_OUT"
INT_COLUMNS = {"step", "agent", "births", "deaths"}


def _fmt(v, digits=9) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.*g" % (digits, v)


def write_metrics_csv(log: MetricsLog, path) -> None:
    """Header plus one row per (step, agent), 9 significant digits."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in log.rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc.strerror or exc}") from exc


class _MetricsStream:
    """Appends rows as the simulation produces them."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(COLUMNS)

    def __call__(self, row):
        self.w.writerow([_fmt(v) for v in row])

    def close(self):
        self.fh.close()


def read_metrics_csv(path, n_agents: Optional[int] = None) -> MetricsLog:
    """Parse a metrics CSV back into a ``MetricsLog``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != COLUMNS:
            raise ConfigError(f"{path}: unexpected metrics header {header}")
        rows = [tuple(int(v) if name in INT_COLUMNS else float(v) for name, v in zip(COLUMNS, r))
                for r in rd]
    if n_agents is None:
        n_agents = (max(r[1] for r in rows) + 1) if rows else 1
    return MetricsLog(n_agents, rows)


def write_trajectories_csv(traj: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "agent", "x", "y"))
        for k in range(traj.shape[0]):
            for i in range(traj.shape[1]):
                w.writerow((k, i, _fmt(traj[k, i, 0], 17), _fmt(traj[k, i, 1], 17)))


def read_trajectories_csv(path) -> np.ndarray:
    a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if a.size == 0:
        return np.zeros((0, 0, 2))
    steps, agents = int(a[:, 0].max()) + 1, int(a[:, 1].max()) + 1
    out = np.full((steps, agents, 2), np.nan)
    out[a[:, 0].astype(int), a[:, 1].astype(int)] = a[:, 2:4]
    return out


def _versions():
    return {"d2oc": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "kernels": kernels.BACKEND}


def write_bundle(res: RunResult, out: Path, metrics_written: bool = False) -> dict:
    """Write CSVs, sample snapshots, scenario echo, manifest and plots."""
    out.mkdir(parents=True, exist_ok=True)
    if not metrics_written:
        write_metrics_csv(res.log, out / "metrics.csv")
    write_trajectories_csv(res.trajectories, out / "trajectories.csv")
    for i, s in enumerate(res.final_sets):
        (out / f"samples_agent{i}.txt").write_text(s.to_records(), encoding="utf-8")
    ini = scenario_to_ini(res.scenario)
    (out / "scenario.ini").write_text(ini, encoding="utf-8")
    manifest = {
        "scenario": ini,
        "seed": res.scenario.seed,
        "n_steps": res.scenario.n_steps,
        "versions": _versions(),
        "wall_time": res.wall_time,
        "reseeds": res.reseeds,
        "initial_w2_avg": res.log.initial_w2_avg,
        "initial_w2": [float(v) for v in res.log.initial_w2] if res.log.initial_w2 is not None else [],
        "final_w2_avg": res.final_w2,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    render_plots(out)
    return manifest


def render_plots(run_dir) -> List[Path]:
    """Re-render the SVGs of a run directory from its logs only."""
    d = Path(run_dir)
    manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    sc = parse_scenario(manifest["scenario"])
    log = read_metrics_csv(d / "metrics.csv", sc.n_agents)
    log.initial_w2_avg = manifest.get("initial_w2_avg", math.nan)
    init = manifest.get("initial_w2") or [math.nan] * sc.n_agents
    log.initial_w2 = np.asarray(init, dtype=float)
    traj = read_trajectories_csv(d / "trajectories.csv")
    samples = []
    for i in range(sc.n_agents):
        p = d / f"samples_agent{i}.txt"
        if p.exists():
            a = np.loadtxt(p, comments="#", ndmin=2)
            samples.append(a[:, 1:3] if a.size else np.zeros((0, 2)))

    world = World.build(sc)
    n = 80
    xs = (np.arange(n) + 0.5) * sc.width / n
    ys = (np.arange(n) + 0.5) * sc.height / n
    gx, gy = np.meshgrid(xs, ys)
    dens = world.field.density(np.column_stack((gx.ravel(), gy.ravel()))).reshape(n, n)

    written = []
    files = {
        "trajectories.svg": field_svg(dens, (0.0, sc.width, 0.0, sc.height), traj, samples,
                                      title=f"{sc.name}: agent paths and final samples"),
        "w2.svg": series_svg(
            dict([("averaged map", log.w2_avg_series())]
                 + [(f"agent {i}", log.w2_agent_series(i)) for i in range(sc.n_agents)]),
            "Wasserstein distance to ground truth", ylabel="W2 [m]"),
        "loss.svg": series_svg({"adaptive std loss": log.loss_series()}, "Adaptive std loss",
                               ylabel="loss"),
    }
    for name, text in files.items():
        (d / name).write_text(text, encoding="utf-8")
        written.append(d / name)
    return written


def _out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "d2oc_out")


def _parse_seeds(tokens) -> List[int]:
    seeds = []
    for t in tokens:
        for part in str(t).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                a, b = part.split("..", 1)
                seeds.extend(range(int(a), int(b) + 1))
            else:
                seeds.append(int(part))
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def _series_point(res: RunResult, frac: float) -> float:
    st, v = res.log.w2_avg_series()
    k = int(np.searchsorted(st, frac * res.scenario.n_steps))
    return float(v[min(k, v.size - 1)])


def _arm_summary(res: RunResult) -> dict:
    return {"initial_w2": res.initial_w2, "w2_at_25pct": _series_point(res, 0.25),
            "w2_at_50pct": _series_point(res, 0.5), "final_w2": res.final_w2,
            "wall_time": res.wall_time}


def _ablate_one(sc: Scenario, out: str) -> dict:
    base, full = ablate(sc)
    for name, res in (("baseline", base), ("full", full)):
        write_bundle(res, Path(out) / f"seed_{sc.seed}" / name)
    return {"seed": sc.seed, "baseline": _arm_summary(base), "full": _arm_summary(full)}


def summarize_ablation(per_seed: List[dict]) -> dict:
    fb = [r["baseline"]["final_w2"] for r in per_seed]
    ff = [r["full"]["final_w2"] for r in per_seed]
    return {"seeds": [r["seed"] for r in per_seed], "per_seed": per_seed,
            "median_final_w2": {"baseline": float(np.median(fb)), "full": float(np.median(ff))}}


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    sys.stdout.write(scenario_to_ini(sc))
    return 0


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stream = _MetricsStream(out / "metrics.csv")
    try:
        res = run(sc, workers=max(1, args.threads), on_row=stream)
    finally:
        stream.close()
    write_bundle(res, out, metrics_written=True)
    print(f"{sc.name}: {sc.n_steps} steps, final W2 {res.final_w2:.6g} "
          f"(initial {res.initial_w2:.6g}), {res.wall_time:.1f} s -> {out}")
    return 0


def cmd_ablate(args) -> int:
    sc = load_scenario(args.scenario)
    seeds = _parse_seeds(args.seeds)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scs = [sc.replace(seed=s) for s in seeds]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            per_seed = list(pool.map(_ablate_one, scs, [str(out)] * len(scs)))
    else:
        per_seed = [_ablate_one(s, str(out)) for s in scs]
    summary = summarize_ablation(per_seed)
    summary["scenario"] = scenario_to_ini(sc)
    summary["versions"] = _versions()
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    for r in per_seed:
        print(f"seed {r['seed']}: baseline {r['baseline']['final_w2']:.6g}  full {r['full']['final_w2']:.6g}")
    med = summary["median_final_w2"]
    print(f"median final W2: baseline {med['baseline']:.6g}  full {med['full']:.6g}")
    return 0


def cmd_plot(args) -> int:
    for p in render_plots(args.run_dir):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="d2oc", description="Decentralized density-driven mapping simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./d2oc_out)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1, help="processes for distance evaluation")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="baseline vs full over several seeds")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.add_argument("--seeds", nargs="+", default=["0..4"], help="e.g. 0 1 2 or 0..4")
    p.add_argument("--threads", type=int, default=1, help="seeds run in parallel")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("validate", help="check a scenario file and print it fully resolved")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="re-render SVGs of a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (D2ocError, OSError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
