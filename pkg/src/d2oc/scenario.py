"""Scenario configuration and its INI representation.

Grammar: standard INI sections. Every key is optional and falls back to
the defaults below (the 200 m, five-agent, 3000-step reference setup).
Plumes are declared as one ``[plume.<name>]`` section each with keys
``x``, ``y``, ``spread`` and either ``amplitude`` (peak density) or
``mass`` (integral of the bump, i.e. ``amplitude = mass / (2 pi spread^2)``).
Lists of points are written ``x1 y1; x2 y2; ...``.
"""
import configparser
import dataclasses
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError

DEFAULT_PLUMES = (
    # (x, y, mass, spread)
    (60.0, 140.0, 0.40, 15.0),
    (145.0, 150.0, 0.30, 12.0),
    (120.0, 55.0, 0.30, 14.0),
)


@dataclass(frozen=True)
class PlumeSpec:
    name: str
    x: float
    y: float
    amplitude: float
    spread: float


def _default_plumes():
    return tuple(PlumeSpec(f"p{k}", x, y, m / (2 * math.pi * s * s), s)
                 for k, (x, y, m, s) in enumerate(DEFAULT_PLUMES))


@dataclass(frozen=True)
class Scenario:
    name: str = "reference"
    seed: int = 0
    width: float = 200.0
    height: float = 200.0
    dt: float = 0.2
    t_op: float = 600.0
    n_agents: int = 5
    agent_positions: Optional[Tuple[Tuple[float, float], ...]] = None
    n_samples: int = 300
    init_mode: str = "offset_blobs"
    init_offset: Tuple[float, float] = (-30.0, -25.0)
    init_spread_factor: float = 1.5
    sensing_range: float = 10.0
    comm_range: float = 20.0
    noise_std: float = 2e-6
    create_threshold: float = 1e-5
    drop_threshold: float = 2e-6
    candidates_per_step: int = 10
    merge_radius: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    beta: float = 1.0
    horizon: int = 5
    r_weight: float = 0.01
    max_speed: float = 5.0
    max_tilt_deg: float = 10.0
    mlp_enabled: bool = True
    hidden_layers: int = 2
    neurons: int = 64
    learning_rate: float = 1e-3
    update_interval: int = 10
    kappa: float = 0.05
    output_scale: float = 0.1
    meanvar_mode: str = "empirical"
    meanvar_params: Optional[str] = None
    metric_interval: int = 25
    gt_grid: int = 50
    size_cap: int = 1_000_000
    plumes: Tuple[PlumeSpec, ...] = dc_field(default_factory=_default_plumes)

    def __post_init__(self):
        self.validate()

    @property
    def n_steps(self) -> int:
        return int(round(self.t_op / self.dt))

    @property
    def mass_budget(self) -> float:
        return 1.0 / self.n_steps if self.n_steps > 0 else 1.0

    @property
    def max_accel(self) -> float:
        return 9.81 * math.tan(math.radians(self.max_tilt_deg))

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.width > 0 and self.height > 0, "domain width/height must be > 0")
        need(self.dt > 0, "dt must be > 0")
        need(self.t_op >= 0, "t_op must be >= 0")
        need(self.n_agents >= 1, "need at least one agent")
        need(self.n_samples >= 1, "n_samples must be >= 1")
        need(self.init_mode in ("offset_blobs", "uniform"), f"unknown init mode {self.init_mode!r}")
        need(self.sensing_range > 0, "sensing range must be > 0")
        need(self.comm_range >= 0, "comm range must be >= 0")
        need(self.noise_std >= 0, "noise_std must be >= 0")
        need(self.drop_threshold < self.create_threshold, "drop threshold must be below create threshold")
        need(self.candidates_per_step >= 0, "candidates must be >= 0")
        need(self.merge_radius >= 0, "merge radius must be >= 0")
        need(min(self.c1, self.c2, self.beta) >= 0, "c1, c2, beta must be >= 0")
        need(self.horizon >= 1, "horizon must be >= 1")
        need(self.r_weight > 0, "input weight must be > 0")
        need(self.max_speed > 0 and 0 < self.max_tilt_deg < 90, "invalid speed/tilt limits")
        need(self.hidden_layers >= 0 and self.neurons >= 1, "invalid network shape")
        need(self.learning_rate > 0, "learning rate must be > 0")
        need(self.update_interval >= 1, "update interval must be >= 1")
        need(self.meanvar_mode in ("empirical", "network"), f"unknown meanvar mode {self.meanvar_mode!r}")
        need(self.meanvar_mode == "empirical" or self.meanvar_params, "network meanvar mode needs meanvar_params")
        need(self.metric_interval >= 1, "metric interval must be >= 1")
        need(self.gt_grid >= 2, "gt grid must be >= 2")
        need(self.size_cap >= 1, "size cap must be >= 1")
        need(len(self.plumes) >= 1, "at least one plume is required")
        for p in self.plumes:
            need(p.amplitude >= 0 and p.spread > 0, f"plume {p.name}: bad amplitude/spread")
            need(0 <= p.x <= self.width and 0 <= p.y <= self.height, f"plume {p.name} outside domain")
        if self.agent_positions is not None:
            need(len(self.agent_positions) == self.n_agents, "agent position count differs from n_agents")
            for x, y in self.agent_positions:
                need(0 <= x <= self.width and 0 <= y <= self.height, f"agent start ({x}, {y}) outside domain")

    def initial_positions(self) -> np.ndarray:
        if self.agent_positions is not None:
            return np.array(self.agent_positions, dtype=float)
        k = np.arange(self.n_agents)
        return np.column_stack((self.width * (k + 1) / (self.n_agents + 1),
                                np.full(self.n_agents, 0.1 * self.height)))


# (section, key, attribute, kind)
_KEYS = [
    ("scenario", "name", "name", str), ("scenario", "seed", "seed", int),
    ("domain", "width", "width", float), ("domain", "height", "height", float),
    ("time", "dt", "dt", float), ("time", "t_op", "t_op", float),
    ("agents", "count", "n_agents", int), ("agents", "positions", "agent_positions", "points"),
    ("samples", "count", "n_samples", int), ("samples", "init", "init_mode", str),
    ("samples", "offset", "init_offset", "point"), ("samples", "spread_factor", "init_spread_factor", float),
    ("sensing", "range", "sensing_range", float), ("sensing", "noise_std", "noise_std", float),
    ("sensing", "create_threshold", "create_threshold", float),
    ("sensing", "drop_threshold", "drop_threshold", float),
    ("sensing", "candidates", "candidates_per_step", int),
    ("stages", "c1", "c1", float), ("stages", "c2", "c2", float), ("stages", "beta", "beta", float),
    ("stages", "comm_range", "comm_range", float), ("stages", "merge_radius", "merge_radius", float),
    ("control", "horizon", "horizon", int), ("control", "r", "r_weight", float),
    ("control", "max_speed", "max_speed", float), ("control", "max_tilt_deg", "max_tilt_deg", float),
    ("mlp", "enabled", "mlp_enabled", bool), ("mlp", "hidden_layers", "hidden_layers", int),
    ("mlp", "neurons", "neurons", int), ("mlp", "learning_rate", "learning_rate", float),
    ("mlp", "update_interval", "update_interval", int), ("mlp", "kappa", "kappa", float),
    ("mlp", "output_scale", "output_scale", float), ("mlp", "meanvar", "meanvar_mode", str),
    ("mlp", "meanvar_params", "meanvar_params", str),
    ("metrics", "interval", "metric_interval", int), ("metrics", "gt_grid", "gt_grid", int),
    ("metrics", "size_cap", "size_cap", int),
]
_SECTIONS = {s for s, _, _, _ in _KEYS}


def _parse_points(text: str):
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            xy = chunk.replace(",", " ").split()
            if len(xy) != 2:
                raise ConfigError(f"bad point {chunk.strip()!r}; expected 'x y'")
            pts.append((float(xy[0]), float(xy[1])))
    return tuple(pts)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return "; ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in v)
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario file: {exc}") from None
    for sec in cp.sections():
        if sec not in _SECTIONS and not sec.startswith("plume."):
            raise ConfigError(f"unknown section [{sec}]")
    known = {(s, k) for s, k, _, _ in _KEYS}
    for sec in cp.sections():
        if sec.startswith("plume."):
            continue
        for key in cp[sec]:
            if (sec, key) not in known:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    kw = {}
    for sec, key, attr, kind in _KEYS:
        if not cp.has_option(sec, key):
            continue
        raw = cp.get(sec, key).strip()
        try:
            if kind is bool:
                kw[attr] = cp.getboolean(sec, key)
            elif kind == "points":
                kw[attr] = _parse_points(raw) if raw.lower() not in ("", "auto") else None
            elif kind == "point":
                pt = _parse_points(raw)
                if len(pt) != 1:
                    raise ConfigError(f"[{sec}] {key} must be a single 'x y' pair")
                kw[attr] = pt[0]
            elif kind is str:
                kw[attr] = raw if raw.lower() not in ("", "none") or attr != "meanvar_params" else None
            else:
                kw[attr] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key}: {exc}") from None
    plumes = []
    for sec in cp.sections():
        if not sec.startswith("plume."):
            continue
        body = cp[sec]
        extra = set(body) - {"x", "y", "spread", "amplitude", "mass"}
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)} in [{sec}]")
        try:
            x, y, s = float(body["x"]), float(body["y"]), float(body["spread"])
            if ("amplitude" in body) == ("mass" in body):
                raise ConfigError(f"[{sec}] needs exactly one of amplitude or mass")
            amp = float(body["amplitude"]) if "amplitude" in body else float(body["mass"]) / (2 * math.pi * s * s)
        except KeyError as exc:
            raise ConfigError(f"[{sec}] missing key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"[{sec}]: {exc}") from None
        plumes.append(PlumeSpec(sec[len("plume."):], x, y, amp, s))
    if plumes:
        kw["plumes"] = tuple(plumes)
    try:
        return Scenario(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text)


def scenario_to_ini(sc: Scenario) -> str:
    """Fully resolved scenario text; parsing it back gives an equal Scenario."""
    lines = []
    current = None
    for sec, key, attr, _ in _KEYS:
        v = getattr(sc, attr)
        if sec != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{sec}]")
            current = sec
        if v is None:
            v = "auto" if attr == "agent_positions" else "none"
        lines.append(f"{key} = {_fmt(v)}")
    for p in sc.plumes:
        lines += ["", f"[plume.{p.name}]", f"x = {_fmt(p.x)}", f"y = {_fmt(p.y)}",
                  f"amplitude = {_fmt(p.amplitude)}", f"spread = {_fmt(p.spread)}"]
    return "\n".join(lines) + "\n"
