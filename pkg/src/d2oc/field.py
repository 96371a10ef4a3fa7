"""Ground-truth plume field and the noisy point sensor."""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]`` in meters."""

    xmin: float = 0.0
    xmax: float = 200.0
    ymin: float = 0.0
    ymax: float = 200.0

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError("domain must have positive extent")

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.xmin, self.ymin])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.xmax, self.ymax])

    @property
    def side(self) -> float:
        """Longest side length, used to normalize network features."""
        return max(self.xmax - self.xmin, self.ymax - self.ymin)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((x[..., 0] >= self.xmin) & (x[..., 0] <= self.xmax)
                & (x[..., 1] >= self.ymin) & (x[..., 1] <= self.ymax))


@dataclass(frozen=True)
class GaussianComponent:
    """Isotropic Gaussian bump ``amplitude * exp(-|x - c|^2 / (2 spread^2))``."""

    center: Tuple[float, float]
    amplitude: float
    spread: float

    def __post_init__(self):
        if not self.amplitude >= 0.0:
            raise ConfigError(f"plume amplitude must be >= 0, got {self.amplitude}")
        if not self.spread > 0.0:
            raise ConfigError(f"plume spread must be > 0, got {self.spread}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class GroundTruthField:
    components: Tuple[GaussianComponent, ...]
    domain: Domain = Domain()

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigError("ground-truth field needs at least one component")
        for c in comps:
            if not bool(self.domain.contains(c.center)):
                raise ConfigError(f"plume center {c.center} lies outside the domain")
        object.__setattr__(self, "components", comps)

    def density(self, x) -> np.ndarray:
        """Vectorized density over points of shape (..., 2); zero outside the domain."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for c in self.components:
            d2 = (x[..., 0] - c.center[0]) ** 2 + (x[..., 1] - c.center[1]) ** 2
            out = out + c.amplitude * np.exp(-d2 / (2.0 * c.spread * c.spread))
        return np.where(self.domain.contains(x), out, 0.0)


@dataclass(frozen=True)
class SensorModel:
    noise_std: float = 0.0
    sensing_range: float = 10.0

    def __post_init__(self):
        if not self.noise_std >= 0.0:
            raise ConfigError("sensor noise_std must be >= 0")
        if not self.sensing_range > 0.0:
            raise ConfigError("sensing_range must be > 0")


def density_at(field: GroundTruthField, x) -> float:
    """Point evaluation of the plume density; returns 0 outside the domain."""
    return float(field.density(np.asarray(x, dtype=float)[:2]))


def sense(field: GroundTruthField, model: SensorModel, x, rng: np.random.Generator) -> float:
    """Noisy reading at ``x``. Consumes exactly one standard normal draw."""
    eps = rng.standard_normal()
    return density_at(field, x) + model.noise_std * eps


def sense_many(field: GroundTruthField, model: SensorModel, xs, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sense`; consumes one draw per row, in row order."""
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    eps = rng.standard_normal(xs.shape[0])
    return field.density(xs) + model.noise_std * eps


def plume_field(specs: Sequence[Tuple[float, float, float, float]], domain: Domain = Domain()) -> GroundTruthField:
    """Build a field from ``(cx, cy, amplitude, spread)`` tuples."""
    return GroundTruthField(tuple(GaussianComponent((cx, cy), a, s) for cx, cy, a, s in specs), domain)
