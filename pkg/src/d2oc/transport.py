"""Exact discrete 2-Wasserstein distance between weighted point clouds."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateField, SizeCapExceeded
from .field import GroundTruthField
from .sample_map import SampleSet, farthest_point_downsample

DEFAULT_SIZE_CAP = 1_000_000
# candidate arcs seeding the pricing list; the solver still certifies
# optimality over every arc with a full sweep before returning
SRC_NEIGHBORS = 16
DST_NEIGHBORS = 4


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if p.shape[0] != m.shape[0]:
            raise ValueError("points and masses differ in length")
        if m.size == 0:
            raise ValueError("empty measure")
        if np.any(m < 0.0) or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "masses", m)

    def __len__(self):
        return self.masses.shape[0]

    @classmethod
    def from_samples(cls, s: SampleSet) -> "DiscreteMeasure":
        return cls(s.pos, s.weight)


@dataclass(frozen=True)
class TransportPlan:
    coupling: np.ndarray
    cost: float


def sq_dist(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dx = p[:, None, 0] - q[None, :, 0]
    dy = p[:, None, 1] - q[None, :, 1]
    return dx * dx + dy * dy


def _candidates(C: np.ndarray) -> np.ndarray:
    m, n = C.shape
    parts = []
    ks = min(SRC_NEIGHBORS, n)
    if ks < n:
        idx = np.argpartition(C, ks - 1, axis=1)[:, :ks]
        parts.append((np.arange(m)[:, None] * n + idx).ravel())
    kt = min(DST_NEIGHBORS, m)
    if kt < m:
        idx = np.argpartition(C, kt - 1, axis=0)[:kt, :]
        parts.append((idx * n + np.arange(n)[None, :]).ravel())
    if not parts or ks == n:
        return None
    return np.unique(np.concatenate(parts))


class WarmStart:
    """Dual potentials of the target carried from one solve to the next.

    When consecutive problems share the same target measure (the gridded
    ground truth), the previous target potentials give good source
    potentials by a c-transform; the costs are then solved in reduced form,
    which leaves the optimal plan unchanged but shortens the simplex run.
    """

    __slots__ = ("sink",)

    def __init__(self):
        self.sink = None


def solve_transport(a, b, C, size_cap: int = DEFAULT_SIZE_CAP, warm: WarmStart = None) -> np.ndarray:
    """Optimal coupling for marginals ``a``, ``b`` and cost matrix ``C``.

    Zero-mass rows and columns are removed before the solve and come back
    as zero rows/columns of the returned coupling.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size * b.size > size_cap:
        raise SizeCapExceeded(f"{a.size}x{b.size} exceeds the solver cap of {size_cap} entries")
    ia = np.flatnonzero(a > 0.0)
    ib = np.flatnonzero(b > 0.0)
    # exact balancing so the tree solution is feasible to the last bit
    aa = a[ia] / a[ia].sum()
    bb = b[ib] / b[ib].sum()
    Cs = np.asarray(C, dtype=float)[np.ix_(ia, ib)]
    g = None
    if warm is not None and warm.sink is not None and warm.sink.shape[0] == b.size:
        g = warm.sink[ib]
        if not np.all(np.isfinite(g)):
            g = None
    if g is not None:
        Cs = Cs - g[None, :]
        Cs -= Cs.min(axis=1, keepdims=True)
    Cs = np.ascontiguousarray(Cs)
    flow, _, _, pt = kernels.network_simplex(aa, bb, Cs, _candidates(Cs), potentials=True)
    if warm is not None:
        sink = np.full(b.size, np.nan)
        sink[ib] = pt if g is None else g + pt
        warm.sink = sink - np.nanmean(sink)
    out = np.zeros((a.size, b.size))
    out[np.ix_(ia, ib)] = flow
    return out


def exact_w2(src: DiscreteMeasure, dst: DiscreteMeasure, size_cap: int = DEFAULT_SIZE_CAP,
             warm: WarmStart = None):
    """Exact W2 between two discrete measures; returns ``(plan, distance)``."""
    C = sq_dist(src.points, dst.points)
    P = solve_transport(src.masses, dst.masses, C, size_cap, warm)
    cost = max(float((P * C).sum()), 0.0)
    return TransportPlan(P, cost), float(np.sqrt(cost))


def gt_grid_measure(field: GroundTruthField, grid: int = 50) -> DiscreteMeasure:
    """Cell-centre discretization of the field on a ``grid x grid`` partition."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    dom = field.domain
    xs = dom.xmin + (np.arange(grid) + 0.5) * (dom.xmax - dom.xmin) / grid
    ys = dom.ymin + (np.arange(grid) + 0.5) * (dom.ymax - dom.ymin) / grid
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack((X.ravel(), Y.ravel()))
    rho = field.density(pts)
    keep = rho > 0.0
    total = rho[keep].sum()
    if not total > 0.0:
        raise DegenerateField("ground-truth density vanishes on every grid cell")
    return DiscreteMeasure(pts[keep], rho[keep] / total)


def w2_to_gt(s: SampleSet, gt: DiscreteMeasure, size_cap: int = DEFAULT_SIZE_CAP,
             warm: WarmStart = None) -> float:
    """W2 between a sample map and the discretized ground truth.

    The map is reduced by farthest-point downsampling when the problem
    would exceed ``size_cap`` entries.
    """
    limit = size_cap // len(gt)
    if limit < 1:
        raise SizeCapExceeded(f"ground-truth measure alone exceeds the cap of {size_cap}")
    if len(s) > limit:
        s = farthest_point_downsample(s, limit)
    src = DiscreteMeasure(s.pos, s.weight / s.weight.sum())
    return exact_w2(src, gt, size_cap, warm)[1]
