"""Linear agent dynamics, weighted centroid and the analytic receding-horizon law."""
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import ConfigError, EmptySelection, SingularSystem

G = 9.81


@dataclass(frozen=True)
class LtiModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ConfigError(f"inconsistent model shapes A{A.shape} B{B.shape} C{C.shape}")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def CB(self) -> np.ndarray:
        return self.C @ self.B

    @property
    def CA(self) -> np.ndarray:
        return self.C @ self.A


def double_integrator(dt: float = 0.2) -> LtiModel:
    """Per-axis double integrator with state ``(px, py, vx, vy)``."""
    I = np.eye(2)
    Z = np.zeros((2, 2))
    A = np.block([[I, dt * I], [Z, I]])
    B = np.vstack((0.5 * dt * dt * I, dt * I))
    C = np.hstack((I, Z))
    return LtiModel(A, B, C, dt)


@dataclass(frozen=True)
class ControlConfig:
    R: np.ndarray = 0.01 * np.eye(2)
    horizon: int = 5
    max_speed: float = 5.0
    max_accel: float = G * np.tan(np.radians(10.0))

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if not np.allclose(R, R.T):
            raise ConfigError("R must be symmetric")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ConfigError("R must be positive definite") from None
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        object.__setattr__(self, "R", R)


@dataclass
class AgentState:
    id: int
    x: np.ndarray

    def position(self, model: LtiModel) -> np.ndarray:
        return model.C @ self.x


def weighted_centroid(positions, coeffs) -> Tuple[np.ndarray, float]:
    """Coefficient-weighted mean of positions and the coefficient sum."""
    q = np.asarray(positions, dtype=float).reshape(-1, 2)
    pi = np.asarray(coeffs, dtype=float).reshape(-1)
    pos = pi > 0.0
    if not pos.any():
        raise EmptySelection("no positive transport coefficient")
    gamma = float(pi[pos].sum())
    return (pi[pos] @ q[pos]) / gamma, gamma


def stage_cost(model: LtiModel, x, u, centroid, gamma, R) -> float:
    """``gamma |C(Ax + Bu) - q_c|^2 + u' R u``."""
    e = model.C @ (model.A @ x + model.B @ u) - centroid
    return float(gamma * e @ e + u @ R @ u)


def analytic_control(model: LtiModel, x, centroid, gamma: float, R) -> np.ndarray:
    """Closed-form minimizer of the one-step stage cost, in output coordinates."""
    x = np.asarray(x, dtype=float)
    R = np.asarray(R, dtype=float)
    CB = model.CB
    H = R + gamma * CB.T @ CB
    rhs = gamma * CB.T @ (np.asarray(centroid, dtype=float) - model.CA @ x)
    try:
        u = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(u)):
        raise SingularSystem("non-finite control input")
    return u


def step_dynamics(model: LtiModel, state: AgentState, u, cfg: ControlConfig, domain) -> AgentState:
    """Propagate one step with input, speed and domain saturation.

    Assumes the double-integrator layout: positions in ``x[:2]`` and
    velocities in ``x[2:4]``.
    """
    u = np.clip(np.asarray(u, dtype=float), -cfg.max_accel, cfg.max_accel)
    x = model.A @ state.x + model.B @ u
    v = x[2:4]
    speed = np.hypot(v[0], v[1])
    if speed > cfg.max_speed:
        x[2:4] = v * (cfg.max_speed / speed)
    if domain is not None:
        lo, hi = domain.lo, domain.hi
        for k in range(2):
            if x[k] < lo[k] or x[k] > hi[k]:
                x[k] = min(max(x[k], lo[k]), hi[k])
                x[2 + k] = 0.0
    return AgentState(state.id, x)


def closed_loop_matrix(model: LtiModel, gamma: float, R) -> np.ndarray:
    """``A - B K`` for the unsaturated law ``u = K (q_c - C A x)``."""
    CB = model.CB
    K = np.linalg.solve(np.asarray(R, dtype=float) + gamma * CB.T @ CB, gamma * CB.T)
    return model.A - model.B @ K @ model.CA


def receding_horizon_step(model: LtiModel, state: AgentState,
                          selector: Callable[[np.ndarray], Tuple[np.ndarray, float]],
                          cfg: ControlConfig, domain=None):
    """Plan ``cfg.horizon`` stepwise inputs and commit the first.

    ``selector(p)`` returns ``(centroid, gamma)`` for a predicted position
    ``p``. Returns ``(next_state, planned_inputs)``.
    """
    plan = np.zeros((cfg.horizon, model.B.shape[1]))
    pred = state
    nxt = None
    for l in range(cfg.horizon):
        centroid, gamma = selector(model.C @ pred.x)
        plan[l] = analytic_control(model, pred.x, centroid, gamma, cfg.R)
        pred = step_dynamics(model, pred, plan[l], cfg, domain)
        if l == 0:
            nxt = pred
    return nxt, plan
