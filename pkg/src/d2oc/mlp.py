"""Small ReLU multilayer perceptrons written against numpy.

Two roles: a fixed mean/variance regressor (or its empirical Welford
stand-in) and the online-trained network that nudges each sample's
virtual standard deviation.
"""
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionMismatch

FORMAT_TAG = "d2oc-mlp"
FORMAT_VERSION = 1
VAR_FLOOR = 1e-12


@dataclass
class MlpParams:
    """Layers as ``(W, b)`` with ``W`` of shape ``(out, in)``."""

    layers: List[Tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        layers = []
        prev = None
        for W, b in self.layers:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            b = np.asarray(b, dtype=float).reshape(-1)
            if b.shape[0] != W.shape[0] or (prev is not None and W.shape[1] != prev):
                raise DimensionMismatch("layer shapes do not chain")
            prev = W.shape[0]
            layers.append((W, b))
        if not layers:
            raise DimensionMismatch("network needs at least one layer")
        self.layers = layers

    @property
    def dims(self) -> List[int]:
        return [self.layers[0][0].shape[1]] + [W.shape[0] for W, _ in self.layers]

    def copy(self) -> "MlpParams":
        return MlpParams([(W.copy(), b.copy()) for W, b in self.layers])

    @classmethod
    def init(cls, dims: Sequence[int], rng: np.random.Generator, output_scale: float = 1.0) -> "MlpParams":
        """Glorot-uniform weights, zero biases; the output layer's range is
        multiplied by ``output_scale`` (0 gives an all-zero output layer)."""
        layers = []
        for k in range(len(dims) - 1):
            lim = np.sqrt(6.0 / (dims[k] + dims[k + 1]))
            W = rng.uniform(-lim, lim, size=(dims[k + 1], dims[k]))
            if k == len(dims) - 2:
                W = W * output_scale
            layers.append((W, np.zeros(dims[k + 1])))
        return cls(layers)

    def to_text(self) -> str:
        """Versioned decimal format: header, dims line, then per layer the
        weight rows followed by one bias row."""
        out = [f"{FORMAT_TAG} {FORMAT_VERSION}", " ".join(str(d) for d in self.dims)]
        for W, b in self.layers:
            out.extend(" ".join(repr(float(v)) for v in row) for row in W)
            out.append(" ".join(repr(float(v)) for v in b))
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MlpParams":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = lines[0].split()
        if len(head) != 2 or head[0] != FORMAT_TAG or int(head[1]) != FORMAT_VERSION:
            raise ConfigError(f"unrecognized network file header: {lines[0]!r}")
        dims = [int(v) for v in lines[1].split()]
        rows = iter(lines[2:])
        layers = []
        for k in range(len(dims) - 1):
            W = np.array([[float(v) for v in next(rows).split()] for _ in range(dims[k + 1])])
            b = np.array([float(v) for v in next(rows).split()])
            if W.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise ConfigError(f"layer {k} does not match the dims header")
            layers.append((W, b))
        return cls(layers)


def forward(params: MlpParams, x) -> np.ndarray:
    """Feed-forward pass. ``x`` is one input vector or a batch ``(n, in)``."""
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != params.dims[0]:
        raise DimensionMismatch(f"input has {h.shape[-1]} features, network expects {params.dims[0]}")
    last = len(params.layers) - 1
    for k, (W, b) in enumerate(params.layers):
        h = h @ W.T + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h


def mse_and_grads(params: MlpParams, X, target=0.0):
    """Loss ``mean((f(X) - target)^2)`` over the batch and its gradients.

    The network must have a single output. Returns ``(loss, outputs, grads)``
    where ``grads`` mirrors ``params.layers``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.dims[0]:
        raise DimensionMismatch("batch width does not match the network input")
    n = X.shape[0]
    acts = [X]
    pre = []
    h = X
    last = len(params.layers) - 1
    for k, (W, b) in enumerate(params.layers):
        z = h @ W.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
        acts.append(h)
    y = h[:, 0]
    r = y - target
    loss = float(np.mean(r * r))
    delta = (2.0 / n) * r[:, None]
    grads = [None] * len(params.layers)
    for k in range(last, -1, -1):
        W, _ = params.layers[k]
        grads[k] = (delta.T @ acts[k], delta.sum(axis=0))
        if k > 0:
            delta = (delta @ W) * (pre[k - 1] > 0.0)
    return loss, y, grads


def sgd_update(params: MlpParams, grads, eta: float) -> MlpParams:
    """One plain gradient-descent step; returns new parameters."""
    if len(grads) != len(params.layers):
        raise DimensionMismatch("gradient list does not match the layers")
    out = []
    for (W, b), (gW, gb) in zip(params.layers, grads):
        gW = np.asarray(gW, dtype=float)
        gb = np.asarray(gb, dtype=float).reshape(-1)
        if gW.shape != W.shape or gb.shape != b.shape:
            raise DimensionMismatch("gradient shape does not match parameter shape")
        out.append((W - eta * gW, b - eta * gb))
    return MlpParams(out)


class MeanVarBackend:
    """Per-sample mean and intrinsic variance from sensor readings.

    ``empirical`` keeps Welford running statistics per sample id.
    ``network`` additionally maps ``[q/L, p/L, reading, running mean]``
    through a fixed network whose outputs are ``(mean, log variance)``.
    """

    def __init__(self, mode: str = "empirical", params: Optional[MlpParams] = None, scale: float = 1.0):
        if mode not in ("empirical", "network"):
            raise ConfigError(f"unknown mean/variance mode {mode!r}")
        if mode == "network":
            if params is None:
                raise ConfigError("network mode needs loaded parameters")
            if params.dims[0] != 6 or params.dims[-1] != 2:
                raise DimensionMismatch("mean/variance network must map 6 inputs to 2 outputs")
        self.mode = mode
        self.params = params
        self.scale = float(scale)
        self.stats: Dict[int, List[float]] = {}

    def _welford(self, sid: int, x: float):
        st = self.stats.get(sid)
        if st is None:
            st = self.stats[sid] = [0, 0.0, 0.0]
        st[0] += 1
        d = x - st[1]
        st[1] += d / st[0]
        st[2] += d * (x - st[1])
        return st

    def seed(self, ids, readings):
        """Start statistics for newly created samples."""
        for sid, x in zip(np.asarray(ids).tolist(), np.asarray(readings, dtype=float).tolist()):
            self.stats.pop(sid, None)
            self._welford(sid, x)

    def update(self, ids, positions, agent_pos, readings, prev_var):
        """Fold in one reading per sample and return ``(mean, variance)`` arrays."""
        ids = np.asarray(ids).tolist()
        readings = np.asarray(readings, dtype=float)
        prev_var = np.asarray(prev_var, dtype=float)
        mean = np.empty(len(ids))
        var = np.empty(len(ids))
        for k, (sid, x) in enumerate(zip(ids, readings.tolist())):
            cnt, mu, m2 = self._welford(sid, x)
            mean[k] = mu
            var[k] = max(m2 / (cnt - 1), VAR_FLOOR) if cnt > 1 else prev_var[k]
        if self.mode == "empirical":
            return mean, var
        p = np.broadcast_to(np.asarray(agent_pos, dtype=float) / self.scale, (len(ids), 2))
        feats = np.column_stack((np.asarray(positions, dtype=float) / self.scale, p, readings, mean))
        y = forward(self.params, feats)
        return y[:, 0], np.exp(y[:, 1])

    def infer(self, sid: int, position, agent_pos, reading, prev_var=0.0):
        m, v = self.update([sid], np.asarray(position, dtype=float).reshape(1, 2), agent_pos,
                           [reading], [prev_var])
        return float(m[0]), float(v[0])

    def prune(self, live_ids):
        keep = set(np.asarray(live_ids).tolist())
        for sid in [k for k in self.stats if k not in keep]:
            del self.stats[sid]


@dataclass
class AdaptiveStdNet:
    """Online network producing virtual-std increments.

    Input features per sample are ``[qx/L, qy/L, sigma_virtual, staleness]``
    with staleness the steps since the last reading divided by ``horizon``
    (total steps). ``kappa * staleness`` is added to every increment as a
    deterministic exploration bonus.
    """

    params: MlpParams
    learning_rate: float = 1e-3
    update_interval: int = 10
    kappa: float = 0.05
    scale: float = 200.0
    horizon: int = 3000
    target: float = 0.0
    losses: List[Tuple[int, float]] = dc_field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.update_interval < 1:
            raise ConfigError("update_interval must be >= 1")
        if self.params.dims[0] != 4 or self.params.dims[-1] != 1:
            raise DimensionMismatch("adaptive network must map 4 inputs to 1 output")

    @classmethod
    def create(cls, rng, hidden=(64, 64), output_scale=0.1, **kw) -> "AdaptiveStdNet":
        return cls(MlpParams.init([4, *hidden, 1], rng, output_scale), **kw)

    def staleness(self, last_sensed, step: int) -> np.ndarray:
        last = np.maximum(np.asarray(last_sensed), 0)
        return (step - last) / float(max(self.horizon, 1))

    def features(self, s, step: int) -> np.ndarray:
        return np.column_stack((s.pos / self.scale, s.vstd, self.staleness(s.last_sensed, step)))


def adaptive_std_step(net: AdaptiveStdNet, s, step: int):
    """Update virtual stds with the current network, then train it one step.

    Returns ``(new_set, loss)``; the loss is the mean squared increment
    before the parameter update.
    """
    if len(s) == 0:
        return s.copy(), 0.0
    z = net.features(s, step)
    loss, dsig, grads = mse_and_grads(net.params, z, net.target)
    out = s.copy()
    out.vstd = np.maximum(0.0, s.vstd + dsig + net.kappa * z[:, 3])
    net.params = sgd_update(net.params, grads, net.learning_rate)
    net.losses.append((int(step), loss))
    return out, loss
