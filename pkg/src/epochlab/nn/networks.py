"""Dense networks and DeepONet over a flat parameter vector.

Every model describes its parameters as a :class:`Layout` (ordered names and
shapes).  Forward passes slice views out of one flat ``theta`` so the
optimizer can treat all parameters as a single vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .autograd import Tensor, backward


class ShapeError(ValueError):
    pass


class Activation(str, Enum):
    RELU = "relu"
    GELU = "gelu"
    NONE = "none"


def _activate(x: Tensor, act: Activation) -> Tensor:
    if act is Activation.RELU:
        return x.relu()
    if act is Activation.GELU:
        return x.gelu()
    return x


@dataclass(frozen=True)
class DenseNetworkSpec:
    """``layer_widths`` includes input and output; the output layer is linear.

    ``activation`` is either one value used for every hidden layer or one
    value per hidden layer.
    """

    layer_widths: tuple[int, ...]
    activation: Activation | tuple[Activation, ...] = Activation.GELU
    init_seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ShapeError(f"need at least two positive widths, got {self.layer_widths}")
        object.__setattr__(self, "layer_widths", widths)
        acts = self.activation
        if isinstance(acts, (str, Activation)):
            acts = (Activation(acts),) * (len(widths) - 2)
        else:
            acts = tuple(Activation(a) for a in acts)
        if len(acts) != len(widths) - 2:
            raise ShapeError(f"{len(widths) - 2} hidden layers but {len(acts)} activations")
        object.__setattr__(self, "activation", acts)

    @property
    def hidden_activations(self) -> tuple[Activation, ...]:
        return self.activation  # normalised to a tuple in __post_init__

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": [a.value for a in self.activation],
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNetworkSpec":
        act = d.get("activation", "gelu")
        act = act if isinstance(act, str) else tuple(act)
        return cls(tuple(d["layer_widths"]), act, int(d.get("init_seed", 0)))


@dataclass(frozen=True)
class DeepONetSpec:
    branch: DenseNetworkSpec
    trunk: DenseNetworkSpec
    p: int

    def __post_init__(self):
        if self.p <= 0:
            raise ShapeError("p must be positive")
        if self.branch.layer_widths[-1] != self.p or self.trunk.layer_widths[-1] != self.p:
            raise ShapeError(f"branch and trunk must both end in p={self.p} outputs")
        if self.trunk.layer_widths[0] != 1:
            raise ShapeError("trunk input must be one-dimensional")

    @classmethod
    def desk(cls, sensors: int = 100, hidden: int = 64, depth: int = 2, p: int = 10, seed: int = 0) -> "DeepONetSpec":
        mid = (hidden,) * depth
        return cls(
            DenseNetworkSpec((sensors, *mid, p), Activation.GELU, seed),
            DenseNetworkSpec((1, *mid, p), Activation.GELU, seed),
            p,
        )

    def to_dict(self) -> dict:
        return {"branch": self.branch.to_dict(), "trunk": self.trunk.to_dict(), "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "DeepONetSpec":
        return cls(DenseNetworkSpec.from_dict(d["branch"]), DenseNetworkSpec.from_dict(d["trunk"]), int(d["p"]))


# --- flat parameter layout ------------------------------------------------------


class Layout:
    def __init__(self, entries: Sequence[tuple[str, tuple[int, ...]]]):
        self.entries = list(entries)
        self.offsets = []
        pos = 0
        for _, shape in self.entries:
            self.offsets.append(pos)
            pos += math.prod(shape)
        self.size = pos

    def views(self, flat: np.ndarray) -> list[np.ndarray]:
        if flat.shape != (self.size,):
            raise ShapeError(f"expected {self.size} parameters, got {flat.shape}")
        return [
            flat[o : o + math.prod(shape)].reshape(shape) for o, (_, shape) in zip(self.offsets, self.entries)
        ]

    def bind(self, theta: np.ndarray, grad: np.ndarray) -> list[Tensor]:
        """Leaf tensors whose data and gradients are views into flat vectors."""
        return [Tensor(d, grad=g) for d, g in zip(self.views(theta), self.views(grad))]


def dense_layout(spec: DenseNetworkSpec, prefix: str = "") -> Layout:
    w = spec.layer_widths
    entries = []
    for i in range(len(w) - 1):
        entries.append((f"{prefix}W{i}", (w[i], w[i + 1])))
        entries.append((f"{prefix}b{i}", (w[i + 1],)))
    return Layout(entries)


def deeponet_layout(spec: DeepONetSpec) -> Layout:
    return Layout(dense_layout(spec.branch, "branch.").entries + dense_layout(spec.trunk, "trunk.").entries)


def glorot_dense(spec: DenseNetworkSpec, role: int = 0) -> np.ndarray:
    """Glorot-uniform weights and zero biases.

    Layer ``i`` draws from ``PCG64(SeedSequence([init_seed, role, i]))``.
    """
    parts = []
    w = spec.layer_widths
    for i in range(len(w) - 1):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.init_seed, role, i])))
        limit = math.sqrt(6.0 / (w[i] + w[i + 1]))
        parts.append(rng.uniform(-limit, limit, size=w[i] * w[i + 1]))
        parts.append(np.zeros(w[i + 1]))
    return np.concatenate(parts)


# --- forward passes ---------------------------------------------------------------


def _dense_graph(spec: DenseNetworkSpec, leaves: Sequence[Tensor], x: Tensor) -> Tensor:
    if x.shape[-1] != spec.layer_widths[0]:
        raise ShapeError(f"input width {x.shape[-1]} != {spec.layer_widths[0]}")
    acts = spec.hidden_activations + (Activation.NONE,)
    for i, act in enumerate(acts):
        x = _activate(x @ leaves[2 * i] + leaves[2 * i + 1], act)
    return x


def _deeponet_graph(spec: DeepONetSpec, leaves: Sequence[Tensor], u: Tensor, y: Tensor) -> Tensor:
    nb = 2 * (len(spec.branch.layer_widths) - 1)
    b = _dense_graph(spec.branch, leaves[:nb], u)  # (B, p)
    t = _dense_graph(spec.trunk, leaves[nb:], y)  # (T, p)
    return b @ t.T


def forward_dense(spec: DenseNetworkSpec, params: np.ndarray, x) -> np.ndarray:
    leaves = [Tensor(v) for v in dense_layout(spec).views(np.asarray(params, float))]
    return _dense_graph(spec, leaves, Tensor(x)).data


def forward_deeponet(spec: DeepONetSpec, params: np.ndarray, u_values, y):
    """``sum_j b_j(u) t_j(y)``.

    Scalar ``y`` with a single ``u`` row gives a float.  Otherwise ``u`` of
    shape ``(B, sensors)`` and ``y`` of shape ``(T,)`` give ``(B, T)``.
    """
    u = np.asarray(u_values, float)
    yy = np.asarray(y, float)
    scalar = u.ndim == 1 and yy.ndim == 0
    u2 = np.atleast_2d(u)
    y2 = yy.reshape(-1, 1)
    if u2.shape[1] != spec.branch.layer_widths[0]:
        raise ShapeError(f"u has {u2.shape[1]} sensor values, branch expects {spec.branch.layer_widths[0]}")
    leaves = [Tensor(v) for v in deeponet_layout(spec).views(np.asarray(params, float))]
    out = _deeponet_graph(spec, leaves, Tensor(u2), Tensor(y2)).data
    return float(out[0, 0]) if scalar else out


def mse(pred: Tensor, target) -> Tensor:
    diff = pred - Tensor(target)
    return (diff * diff).mean()


# --- trainable models ---------------------------------------------------------------


class DenseRegressor:
    """MLP mapping flattened inputs to flattened targets under MSE."""

    def __init__(self, spec: DenseNetworkSpec):
        self.spec = spec
        self.layout = dense_layout(spec)

    def init(self) -> np.ndarray:
        return glorot_dense(self.spec)

    def _x(self, inputs) -> np.ndarray:
        x = np.asarray(inputs, float)
        return x.reshape(x.shape[0], -1)

    def predict(self, theta, inputs) -> np.ndarray:
        return forward_dense(self.spec, theta, self._x(inputs))

    def loss(self, theta, inputs, targets) -> float:
        t = np.asarray(targets, float).reshape(len(targets), -1)
        return float(np.mean((self.predict(theta, inputs) - t) ** 2))

    def loss_and_grad(self, theta, inputs, targets) -> tuple[float, np.ndarray]:
        grad = np.zeros(self.layout.size)
        leaves = self.layout.bind(theta, grad)
        t = np.asarray(targets, float).reshape(len(targets), -1)
        loss = mse(_dense_graph(self.spec, leaves, Tensor(self._x(inputs))), t)
        backward(loss)
        return float(loss.data), grad


class DeepONetRegressor:
    """DeepONet over a shared target grid: inputs ``u`` (B, sensors), labels (B, T)."""

    def __init__(self, spec: DeepONetSpec, y_points):
        self.spec = spec
        self.layout = deeponet_layout(spec)
        self.y = np.asarray(y_points, float).reshape(-1, 1)

    def init(self) -> np.ndarray:
        return np.concatenate([glorot_dense(self.spec.branch, 0), glorot_dense(self.spec.trunk, 1)])

    def predict(self, theta, inputs) -> np.ndarray:
        return forward_deeponet(self.spec, theta, np.atleast_2d(inputs), self.y[:, 0])

    def loss(self, theta, inputs, targets) -> float:
        return float(np.mean((self.predict(theta, inputs) - targets) ** 2))

    def loss_and_grad(self, theta, inputs, targets) -> tuple[float, np.ndarray]:
        grad = np.zeros(self.layout.size)
        leaves = self.layout.bind(theta, grad)
        loss = mse(_deeponet_graph(self.spec, leaves, Tensor(np.atleast_2d(inputs)), Tensor(self.y)), targets)
        backward(loss)
        return float(loss.data), grad
