"""Synthetic datasets: damped-oscillator windows and GRF integral-operator samples.

All randomness comes from ``numpy.random.PCG64`` streams keyed by
``SeedSequence([seed, unit_index])``; normal variates use numpy's ziggurat
sampler.  Both identifiers are written to ``meta.json`` so a dataset can be
regenerated bit-for-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

GENERATOR_ID = "numpy.PCG64/SeedSequence([seed, unit])"
NORMAL_METHOD = "numpy-ziggurat"
KERNEL_FORM = "exp(-(x-x')^2 / (2 l^2))"


class DatasetError(ValueError):
    pass


def substream(seed: int, unit: int) -> np.random.Generator:
    """Independent generator for one parallel unit (one function, one zeta)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, unit])))


# --- oscillator ---------------------------------------------------------------


@dataclass(frozen=True)
class OscillatorSpec:
    """Free vibration ``m u'' + c u' + k u = 0`` with ``c = 2 zeta sqrt(m k)``."""

    zeta: float = 0.0
    mass: float = 1.0
    stiffness: float = 200.0
    t_end: float = 10.0
    dt: float = 1e-3
    u0: float = 0.1
    v0: float = 0.0
    a0: float | None = None

    def __post_init__(self):
        if self.zeta < 0 or self.mass <= 0 or self.stiffness <= 0 or self.dt <= 0:
            raise DatasetError(f"invalid oscillator parameters: {self}")
        consistent = -(self.damping * self.v0 + self.stiffness * self.u0) / self.mass
        if self.a0 is None:
            object.__setattr__(self, "a0", consistent)
        elif not math.isclose(self.a0, consistent, rel_tol=1e-12, abs_tol=1e-12):
            raise DatasetError(f"initial acceleration {self.a0} inconsistent with the ODE ({consistent})")

    @property
    def damping(self) -> float:
        return self.zeta * 2.0 * math.sqrt(self.mass * self.stiffness)

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


def newmark_beta_solve(spec: OscillatorSpec, beta: float = 0.25, gamma: float = 0.5) -> np.ndarray:
    """Displacements at ``t = 0, dt, ..., t_end`` (``steps + 1`` values).

    Defaults to the average-acceleration variant, which is unconditionally
    stable.
    """
    m, c, k, dt = spec.mass, spec.damping, spec.stiffness, spec.dt
    a_u = 1.0 / (beta * dt * dt)
    a_v = 1.0 / (beta * dt)
    a_a = 1.0 / (2.0 * beta) - 1.0
    c_u = gamma / (beta * dt)
    c_v = gamma / beta - 1.0
    c_a = dt * (gamma / (2.0 * beta) - 1.0)
    k_eff = k + c_u * c + a_u * m

    n = spec.steps
    u = np.empty(n + 1)
    u_i, v_i, acc_i = spec.u0, spec.v0, spec.a0
    u[0] = u_i
    for i in range(1, n + 1):
        p_eff = m * (a_u * u_i + a_v * v_i + a_a * acc_i) + c * (c_u * u_i + c_v * v_i + c_a * acc_i)
        u_next = p_eff / k_eff
        acc_next = a_u * (u_next - u_i) - a_v * v_i - a_a * acc_i
        v_i = v_i + dt * ((1.0 - gamma) * acc_i + gamma * acc_next)
        u_i, acc_i = u_next, acc_next
        u[i] = u_i
    return u


@dataclass
class WindowedSequenceDataset:
    inputs: np.ndarray  # (count, history, 1)
    labels: np.ndarray  # (count, horizon, 1)
    normalization: tuple[float, float] | None = None

    def __len__(self):
        return self.inputs.shape[0]


def sliding_window(series, history: int = 100, horizon: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Every ``(series[i:i+history], series[i+history:i+history+horizon])`` pair."""
    s = np.asarray(series, dtype=float)
    span = history + horizon
    if s.ndim != 1 or s.size < span:
        raise DatasetError(f"series of length {s.size} is shorter than history + horizon = {span}")
    windows = np.lib.stride_tricks.sliding_window_view(s, span)
    inputs = np.ascontiguousarray(windows[:, :history])[..., None]
    labels = np.ascontiguousarray(windows[:, history:])[..., None]
    return inputs, labels


def build_oscillation_dataset(
    zetas: Sequence[float] = (0.0, 0.01, 0.02), history: int = 100, horizon: int = 20
) -> WindowedSequenceDataset:
    parts = [sliding_window(newmark_beta_solve(OscillatorSpec(zeta=z)), history, horizon) for z in zetas]
    return WindowedSequenceDataset(
        np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    )


def normalize_and_split(
    dataset: WindowedSequenceDataset, seed: int, train_fraction: float = 0.8
) -> tuple[WindowedSequenceDataset, WindowedSequenceDataset]:
    """Min-max scale to [0, 1] using the whole dataset, then shuffle and split."""
    if len(dataset) == 0:
        raise DatasetError("empty dataset")
    lo = float(min(dataset.inputs.min(), dataset.labels.min()))
    hi = float(max(dataset.inputs.max(), dataset.labels.max()))
    if hi == lo:
        raise DatasetError("constant data cannot be min-max normalised")
    scale = hi - lo
    x = (dataset.inputs - lo) / scale
    y = (dataset.labels - lo) / scale
    order = substream(seed, 0).permutation(len(dataset))
    n_train = int(len(dataset) * train_fraction)
    tr, va = order[:n_train], order[n_train:]
    norm = (lo, hi)
    return (
        WindowedSequenceDataset(x[tr], y[tr], norm),
        WindowedSequenceDataset(x[va], y[va], norm),
    )


# --- Gaussian random field ----------------------------------------------------


@dataclass(frozen=True)
class GrfSpec:
    sensor_count: int = 100
    target_count: int = 100
    length_scale_min: float = 0.1
    length_scale_max: float = 0.4
    function_count: int = 1000
    jitter: float = 1e-10
    max_jitter: float = 1e-6

    def __post_init__(self):
        if self.sensor_count < 2 or self.target_count < 1 or self.function_count < 1:
            raise DatasetError(f"invalid GRF sizes: {self}")
        if not 0 < self.length_scale_min <= self.length_scale_max:
            raise DatasetError("length-scale range must be positive and ordered")
        if not 0 < self.jitter <= self.max_jitter:
            raise DatasetError("jitter must satisfy 0 < jitter <= max_jitter")

    @property
    def sensors(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.sensor_count)

    @property
    def targets(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.target_count)


class OperatorSample(NamedTuple):
    u_values: np.ndarray
    y_points: np.ndarray
    g_values: np.ndarray


@dataclass
class OperatorDataset:
    """``count`` functions sampled at shared sensors, with integral labels.

    The target grid is stored once; ``logical_y_shape`` is what it would be
    if replicated per function.
    """

    u: np.ndarray  # (count, sensors)
    y: np.ndarray  # (targets,)
    g: np.ndarray  # (count, targets)
    sensors: np.ndarray
    length_scales: np.ndarray
    jitter_used: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return self.u.shape[0]

    def __getitem__(self, i) -> OperatorSample:
        return OperatorSample(self.u[i], self.y, self.g[i])

    @property
    def logical_y_shape(self) -> tuple[int, int]:
        return (len(self), self.y.size)


def se_kernel(x: np.ndarray, length_scale: float) -> np.ndarray:
    d = x[:, None] - x[None, :]
    return np.exp(-(d * d) / (2.0 * length_scale**2))


def cholesky_with_jitter(K: np.ndarray, jitter: float, max_jitter: float) -> tuple[np.ndarray, float]:
    eye = np.eye(K.shape[0])
    j = jitter
    while j <= max_jitter * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + j * eye), j
        except np.linalg.LinAlgError:
            j *= 10.0
    raise DatasetError(f"kernel not positive definite even with jitter {max_jitter:g}")


def integral_labels(u: np.ndarray, sensors: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of each row of ``u`` from 0, read off at ``targets``."""
    u = np.atleast_2d(u)
    dx = np.diff(sensors)
    g = np.zeros_like(u)
    g[:, 1:] = np.cumsum(0.5 * (u[:, 1:] + u[:, :-1]) * dx, axis=1)
    if targets.shape == sensors.shape and np.array_equal(targets, sensors):
        return g
    return np.stack([np.interp(targets, sensors, row) for row in g])


def grf_sample(spec: GrfSpec, seed: int, u_override: np.ndarray | None = None) -> OperatorDataset:
    """Sample ``spec.function_count`` GRF functions and their running integrals.

    Function ``i`` draws its length scale and then its standard normals from
    ``substream(seed, i)``.  ``u_override`` (broadcast to every function)
    skips sampling and only computes labels; useful for exactness checks.
    """
    x = spec.sensors
    count = spec.function_count
    u = np.empty((count, x.size))
    scales = np.empty(count)
    jitters = np.zeros(count)
    if u_override is not None:
        u[:] = np.broadcast_to(np.asarray(u_override, dtype=float), u.shape)
        scales[:] = np.nan
    else:
        for i in range(count):
            rng = substream(seed, i)
            ell = rng.uniform(spec.length_scale_min, spec.length_scale_max)
            L, jitters[i] = cholesky_with_jitter(se_kernel(x, ell), spec.jitter, spec.max_jitter)
            u[i] = L @ rng.standard_normal(x.size)
            scales[i] = ell
    g = integral_labels(u, x, spec.targets)
    return OperatorDataset(u, spec.targets, g, x, scales, jitters)


def split_indices(count: int, seed: int, train_fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    order = substream(seed, 0).permutation(count)
    n_train = int(count * train_fraction)
    return order[:n_train], order[n_train:]


# --- persistence ------------------------------------------------------------------


def save_arrays(directory, arrays: dict[str, np.ndarray], meta: dict) -> Path:
    """Write ``meta.json`` plus one little-endian float64 file per array."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, arr in arrays.items():
        fname = f"{name}.f64"
        np.ascontiguousarray(arr, dtype="<f8").tofile(out / fname)
        index[name] = {"file": fname, "shape": list(arr.shape), "dtype": "<f8"}
    meta = dict(meta, arrays=index)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def load_arrays(directory) -> tuple[dict[str, np.ndarray], dict]:
    src = Path(directory)
    try:
        meta = json.loads((src / "meta.json").read_text())
    except FileNotFoundError:
        raise DatasetError(f"no meta.json in {src}") from None
    arrays = {}
    for name, info in meta["arrays"].items():
        arr = np.fromfile(src / info["file"], dtype=info["dtype"])
        arrays[name] = arr.reshape(info["shape"])
    return arrays, meta


def write_oscillation(directory, seed: int, zetas: Sequence[float] = (0.0, 0.01, 0.02)) -> dict:
    full = build_oscillation_dataset(zetas)
    train, val = normalize_and_split(full, seed)
    meta = {
        "dataset": "oscillation",
        "spec": {**asdict(OscillatorSpec()), "zetas": list(zetas), "history": 100, "horizon": 20},
        "seed": seed,
        "generator": GENERATOR_ID,
        "counts": {"pairs": len(full), "train": len(train), "validation": len(val)},
        "normalization": {"min": train.normalization[0], "max": train.normalization[1]},
    }
    save_arrays(
        directory,
        {
            "train_inputs": train.inputs,
            "train_labels": train.labels,
            "val_inputs": val.inputs,
            "val_labels": val.labels,
        },
        meta,
    )
    return meta


def write_integral(directory, seed: int, spec: GrfSpec = GrfSpec()) -> dict:
    data = grf_sample(spec, seed)
    meta = {
        "dataset": "integral",
        "spec": asdict(spec),
        "seed": seed,
        "generator": GENERATOR_ID,
        "normal_method": NORMAL_METHOD,
        "kernel": KERNEL_FORM,
        "counts": {"functions": len(data), "sensors": data.sensors.size, "targets": data.y.size},
        "logical_y_shape": list(data.logical_y_shape),
        "max_jitter_used": float(data.jitter_used.max()),
    }
    save_arrays(
        directory,
        {"u": data.u, "y": data.y, "g": data.g, "sensors": data.sensors, "length_scales": data.length_scales},
        meta,
    )
    return meta


def read_integral(directory) -> OperatorDataset:
    arrays, meta = load_arrays(directory)
    if meta.get("dataset") != "integral":
        raise DatasetError(f"{directory} is not an integral dataset")
    return OperatorDataset(arrays["u"], arrays["y"], arrays["g"], arrays["sensors"], arrays["length_scales"])
