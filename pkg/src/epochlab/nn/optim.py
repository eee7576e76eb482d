"""AdamW with decoupled weight decay over a flat parameter vector."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


class DivergenceError(FloatingPointError):
    """Raised when a gradient or loss stops being finite."""


@dataclass(frozen=True)
class OptimizerParams:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if not 0 < self.beta1 < self.beta2 < 1:
            raise ValueError(f"need 0 < beta1 < beta2 < 1, got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise ValueError("epsilon must be positive and weight_decay non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ParameterState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, theta: np.ndarray) -> "ParameterState":
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta), 0)


def adamw_step(state: ParameterState, grads: np.ndarray, lr: float, params: OptimizerParams = OptimizerParams()) -> ParameterState:
    """One AdamW update; returns a new state and leaves ``state`` untouched.

    The decay ``theta <- theta - lr * wd * theta`` is applied to the
    pre-update parameters, separately from the adaptive gradient term.
    """
    g = np.asarray(grads, dtype=float)
    if g.shape != state.theta.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {state.theta.shape}")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not np.all(np.isfinite(g)):
        bad = int(np.count_nonzero(~np.isfinite(g)))
        raise DivergenceError(f"{bad} non-finite gradient entries at step {state.step + 1}")

    b1, b2 = params.beta1, params.beta2
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    theta = state.theta - lr * params.weight_decay * state.theta
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + params.epsilon)
    return ParameterState(theta, m, v, t)
