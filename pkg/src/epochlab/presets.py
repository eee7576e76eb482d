"""Tuned scheduler hyperparameters per model, addressable as ``<model>-<kind>``.

Values were tuned at a 50-epoch budget.  ``max_epoch`` is left unset; it is
filled in from the run's epoch budget.
"""
from __future__ import annotations

from dataclasses import replace

from .schedules import Kind, ScheduleSpec

_TABLE = {
    "simplecnn": {
        Kind.CONSTANT: dict(eta_init=6.15e-4),
        Kind.POLYNOMIAL: dict(eta_init=7.92e-4, power=0.7609),
        Kind.COSINE: dict(eta_init=1.06e-3, eta_min=2.13e-5),
        Kind.EXPONENTIAL: dict(eta_init=5.91e-4, gamma=0.9894),
        Kind.HYPERBOLIC: dict(eta_init=9.39e-4, eta_inf=9.47e-6, upper_bound=400),
        Kind.EXP_HYPERBOLIC: dict(eta_init=9.50e-4, eta_inf=5.40e-5, upper_bound=350),
    },
    "lstm": {
        Kind.CONSTANT: dict(eta_init=1.05e-4),
        Kind.POLYNOMIAL: dict(eta_init=3.96e-3, power=1.2752),
        Kind.COSINE: dict(eta_init=3.00e-3, eta_min=1.10e-7),
        Kind.EXPONENTIAL: dict(eta_init=2.68e-3, gamma=0.9392),
        Kind.HYPERBOLIC: dict(eta_init=2.44e-3, eta_inf=5.99e-6, upper_bound=200),
        Kind.EXP_HYPERBOLIC: dict(eta_init=2.44e-3, eta_inf=5.99e-6, upper_bound=200),
    },
    "deeponet": {
        Kind.CONSTANT: dict(eta_init=1.03e-3),
        Kind.POLYNOMIAL: dict(eta_init=4.13e-3, power=1.2443),
        Kind.COSINE: dict(eta_init=4.62e-3, eta_min=2.66e-7),
        Kind.EXPONENTIAL: dict(eta_init=2.01e-3, gamma=0.9598),
        Kind.HYPERBOLIC: dict(eta_init=4.62e-3, eta_inf=2.66e-7, upper_bound=250),
        Kind.EXP_HYPERBOLIC: dict(eta_init=4.59e-3, eta_inf=5.74e-7, upper_bound=250),
    },
    "traonet": {
        Kind.CONSTANT: dict(eta_init=7.27e-4),
        Kind.POLYNOMIAL: dict(eta_init=7.36e-4, power=0.5319),
        Kind.COSINE: dict(eta_init=1.59e-3, eta_min=2.61e-6),
        Kind.EXPONENTIAL: dict(eta_init=1.53e-3, gamma=0.9649),
        Kind.HYPERBOLIC: dict(eta_init=2.55e-3, eta_inf=1.69e-5, upper_bound=250),
        Kind.EXP_HYPERBOLIC: dict(eta_init=1.03e-3, eta_inf=7.11e-5, upper_bound=350),
    },
}

PRESETS: dict[str, ScheduleSpec] = {
    f"{model}-{kind.value.replace('-', '')}": ScheduleSpec(kind=kind, **params)
    for model, row in _TABLE.items()
    for kind, params in row.items()
}


def preset(name: str, upper_bound: int | None = None) -> ScheduleSpec:
    """Look up a preset such as ``deeponet-exphyperbolic``.

    ``upper_bound`` rescales U for hyperbolic kinds (desk runs use short
    budgets, so U is shrunk to keep N <= U meaningful).
    """
    try:
        spec = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if upper_bound is not None and spec.upper_bound is not None:
        spec = replace(spec, upper_bound=upper_bound)
    return spec
