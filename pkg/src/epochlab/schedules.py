"""Per-epoch learning-rate schedules.

Every schedule is evaluated in closed form from the epoch index, so a
stepper never accumulates rounding error.  ``max_epoch`` is the index of
the last epoch (``epochs - 1``); use :meth:`ScheduleSpec.for_epochs` to
derive it from a training budget.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace

# Floating-point noise tolerated in the h-curve radicand before it is
# treated as a domain violation.
RADICAND_TOL = 1e-12


class ScheduleError(ValueError):
    """Invalid schedule parameters or an epoch outside the schedule's range."""


class Kind(str, enum.Enum):
    CONSTANT = "constant"
    POLYNOMIAL = "polynomial"
    COSINE = "cosine"
    EXPONENTIAL = "exponential"
    HYPERBOLIC = "hyperbolic"
    EXP_HYPERBOLIC = "exp-hyperbolic"

    @property
    def needs_max_epoch(self) -> bool:
        return self not in (Kind.CONSTANT, Kind.EXPONENTIAL)


@dataclass(frozen=True)
class ScheduleSpec:
    """Parameters of one schedule.

    Only the fields relevant to ``kind`` are consulted; the others are
    ignored (and may be left as ``None``).  ``eta_init`` doubles as the
    cosine schedule's maximum.
    """

    kind: Kind
    eta_init: float
    eta_min: float | None = None
    eta_inf: float | None = None
    power: float | None = None
    gamma: float | None = None
    max_epoch: int | None = None
    upper_bound: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        self.validate()

    def validate(self) -> None:
        k = self.kind
        if not (self.eta_init > 0 and math.isfinite(self.eta_init)):
            raise ScheduleError(f"eta_init must be positive and finite, got {self.eta_init}")
        if self.max_epoch is not None and self.max_epoch < 0:
            raise ScheduleError(f"max_epoch must be non-negative, got {self.max_epoch}")
        if k is Kind.POLYNOMIAL:
            if self.power is None or not self.power > 0:
                raise ScheduleError(f"polynomial schedule needs power > 0, got {self.power}")
        elif k is Kind.COSINE:
            if self.eta_min is None or not 0 <= self.eta_min <= self.eta_init:
                raise ScheduleError(
                    f"cosine schedule needs 0 <= eta_min <= eta_init, got eta_min={self.eta_min}"
                )
        elif k is Kind.EXPONENTIAL:
            if self.gamma is None or not 0 < self.gamma < 1:
                raise ScheduleError(f"exponential schedule needs 0 < gamma < 1, got {self.gamma}")
        elif k in (Kind.HYPERBOLIC, Kind.EXP_HYPERBOLIC):
            if self.eta_inf is None or not 0 < self.eta_inf < self.eta_init:
                raise ScheduleError(
                    f"{k.value} schedule needs 0 < eta_inf < eta_init, got eta_inf={self.eta_inf}"
                )
            if self.upper_bound is None or self.upper_bound < 1:
                raise ScheduleError(f"{k.value} schedule needs upper_bound >= 1, got {self.upper_bound}")
            if self.max_epoch is not None and self.max_epoch > self.upper_bound:
                raise ScheduleError(
                    f"max_epoch N={self.max_epoch} exceeds upper_bound U={self.upper_bound}"
                )

    def for_epochs(self, epochs: int) -> "ScheduleSpec":
        """Copy of this spec with ``max_epoch = epochs - 1``."""
        if epochs < 1:
            raise ScheduleError(f"epochs must be >= 1, got {epochs}")
        return replace(self, max_epoch=epochs - 1)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleSpec":
        return cls(**d)


def h_curve(n: float, N: float, U: float) -> float:
    """Upper-left branch of the hyperbola with vertex (N, 0) and centre (U, 0).

    ``sqrt((N - n)/U * (2 - (N + n)/U))`` for ``0 <= n <= N <= U``.
    """
    if U <= 0:
        raise ScheduleError(f"U must be positive, got {U}")
    if N > U:
        raise ScheduleError(f"N={N} exceeds U={U}")
    if n > N or n < 0:
        raise ScheduleError(f"epoch {n} outside [0, {N}]")
    # single rounding for integer epochs: the products are exact below 2**53
    radicand = (N - n) * (2 * U - N - n) / (U * U)
    if radicand < 0:
        if radicand < -RADICAND_TOL:
            raise ScheduleError(f"negative radicand {radicand} at n={n}, N={N}, U={U}")
        return 0.0
    return math.sqrt(radicand)


def hyperbolic_lr(n: float, eta_init: float, eta_inf: float, N: float, U: float) -> float:
    """Hyperbolic schedule value without any sign checks on the rates.

    Kept separate from :func:`eval_hyperbolic` so it can be driven with
    log-rates (the exp-hyperbolic schedule is this curve in log space).
    """
    return eta_init + (eta_init - eta_inf) * (h_curve(n, N, U) - h_curve(0, N, U))


def _check_epoch(spec: ScheduleSpec, n: int) -> int:
    if n < 0:
        raise ScheduleError(f"epoch must be non-negative, got {n}")
    if spec.kind.needs_max_epoch:
        if spec.max_epoch is None:
            raise ScheduleError(f"{spec.kind.value} schedule needs max_epoch")
        if n > spec.max_epoch:
            raise ScheduleError(f"epoch {n} is past max_epoch {spec.max_epoch}")
    return spec.max_epoch if spec.max_epoch is not None else 0


def _expect(spec: ScheduleSpec, kind: Kind) -> None:
    if spec.kind is not kind:
        raise ScheduleError(f"expected a {kind.value} spec, got {spec.kind.value}")


def eval_constant(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.CONSTANT)
    _check_epoch(spec, n)
    return float(spec.eta_init)


def eval_polynomial(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.POLYNOMIAL)
    N = _check_epoch(spec, n)
    if N == 0:
        return float(spec.eta_init)
    return spec.eta_init * (1.0 - n / N) ** spec.power


def eval_cosine(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.COSINE)
    N = _check_epoch(spec, n)
    if N == 0:
        return float(spec.eta_init)
    return spec.eta_min + 0.5 * (spec.eta_init - spec.eta_min) * (1.0 + math.cos(n * math.pi / N))


def eval_exponential(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.EXPONENTIAL)
    _check_epoch(spec, n)
    return spec.eta_init * spec.gamma**n


def eval_hyperbolic(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.HYPERBOLIC)
    N = _check_epoch(spec, n)
    # at N == U the endpoint is eta_inf exactly; rounding may land an ulp below
    return max(hyperbolic_lr(n, spec.eta_init, spec.eta_inf, N, spec.upper_bound), spec.eta_inf)


def eval_exp_hyperbolic(spec: ScheduleSpec, n: int) -> float:
    _expect(spec, Kind.EXP_HYPERBOLIC)
    N = _check_epoch(spec, n)
    U = spec.upper_bound
    log_ratio = math.log(spec.eta_init / spec.eta_inf)
    lr = spec.eta_init * math.exp(log_ratio * (h_curve(n, N, U) - h_curve(0, N, U)))
    return max(lr, spec.eta_inf)


_EVALUATORS = {
    Kind.CONSTANT: eval_constant,
    Kind.POLYNOMIAL: eval_polynomial,
    Kind.COSINE: eval_cosine,
    Kind.EXPONENTIAL: eval_exponential,
    Kind.HYPERBOLIC: eval_hyperbolic,
    Kind.EXP_HYPERBOLIC: eval_exp_hyperbolic,
}


def evaluate(spec: ScheduleSpec, n: int) -> float:
    """Learning rate of ``spec`` at epoch ``n``."""
    return _EVALUATORS[spec.kind](spec, n)


def schedule_series(spec: ScheduleSpec, epochs: int) -> list[tuple[int, float]]:
    """``[(0, lr_0), ..., (epochs - 1, lr_{epochs-1})]`` with N = epochs - 1."""
    sized = spec.for_epochs(epochs)
    return [(n, evaluate(sized, n)) for n in range(epochs)]


class ScheduleStepper:
    """Training-loop adapter: holds the current epoch and its learning rate.

    Not safe for concurrent use; one stepper per training run.
    """

    def __init__(self, spec: ScheduleSpec):
        if spec.kind.needs_max_epoch and spec.max_epoch is None:
            raise ScheduleError(f"{spec.kind.value} stepper needs max_epoch")
        self.spec = spec
        self.current_epoch = 0
        self.current_lr = evaluate(spec, 0)

    def step(self) -> float:
        n = self.current_epoch + 1
        if self.spec.kind.needs_max_epoch and n > self.spec.max_epoch:
            raise ScheduleError(
                f"cannot step past max_epoch {self.spec.max_epoch} of a {self.spec.kind.value} schedule"
            )
        self.current_lr = evaluate(self.spec, n)
        self.current_epoch = n
        return self.current_lr

    def __repr__(self):
        return f"ScheduleStepper({self.spec.kind.value}, epoch={self.current_epoch}, lr={self.current_lr:.6g})"
