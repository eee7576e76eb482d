"""Learning-curve diagnostics.

* :func:`slcd` -- smoothed learning curve difference between two runs that
  differ only in their epoch budget (0 = identical, 1 = fully decoupled).
* :func:`ilri` -- area between an LR schedule and 80% of its initial value,
  up to the first epoch where the schedule reaches that level.
* :func:`power_regression` and :func:`improvement_stats` -- endpoint trends
  across budgets.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal, stats

from .schedules import ScheduleSpec, schedule_series

ILRI_LEVEL = 0.8
ILRI_SUBINTERVALS = 10_000
BISECTION_TOL = 1e-10


class MetricError(ValueError):
    pass


class NoCrossingError(MetricError):
    """The schedule never falls to the ILRI level."""


# --- curves and smoothing ----------------------------------------------------


@dataclass
class LearningCurve:
    """Per-epoch values of one scalar metric (loss or accuracy)."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise MetricError("a learning curve needs at least one value")
        if not np.all(np.isfinite(self.values)):
            raise MetricError(f"learning curve {self.label!r} has non-finite values")

    def __len__(self):
        return self.values.size


class Smoother(str, enum.Enum):
    SAVITZKY_GOLAY = "savgol"
    EMA = "ema"
    IDENTITY = "identity"


@dataclass(frozen=True)
class SmoothingSpec:
    kind: Smoother = Smoother.SAVITZKY_GOLAY
    window: int = 9
    poly_order: int = 3
    alpha: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "kind", Smoother(self.kind))
        if self.kind is Smoother.SAVITZKY_GOLAY:
            if self.window < 1 or self.window % 2 == 0:
                raise MetricError(f"Savitzky-Golay window must be odd and positive, got {self.window}")
            if not 0 <= self.poly_order < self.window:
                raise MetricError(
                    f"poly_order must be in [0, window), got {self.poly_order} for window {self.window}"
                )
        elif self.kind is Smoother.EMA and not 0 < self.alpha <= 1:
            raise MetricError(f"EMA alpha must be in (0, 1], got {self.alpha}")

    @classmethod
    def savgol(cls, window: int = 9, poly_order: int = 3) -> "SmoothingSpec":
        return cls(Smoother.SAVITZKY_GOLAY, window=window, poly_order=poly_order)

    @classmethod
    def ema(cls, alpha: float) -> "SmoothingSpec":
        return cls(Smoother.EMA, alpha=alpha)

    @classmethod
    def identity(cls) -> "SmoothingSpec":
        return cls(Smoother.IDENTITY)

    def to_dict(self) -> dict:
        if self.kind is Smoother.SAVITZKY_GOLAY:
            return {"kind": self.kind.value, "window": self.window, "poly_order": self.poly_order}
        if self.kind is Smoother.EMA:
            return {"kind": self.kind.value, "alpha": self.alpha}
        return {"kind": self.kind.value}


def _smooth_array(y: np.ndarray, spec: SmoothingSpec) -> np.ndarray:
    if spec.kind is Smoother.IDENTITY:
        return y.copy()
    if spec.kind is Smoother.EMA:
        out = np.empty_like(y)
        acc = y[0]
        for i, v in enumerate(y):
            acc = spec.alpha * v + (1.0 - spec.alpha) * acc
            out[i] = acc
        return out
    if y.size < spec.window:
        raise MetricError(f"curve of length {y.size} is shorter than the smoothing window {spec.window}")
    # mode="interp" fits the edge windows directly, so polynomials up to
    # poly_order are reproduced at the boundaries too
    return signal.savgol_filter(y, spec.window, spec.poly_order, mode="interp")


def smooth(curve, spec: SmoothingSpec):
    """Apply ``spec`` to a :class:`LearningCurve` or a plain 1-D sequence.

    The output has the input's length and type.
    """
    if isinstance(curve, LearningCurve):
        return LearningCurve(_smooth_array(curve.values, spec), curve.label)
    return _smooth_array(np.asarray(curve, dtype=float), spec)


# --- sLCD --------------------------------------------------------------------


@dataclass
class DecouplingReport:
    slcd: float
    smoothing: SmoothingSpec
    compared_epochs: int

    def to_dict(self) -> dict:
        return {"slcd": self.slcd, "smoothing": self.smoothing.to_dict(), "compared_epochs": self.compared_epochs}


def slcd(l1, l2, spec: SmoothingSpec = SmoothingSpec()) -> DecouplingReport:
    """Smoothed learning curve difference.

    Each curve is smoothed over its full length, then the first
    ``N = min(len(l1), len(l2))`` points are compared::

        mean_n |S(l1)(n) - S(l2)(n)| / (S(l1)(n) + S(l2)(n))
    """
    a = smooth(l1 if isinstance(l1, LearningCurve) else LearningCurve(l1), spec).values
    b = smooth(l2 if isinstance(l2, LearningCurve) else LearningCurve(l2), spec).values
    n = min(a.size, b.size)
    a, b = a[:n], b[:n]
    if np.any(a <= 0) or np.any(b <= 0):
        raise MetricError("smoothed curves must be strictly positive")
    denom = a + b
    if np.any(denom == 0):
        raise MetricError("zero denominator in sLCD")
    value = float(np.mean(np.abs(a - b) / denom))
    return DecouplingReport(value, spec, n)


# --- ILRI --------------------------------------------------------------------


@dataclass
class IlriResult:
    ilri: float
    n_crossing: float


class HermiteSpline:
    """Piecewise cubic Hermite interpolant with Catmull-Rom tangents.

    Interior tangents are central differences over the neighbouring knots;
    the two end tangents are one-sided.
    """

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.x.size < 2 or self.x.shape != self.y.shape:
            raise MetricError("need at least two knots with matching x and y")
        if np.any(np.diff(self.x) <= 0):
            raise MetricError("knots must be strictly increasing")
        d = np.empty_like(self.y)
        d[1:-1] = (self.y[2:] - self.y[:-2]) / (self.x[2:] - self.x[:-2])
        d[0] = (self.y[1] - self.y[0]) / (self.x[1] - self.x[0])
        d[-1] = (self.y[-1] - self.y[-2]) / (self.x[-1] - self.x[-2])
        self.slopes = d

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, self.x.size - 2)
        x0, x1 = self.x[i], self.x[i + 1]
        dx = x1 - x0
        s = (t - x0) / dx
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return h00 * self.y[i] + h10 * dx * self.slopes[i] + h01 * self.y[i + 1] + h11 * dx * self.slopes[i + 1]


def _simpson(f, a: float, b: float, m: int) -> float:
    if m % 2:
        m += 1
    x = np.linspace(a, b, m + 1)
    fx = f(x)
    h = (b - a) / m
    return float(h / 3 * (fx[0] + fx[-1] + 4 * fx[1:-1:2].sum() + 2 * fx[2:-1:2].sum()))


def ilri(series: Sequence[tuple[float, float]], level: float = ILRI_LEVEL) -> IlriResult:
    """Initial learning-rate integral of an ``(epoch, lr)`` series.

    Raises :class:`NoCrossingError` if the interpolated schedule never falls
    to ``level * lr_0``.
    """
    if len(series) < 2:
        raise MetricError("ILRI needs at least two (epoch, lr) points")
    epochs = np.array([e for e, _ in series], dtype=float)
    lrs = np.array([v for _, v in series], dtype=float)
    if lrs[0] <= 0:
        raise MetricError("initial learning rate must be positive")
    target = level * lrs[0]
    spline = HermiteSpline(epochs, lrs)

    diff = lrs - target
    crossing = None
    for i in range(diff.size - 1):
        if diff[i] == 0:
            crossing = epochs[i]
            break
        if diff[i] > 0 and diff[i + 1] <= 0:
            lo, hi = epochs[i], epochs[i + 1]
            while hi - lo > BISECTION_TOL:
                mid = 0.5 * (lo + hi)
                if spline(mid) - target > 0:
                    lo = mid
                else:
                    hi = mid
            crossing = 0.5 * (lo + hi)
            break
    if crossing is None:
        raise NoCrossingError(f"schedule never reaches {level:.0%} of its initial value")

    start = epochs[0]
    area = _simpson(lambda t: np.abs(spline(t) - target), start, crossing, ILRI_SUBINTERVALS)
    return IlriResult(area, float(crossing))


@dataclass
class IlriRow:
    kind: str
    max_epoch: int
    ilri: float | None
    n_crossing: float | None
    pct_diff: float | None


def ilri_comparison(spec: ScheduleSpec, max_epochs: Sequence[int], baseline: int) -> list[IlriRow]:
    """ILRI of ``spec`` at each max epoch N, as a percentage gap to ``baseline``.

    Schedules that never cross report ``None`` in place of numbers.
    """

    def one(N):
        try:
            return ilri(schedule_series(spec, N + 1))
        except NoCrossingError:
            return None

    base = one(baseline)
    rows = []
    for N in max_epochs:
        r = one(N)
        pct = None
        if r is not None and base is not None:
            pct = abs(base.ilri - r.ilri) / base.ilri * 100.0
        rows.append(
            IlriRow(
                spec.kind.value,
                N,
                None if r is None else r.ilri,
                None if r is None else r.n_crossing,
                pct,
            )
        )
    return rows


# --- endpoint statistics -------------------------------------------------------


@dataclass
class PowerRegression:
    """Fit of ``y = exp(A) * x**B`` by least squares in log-log space."""

    A: float
    B: float
    r_squared: float
    p_value: float

    def predict(self, x):
        return np.exp(self.A) * np.asarray(x, dtype=float) ** self.B


def power_regression(xs, ys) -> PowerRegression:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError("xs and ys must be 1-D and of equal length")
    if x.size < 3:
        raise MetricError("power regression needs at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise MetricError("power regression needs strictly positive xs and ys")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise MetricError("all xs are equal; slope is undefined")
    if np.ptp(ly) == 0:
        return PowerRegression(A=float(ly[0]), B=0.0, r_squared=0.0, p_value=1.0)

    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    sxy = np.sum((lx - mx) * (ly - my))
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - my) ** 2))
    r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    dof = x.size - 2
    se = math.sqrt(ss_res / dof / sxx)
    if se == 0:
        p = 0.0
    else:
        p = float(2.0 * stats.t.sf(abs(slope / se), dof))
    return PowerRegression(A=float(intercept), B=float(slope), r_squared=r2, p_value=min(p, 1.0))


@dataclass
class ImprovementStats:
    mean_pct: float
    std_pct: float
    interval: int
    improvements: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def improvement_stats(endpoints, higher_is_better: bool = False, interval: int = 50) -> ImprovementStats:
    """Relative change (percent) between consecutive budget endpoints.

    Positive means better: a falling loss, or a rising accuracy.  The
    standard deviation is the population one.
    """
    v = np.asarray(endpoints, dtype=float)
    if v.size < 2:
        raise MetricError("need at least two endpoint values")
    prev, cur = v[:-1], v[1:]
    if np.any(prev == 0):
        raise MetricError("zero baseline value in improvement statistics")
    delta = (cur - prev) if higher_is_better else (prev - cur)
    imp = delta / prev * 100.0
    return ImprovementStats(float(imp.mean()), float(imp.std()), interval, imp.tolist())
