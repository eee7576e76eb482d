"""Multi-seed training sweeps over schedulers and epoch budgets, and their analysis.

A sweep is the Cartesian product schedulers x budgets x seeds.  Each run is
persisted as ``<runs_dir>/<fingerprint>.json`` the moment it finishes, so an
interrupted sweep resumes by skipping fingerprints already on disk.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import jsonschema
import numpy as np

from .datasets import (
    GrfSpec,
    build_oscillation_dataset,
    grf_sample,
    load_arrays,
    normalize_and_split,
    read_integral,
    split_indices,
)
from .metrics import (
    MetricError,
    SmoothingSpec,
    improvement_stats,
    power_regression,
    slcd,
)
from .nn import (
    Activation,
    DeepONetRegressor,
    DeepONetSpec,
    DenseNetworkSpec,
    DenseRegressor,
    DivergenceError,
    OptimizerParams,
    ParameterState,
    adamw_step,
)
from .presets import preset
from .schedules import ScheduleError, ScheduleSpec, ScheduleStepper

REFERENCE_SEEDS = (89, 231, 928, 814, 269)
DESK_BUDGETS = (10, 20, 30, 40)
FULL_BUDGETS = (50, 100, 150, 200)
INIT_SCHEME = "glorot-uniform"
SLCD_METHOD = "seed-averaged curves, smallest vs largest budget"
REPORT_COLUMNS = ("scheduler", "budget", "mean_endpoint", "mu", "sigma", "B", "R2", "p", "slcd")


class ConfigError(ValueError):
    pass


class Task(str, enum.Enum):
    INTEGRAL = "integral-operator"
    OSCILLATION = "oscillation-regression"


# --- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class SchedulerEntry:
    name: str
    spec: ScheduleSpec

    def to_dict(self) -> dict:
        return {"name": self.name, **self.spec.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SchedulerEntry":
        d = dict(d)
        name = d.pop("name", None)
        if "preset" in d:
            spec = preset(d.pop("preset"), d.pop("upper_bound", None))
            if d:
                raise ConfigError(f"preset entries accept only name and upper_bound, got {sorted(d)}")
        else:
            try:
                spec = ScheduleSpec.from_dict(d)
            except (TypeError, ScheduleError) as exc:
                raise ConfigError(f"bad scheduler entry {d}: {exc}") from None
        return cls(name or spec.kind.value, spec)


@dataclass(frozen=True)
class NetworkConfig:
    hidden: int = 64
    depth: int = 2
    p: int = 10
    activation: str = "gelu"

    def __post_init__(self):
        if self.hidden < 1 or self.depth < 1 or self.p < 1:
            raise ConfigError(f"invalid network sizes: {self}")
        Activation(self.activation)


@dataclass(frozen=True)
class DatasetConfig:
    """Where the data comes from.  ``path`` points at a directory written by
    the dataset command; otherwise the data is generated from ``seed``."""

    seed: int = 0
    function_count: int = 1000
    path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    task: Task
    schedulers: tuple[SchedulerEntry, ...]
    epoch_budgets: tuple[int, ...]
    seeds: tuple[int, ...]
    batch_size: int = 100
    network: NetworkConfig = NetworkConfig()
    optimizer: OptimizerParams = OptimizerParams()
    dataset: DatasetConfig = DatasetConfig()

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        for name in ("schedulers", "epoch_budgets", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        b = self.epoch_budgets
        if any(x < 1 for x in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ConfigError(f"epoch budgets must be positive and strictly increasing, got {b}")
        names = [s.name for s in self.schedulers]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate scheduler names: {names}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "schedulers": [s.to_dict() for s in self.schedulers],
            "epoch_budgets": list(self.epoch_budgets),
            "seeds": list(self.seeds),
            "batch_size": self.batch_size,
            "network": asdict(self.network),
            "optimizer": self.optimizer.to_dict(),
            "dataset": asdict(self.dataset),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        validate_config_dict(d)
        try:
            return cls(
                task=Task(d["task"]),
                schedulers=tuple(SchedulerEntry.from_dict(s) for s in d["schedulers"]),
                epoch_budgets=tuple(d["epoch_budgets"]),
                seeds=tuple(d["seeds"]),
                batch_size=d.get("batch_size", 100),
                network=NetworkConfig(**d.get("network", {})),
                optimizer=OptimizerParams(**d.get("optimizer", {})),
                dataset=DatasetConfig(**d.get("dataset", {})),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


_NUM = {"type": "number"}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["task", "schedulers", "epoch_budgets", "seeds"],
    "properties": {
        "task": {"enum": [t.value for t in Task]},
        "schedulers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "preset": {"type": "string"},
                    "kind": {"type": "string"},
                    "eta_init": _NUM,
                    "eta_min": _NUM,
                    "eta_inf": _NUM,
                    "power": _NUM,
                    "gamma": _NUM,
                    "upper_bound": {"type": "integer"},
                },
                "oneOf": [{"required": ["preset"]}, {"required": ["kind", "eta_init"]}],
            },
        },
        "epoch_budgets": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
        "batch_size": {"type": "integer", "minimum": 1},
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden": {"type": "integer", "minimum": 1},
                "depth": {"type": "integer", "minimum": 1},
                "p": {"type": "integer", "minimum": 1},
                "activation": {"enum": [a.value for a in Activation]},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta1": _NUM, "beta2": _NUM, "epsilon": _NUM, "weight_decay": _NUM},
        },
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer"},
                "function_count": {"type": "integer", "minimum": 2},
                "path": {"type": ["string", "null"]},
            },
        },
    },
}


def validate_config_dict(d: dict) -> None:
    try:
        jsonschema.validate(d, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def desk_config(
    task: Task = Task.INTEGRAL,
    budgets: Sequence[int] = DESK_BUDGETS,
    seeds: Sequence[int] = REFERENCE_SEEDS[:3],
    dataset_seed: int = 0,
) -> ExperimentConfig:
    """Small sweep for a single machine: cosine vs exp-hyperbolic with U shrunk to 50."""
    if Task(task) is Task.INTEGRAL:
        model, batch = "deeponet", 100
    else:
        model, batch = "lstm", 256
    scheds = tuple(
        SchedulerEntry(kind, preset(f"{model}-{kind.replace('-', '')}", upper_bound=50))
        for kind in ("cosine", "exp-hyperbolic")
    )
    return ExperimentConfig(
        Task(task), scheds, tuple(budgets), tuple(seeds), batch, dataset=DatasetConfig(seed=dataset_seed)
    )


def full_scale_config(task: Task = Task.INTEGRAL) -> ExperimentConfig:
    """All six kinds with their tuned presets, the full budget ladder and five seeds."""
    model, batch, count = ("deeponet", 100, 10_000) if Task(task) is Task.INTEGRAL else ("lstm", 256, 1000)
    kinds = ("constant", "polynomial", "cosine", "exponential", "hyperbolic", "exp-hyperbolic")
    scheds = tuple(SchedulerEntry(k, preset(f"{model}-{k.replace('-', '')}")) for k in kinds)
    return ExperimentConfig(
        Task(task),
        scheds,
        FULL_BUDGETS,
        REFERENCE_SEEDS,
        batch,
        network=NetworkConfig(hidden=256, depth=4, p=10),
        dataset=DatasetConfig(function_count=count),
    )


# --- run records ----------------------------------------------------------------


@dataclass
class RunRecord:
    fingerprint: str
    task: str
    scheduler: dict
    seed: int
    budget: int
    lr: list[float]
    val_loss: list[float]
    diverged: bool
    wall_seconds: float
    init: str = INIT_SCHEME
    error: str | None = None

    def __post_init__(self):
        if len(self.lr) != len(self.val_loss):
            raise ValueError("lr and val_loss series differ in length")
        if not self.diverged and self.error is None and len(self.lr) != self.budget:
            raise ValueError(f"complete run has {len(self.lr)} epochs, budget is {self.budget}")

    @property
    def scheduler_name(self) -> str:
        return self.scheduler["name"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def save(self, runs_dir) -> Path:
        out = Path(runs_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.fingerprint}.json"
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        os.replace(tmp, path)
        return path


def fingerprint(config: ExperimentConfig, scheduler: SchedulerEntry, seed: int, budget: int) -> str:
    """Stable hash of everything that determines a run's curves.

    The dataset path is left out: the data is identified by its seed and size.
    """
    ident = {
        "task": config.task.value,
        "batch_size": config.batch_size,
        "network": asdict(config.network),
        "optimizer": config.optimizer.to_dict(),
        "dataset": {"seed": config.dataset.seed, "function_count": config.dataset.function_count},
        "scheduler": scheduler.to_dict(),
        "seed": seed,
        "budget": budget,
        "init": INIT_SCHEME,
    }
    blob = json.dumps(ident, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def load_records(runs_dir) -> list[RunRecord]:
    src = Path(runs_dir)
    if not src.is_dir():
        raise FileNotFoundError(f"no run directory {src}")
    return [RunRecord.from_dict(json.loads(p.read_text())) for p in sorted(src.glob("*.json"))]


# --- data and models ----------------------------------------------------------------


@dataclass
class TaskData:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    y_points: np.ndarray | None = None


_DATA_CACHE: dict = {}


def load_task_data(config: ExperimentConfig) -> TaskData:
    key = (config.task, config.dataset)
    if key not in _DATA_CACHE:
        _DATA_CACHE[key] = _build_task_data(config.task, config.dataset)
    return _DATA_CACHE[key]


def _build_task_data(task: Task, ds: DatasetConfig) -> TaskData:
    if task is Task.INTEGRAL:
        if ds.path:
            data = read_integral(ds.path)
            if len(data) != ds.function_count:
                raise ConfigError(f"{ds.path} holds {len(data)} functions, config says {ds.function_count}")
        else:
            data = grf_sample(GrfSpec(function_count=ds.function_count), ds.seed)
        tr, va = split_indices(len(data), ds.seed)
        return TaskData(data.u[tr], data.g[tr], data.u[va], data.g[va], data.y)
    if ds.path:
        arrays, _ = load_arrays(ds.path)
        x, y = arrays["train_inputs"], arrays["train_labels"]
        vx, vy = arrays["val_inputs"], arrays["val_labels"]
    else:
        train, val = normalize_and_split(build_oscillation_dataset(), ds.seed)
        x, y, vx, vy = train.inputs, train.labels, val.inputs, val.labels
    flat = lambda a: a.reshape(a.shape[0], -1)  # noqa: E731
    return TaskData(flat(x), flat(y), flat(vx), flat(vy))


def build_model(config: ExperimentConfig, seed: int, data: TaskData):
    net = config.network
    mid = (net.hidden,) * net.depth
    if config.task is Task.INTEGRAL:
        spec = DeepONetSpec(
            DenseNetworkSpec((data.train_x.shape[1], *mid, net.p), net.activation, seed),
            DenseNetworkSpec((1, *mid, net.p), net.activation, seed),
            net.p,
        )
        return DeepONetRegressor(spec, data.y_points)
    spec = DenseNetworkSpec((data.train_x.shape[1], *mid, data.train_y.shape[1]), net.activation, seed)
    return DenseRegressor(spec)


# --- training ---------------------------------------------------------------------


def sized_schedule(scheduler: SchedulerEntry, budget: int) -> ScheduleSpec:
    try:
        return scheduler.spec.for_epochs(budget)
    except ScheduleError as exc:
        raise ConfigError(f"scheduler {scheduler.name!r} cannot run {budget} epochs: {exc}") from None


def batch_order(seed: int) -> np.random.Generator:
    """Generator for the per-epoch shuffles of one run (stream 1; stream 0 is unused)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))


def run_single(config: ExperimentConfig, scheduler: SchedulerEntry, seed: int, budget: int) -> RunRecord:
    spec = sized_schedule(scheduler, budget)
    data = load_task_data(config)
    model = build_model(config, seed, data)
    state = ParameterState.fresh(model.init())
    stepper = ScheduleStepper(spec)
    rng = batch_order(seed)
    n_train, bs = data.train_x.shape[0], config.batch_size

    lrs, losses = [], []
    diverged = False
    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(budget):
            if epoch:
                stepper.step()
            lr = stepper.current_lr
            order = rng.permutation(n_train)
            try:
                for start in range(0, n_train, bs):
                    idx = order[start : start + bs]
                    loss, grad = model.loss_and_grad(state.theta, data.train_x[idx], data.train_y[idx])
                    if not math.isfinite(loss):
                        raise DivergenceError(f"training loss {loss} at epoch {epoch}")
                    state = adamw_step(state, grad, lr, config.optimizer)
            except DivergenceError:
                diverged = True
                break
            val = model.loss(state.theta, data.val_x, data.val_y)
            if not math.isfinite(val):
                diverged = True
                break
            lrs.append(lr)
            losses.append(val)
    return RunRecord(
        fingerprint=fingerprint(config, scheduler, seed, budget),
        task=config.task.value,
        scheduler=scheduler.to_dict(),
        seed=seed,
        budget=budget,
        lr=lrs,
        val_loss=losses,
        diverged=diverged,
        wall_seconds=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class PlannedRun:
    scheduler: SchedulerEntry
    seed: int
    budget: int
    fingerprint: str


def plan_sweep(config: ExperimentConfig) -> list[PlannedRun]:
    """Every (scheduler, budget, seed) combination; invalid ones raise up front."""
    plan = []
    for s in config.schedulers:
        for b in config.epoch_budgets:
            sized_schedule(s, b)
            for seed in config.seeds:
                plan.append(PlannedRun(s, seed, b, fingerprint(config, s, seed, b)))
    return plan


def _run_planned(config: ExperimentConfig, job: PlannedRun) -> RunRecord:
    try:
        return run_single(config, job.scheduler, job.seed, job.budget)
    except Exception as exc:  # recorded per run; the sweep carries on
        return RunRecord(
            job.fingerprint, config.task.value, job.scheduler.to_dict(), job.seed, job.budget,
            [], [], False, 0.0, error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(
    config: ExperimentConfig,
    runs_dir,
    jobs: int = 1,
    progress: Callable[[RunRecord, bool], None] | None = None,
) -> list[RunRecord]:
    """Run (or reuse) every planned record and return them in plan order.

    Completed records are written as they finish.  Failed runs come back
    with ``error`` set and are not written, so a rerun retries them.
    ``progress(record, reused)`` is called once per record.
    """
    runs_dir = Path(runs_dir)
    plan = plan_sweep(config)
    done: dict[str, RunRecord] = {}
    pending = []
    for job in plan:
        path = runs_dir / f"{job.fingerprint}.json"
        if path.exists():
            done[job.fingerprint] = RunRecord.from_dict(json.loads(path.read_text()))
            if progress:
                progress(done[job.fingerprint], True)
        elif job.fingerprint not in {p.fingerprint for p in pending}:
            pending.append(job)

    def finish(rec: RunRecord):
        if rec.error is None:
            rec.save(runs_dir)
        done[rec.fingerprint] = rec
        if progress:
            progress(rec, False)

    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_planned, config, job) for job in pending]
            for fut in as_completed(futures):
                finish(fut.result())
    else:
        for job in pending:
            finish(_run_planned(config, job))
    return [done[job.fingerprint] for job in plan]


# --- analysis -----------------------------------------------------------------------


@dataclass
class ReportRow:
    scheduler: str
    budget: int
    mean_endpoint: float
    mu: float
    sigma: float
    B: float
    R2: float
    p: float
    slcd: float
    runs: int


@dataclass
class SweepReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.scheduler, r.budget, *(_fmt(getattr(r, c)) for c in REPORT_COLUMNS[2:])])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'scheduler':<16}{'budget':>7}{'endpoint':>13}{'mu(%)':>10}{'sigma(%)':>10}"
        head += f"{'B':>10}{'R2':>8}{'p':>10}{'sLCD':>10}"
        lines = [head, "-" * len(head)]
        last = None
        for r in self.rows:
            first = r.scheduler != last
            last = r.scheduler
            cells = f"{r.scheduler if first else '':<16}{r.budget:>7}{r.mean_endpoint:>13.4e}"
            if first:
                cells += f"{r.mu:>10.2f}{r.sigma:>10.2f}{r.B:>10.4f}{r.R2:>8.4f}{r.p:>10.3g}{r.slcd:>10.4f}"
            lines.append(cells)
        lines.append("")
        lines.append(f"sLCD: {self.metadata.get('slcd_method', '')}; endpoint: {self.metadata.get('endpoint', '')}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {"rows": [asdict(r) for r in self.rows], "metadata": self.metadata}
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv())
        (out / "report.txt").write_text(self.to_text())
        (out / "report.json").write_text(self.to_json())
        return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def averaged_curve(records: Iterable[RunRecord], budget: int) -> np.ndarray | None:
    """Mean validation curve over seeds, using only complete runs."""
    curves = [r.val_loss for r in records if r.budget == budget and not r.diverged and r.error is None]
    return np.mean(np.array(curves), axis=0) if curves else None


def smoothing_for(length: int, window: int = 9, poly_order: int = 3) -> SmoothingSpec:
    """Savitzky-Golay settings that fit a curve of ``length`` points."""
    w = min(window, length if length % 2 else length - 1)
    if w < 3:
        return SmoothingSpec.identity()
    return SmoothingSpec.savgol(w, min(poly_order, w - 1))


class AnalysisError(ValueError):
    pass


def analyze_sweep(records: Sequence[RunRecord], window: int = 9) -> SweepReport:
    """Table-2-shaped summary: one row per (scheduler, budget).

    Scheduler-level statistics (mu, sigma, B, R2, p, sLCD) repeat on each of
    that scheduler's rows.  Power regression needs three budgets and reports
    NaN otherwise.
    """
    usable = [r for r in records if r.error is None]
    by_sched: dict[str, list[RunRecord]] = {}
    for r in sorted(usable, key=lambda r: (r.scheduler_name, r.budget, r.seed)):
        by_sched.setdefault(r.scheduler_name, []).append(r)
    if not by_sched:
        raise AnalysisError("no usable run records")

    rows, smoothing_meta = [], {}
    for name, recs in by_sched.items():
        budgets = sorted({r.budget for r in recs})
        if len(budgets) < 2:
            raise AnalysisError(f"scheduler {name!r} has records for only {budgets}; need two budgets")
        means, counts = [], []
        for b in budgets:
            ends = [r.val_loss[-1] for r in recs if r.budget == b and not r.diverged]
            means.append(float(np.mean(ends)) if ends else math.nan)
            counts.append(len(ends))

        mu = sigma = math.nan
        if all(math.isfinite(m) for m in means):
            try:
                st = improvement_stats(means)
                mu, sigma = st.mean_pct, st.std_pct
            except MetricError:
                pass

        B = R2 = p = math.nan
        if len(budgets) >= 3 and all(math.isfinite(m) for m in means):
            try:
                reg = power_regression(budgets, means)
                B, R2, p = reg.B, reg.r_squared, reg.p_value
            except MetricError:
                pass

        dec = math.nan
        short, long = averaged_curve(recs, budgets[0]), averaged_curve(recs, budgets[-1])
        if short is not None and long is not None:
            spec = smoothing_for(min(short.size, long.size), window)
            smoothing_meta[name] = spec.to_dict()
            try:
                dec = slcd(short, long, spec).slcd
            except MetricError:
                pass

        for b, m, c in zip(budgets, means, counts):
            rows.append(ReportRow(name, b, m, mu, sigma, B, R2, p, dec, c))

    meta = {
        "slcd_method": SLCD_METHOD,
        "smoothing": smoothing_meta,
        "endpoint": "final-epoch validation loss, mean over non-diverged seeds",
        "improvement": "relative decrease of the mean endpoint between consecutive budgets",
        "records": len(usable),
    }
    return SweepReport(rows, meta)
