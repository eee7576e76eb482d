"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one ``[PASS]``/``[FAIL]`` line (collected again in the
pytest terminal summary).  Run directly with ``python3 tests/test_acceptance.py``
for the lines alone.
"""
from __future__ import annotations

import contextlib
import io
import math
import sys
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from epochlab.cli import main as cli_main
from epochlab.datasets import GrfSpec, OscillatorSpec, build_oscillation_dataset, grf_sample, newmark_beta_solve, normalize_and_split
from epochlab.experiment import analyze_sweep, desk_config, run_sweep
from epochlab.metrics import power_regression, slcd
from epochlab.nn import DeepONetRegressor, DeepONetSpec, DenseNetworkSpec, DenseRegressor
from epochlab.schedules import (
    Kind,
    ScheduleSpec,
    eval_exp_hyperbolic,
    eval_exponential,
    eval_hyperbolic,
    evaluate,
    h_curve,
    hyperbolic_lr,
    schedule_series,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

DRAWS = 10_000


@dataclass
class Verdict:
    number: int
    title: str
    ok: bool
    detail: str

    @property
    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] criterion {self.number}: {self.title} -- {self.detail}"


def record(v: Verdict) -> Verdict:
    print(v.line)
    ACCEPTANCE_LINES.append(v.line)
    return v


# --- 1 ----------------------------------------------------------------------------

REFERENCE_ILRI = {
    "polynomial": ([75.0, 50.0, 25.0], 0.1),
    "cosine": ([75.0, 50.0, 25.0], 0.1),
    "hyperbolic": ([38.01, 15.31, 3.66], 0.5),
    "exp-hyperbolic": ([34.46, 13.67, 3.24], 0.5),
}


def criterion_1() -> Verdict:
    buf = io.StringIO()
    t0 = time.perf_counter()
    with contextlib.redirect_stdout(buf):
        code = cli_main(["ilri", "--eta-init", "1", "--eta-inf", "1e-3", "--upper", "1000",
                         "--max-epochs", "250,500,750", "--baseline", "1000", "--csv"])
    elapsed = time.perf_counter() - t0
    got: dict[str, list[float]] = {}
    for line in buf.getvalue().splitlines()[1:]:
        kind, _, _, _, pct = line.split(",")
        got.setdefault(kind, []).append(float(pct))
    worst = {k: max(abs(a - b) for a, b in zip(got.get(k, [math.inf] * 3), ref)) for k, (ref, _) in REFERENCE_ILRI.items()}
    ok = code == 0 and elapsed < 10 and all(worst[k] <= tol for k, (_, tol) in REFERENCE_ILRI.items())
    cells = "; ".join(f"{k} {'/'.join(f'{v:.2f}' for v in got.get(k, []))}" for k in REFERENCE_ILRI)
    return Verdict(1, "ILRI reference values", ok, f"{cells}; {elapsed:.2f}s")


# --- 2 ----------------------------------------------------------------------------


def _draw_NU(rng, max_u=1000, strict=False):
    U = int(rng.integers(2 if strict else 1, max_u + 1))
    N = int(rng.integers(0, U if strict else U + 1))
    return N, U


def _random_hyp_spec(rng, kind, max_u=1000):
    N, U = _draw_NU(rng, max_u)
    eta_init = float(10 ** rng.uniform(-6, 1))
    eta_inf = eta_init * float(10 ** rng.uniform(-8, math.log10(0.999)))
    return ScheduleSpec(kind, eta_init, eta_inf=eta_inf, upper_bound=U, max_epoch=N)


def _random_spec(rng, kind):
    eta_init = float(10 ** rng.uniform(-6, 1))
    N = int(rng.integers(0, 201))
    if kind is Kind.CONSTANT:
        return ScheduleSpec(kind, eta_init, max_epoch=N)
    if kind is Kind.POLYNOMIAL:
        return ScheduleSpec(kind, eta_init, power=float(rng.uniform(0.05, 5)), max_epoch=N)
    if kind is Kind.COSINE:
        return ScheduleSpec(kind, eta_init, eta_min=eta_init * float(rng.uniform(0, 1)), max_epoch=N)
    if kind is Kind.EXPONENTIAL:
        return ScheduleSpec(kind, eta_init, gamma=float(rng.uniform(0.5, 0.9999)), max_epoch=N)
    U = max(N + int(rng.integers(0, 800)), 1)
    eta_inf = eta_init * float(10 ** rng.uniform(-8, math.log10(0.999)))
    return ScheduleSpec(kind, eta_init, eta_inf=eta_inf, upper_bound=U, max_epoch=N)


def prop_1(rng):
    """Hyperbola identity, exact rational arithmetic on the float h value."""
    worst = 0.0
    for _ in range(DRAWS):
        N, U = _draw_NU(rng, strict=True)
        n = int(rng.integers(0, N + 1))
        y = Fraction(h_curve(n, N, U))
        lhs = Fraction(n - U, U - N) ** 2 - (y * U / (U - N)) ** 2
        worst = max(worst, abs(float(lhs) - 1.0))
    return worst <= 1e-10, f"max |lhs-1| {worst:.2e}"


def prop_2(rng):
    bad = 0
    for i in range(DRAWS):
        U = int(rng.integers(1, 1001))
        N = U if i % 10 == 0 else int(rng.integers(1, U + 1))
        h0 = h_curve(0, N, U)
        equal = abs(h0 - 1.0) <= 1e-12
        bad += h0 > 1.0 or equal != (N == U)
    return bad == 0, f"{bad} violations"


def prop_3(rng):
    bad = sum(
        eval_hyperbolic(s, s.max_epoch) < s.eta_inf
        for s in (_random_hyp_spec(rng, Kind.HYPERBOLIC) for _ in range(DRAWS))
    )
    return bad == 0, f"{bad} below floor"


def prop_4(rng):
    bad = sum(
        eval_exp_hyperbolic(s, s.max_epoch) < s.eta_inf
        for s in (_random_hyp_spec(rng, Kind.EXP_HYPERBOLIC) for _ in range(DRAWS))
    )
    return bad == 0, f"{bad} below floor"


def prop_5(rng):
    worst = 0.0
    for _ in range(DRAWS):
        s = _random_hyp_spec(rng, Kind.EXP_HYPERBOLIC, max_u=5000)
        n = int(rng.integers(0, s.max_epoch + 1))
        direct = eval_exp_hyperbolic(s, n)
        via_log = math.exp(hyperbolic_lr(n, math.log(s.eta_init), math.log(s.eta_inf), s.max_epoch, s.upper_bound))
        worst = max(worst, abs(direct - via_log) / via_log)
    return worst <= 1e-12, f"max rel {worst:.2e}"


def prop_6(rng):
    """Literal statement: |U (h(1) - h(0)) + 1| < 0.05 whenever N <= U/10."""
    fails, worst = 0, 0.0
    for _ in range(DRAWS):
        U = int(rng.integers(10, 100_001))
        N = int(rng.integers(1, U // 10 + 1))
        err = abs(U * (h_curve(1, N, U) - h_curve(0, N, U)) + 1)
        fails += err >= 0.05
        worst = max(worst, err)
    return fails == 0, f"{fails}/{DRAWS} draws off by >= 0.05 (max {worst:.3g})"


def prop_7(rng):
    kinds = list(Kind)
    bad = 0
    for i in range(DRAWS):
        s = _random_spec(rng, kinds[i % len(kinds)])
        vals = [evaluate(s, n) for n in range(s.max_epoch + 1)]
        bad += any(b > a for a, b in zip(vals, vals[1:]))
    return bad == 0, f"{bad} increasing series"


def prop_8(rng):
    bad = 0
    for _ in range(DRAWS):
        eta, gamma = float(10 ** rng.uniform(-6, 1)), float(rng.uniform(0.5, 0.9999))
        n = int(rng.integers(0, 300))
        N1, N2 = (int(v) for v in rng.integers(n, n + 500, size=2))
        a = eval_exponential(ScheduleSpec(Kind.EXPONENTIAL, eta, gamma=gamma, max_epoch=N1), n)
        b = eval_exponential(ScheduleSpec(Kind.EXPONENTIAL, eta, gamma=gamma, max_epoch=N2), n)
        bad += a != b
    return bad == 0, f"{bad} N-dependent values"


def criterion_2() -> Verdict:
    t0 = time.perf_counter()
    parts = []
    all_ok = True
    for i, prop in enumerate((prop_1, prop_2, prop_3, prop_4, prop_5, prop_6, prop_7, prop_8), start=1):
        ok, info = prop(np.random.default_rng(1000 + i))
        all_ok &= ok
        parts.append(f"property {i} {'ok' if ok else 'FAIL'} ({info})")
    elapsed = time.perf_counter() - t0
    return Verdict(2, "schedule properties 1-8", all_ok and elapsed < 30, "; ".join(parts) + f"; {elapsed:.1f}s")


# --- 3 ----------------------------------------------------------------------------

EARLY_EPOCH_SPECS = {
    "hyperbolic": ScheduleSpec(Kind.HYPERBOLIC, 1.0, eta_inf=1e-4, upper_bound=1000),
    "exp-hyperbolic": ScheduleSpec(Kind.EXP_HYPERBOLIC, 1.0, eta_inf=1e-4, upper_bound=1000),
    "polynomial": ScheduleSpec(Kind.POLYNOMIAL, 1.0, power=0.5),
    "cosine": ScheduleSpec(Kind.COSINE, 1.0, eta_min=1e-4),
}


def early_gap(spec: ScheduleSpec, short: int = 250, long: int = 1000, upto: int = 25) -> float:
    """Largest relative LR gap between two budgets over epochs 0..upto."""
    a = np.array([v for _, v in schedule_series(spec, short)[: upto + 1]])
    b = np.array([v for _, v in schedule_series(spec, long)[: upto + 1]])
    return float(np.max(np.abs(a - b) / np.minimum(a, b)))


def criterion_3() -> Verdict:
    gaps = {k: early_gap(s) for k, s in EARLY_EPOCH_SPECS.items()}
    consistent = all(gaps[k] <= 0.05 for k in ("hyperbolic", "exp-hyperbolic"))
    sensitive = all(gaps[k] > 0.20 for k in ("polynomial", "cosine"))
    detail = ", ".join(f"{k} {100 * g:.2f}%" for k, g in gaps.items())
    detail += f" (need H/EH <= 5%: {'yes' if consistent else 'no'}; P/C > 20%: {'yes' if sensitive else 'no'})"
    return Verdict(3, "early-epoch schedule shape, budgets 250 vs 1000", consistent and sensitive, detail)


# --- 4 ----------------------------------------------------------------------------


def _fd_worst(model, theta, x, y, step=1e-5):
    _, grad = model.loss_and_grad(theta, x, y)
    worst = 0.0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        fd = (model.loss(tp, x, y) - model.loss(tm, x, y)) / (2 * step)
        worst = max(worst, abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-8))
    return worst


def criterion_4() -> Verdict:
    rng = np.random.default_rng(44)
    nets = [
        (DenseRegressor(DenseNetworkSpec((4, 6, 3), "gelu", 1)), (5, 4), (5, 3)),
        (DenseRegressor(DenseNetworkSpec((3, 5, 5, 2), ("relu", "gelu"), 2)), (6, 3), (6, 2)),
        (DenseRegressor(DenseNetworkSpec((20, 8, 4), "gelu", 3)), (4, 20), (4, 4)),
        (DeepONetRegressor(DeepONetSpec(DenseNetworkSpec((100, 6, 3), "gelu", 4), DenseNetworkSpec((1, 5, 3), "gelu", 4), 3),
                           np.linspace(0, 1, 5)), (3, 100), (3, 5)),
        (DeepONetRegressor(DeepONetSpec(DenseNetworkSpec((100, 4, 4, 2), "gelu", 5), DenseNetworkSpec((1, 4, 4, 2), "gelu", 5), 2),
                           np.linspace(0, 1, 4)), (2, 100), (2, 4)),
    ]
    grad_worst = 0.0
    for model, xs, ys in nets:
        theta = model.init() + 0.1 * rng.normal(size=model.layout.size)
        grad_worst = max(grad_worst, _fd_worst(model, theta, rng.normal(size=xs), rng.normal(size=ys)))

    u = newmark_beta_solve(OscillatorSpec(zeta=0.0))
    t = np.arange(u.size) * 1e-3
    newmark_err = float(np.max(np.abs(u - 0.1 * np.cos(math.sqrt(200) * t))))

    reg_worst = 0.0
    for A, B in [(0.0, -1.5), (math.log(2), -0.5), (-3.0, 2.0), (1.2, -0.013)]:
        x = np.array([50.0, 100.0, 150.0, 200.0])
        r = power_regression(x, math.exp(A) * x**B)
        reg_worst = max(reg_worst, abs(r.B - B))

    ok = grad_worst < 1e-4 and newmark_err < 1e-3 and reg_worst <= 1e-10
    detail = f"grad rel err {grad_worst:.1e} on 5 nets; Newmark max err {newmark_err:.2e}; regression |dB| {reg_worst:.1e}"
    return Verdict(4, "numerical oracles", ok, detail)


# --- 5 ----------------------------------------------------------------------------


def criterion_5() -> Verdict:
    full = build_oscillation_dataset()
    train, val = normalize_and_split(full, seed=89)
    d = grf_sample(GrfSpec(function_count=10), seed=0, u_override=np.ones(100))
    err = float(np.max(np.abs(d.g - d.y)))
    ok = (len(full), len(train), len(val)) == (29_646, 23_716, 5_930) and err <= 1e-12
    return Verdict(5, "dataset counts", ok, f"pairs {len(full)}, split {len(train)}/{len(val)}; u=1 integral err {err:.1e}")


# --- 6 and 7 ------------------------------------------------------------------------

DESK_BUDGETS = (10, 40)
DESK_SEEDS = (89, 231, 928)
FALLBACK_DATASET_SEEDS = (0, 1, 2)


def desk_sweep(dataset_seed: int, runs_dir: Path):
    cfg = desk_config(budgets=DESK_BUDGETS, seeds=DESK_SEEDS, dataset_seed=dataset_seed)
    return run_sweep(cfg, runs_dir)


def _per_seed_directions(records) -> list[bool]:
    out = []
    for seed in DESK_SEEDS:
        vals = {}
        for name in ("cosine", "exp-hyperbolic"):
            curves = {r.budget: r.val_loss for r in records if r.seed == seed and r.scheduler_name == name}
            vals[name] = slcd(curves[DESK_BUDGETS[0]], curves[DESK_BUDGETS[-1]]).slcd
        out.append(vals["exp-hyperbolic"] < vals["cosine"])
    return out


def _averaged(records) -> dict[str, float]:
    return {r.scheduler: r.slcd for r in analyze_sweep(records).rows}


def criterion_6(workdir: Path) -> tuple[Verdict, list]:
    t0 = time.perf_counter()
    primary = desk_sweep(FALLBACK_DATASET_SEEDS[0], workdir / "ds0")
    avg = _averaged(primary)
    directions = _per_seed_directions(primary)
    primary_ok = avg["exp-hyperbolic"] < avg["cosine"]
    detail = f"dataset 0: sLCD EH {avg['exp-hyperbolic']:.4f} vs cosine {avg['cosine']:.4f}"
    detail += f", per-seed EH<cos {directions}"
    if all(d == directions[0] for d in directions):
        ok = primary_ok
    else:
        wins = [primary_ok]
        for ds in FALLBACK_DATASET_SEEDS[1:]:
            a = _averaged(desk_sweep(ds, workdir / f"ds{ds}"))
            wins.append(a["exp-hyperbolic"] < a["cosine"])
            detail += f"; dataset {ds}: EH {a['exp-hyperbolic']:.4f} vs cosine {a['cosine']:.4f}"
        ok = sum(wins) >= 2
        detail += f"; flaky across seeds, majority over datasets {FALLBACK_DATASET_SEEDS}: {sum(wins)}/3"
    detail += f"; {time.perf_counter() - t0:.0f}s"
    return Verdict(6, "desk decoupling, EH below cosine", ok, detail), primary


def criterion_7(first, workdir: Path) -> Verdict:
    again = desk_sweep(FALLBACK_DATASET_SEEDS[0], workdir / "rerun")
    a = {r.fingerprint: (np.array(r.lr).tobytes(), np.array(r.val_loss).tobytes()) for r in first}
    b = {r.fingerprint: (np.array(r.lr).tobytes(), np.array(r.val_loss).tobytes()) for r in again}
    files_a = {p.name: p.read_text() for p in (workdir / "ds0").glob("*.json")}
    files_b = {p.name: p.read_text() for p in (workdir / "rerun").glob("*.json")}
    strip = lambda s: "\n".join(l for l in s.splitlines() if '"wall_seconds"' not in l)  # noqa: E731
    same_files = files_a.keys() == files_b.keys() and all(strip(files_a[k]) == strip(files_b[k]) for k in files_a)
    ok = a == b and len(a) == 12 and same_files
    return Verdict(7, "determinism of the desk sweep", ok, f"{len(a)} records, curves identical: {a == b}, files identical: {same_files}")


# --- pytest entry points --------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("desk")


class _DeskResult(tuple):
    def __repr__(self):
        return f"<desk sweep: {self[0].line}>"


@pytest.fixture(scope="module")
def desk_result(desk_workdir):
    return _DeskResult(criterion_6(desk_workdir))


def test_criterion_1_ilri_reference():
    v = record(criterion_1())
    assert v.ok, v.line


def test_criterion_2_properties():
    v = record(criterion_2())
    assert v.ok, v.line


def test_criterion_3_early_epoch_shape():
    v = record(criterion_3())
    assert v.ok, v.line


def test_criterion_4_oracles():
    v = record(criterion_4())
    assert v.ok, v.line


def test_criterion_5_dataset_counts():
    v = record(criterion_5())
    assert v.ok, v.line


def test_criterion_6_desk_decoupling(desk_result):
    v = record(desk_result[0])
    assert v.ok, v.line


def test_criterion_7_determinism(desk_result, desk_workdir):
    v = record(criterion_7(desk_result[1], desk_workdir))
    assert v.ok, v.line


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        verdicts = [criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()]
        v6, first = criterion_6(Path(tmp))
        verdicts += [v6, criterion_7(first, Path(tmp))]
    for v in verdicts:
        print(v.line)
    sys.exit(0 if all(v.ok for v in verdicts) else 1)
