"""``epochlab`` command line: schedules, ILRI tables, datasets, sweeps and reports.

Exit codes: 0 success, 1 usage error (bad flags, invalid parameters or
config), 2 runtime failure (missing files, failed runs).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import datasets, experiment
from .metrics import ilri_comparison
from .presets import PRESETS, preset
from .schedules import Kind, ScheduleError, ScheduleSpec, schedule_series
from .svg import line_chart

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def runs_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get("EPOCHLAB_RUNS_DIR") or "runs")


# --- schedule -----------------------------------------------------------------


def _spec_from_args(a) -> ScheduleSpec:
    if a.preset:
        try:
            return preset(a.preset, a.upper)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if not a.kind:
        raise UsageError("give --kind or --preset")
    return ScheduleSpec(
        Kind(a.kind),
        a.eta_init,
        eta_min=a.eta_min,
        eta_inf=a.eta_inf,
        power=a.power,
        gamma=a.gamma,
        upper_bound=a.upper,
    )


def _schedule_csv(spec: ScheduleSpec, epochs: int) -> str:
    rows = [f"{n},{lr:.17g}" for n, lr in schedule_series(spec, epochs)]
    return "epoch,lr\n" + "\n".join(rows) + "\n"


def cmd_schedule(a) -> int:
    spec = _spec_from_args(a)
    for e in a.epochs:
        spec.for_epochs(e).validate()  # fail before writing anything
    if len(a.epochs) > 1 and not a.out:
        raise UsageError("several --epochs values need --out DIR (one CSV per budget)")
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        for e in a.epochs:
            path = out / f"{spec.kind.value}_{e}.csv"
            path.write_text(_schedule_csv(spec, e))
            print(path)
    else:
        sys.stdout.write(_schedule_csv(spec, a.epochs[0]))
    if a.svg:
        series = {}
        for e in a.epochs:
            pts = schedule_series(spec, e)
            series[f"{e} epochs"] = ([n for n, _ in pts], [v for _, v in pts])
        Path(a.svg).write_text(line_chart(series, f"{spec.kind.value} schedule", "epoch", "learning rate"))
    return EXIT_OK


# --- ilri -------------------------------------------------------------------------


def cmd_ilri(a) -> int:
    kinds = a.kinds or ["polynomial", "cosine", "hyperbolic", "exp-hyperbolic"]
    table = []
    for k in kinds:
        spec = ScheduleSpec(
            Kind(k), a.eta_init, eta_min=a.eta_min, eta_inf=a.eta_inf, power=a.power, gamma=a.gamma,
            upper_bound=a.upper,
        )
        for N in [*a.max_epochs, a.baseline]:
            if spec.kind.needs_max_epoch:
                spec.for_epochs(N + 1).validate()
        table.append((k, ilri_comparison(spec, a.max_epochs, a.baseline)))

    if a.csv:
        print("kind,max_epoch,ilri,n_crossing,pct_diff")
        for k, rows in table:
            for r in rows:
                cells = [r.ilri, r.n_crossing, r.pct_diff]
                print(f"{k},{r.max_epoch}," + ",".join("" if c is None else f"{c:.10g}" for c in cells))
        return EXIT_OK

    header = f"{'scheduler':<16}" + "".join(f"{'N=' + str(N):>16}" for N in a.max_epochs)
    print(f"ILRI % difference vs N={a.baseline}")
    print(header)
    print("-" * len(header))
    for k, rows in table:
        cells = "".join(f"{'no crossing' if r.pct_diff is None else f'{r.pct_diff:.2f}%':>16}" for r in rows)
        print(f"{k:<16}{cells}")
    return EXIT_OK


# --- dataset ------------------------------------------------------------------------


def cmd_dataset(a) -> int:
    out = Path(a.out or f"datasets/{a.name}-seed{a.seed}")
    if a.name == "oscillation":
        meta = datasets.write_oscillation(out, a.seed)
    else:
        spec = datasets.GrfSpec(function_count=a.functions)
        meta = datasets.write_integral(out, a.seed, spec)
    summary = {k: v for k, v in meta.items() if k != "arrays"}
    print(json.dumps({"directory": str(out), **summary}, indent=1, sort_keys=True))
    return EXIT_OK


# --- experiment -----------------------------------------------------------------------


def _load_config(a) -> experiment.ExperimentConfig:
    task = experiment.Task(a.task)
    if a.config:
        try:
            raw = json.loads(Path(a.config).read_text())
        except FileNotFoundError:
            raise FileNotFoundError(f"config file {a.config} not found") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{a.config} is not valid JSON: {exc}") from None
        return experiment.ExperimentConfig.from_dict(raw)
    if a.full_scale:
        return experiment.full_scale_config(task)
    return experiment.desk_config(task)


def cmd_experiment(a) -> int:
    cfg = _load_config(a)
    if a.print_config:
        print(json.dumps(cfg.to_dict(), indent=1))
        return EXIT_OK
    rdir = runs_dir(a.runs_dir)
    plan = experiment.plan_sweep(cfg)
    if a.dry_run:
        print(f"{len(plan)} runs -> {rdir}")
        print(f"{'fingerprint':<26}{'scheduler':<16}{'budget':>7}{'seed':>7}  status")
        for job in plan:
            status = "done" if (rdir / f"{job.fingerprint}.json").exists() else "pending"
            print(f"{job.fingerprint:<26}{job.scheduler.name:<16}{job.budget:>7}{job.seed:>7}  {status}")
        return EXIT_OK

    def progress(rec, reused):
        tag = "reused" if reused else ("FAILED" if rec.error else ("diverged" if rec.diverged else "ok"))
        last = f"{rec.val_loss[-1]:.4e}" if rec.val_loss else "-"
        print(f"{rec.scheduler_name:<16} budget={rec.budget:<5} seed={rec.seed:<5} {tag:<8} final={last}", flush=True)

    records = experiment.run_sweep(cfg, rdir, jobs=a.jobs, progress=progress)
    failed = [r for r in records if r.error]
    for r in failed:
        print(f"run {r.fingerprint} failed: {r.error}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


# --- analyze --------------------------------------------------------------------------


def cmd_analyze(a) -> int:
    src = Path(a.runs) if a.runs else runs_dir(None)
    records = experiment.load_records(src)
    report = experiment.analyze_sweep(records, window=a.window)
    sys.stdout.write(report.to_csv() if a.csv else report.to_text())
    if a.out:
        report.write(a.out)
    if a.svg:
        out = Path(a.svg)
        out.mkdir(parents=True, exist_ok=True)
        names = sorted({r.scheduler_name for r in records if r.error is None})
        for name in names:
            recs = [r for r in records if r.scheduler_name == name and r.error is None]
            series = {}
            for b in sorted({r.budget for r in recs}):
                curve = experiment.averaged_curve(recs, b)
                if curve is not None:
                    series[f"{b} epochs"] = (list(range(curve.size)), list(curve))
            if series:
                (out / f"{name}.svg").write_text(
                    line_chart(series, f"{name}: seed-averaged validation loss", "epoch", "loss", log_y=True)
                )
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epochlab", description="Learning-rate schedules and decoupling experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("schedule", help="emit epoch,lr CSV for one or more epoch budgets")
    s.add_argument("--kind", choices=[k.value for k in Kind])
    s.add_argument("--preset", help=f"named preset, e.g. deeponet-exphyperbolic ({len(PRESETS)} available)")
    s.add_argument("--eta-init", type=float, default=1.0)
    s.add_argument("--eta-min", type=float)
    s.add_argument("--eta-inf", type=float)
    s.add_argument("--power", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--upper", type=int, help="upper bound U for hyperbolic kinds")
    s.add_argument("--epochs", type=_int_list, required=True, help="comma-separated epoch budgets")
    s.add_argument("--out", help="directory for <kind>_<epochs>.csv files")
    s.add_argument("--svg", help="also write an SVG chart of every budget")
    s.set_defaults(func=cmd_schedule)

    i = sub.add_parser("ilri", help="initial-learning-rate-integral table across max epochs")
    i.add_argument("--kinds", type=lambda t: [Kind(k).value for k in t.split(",")],
                   help="comma-separated kinds (default: polynomial,cosine,hyperbolic,exp-hyperbolic)")
    i.add_argument("--eta-init", type=float, default=1.0)
    i.add_argument("--eta-inf", type=float, default=1e-3)
    i.add_argument("--eta-min", type=float, default=1e-3)
    i.add_argument("--power", type=float, default=0.5)
    i.add_argument("--gamma", type=float, default=0.99)
    i.add_argument("--upper", type=int, default=1000)
    i.add_argument("--max-epochs", type=_int_list, default=[250, 500, 750], help="max epoch indices N")
    i.add_argument("--baseline", type=int, default=1000)
    i.add_argument("--csv", action="store_true")
    i.set_defaults(func=cmd_ilri)

    d = sub.add_parser("dataset", help="generate a dataset directory (meta.json + float64 arrays)")
    d.add_argument("name", choices=["oscillation", "integral"])
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--functions", type=int, default=1000, help="GRF function count (integral only)")
    d.add_argument("--out", help="output directory (default datasets/<name>-seed<seed>)")
    d.set_defaults(func=cmd_dataset)

    e = sub.add_parser("experiment", help="run a sweep of schedulers x budgets x seeds")
    e.add_argument("--config", help="JSON config; defaults to the desk sweep")
    e.add_argument("--task", choices=[t.value for t in experiment.Task], default=experiment.Task.INTEGRAL.value)
    e.add_argument("--paper-scale", dest="full_scale", action="store_true", help="full budgets, seeds, schedulers and network")
    e.add_argument("--runs-dir", help="record directory (default $EPOCHLAB_RUNS_DIR or ./runs)")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--dry-run", action="store_true", help="print the run matrix and exit")
    e.add_argument("--print-config", action="store_true", help="print the resolved config as JSON and exit")
    e.set_defaults(func=cmd_experiment)

    an = sub.add_parser("analyze", help="summarise run records into a report")
    an.add_argument("runs", nargs="?", help="record directory (default $EPOCHLAB_RUNS_DIR or ./runs)")
    an.add_argument("--out", help="write report.csv, report.txt and report.json here")
    an.add_argument("--csv", action="store_true", help="print CSV instead of the text table")
    an.add_argument("--svg", help="directory for per-scheduler learning-curve charts")
    an.add_argument("--window", type=int, default=9, help="Savitzky-Golay window for sLCD")
    an.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, datasets.DatasetError, experiment.AnalysisError) as exc:
        print(f"epochlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ScheduleError, experiment.ConfigError, ValueError) as exc:
        print(f"epochlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"epochlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
