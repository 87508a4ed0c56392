"""Command-line harness: data generation, training, benchmarks and checks.

Exit codes: 0 success, 1 run failure, 2 verification failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import elicitation
from .data import LabeledDataset, ParseError, gen_two_gaussians, load_dataset, make_pu_split, save_delimited
from .evaluation import SweepRow, accuracy, drift_report, format_delta, robustness_sweep, summarize, sweep_table_csv
from .model import load_params, save_params
from .train import OBJECTIVES, RunConfig, train_model

log = logging.getLogger("collective_pu")

EXIT_OK, EXIT_RUN_FAILURE, EXIT_VERIFY_FAILURE, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Dataset source, grid of (r, objective) cells, repetitions and the base run recipe."""

    name: str = "gaussians"
    source: str = "gaussians"  # "gaussians" or "file"
    n_per_class: int = 5000
    d: int = 2
    separation: float = 4.0
    data_seed: int = 1
    train_path: str | None = None
    test_path: str | None = None
    format: str = "delimited"
    positive_classes: tuple[int, ...] = (1,)
    r_list: tuple[float, ...] = (0.4,)
    objectives: tuple[str, ...] = ("cpu",)
    repetitions: int = 1
    deltas: tuple[float, ...] = (-0.10, -0.05, 0.05, 0.10)
    base: RunConfig = field(default_factory=RunConfig)
    out_dir: str = "out"

    def __post_init__(self):
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        if not all(0.0 <= r < 1.0 for r in self.r_list):
            raise UsageError(f"r values must lie in [0, 1): {self.r_list}")
        unknown = set(self.objectives) - set(OBJECTIVES)
        if unknown:
            raise UsageError(f"unknown objectives {sorted(unknown)}")
        if self.source not in ("gaussians", "file"):
            raise UsageError(f"unknown dataset source {self.source!r}")

    def load(self) -> tuple[LabeledDataset, LabeledDataset]:
        """Return ``(train, test)``."""
        if self.source == "gaussians":
            pair = (
                gen_two_gaussians(self.n_per_class, self.d, self.separation, self.data_seed),
                gen_two_gaussians(self.n_per_class, self.d, self.separation, self.data_seed + 1),
            )
        else:
            pair = self._load_files()
        try:
            self.base.shape_for(pair[0].dim)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return pair

    def _load_files(self) -> tuple[LabeledDataset, LabeledDataset]:
        if not self.train_path or not self.test_path:
            raise UsageError("file datasets need train_path and test_path")
        for p in (self.train_path, self.test_path):
            if not Path(p).exists():
                raise FileNotFoundError(f"dataset not found: {p}")
        return (
            load_dataset(self.train_path, self.format, self.positive_classes),
            load_dataset(self.test_path, self.format, self.positive_classes),
        )


# --- config ----------------------------------------------------------------------

_SPEC_KEYS = {
    "name": str, "source": str, "n_per_class": int, "d": int, "separation": float, "data_seed": int,
    "train_path": str, "test_path": str, "format": str, "out_dir": str, "repetitions": int,
    "positive_classes": lambda s: tuple(int(v) for v in _split_list(s)),
    "r_list": lambda s: tuple(float(v) for v in _split_list(s)),
    "objectives": lambda s: tuple(_split_list(s)),
    "deltas": lambda s: tuple(float(v) for v in _split_list(s)),
}


def _split_list(s: str) -> list[str]:
    return [v for v in s.replace(",", " ").split() if v]


def read_config(path: str | None) -> tuple[dict, dict]:
    """Read ``[experiment]`` and ``[run]`` sections of an INI-style file."""
    if not path:
        return {}, {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path}")
    unknown = set(cp.sections()) - {"experiment", "run"}
    if unknown:
        raise UsageError(f"unknown config sections {sorted(unknown)}")
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    run = dict(cp["run"]) if cp.has_section("run") else {}
    return exp, run


def build_experiment(args) -> ExperimentSpec:
    exp, run = read_config(args.config)
    kw = {}
    for key, raw in exp.items():
        if key not in _SPEC_KEYS:
            raise UsageError(f"unknown experiment key {key!r}")
        kw[key] = _SPEC_KEYS[key](raw)
    for key in ("name", "source", "n_per_class", "d", "separation", "data_seed", "train_path", "test_path",
                "format", "repetitions"):
        val = getattr(args, key, None)
        if val is not None:
            kw[key] = val
    for key in ("positive_classes", "r_list", "objectives", "deltas"):
        val = getattr(args, key, None)
        if val is not None:
            kw[key] = tuple(val)
    if getattr(args, "train_path", None) and "source" not in kw:
        kw["source"] = "file"
    run = dict(run)
    for key in ("objective", "mu_target_mode", "mu_override", "lr", "batch_p", "batch_u", "epochs", "arch",
                "activation", "gamma"):
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    if args.seed is not None:
        run["seed"] = args.seed
    try:
        base = RunConfig.from_mapping(run)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    kw["base"] = base
    kw["out_dir"] = args.out_dir or kw.get("out_dir", "out")
    return ExperimentSpec(**kw)


# --- workers -----------------------------------------------------------------------


def _run_cell(job):
    experiment, r, objective, rep = job
    train, test = experiment.load()
    seed = experiment.base.seed + rep
    split = make_pu_split(train, r, seed)
    cfg = replace(experiment.base, objective=objective, seed=seed)
    _, report = train_model(cfg, split, test)
    return {
        "dataset": experiment.name, "r": r, "objective": objective, "repetition": rep, "seed": seed,
        "status": report.status, "test_acc": report.final_accuracy, "mean_eta_u": report.final_mean_eta_u,
        "mu_target": report.mu_target,
    }


def _run_sweep(job):
    experiment, r, rep = job
    train, test = experiment.load()
    seed = experiment.base.seed + rep
    split = make_pu_split(train, r, seed)
    rows = robustness_sweep(replace(experiment.base, objective="cpu", seed=seed), split, test, experiment.deltas)
    return r, rep, rows


def _map(fn, jobs, n_jobs):
    if n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --- commands ------------------------------------------------------------------------

RUN_COLUMNS = ["dataset", "r", "objective", "repetition", "seed", "status", "test_acc", "mean_eta_u", "mu_target"]
SUMMARY_COLUMNS = ["dataset", "r", "objective", "mean_acc", "std_acc", "n_ok"]


def benchmark_tables(experiment: ExperimentSpec, runs: list[dict]):
    """Long-form run rows -> (summary rows, markdown table, failed cells)."""
    summary, failed = [], []
    cells = {}
    for row in runs:
        cells.setdefault((row["r"], row["objective"]), []).append(row)
    for (r, obj), rows in cells.items():
        ok = [row["test_acc"] for row in rows if row["status"] == "ok"]
        if ok:
            mean, std = summarize(ok)
        else:
            mean, std = float("nan"), float("nan")
            failed.append((r, obj))
        summary.append([experiment.name, r, obj, mean, std, len(ok)])
    lines = ["| Dataset | r | " + " | ".join(experiment.objectives) + " |",
             "|---|---|" + "---|" * len(experiment.objectives)]
    by_cell = {(row[1], row[2]): row for row in summary}
    for r in experiment.r_list:
        cells_md = []
        for obj in experiment.objectives:
            row = by_cell[(r, obj)]
            cells_md.append("diverged" if row[5] == 0 else f"{row[3]:.4f} ± {row[4]:.4f}")
        lines.append(f"| {experiment.name} | {r:g} | " + " | ".join(cells_md) + " |")
    return summary, "\n".join(lines) + "\n", failed


def cmd_benchmark(args) -> int:
    experiment = build_experiment(args)
    experiment.load()  # fail early on unreachable data
    jobs = [(experiment, r, obj, rep) for r in experiment.r_list for obj in experiment.objectives for rep in range(experiment.repetitions)]
    runs = _map(_run_cell, jobs, args.jobs)
    out = Path(experiment.out_dir)
    _write(out, "benchmark_runs.csv", _csv_text(RUN_COLUMNS, [[row[c] for c in RUN_COLUMNS] for row in runs]))
    summary, md, failed = benchmark_tables(experiment, runs)
    _write(out, "benchmark_summary.csv", _csv_text(SUMMARY_COLUMNS, summary))
    _write(out, "benchmark_summary.md", md)
    if args.gnuplot:
        lines = ["# r objective mean_acc std_acc"]
        lines += [f"{row[1]!r} {row[2]} {row[3]!r} {row[4]!r}" for row in summary]
        _write(out, "benchmark_summary.dat", "\n".join(lines) + "\n")
    sys.stdout.write(md)
    if failed:
        log.error("every repetition diverged for cells %s", failed)
        return EXIT_RUN_FAILURE
    return EXIT_OK


ELICITATION_COLUMNS = ["mu_p", "eta", "region", "closed_form_argmax", "grid_argmax", "J", "grid_max_I", "gap",
                       "J_threshold_branch", "passed"]


def cmd_verify_elicitation(args) -> int:
    if not 0 < args.grid_step <= 0.01:
        raise UsageError("grid_step must lie in (0, 0.01]")
    J = None
    if args.corrupt_j:
        # negative control: sign of mu_p flipped inside the envelope
        J = lambda e, m: elicitation.max_reward_J(e, -m, branch="stationary") if m else -1.0
    rows = elicitation.certify_support(args.mu, args.eta_step, args.grid_step, J=J)
    table = [[r.mu_p, r.eta, "certified" if r.certified else "reported", r.closed_form_argmax, r.grid_argmax, r.J,
              r.grid_max_I, r.gap, r.J_threshold, int(r.passed)] for r in rows]
    _write(Path(args.out_dir or "out"), "elicitation_report.csv", _csv_text(ELICITATION_COLUMNS, table))
    bad = [r for r in rows if not r.passed]
    n_cert = sum(r.certified for r in rows)
    print(f"certified rows: {n_cert}, failures: {len(bad)}")
    if bad:
        for r in bad:
            print(f"FAIL mu_p={r.mu_p} eta={r.eta} grid_max={r.grid_max_I!r} J={r.J!r} "
                  f"grid_argmax={r.grid_argmax} expected={r.eta * (1 + r.mu_p)!r}", file=sys.stderr)
        return EXIT_VERIFY_FAILURE
    return EXIT_OK


SWEEP_LONG_COLUMNS = ["dataset", "r", "repetition", "delta", "mu", "acc", "status"]


def cmd_sweep_robustness(args) -> int:
    experiment = build_experiment(args)
    if not experiment.deltas:
        raise UsageError("no deltas")
    experiment.load()
    results = _map(_run_sweep, [(experiment, r, rep) for r in experiment.r_list for rep in range(experiment.repetitions)], args.jobs)
    long_rows, by_r = [], {}
    for r, rep, rows in results:
        for row in rows:
            long_rows.append([experiment.name, r, rep, row.delta, row.mu, row.accuracy, row.status])
        by_r.setdefault(r, []).append(rows)
    wide = {}
    for r, reps in by_r.items():
        merged = []
        for i, row in enumerate(reps[0]):
            accs = [rows[i].accuracy for rows in reps]
            acc = None if any(a is None for a in accs) else summarize(accs)[0]
            merged.append(SweepRow(row.delta, row.mu, acc, row.status))
        wide[(experiment.name, r)] = merged
    out = Path(experiment.out_dir)
    _write(out, "robustness.csv", sweep_table_csv(wide, list(experiment.deltas)))
    _write(out, "robustness_long.csv", _csv_text(SWEEP_LONG_COLUMNS, long_rows))
    if args.gnuplot:
        lines = ["# r delta acc"] + [f"{row[1]!r} {row[3]!r} {row[5]!r}" for row in long_rows if row[5] is not None]
        _write(out, "robustness.dat", "\n".join(lines) + "\n")
    print(sweep_table_csv(wide, list(experiment.deltas)), end="")
    if any(row[6] == "diverged" for row in long_rows):
        return EXIT_RUN_FAILURE
    return EXIT_OK


def cmd_gen_data(args) -> int:
    experiment = build_experiment(args)
    if experiment.source != "gaussians":
        raise UsageError("gen-data only generates the Gaussian dataset")
    train, test = experiment.load()
    out = Path(experiment.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_delimited(train, out / "train.csv")
    save_delimited(test, out / "test.csv")
    print(f"wrote {len(train)} train and {len(test)} test rows to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    experiment = build_experiment(args)
    train, test = experiment.load()
    split = make_pu_split(train, experiment.r_list[0], experiment.base.seed)
    _, report = train_model(experiment.base, split, test)
    out = Path(experiment.out_dir)
    _write(out, "train_report.csv", report.to_csv())
    out.mkdir(parents=True, exist_ok=True)
    save_params(report.params, out / "params.bin")
    print(f"status={report.status} test_acc={report.final_accuracy:.4f} mean_eta_u={report.final_mean_eta_u:.4f}")
    return EXIT_OK if report.status == "ok" else EXIT_RUN_FAILURE


EVAL_COLUMNS = ["test_acc", "train_acc_true_labels", "mean_eta_overall", "mean_eta_p", "mean_eta_u",
                "target_observed", "target_true", "drift", "closer_to", "false_negative_rate", "false_positive_rate"]


def cmd_eval(args) -> int:
    experiment = build_experiment(args)
    if not args.params:
        raise UsageError("eval needs --params")
    if not Path(args.params).exists():
        raise FileNotFoundError(f"checkpoint not found: {args.params}")
    params = load_params(args.params)
    train, test = experiment.load()
    split = make_pu_split(train, experiment.r_list[0], experiment.base.seed)
    rep = drift_report(params, split)
    row = [accuracy(params, test), rep.accuracy, rep.mean_eta_overall, rep.mean_eta_p, rep.mean_eta_u,
           rep.target_observed, rep.target_true, rep.drift, rep.closer_to, rep.false_negative_rate,
           rep.false_positive_rate]
    text = _csv_text(EVAL_COLUMNS, [row])
    _write(Path(experiment.out_dir), "eval.csv", text)
    print(text, end="")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global")
    g.add_argument("--seed", type=int, default=None, help="base seed (repetition i uses seed + i)")
    g.add_argument("--jobs", type=int, default=1, help="parallel runs")
    g.add_argument("--out-dir", default=None)
    g.add_argument("--config", default=None, help="INI file with [experiment] and [run] sections")
    g.add_argument("--gnuplot", action="store_true", help="also emit whitespace-separated .dat files")


def _dataset_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--name")
    g.add_argument("--source", choices=["gaussians", "file"])
    g.add_argument("--n-per-class", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--separation", type=float)
    g.add_argument("--data-seed", type=int)
    g.add_argument("--train-path")
    g.add_argument("--test-path")
    g.add_argument("--format", choices=["delimited", "idx"])
    g.add_argument("--positive-classes", type=int, nargs="+")
    g.add_argument("--r", dest="r_list", type=float, nargs="+")


def _run_args(p):
    g = p.add_argument_group("run")
    g.add_argument("--objective", choices=OBJECTIVES)
    g.add_argument("--objectives", nargs="+", choices=OBJECTIVES)
    g.add_argument("--mu-target-mode", choices=["eq10-omega", "within-u"])
    g.add_argument("--mu-override", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-p", type=int)
    g.add_argument("--batch-u", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--arch", type=str, help='e.g. "784,300,1"')
    g.add_argument("--activation", choices=["softsign", "tanh"])
    g.add_argument("--gamma", type=float)
    g.add_argument("--repetitions", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="collective-pu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write the synthetic Gaussian train/test CSVs")
    _common(p)
    _dataset_args(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("benchmark", help="repeated runs over r x objective with a mean ± std summary table")
    _common(p)
    _dataset_args(p)
    _run_args(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("verify-elicitation", help="grid-search check of the PU reward maximiser")
    _common(p)
    p.add_argument("--mu", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    p.add_argument("--grid-step", type=float, default=elicitation.GRID_STEP)
    p.add_argument("--eta-step", type=float, default=0.01)
    p.add_argument("--corrupt-j", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_elicitation)

    p = sub.add_parser("sweep-robustness", help="retrain cpu with a misspecified prior and tabulate accuracy per delta")
    _common(p)
    _dataset_args(p)
    _run_args(p)
    p.add_argument("--deltas", type=float, nargs="*")
    p.set_defaults(func=cmd_sweep_robustness)

    p = sub.add_parser("train", help="train one model and save its checkpoint")
    _common(p)
    _dataset_args(p)
    _run_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and posterior drift of a saved checkpoint")
    _common(p)
    _dataset_args(p)
    p.add_argument("--params", help="checkpoint written by `train`")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("PU_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"collective-pu: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ParseError) as exc:
        print(f"collective-pu: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
