"""Command-line entry point: ``plantsched <subcommand> ...``.

Exit codes: 0 success, 2 invalid input or missing file, 3 infeasible,
4 search budget exhausted. Every run writes ``run_manifest.json`` to its
output directory.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, _accel, plots
from .calendar import DEFAULT_CAPACITIES, EPOCH, date_of, day_of
from .errors import BudgetExceededError, CalendarRangeError, InfeasibleError, ShapeError, ValidationError
from .forecaster import TrainConfig, cross_validate, load_model, save_model, train
from .harvest import build_harvest_table
from .ingest import (
    CASE_PRESETS,
    SyntheticSpec,
    generate_synthetic_instance,
    parse_gdu_history,
    parse_populations,
    write_gdu_history,
    write_populations,
)
from .rio import ScenarioSet, fit_residual_model, generate_scenarios
from .scheduler import (
    HeuristicConfig,
    WindowLimit,
    evaluate_schedule,
    profile_from_days,
    solve_case1_exact,
    solve_case1_heuristic,
    solve_case2,
    sweep_harvest_windows,
)
from .scheduler.case2 import choose_engine
from .scheduler.exact import DEFAULT_MAX_NODES
from .scheduler.instance import admissible_days, compile_instance

log = logging.getLogger("plantsched")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 2, 3, 4
SCHEDULE_COLUMNS = ("population", "site", "plant_date", "expected_harvest_week")


# ---------------------------------------------------------------- helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects inputs and outputs of one invocation for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.extra: dict = {}

    def input(self, path) -> Path:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"input not found: {p}")
        if p.is_dir():
            for f in sorted(p.iterdir()):
                if f.is_file():
                    self.inputs[str(f)] = _sha256(f)
        else:
            self.inputs[str(p)] = _sha256(p)
        return p

    def path(self, name) -> Path:
        p = self.out / name
        self.outputs.append(name)
        return p

    def write_json(self, name, obj):
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def manifest(self):
        args = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        man = {
            "command": self.args.command,
            "arguments": args,
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": sorted(set(self.outputs)),
            "versions": {
                "plantsched": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
                "backend": _accel.backend(),
            },
        }
        man.update(self.extra)
        (self.out / "run_manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n",
                                                     encoding="utf-8")


def _column_map(text):
    """``"old=new,old2=new2"`` -> header renaming dict."""
    if not text:
        return None
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValidationError(f"bad --map entry {part!r}; expected OLD=NEW")
        a, b = part.split("=", 1)
        out[a.strip()] = b.strip()
    return out


def _history_for_site(path, site, column_map=None):
    series = parse_gdu_history(path, column_map)
    for s in series:
        if s.site == site:
            return s
    raise ValidationError(f"{path}: no history rows for site {site} (sites present: {[s.site for s in series]})")


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, rng_seed=args.seed, patience=args.patience)


def _parse_range(text):
    """``"a:b"`` -> range(a, b + 1); ``"a"`` -> range(a, a + 1)."""
    if text is None:
        return None
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            return range(int(a), int(b) + 1)
        return range(int(text), int(text) + 1)
    except ValueError:
        raise ValidationError(f"bad week range {text!r}; expected FIRST:LAST") from None


def _load_instance(run, args):
    try:
        epoch = dt.date.fromisoformat(args.epoch) if args.epoch else EPOCH
    except ValueError:
        raise ValidationError(f"bad --epoch {args.epoch!r}; expected YYYY-MM-DD") from None
    pops = parse_populations(run.input(args.populations), epoch=epoch, column_map=_column_map(args.map))
    pops = [p for p in pops if p.site == args.site]
    if not pops:
        raise ValidationError(f"{args.populations}: no populations at site {args.site}")
    scen = ScenarioSet.read(run.input(args.scenarios))
    table = build_harvest_table(pops, scen.scenarios, scen.probabilities)
    capacity = args.capacity if args.capacity is not None else DEFAULT_CAPACITIES.get(args.site)
    if capacity is None:
        raise ValidationError(f"no default capacity for site {args.site}; pass --capacity")
    return pops, scen, table, int(capacity)


def expected_weeks(table, days):
    out = []
    for i, d in enumerate(days):
        k = int(d) - int(table.days[i][0])
        w = table.weeks[i][k].astype(np.float64)
        out.append(float(table.probabilities @ w) if np.all(w >= 0) else float("nan"))
    return out


def write_schedule_csv(path, pops, table, days):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEDULE_COLUMNS)
        for p, d, ew in zip(pops, days, expected_weeks(table, days)):
            w.writerow([p.id, p.site, date_of(int(d)).isoformat(), f"{ew:.4f}"])


def read_schedule_csv(path, pops):
    by_id = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "population" not in reader.fieldnames or "plant_date" not in reader.fieldnames:
            raise ValidationError(f"{path}: schedule needs population and plant_date columns")
        for lineno, row in enumerate(reader, start=2):
            try:
                by_id[row["population"]] = day_of(dt.date.fromisoformat(row["plant_date"]))
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: bad plant_date {row['plant_date']!r}") from None
    missing = [p.id for p in pops if p.id not in by_id]
    if missing:
        raise ValidationError(f"{path}: no planting day for populations {missing[:5]}")
    return np.array([by_id[p.id] for p in pops], dtype=np.int64)


def random_baseline_days(table, seed):
    """Uniform-random admissible planting day per population."""
    rng = np.random.default_rng([seed, 7])
    days = []
    for i in range(table.n_populations):
        opts = admissible_days(table, i)
        if opts.size == 0:
            raise InfeasibleError(f"population {table.population_ids[i]!r} has no harvestable planting day")
        days.append(int(opts[rng.integers(len(opts))]))
    return np.array(days, dtype=np.int64)


def write_profile_csv(path, profile):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "week", "harvest"])
        for s in range(profile.n_scenarios):
            for k, v in enumerate(profile.loads[s]):
                w.writerow([s, profile.first_week + k, int(v)])


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    run = Run(args)
    overrides = dict(CASE_PRESETS[args.case])
    overrides.update(population_count=args.n, rng_seed=args.seed, site=args.site)
    spec = SyntheticSpec(**overrides)
    history, pops = generate_synthetic_instance(spec)
    with open(run.path("history.csv"), "w", newline="", encoding="utf-8") as fh:
        write_gdu_history([history], fh)
    with open(run.path("populations.csv"), "w", newline="", encoding="utf-8") as fh:
        write_populations(pops, fh)
    run.extra["synthetic_spec"] = spec.to_dict()
    run.manifest()
    print(f"wrote {len(pops)} populations and {len(history)} history days to {run.out}")


def cmd_forecast(args):
    run = Run(args)
    history = _history_for_site(run.input(args.history), args.site, _column_map(args.map))
    cfg = _train_config(args)
    run.extra["train_config"] = dataclasses.asdict(cfg)
    if args.action == "train":
        model = train(history, cfg)
        model_path = Path(args.model) if args.model else run.path("model.json")
        if args.model:
            run.outputs.append(str(model_path))
        save_model(model, model_path)
        print(f"model written to {model_path}")
    if args.action == "eval" or args.cv:
        report = cross_validate(history, cfg)
        run.write_json("cv_report.json", report.to_dict())
        print(
            f"cv rmse {report.rmse:.4f} rrmse {report.rrmse:.4f} r2 {report.r2:.4f} "
            f"(persistence rmse {report.baseline['rmse']:.4f})"
        )
    run.manifest()


def cmd_scenarios(args):
    run = Run(args)
    history = _history_for_site(run.input(args.history), args.site, _column_map(args.map))
    model = load_model(run.input(args.model))
    gp = fit_residual_model(model, history, seed=args.seed)
    scen = generate_scenarios(model, gp, history, count=args.count, rng_seed=args.seed, horizon=args.horizon,
                              threads=args.threads)
    scen.write(run.out)
    run.outputs += ["scenarios.csv", "scenarios.json"]
    run.write_json(
        "gp.json",
        {"hyper": gp.hyper.to_dict(), "jitter": gp.jitter, "n_train": gp.n,
         "log_marginal_likelihood": gp.log_marginal_likelihood},
    )
    plots.plot_scenarios(run.path("scenarios.svg"), scen, history)
    run.manifest()
    print(f"wrote {len(scen)} scenarios of {scen.horizon_days} days to {run.out}")


def _solve_case1(table, capacity, window, args, config):
    inst = compile_instance(table, capacity, window)
    engine = choose_engine(inst, args.engine)
    if engine == "exact":
        return solve_case1_exact(table, capacity, window, max_nodes=args.max_nodes)
    return solve_case1_heuristic(table, capacity, window, config=config)


def cmd_schedule(args):
    run = Run(args)
    pops, scen, table, capacity = _load_instance(run, args)
    config = HeuristicConfig(seed=args.seed, restarts=args.restarts)
    window = None
    if args.window:
        r = _parse_range(args.window)
        window = WindowLimit(r.start, r.stop - 1)
    report = {"mode": args.mode, "site": args.site}
    plot_capacity = capacity
    if args.mode == "case1":
        sched = _solve_case1(table, capacity, window, args, config)
    elif args.mode == "case2":
        z_star, sched = solve_case2(table, window=window, engine=args.engine, config=config,
                                    max_nodes=args.max_nodes)
        report["min_capacity"] = int(z_star)
        capacity = int(z_star)
        plot_capacity = z_star
    else:
        result = sweep_harvest_windows(
            table, capacity, first_weeks=_parse_range(args.first_weeks), last_weeks=_parse_range(args.last_weeks),
            engine=args.engine, config=config, max_nodes=args.max_nodes, threads=args.threads,
        )
        sched = result.schedule
        with open(run.path("sweep_grid.csv"), "w", newline="", encoding="utf-8") as fh:
            result.write_csv(fh)
        plots.plot_sweep_heatmap(run.path("sweep_heatmap.svg"), result)
        report["best_window"] = [result.best_window.first_week, result.best_window.last_week]

    report["engine"] = sched.engine
    report["optimal"] = evaluate_schedule(sched, table, capacity)
    baseline_profile = None
    if args.baseline:
        if args.baseline == "random":
            bdays = random_baseline_days(table, args.seed)
        else:
            bdays = read_schedule_csv(run.input(args.baseline), pops)
        baseline_profile = profile_from_days(table, bdays)
        report["original"] = evaluate_schedule(bdays, table, capacity)
        write_schedule_csv(run.path("baseline_schedule.csv"), pops, table, bdays)

    write_schedule_csv(run.path("schedule.csv"), pops, table, sched.days)
    write_profile_csv(run.path("profile.csv"), sched.profile)
    run.write_json("report.json", report)
    plots.plot_weekly_harvest(run.path("weekly_harvest.svg"), sched.profile, table.probabilities,
                              capacity=plot_capacity, baseline=baseline_profile,
                              title=f"Weekly harvest, site {args.site} ({args.mode})")
    run.manifest()
    opt = report["optimal"]
    print(
        f"{args.mode}: peak weekly harvest {opt['max_required_capacity']}, weeks "
        f"{opt['first_harvest_week']}..{opt['last_harvest_week']}, pairwise {opt['pairwise_objective']:.1f}"
    )


def cmd_evaluate(args):
    run = Run(args)
    pops, scen, table, capacity = _load_instance(run, args)
    days = read_schedule_csv(run.input(args.schedule), pops)
    report = evaluate_schedule(days, table, capacity)
    run.write_json("evaluation.json", report)
    plots.plot_weekly_harvest(run.path("evaluation.svg"), profile_from_days(table, days), table.probabilities,
                              capacity=capacity, title=f"Weekly harvest, site {args.site}")
    run.manifest()
    print(f"peak weekly harvest {report['max_required_capacity']}, feasible {report['feasible']}")


# ---------------------------------------------------------------- parser


def _common(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--out", default=d("."), help="output directory (default: current directory)")
    parser.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads (default 1)")
    parser.add_argument("--config", default=d(None), help="JSON file whose keys override command-line values")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plantsched", description="Planting-day scheduling with GDU forecasts.")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic history and population set")
    _common(p, suppress=True)
    p.add_argument("--case", type=int, choices=(1, 2), default=1, help="quantity preset (1: N(250,100), 2: N(350,150))")
    p.add_argument("--n", type=int, default=500, help="number of populations")
    p.add_argument("--site", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forecast", help="train the forecaster and/or cross-validate it")
    _common(p, suppress=True)
    p.add_argument("action", nargs="?", choices=("train", "eval"), default="train")
    p.add_argument("--history", required=True)
    p.add_argument("--map", default=None, help="rename history CSV headers, e.g. 'day=date,value=gdu'")
    p.add_argument("--site", type=int, default=0)
    p.add_argument("--model", default=None, help="model output path (default OUT/model.json)")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--cv", dest="cv", action="store_true", default=True, help="also run 5-fold CV (default)")
    p.add_argument("--no-cv", dest="cv", action="store_false", help="skip cross-validation when training")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("scenarios", help="generate GDU scenarios")
    _common(p, suppress=True)
    p.add_argument("action", choices=("generate",))
    p.add_argument("--model", required=True)
    p.add_argument("--history", required=True)
    p.add_argument("--map", default=None, help="rename history CSV headers, e.g. 'day=date,value=gdu'")
    p.add_argument("--site", type=int, default=0)
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--horizon", type=int, default=730)
    p.set_defaults(func=cmd_scenarios)

    for name, func, help_ in (
        ("schedule", cmd_schedule, "optimise planting days"),
        ("evaluate", cmd_evaluate, "evaluate an existing schedule"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        p.add_argument("--populations", required=True)
        p.add_argument("--scenarios", required=True, help="directory holding scenarios.csv and scenarios.json")
        p.add_argument("--site", type=int, default=0)
        p.add_argument("--capacity", type=int, default=None, help="weekly capacity (default: site preset)")
        p.add_argument("--epoch", default=None, help="date of integer planting index 1 (default 2020-01-01)")
        p.add_argument("--map", default=None, help="rename population CSV headers, e.g. 'name=id,qty=quantity'")
        if name == "schedule":
            p.add_argument("--mode", choices=("case1", "case2", "sweep"), default="case1")
            p.add_argument("--engine", choices=("auto", "exact", "heuristic"), default="auto")
            p.add_argument("--window", default=None, help="allowed harvest weeks FIRST:LAST")
            p.add_argument("--first-weeks", default=None, help="sweep range FIRST:LAST of first weeks")
            p.add_argument("--last-weeks", default=None, help="sweep range FIRST:LAST of last weeks")
            p.add_argument("--baseline", default=None, help="schedule CSV to compare against, or 'random'")
            p.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES)
            p.add_argument("--restarts", type=int, default=HeuristicConfig.restarts)
        else:
            p.add_argument("--schedule", required=True)
        p.set_defaults(func=func)
    return parser


def _apply_config(args, parser):
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top level must be an object")
    known = set(vars(args))
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("func", "command", "config"):
            raise ValidationError(f"{path}: unknown setting {key!r}")
        setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _apply_config(args, parser)
        _accel.set_threads(args.threads)
        args.func(args)
    except (ValidationError, CalendarRangeError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        for s, w, load in exc.binding_weeks[:10]:
            print(f"  scenario {s} week {w}: {load}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceededError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
