"""Command-line interface.

Subcommands: ingest, synth, train, schedule, evaluate, tradeoff, plot,
paired. Every command is deterministic given its inputs, flags, and seed.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import date

from fairsched import DataError, FairschedError, NumericError, SchemaError
from fairsched.evaluate import (
    Policy,
    pareto_frontier,
    point_from_run,
    run_policy,
    standard_policies,
    sweep_parameters,
    tradeoff_points,
    write_report,
    write_results,
    write_tradeoff,
    load_tradeoff,
)
from fairsched.fair import (
    BINARY_FAIR_GRID,
    ZAFAR_GRID,
    binary_cluster_protected,
    cluster_protected,
    covariance_decision_protected,
    save_ensemble,
    train_binary_fair,
    train_no_sanitarian,
    train_proportional_ensemble,
    train_zafar,
)
from fairsched.ingest import (
    CLUSTERS,
    Dataset,
    SCHEMA_PRESETS,
    complete_feature_rows,
    load_demographics,
    load_region_table,
    map_regions,
    parse_inspections,
    split_windows,
    write_canonical,
    write_demographics,
    write_region_table,
)
from fairsched.logistic import TrainConfig, load_model, save_model, score_rows, train_logistic
from fairsched.metrics import (
    cross_cluster_subset,
    paired_matrix,
    violation_rate_by_cluster,
)
from fairsched.scheduling import (
    default_schedule,
    global_reorder,
    in_cluster_reorder,
    sanitarian_blind_scores,
    write_schedule,
)
from fairsched.svg import (
    render_group_bars,
    render_paired_heatmap,
    render_scatter_coords,
    render_tradeoff,
)
from fairsched.synth import DEFAULT_RATES, SynthConfig, generate

logger = logging.getLogger(__name__)

USAGE_EXIT, DATA_EXIT, NUMERIC_EXIT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this toolkit reserves 2 for data
    # errors, so route usage problems to exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--window-days", type=int, default=60, help="evaluation window length")
    return common


def _train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--l2", type=float, default=1e-4, help="L2 penalty weight")
    parser.add_argument("--max-iter", type=int, default=1000, help="optimizer iteration cap")
    parser.add_argument("--tol", type=float, default=1e-7, help="gradient convergence tolerance")
    parser.add_argument("--c", type=float, default=0.001, help="covariance threshold (zafar)")
    parser.add_argument("--C", type=float, default=0.5, help="fairness penalty strength (binary-fair)")
    parser.add_argument("--objective", choices=("DP", "EOpp"), default="DP",
                        help="fairness objective (binary-fair)")
    parser.add_argument("--rounds", type=int, default=10, help="ensemble rounds (proportional)")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        max_iterations=args.max_iter,
        convergence_tolerance=args.tol,
        l2_weight=args.l2,
        seed=args.seed,
    )


def _open_read(path: str):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _out_path(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _load_dataset(args) -> Dataset:
    with _open_read(args.data) as stream:
        result = parse_inspections(stream)
    if not result.records:
        raise DataError(f"no usable records in {args.data}")
    if result.errors:
        logger.warning("%d rows rejected while reading %s", len(result.errors), args.data)
    dataset = Dataset(records=result.records, feature_rows=complete_feature_rows(result))
    if getattr(args, "region_table", None):
        with _open_read(args.region_table) as stream:
            table = load_region_table(stream)
        dataset.regions = map_regions(result.records, table)
    if getattr(args, "demographics", None):
        with _open_read(args.demographics) as stream:
            dataset.demographics = load_demographics(stream)
    return dataset


def _data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="canonical inspection file")
    parser.add_argument("--region-table", help="zip-to-region table file")
    parser.add_argument("--demographics", help="per-inspection demographic composition file")


def _parse_policy_names(text: str) -> list[Policy]:
    known = {p.name: p for p in standard_policies()}
    names = [n.strip() for n in text.split(",") if n.strip()]
    if not names:
        raise ValueError("policy list is empty")
    unknown = [n for n in names if n not in known]
    if unknown:
        raise ValueError(f"unknown policies {unknown}; choose from {sorted(known)}")
    return [known[n] for n in names]


def _apply_knobs(policies: list[Policy], args) -> list[Policy]:
    out = []
    for p in policies:
        knobs = dict(p.knobs)
        if p.trainer == "zafar":
            knobs["c"] = args.c
        elif p.trainer == "binary-fair":
            knobs["C"] = args.C
            knobs["objective"] = args.objective
        elif p.trainer == "proportional-ensemble":
            knobs["rounds"] = args.rounds
        out.append(Policy(p.name, trainer=p.trainer, scheduler=p.scheduler, knobs=knobs))
    return out


def cmd_ingest(args) -> int:
    with _open_read(args.input) as stream:
        result = parse_inspections(stream, SCHEMA_PRESETS[args.schema])
    for row_number, message in result.errors[:10]:
        print(f"row {row_number}: {message}", file=sys.stderr)
    if len(result.errors) > 10:
        print(f"... and {len(result.errors) - 10} more rejected rows", file=sys.stderr)
    if not result.records:
        raise DataError(f"no usable records in {args.input}")
    feature_rows = complete_feature_rows(result, default_gap_days=args.history_gap)
    output = args.output or _out_path(args, "canonical.csv")
    with open(output, "w", encoding="utf-8", newline="") as sink:
        written = write_canonical(result.records, feature_rows, sink)
    print(f"wrote {written} records to {output} ({len(result.errors)} rows rejected)")
    return 0


def _parse_rates(text: str) -> dict[str, float]:
    rates = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        rates[name.strip()] = float(value)
    if set(rates) != set(CLUSTERS):
        raise ValueError(f"--rates must set exactly the six clusters {CLUSTERS}")
    return rates


def cmd_synth(args) -> int:
    config = SynthConfig(
        seed=args.seed,
        days=args.days,
        per_cluster_per_day=args.per_cluster_per_day,
        cluster_rates=_parse_rates(args.rates) if args.rates else dict(DEFAULT_RATES),
        label_mode=args.label_mode,
        feature_mode=args.feature_mode,
    )
    result = generate(config)
    dataset = result.dataset
    data_path = _out_path(args, "inspections.csv")
    with open(data_path, "w", encoding="utf-8", newline="") as sink:
        written = write_canonical(dataset.records, dataset.feature_rows, sink)
    with open(_out_path(args, "regions.csv"), "w", encoding="utf-8", newline="") as sink:
        write_region_table(result.region_table, sink)
    with open(_out_path(args, "demographics.csv"), "w", encoding="utf-8", newline="") as sink:
        write_demographics(dataset.demographics, sink)
    print(f"wrote {written} synthetic inspections to {data_path}")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    records = dataset.records
    if args.train_before:
        cutoff = date.fromisoformat(args.train_before)
        records = [r for r in records if r.date < cutoff]
        if not records:
            raise DataError(f"no records dated before {cutoff}")
    rows = [dataset.feature_rows[r.inspection_id] for r in records]
    labels = [r.critical_found for r in records]
    config = _train_config(args)

    if args.trainer == "proportional-ensemble":
        ensemble = train_proportional_ensemble(
            rows, labels, [r.cluster for r in records], args.rounds, config
        )
        output = args.output or _out_path(args, "model-proportional-ensemble.txt")
        with open(output, "w", encoding="utf-8", newline="") as sink:
            save_ensemble(ensemble, sink)
        print(f"wrote {len(ensemble.members)}-member ensemble to {output}")
        return 0

    if args.trainer == "baseline":
        model = train_logistic(rows, labels, config)
    elif args.trainer == "no-sanitarian":
        model = train_no_sanitarian(rows, labels, config)
    elif args.trainer == "zafar":
        model = train_zafar(rows, labels, cluster_protected(records), args.c, config)
    else:
        model = train_binary_fair(
            rows, labels, binary_cluster_protected(records), args.objective, args.C, config
        )
    output = args.output or _out_path(args, f"model-{args.trainer}.txt")
    with open(output, "w", encoding="utf-8", newline="") as sink:
        save_model(model, sink)
    print(f"wrote model to {output}")
    if args.trainer == "zafar":
        covariances = covariance_decision_protected(model, rows, cluster_protected(records))
        print("decision-value covariance per cluster:")
        for cluster, value in sorted(covariances.items()):
            print(f"  {cluster}\t{value:+.6f}")
    return 0


def cmd_schedule(args) -> int:
    dataset = _load_dataset(args)
    windows = split_windows(dataset.records, args.window_days)
    matching = [w for w in windows if w.index == args.window]
    if not matching:
        raise DataError(f"window {args.window} does not exist (have 0..{len(windows) - 1})")
    window = matching[0]
    records_by_id = dataset.records_by_id()
    labels = {r.inspection_id: r.critical_found for r in dataset.records}

    if args.policy == "default":
        schedule = default_schedule(window, records_by_id)
        scores = {i: 0.0 for i in window.test_ids}
    else:
        if not args.model:
            raise ValueError(f"policy {args.policy} needs --model")
        with _open_read(args.model) as stream:
            model = load_model(stream)
        test_rows = [dataset.feature_rows[i] for i in window.test_ids]
        if args.policy == "sanitarian-blind":
            scores = sanitarian_blind_scores(model, test_rows)
        else:
            scores = score_rows(model, test_rows)
        if args.policy == "in-cluster":
            schedule = in_cluster_reorder(scores, window, records_by_id)
        else:
            schedule = global_reorder(scores, window, records_by_id)

    output = args.output or _out_path(args, f"schedule-{args.policy}-w{args.window}.csv")
    with open(output, "w", encoding="utf-8", newline="") as sink:
        write_schedule(schedule, scores, labels, sink)
    print(f"wrote {len(schedule.entries)} scheduled inspections to {output}")
    return 0


def cmd_evaluate(args) -> int:
    dataset = _load_dataset(args)
    windows = split_windows(dataset.records, args.window_days)
    policies = _apply_knobs(_parse_policy_names(args.policies), args)
    config = _train_config(args)
    runs = [run_policy(policy, windows, dataset, config) for policy in policies]
    usable = [run for run in runs if run.folds]
    if not usable:
        raise DataError("no policy completed any fold")
    results_path = _out_path(args, "results.csv")
    with open(results_path, "w", encoding="utf-8", newline="") as sink:
        write_results(runs, sink)
    report_path = _out_path(args, "report.csv")
    with open(report_path, "w", encoding="utf-8", newline="") as sink:
        write_report(runs, sink)
    for run in runs:
        status = f"{len(run.folds)} folds"
        if run.failures:
            status += f", {len(run.failures)} failed"
        if run.skipped:
            status += f", {len(run.skipped)} skipped windows"
        print(f"{run.policy.name}: {status}")
    print(f"wrote {results_path} and {report_path}")
    return 0


def cmd_tradeoff(args) -> int:
    dataset = _load_dataset(args)
    windows = split_windows(dataset.records, args.window_days)
    config = _train_config(args)
    policies = _apply_knobs(_parse_policy_names(args.policies), args)
    points, _ = tradeoff_points(policies, windows, dataset, args.grouping, args.mode, config)
    for family, grid_text in args.sweep or []:
        grid = [float(v) if family != "proportional-ensemble" else int(v) for v in grid_text.split(",")]
        swept, _ = sweep_parameters(family, grid, windows, dataset, args.grouping, args.mode, config)
        points.extend(swept)
    if not points:
        raise DataError("no trade-off points computed")
    frontier = pareto_frontier(points)
    output = args.output or _out_path(args, "tradeoff.csv")
    with open(output, "w", encoding="utf-8", newline="") as sink:
        write_tradeoff(points, frontier, sink)
    print(f"wrote {len(points)} points ({len(frontier)} on the frontier) to {output}")
    return 0


def _sweep_argument(text: str) -> tuple[str, str]:
    family, _, grid = text.partition("=")
    if family not in ("zafar", "binary-fair", "proportional-ensemble") or not grid:
        raise argparse.ArgumentTypeError(
            "expected FAMILY=v1,v2,... with FAMILY in zafar|binary-fair|proportional-ensemble"
        )
    return family, grid


def cmd_paired(args) -> int:
    dataset = _load_dataset(args)
    matrix = paired_matrix(dataset.records)
    rates = violation_rate_by_cluster(dataset.records)
    order = tuple(r.cluster for r in rates)

    matrix_path = args.output or _out_path(args, "paired_matrix.csv")
    with open(matrix_path, "w", encoding="utf-8", newline="") as sink:
        sink.write("earlier,later,value,count\n")
        for earlier in order:
            for later in order:
                value = matrix.values.get((earlier, later))
                sink.write(
                    f"{earlier},{later},"
                    f"{'' if value is None else format(value, '.17g')},"
                    f"{matrix.counts.get((earlier, later), 0)}\n"
                )
    subset = cross_cluster_subset(dataset.records)
    print(f"wrote paired matrix to {matrix_path}")
    print("cluster rates, all inspections vs cross-cluster subset:")
    subset_rates = {r.cluster: r for r in violation_rate_by_cluster(subset)} if subset else {}
    for rate in rates:
        sub = subset_rates.get(rate.cluster)
        sub_text = f"{sub.rate * 100:.2f}% (n={sub.count})" if sub else "-"
        print(f"  {rate.cluster}\t{rate.rate * 100:.2f}% (n={rate.count})\t{sub_text}")
    return 0


def cmd_plot(args) -> int:
    if args.kind == "group-bars":
        rows = []
        with _open_read(args.input) as stream:
            import csv as _csv

            for row in _csv.DictReader(stream):
                if (
                    row.get("policy") == args.policy
                    and row.get("grouping") == args.grouping
                    and row.get("mode") == args.mode
                ):
                    rows.append(
                        (row["group"], float(row["delta_days"]), float(row["delta_se"]), int(row["total_count"]))
                    )
        if not rows:
            raise DataError(
                f"no rows for policy={args.policy} grouping={args.grouping} mode={args.mode} in {args.input}"
            )
        content = render_group_bars(
            rows, f"{args.policy}: per-{args.grouping} detection-time delta ({args.mode})"
        )
    elif args.kind == "tradeoff":
        with _open_read(args.input) as stream:
            points, frontier_names = load_tradeoff(stream)
        content = render_tradeoff(
            [(p.name, p.x, p.y, p.x_se, p.y_se) for p in points],
            frontier_names,
            f"efficiency vs unfairness ({args.grouping}, {args.mode})",
        )
    elif args.kind == "paired-heatmap":
        with _open_read(args.input) as stream:
            result = parse_inspections(stream)
        if not result.records:
            raise DataError(f"no usable records in {args.input}")
        matrix = paired_matrix(result.records)
        order = tuple(r.cluster for r in violation_rate_by_cluster(result.records))
        content = render_paired_heatmap(
            order, matrix.values, matrix.counts, "consecutive-pair disagreement by cluster"
        )
    else:
        with _open_read(args.input) as stream:
            result = parse_inspections(stream)
        points = [
            (r.latitude, r.longitude, r.cluster)
            for r in result.records
            if r.latitude is not None and r.longitude is not None
        ]
        if not points:
            raise DataError(f"no records with coordinates in {args.input}")
        content = render_scatter_coords(points, "inspections by location and cluster")

    output = args.output or _out_path(args, f"{args.kind}.svg")
    with open(output, "w", encoding="utf-8", newline="") as sink:
        sink.write(content)
    print(f"wrote {output}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fairsched", description=__doc__)
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="parse an extract into the canonical layout")
    p.add_argument("--input", required=True, help="delimited inspection extract")
    p.add_argument("--schema", choices=sorted(SCHEMA_PRESETS), default="canonical")
    p.add_argument("--history-gap", type=float, default=730.0,
                   help="timeSinceLast for first-ever inspections, in days")
    p.add_argument("--output", help="canonical file path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--days", type=int, default=300)
    p.add_argument("--per-cluster-per-day", type=int, default=2)
    p.add_argument("--label-mode", choices=("bernoulli", "stratified"), default="bernoulli")
    p.add_argument("--feature-mode", choices=("rich", "cluster-only"), default="rich")
    p.add_argument("--rates", help="per-cluster rates, e.g. Purple=0.4,Blue=0.25,...")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a risk model and save it")
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--trainer", required=True,
                   choices=("baseline", "no-sanitarian", "zafar", "binary-fair", "proportional-ensemble"))
    p.add_argument("--train-before", help="use only records dated before this ISO date")
    p.add_argument("--output", help="model file path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("schedule", parents=[common], help="build one window's schedule")
    _data_flags(p)
    p.add_argument("--policy", required=True,
                   choices=("default", "global-reorder", "sanitarian-blind", "in-cluster"))
    p.add_argument("--model", help="model file (policies other than default)")
    p.add_argument("--window", type=int, required=True, help="window index")
    p.add_argument("--output", help="schedule file path")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("evaluate", parents=[common], help="cross-validated policy evaluation")
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--policies", default=",".join(pol.name for pol in standard_policies()),
                   help="comma-separated policy names")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tradeoff", parents=[common], help="efficiency-fairness trade-off table")
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--policies", default="default,schenk,no-sanitarian,sanitarian-blind,in-cluster")
    p.add_argument("--grouping", choices=("cluster", "region"), default="cluster")
    p.add_argument("--mode", choices=("DP", "EOpp"), default="EOpp")
    p.add_argument("--sweep", action="append", type=_sweep_argument, metavar="FAMILY=V1,V2,...",
                   help=f"knob sweep, e.g. zafar={','.join(str(v) for v in ZAFAR_GRID[2:])} "
                        f"or binary-fair={','.join(str(v) for v in BINARY_FAIR_GRID[:3])}")
    p.add_argument("--output", help="trade-off file path")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("plot", parents=[common], help="render a chart from a results file")
    p.add_argument("--kind", required=True,
                   choices=("group-bars", "tradeoff", "paired-heatmap", "scatter-coords"))
    p.add_argument("--input", required=True, help="input file (report, tradeoff, or canonical data)")
    p.add_argument("--policy", default="schenk", help="policy filter (group-bars)")
    p.add_argument("--grouping", choices=("cluster", "region"), default="cluster")
    p.add_argument("--mode", choices=("DP", "EOpp"), default="EOpp")
    p.add_argument("--output", help="SVG file path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("paired", parents=[common], help="consecutive-pair disagreement analysis")
    _data_flags(p)
    p.add_argument("--output", help="matrix file path")
    p.set_defaults(func=cmd_paired)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
