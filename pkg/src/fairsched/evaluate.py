"""Cross-validated policy evaluation and the efficiency-fairness trade-off.

A policy pairs a trainer with a scheduling rule. Evaluation walks the
dataset's consecutive windows: each complete window with any prior data
becomes one fold, trained on every inspection dated strictly before the
window start (a growing training set, so no fold ever sees its own test
rows). Fold metrics are aggregated as mean and standard error; failed
folds are excluded and counted, never imputed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

from fairsched import DataError, FairschedError
from fairsched.fair import (
    binary_cluster_protected,
    cluster_protected,
    ensemble_score_rows,
    train_binary_fair,
    train_no_sanitarian,
    train_proportional_ensemble,
    train_zafar,
)
from fairsched.ingest import Dataset, EvaluationWindow
from fairsched.logistic import TrainConfig, score_rows, train_logistic
from fairsched.metrics import (
    GroupDelta,
    MODES,
    detection_times,
    efficiency_mu,
    group_mean_deltas,
    unfairness_d,
)
from fairsched.scheduling import (
    default_schedule,
    global_reorder,
    in_cluster_reorder,
    sanitarian_blind_scores,
)

logger = logging.getLogger(__name__)

TRAINERS = ("baseline", "no-sanitarian", "zafar", "binary-fair", "proportional-ensemble")
SCHEDULERS = ("default", "global-reorder", "sanitarian-blind", "in-cluster")

# Default knob values when a policy does not spell them out.
DEFAULT_KNOBS = {"c": 0.001, "C": 0.5, "objective": "DP", "rounds": 10}


@dataclass(frozen=True)
class Policy:
    """A (trainer, scheduler) pairing with its knob settings."""

    name: str
    trainer: str = "baseline"
    scheduler: str = "global-reorder"
    knobs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trainer not in TRAINERS:
            raise ValueError(f"unknown trainer {self.trainer!r}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.scheduler == "sanitarian-blind" and self.trainer == "no-sanitarian":
            raise ValueError(
                "sanitarian-blind scoring needs a model trained with cluster features"
            )

    def knob(self, key: str):
        return self.knobs.get(key, DEFAULT_KNOBS[key])

    def knob_label(self) -> str:
        if self.trainer == "zafar":
            return f"c={self.knob('c')}"
        if self.trainer == "binary-fair":
            return f"C={self.knob('C')},objective={self.knob('objective')}"
        if self.trainer == "proportional-ensemble":
            return f"rounds={self.knob('rounds')}"
        return ""


def standard_policies() -> list[Policy]:
    """The named policies every report compares: the actual schedule, the
    score-reordered variants, and the four fairness-aware trainers."""
    return [
        Policy("default", trainer="baseline", scheduler="default"),
        Policy("schenk", trainer="baseline", scheduler="global-reorder"),
        Policy("no-sanitarian", trainer="no-sanitarian", scheduler="global-reorder"),
        Policy("sanitarian-blind", trainer="baseline", scheduler="sanitarian-blind"),
        Policy("in-cluster", trainer="baseline", scheduler="in-cluster"),
        Policy("zafar", trainer="zafar", scheduler="global-reorder"),
        Policy("binary-fair", trainer="binary-fair", scheduler="global-reorder"),
        Policy("proportional", trainer="proportional-ensemble", scheduler="global-reorder"),
    ]


@dataclass(frozen=True)
class FoldResult:
    window_index: int
    mu: float
    d: dict[tuple[str, str], float]
    deltas: dict[tuple[str, str], list[GroupDelta]]


@dataclass
class PolicyRun:
    policy: Policy
    folds: list[FoldResult]
    failures: list[tuple[int, str]] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class AggregateStat:
    mean: float
    se: float
    count: int


@dataclass(frozen=True)
class TradeoffPoint:
    name: str
    x: float
    y: float
    x_se: float
    y_se: float


def aggregate(values) -> AggregateStat:
    """Mean and standard error (sample stdev / sqrt(k)); a single fold gets
    se 0, visible through count."""
    values = [float(v) for v in values]
    if not values:
        raise DataError("nothing to aggregate")
    k = len(values)
    mean = sum(values) / k
    if k == 1:
        return AggregateStat(mean=mean, se=0.0, count=1)
    variance = sum((v - mean) ** 2 for v in values) / (k - 1)
    return AggregateStat(mean=mean, se=math.sqrt(variance) / math.sqrt(k), count=k)


def _train_scores(
    policy: Policy, window: EvaluationWindow, dataset: Dataset, config: TrainConfig
) -> dict[str, float]:
    feature_rows = dataset.feature_rows
    missing_train = [i for i in window.train_ids if i not in feature_rows]
    if missing_train:
        raise DataError(f"{len(missing_train)} training inspections lack feature rows")
    missing_test = [i for i in window.test_ids if i not in feature_rows]
    if missing_test:
        raise DataError(f"{len(missing_test)} test inspections lack feature rows")

    records_by_id = dataset.records_by_id()
    train_rows = [feature_rows[i] for i in window.train_ids]
    train_records = [records_by_id[i] for i in window.train_ids]
    labels = [records_by_id[i].critical_found for i in window.train_ids]
    test_rows = [feature_rows[i] for i in window.test_ids]

    if policy.trainer == "baseline":
        model = train_logistic(train_rows, labels, config)
    elif policy.trainer == "no-sanitarian":
        model = train_no_sanitarian(train_rows, labels, config)
    elif policy.trainer == "zafar":
        protected = cluster_protected(train_records)
        model = train_zafar(train_rows, labels, protected, float(policy.knob("c")), config)
    elif policy.trainer == "binary-fair":
        protected = binary_cluster_protected(train_records)
        model = train_binary_fair(
            train_rows, labels, protected, str(policy.knob("objective")), float(policy.knob("C")), config
        )
    else:
        groups = [r.cluster for r in train_records]
        ensemble = train_proportional_ensemble(
            train_rows, labels, groups, int(policy.knob("rounds")), config
        )
        return ensemble_score_rows(ensemble, test_rows)

    if policy.scheduler == "sanitarian-blind":
        return sanitarian_blind_scores(model, test_rows)
    return score_rows(model, test_rows)


def run_policy(
    policy: Policy,
    windows: list[EvaluationWindow],
    dataset: Dataset,
    config: TrainConfig | None = None,
) -> PolicyRun:
    """Evaluate one policy across all usable windows.

    Incomplete windows and windows with no prior training data are skipped
    for every policy alike, so runs stay comparable fold by fold. A trainer
    or metric failure marks just that fold failed and the run continues.
    """
    config = config or TrainConfig()
    records_by_id = dataset.records_by_id()
    labels = {r.inspection_id: r.critical_found for r in dataset.records}
    groupings = ["cluster"] + (["region"] if dataset.regions else [])

    run = PolicyRun(policy=policy, folds=[])
    for window in windows:
        if not window.complete or not window.train_ids:
            run.skipped.append(window.index)
            continue
        window_days = (window.end_date - window.start_date).days + 1
        try:
            if policy.scheduler == "default":
                schedule = default_schedule(window, records_by_id)
            else:
                scores = _train_scores(policy, window, dataset, config)
                if policy.scheduler == "in-cluster":
                    schedule = in_cluster_reorder(scores, window, records_by_id)
                else:
                    schedule = global_reorder(scores, window, records_by_id)
            outcomes = detection_times(
                schedule,
                labels,
                window_days=window_days,
                regions=dataset.regions or None,
                demographics=dataset.demographics or None,
            )
            d = {}
            deltas = {}
            for grouping in groupings:
                for mode in MODES:
                    deltas[(grouping, mode)] = group_mean_deltas(outcomes, grouping, mode)
                    d[(grouping, mode)] = unfairness_d(outcomes, grouping, mode)
            run.folds.append(
                FoldResult(window_index=window.index, mu=efficiency_mu(outcomes), d=d, deltas=deltas)
            )
        except (FairschedError, ValueError) as exc:
            run.failures.append((window.index, str(exc)))
    if run.failures:
        logger.warning(
            "policy %s: %d of %d folds failed", policy.name, len(run.failures),
            len(run.failures) + len(run.folds),
        )
    return run


def point_from_run(run: PolicyRun, grouping: str, mode: str) -> TradeoffPoint:
    if not run.folds:
        raise DataError(f"policy {run.policy.name}: no completed folds")
    mu = aggregate([f.mu for f in run.folds])
    d = aggregate([f.d[(grouping, mode)] for f in run.folds])
    return TradeoffPoint(name=run.policy.name, x=d.mean, y=mu.mean, x_se=d.se, y_se=mu.se)


def tradeoff_points(
    policies: list[Policy],
    windows: list[EvaluationWindow],
    dataset: Dataset,
    grouping: str = "cluster",
    mode: str = "EOpp",
    config: TrainConfig | None = None,
) -> tuple[list[TradeoffPoint], list[PolicyRun]]:
    """One (d, mu) point per policy, evaluated on the same windows."""
    runs = [run_policy(policy, windows, dataset, config) for policy in policies]
    points = [point_from_run(run, grouping, mode) for run in runs if run.folds]
    for run in runs:
        if not run.folds:
            logger.warning("policy %s produced no completed folds; no point emitted", run.policy.name)
    return points, runs


def sweep_parameters(
    policy_family: str,
    grid,
    windows: list[EvaluationWindow],
    dataset: Dataset,
    grouping: str = "cluster",
    mode: str = "EOpp",
    config: TrainConfig | None = None,
) -> tuple[list[TradeoffPoint], list[PolicyRun]]:
    """Evaluate one policy family across its knob grid, in grid order.

    Values whose runs complete no folds are reported and skipped; the sweep
    continues.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid must be non-empty")
    policies = []
    for value in grid:
        if policy_family == "zafar":
            policies.append(Policy(f"zafar(c={value})", trainer="zafar", knobs={"c": value}))
        elif policy_family == "binary-fair":
            policies.append(Policy(f"binary-fair(C={value})", trainer="binary-fair", knobs={"C": value}))
        elif policy_family == "proportional-ensemble":
            policies.append(
                Policy(f"proportional(rounds={value})", trainer="proportional-ensemble", knobs={"rounds": value})
            )
        else:
            raise ValueError(f"unknown sweep family {policy_family!r}")
    return tradeoff_points(policies, windows, dataset, grouping, mode, config)


def _cross(o: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def pareto_frontier(points: list[TradeoffPoint]) -> list[TradeoffPoint]:
    """Points not dominated by any convex combination of the others, with
    both coordinates minimized.

    Computed as the lower-left convex hull walk: first drop points weakly
    dominated by a single other point, then keep the convex chain from the
    min-x point to the min-y point. Points equal to a kept point (or lying
    exactly on a kept edge) stay on the frontier, because equality in both
    coordinates is not domination.
    """
    if not points:
        return []
    survivors = [
        p
        for p in points
        if not any(
            q.x <= p.x and q.y <= p.y and (q.x < p.x or q.y < p.y) for q in points if q is not p
        )
    ]
    unique = sorted({(p.x, p.y) for p in survivors})
    chain: list[tuple[float, float]] = []
    for coords in unique:
        while len(chain) >= 2 and _cross(chain[-2], chain[-1], coords) < 0:
            chain.pop()
        chain.append(coords)
    kept = set(chain)
    frontier = [p for p in survivors if (p.x, p.y) in kept]
    frontier.sort(key=lambda p: (p.x, p.y, p.name))
    return frontier


RESULTS_COLUMNS = ("policy", "knob", "fold", "grouping", "mode", "mu", "d")
REPORT_COLUMNS = (
    "policy", "knob", "grouping", "group", "mode",
    "delta_days", "delta_se", "total_count", "folds", "folds_failed",
)
TRADEOFF_COLUMNS = ("policy", "d", "mu", "d_se", "mu_se", "frontier")


def write_results(runs: list[PolicyRun], sink) -> None:
    """Per-fold metric rows, deterministically ordered."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(RESULTS_COLUMNS)
    rows = []
    for run in runs:
        knob = run.policy.knob_label()
        for fold in run.folds:
            for (grouping, mode), d_value in sorted(fold.d.items()):
                rows.append(
                    [
                        run.policy.name,
                        knob,
                        fold.window_index,
                        grouping,
                        mode,
                        format(fold.mu, ".17g"),
                        format(d_value, ".17g"),
                    ]
                )
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[4]))
    writer.writerows(rows)


def write_report(runs: list[PolicyRun], sink) -> None:
    """Aggregated per-group deltas: fold mean, fold standard error, counts."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    rows = []
    for run in runs:
        if not run.folds:
            continue
        knob = run.policy.knob_label()
        keys = sorted({key for fold in run.folds for key in fold.deltas})
        for grouping, mode in keys:
            per_group: dict[str, list[GroupDelta]] = {}
            for fold in run.folds:
                for delta in fold.deltas.get((grouping, mode), []):
                    per_group.setdefault(delta.group, []).append(delta)
            for group, deltas in sorted(per_group.items()):
                stat = aggregate([d.delta_days for d in deltas])
                rows.append(
                    [
                        run.policy.name,
                        knob,
                        grouping,
                        group,
                        mode,
                        format(stat.mean, ".17g"),
                        format(stat.se, ".17g"),
                        sum(d.count for d in deltas),
                        len(deltas),
                        len(run.failures),
                    ]
                )
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[4]))
    writer.writerows(rows)


def write_tradeoff(points: list[TradeoffPoint], frontier: list[TradeoffPoint], sink) -> None:
    frontier_names = {(p.name, p.x, p.y) for p in frontier}
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(TRADEOFF_COLUMNS)
    for p in sorted(points, key=lambda p: (p.x, p.y, p.name)):
        writer.writerow(
            [
                p.name,
                format(p.x, ".17g"),
                format(p.y, ".17g"),
                format(p.x_se, ".17g"),
                format(p.y_se, ".17g"),
                "1" if (p.name, p.x, p.y) in frontier_names else "0",
            ]
        )


def load_tradeoff(source) -> tuple[list[TradeoffPoint], list[str]]:
    """Read a trade-off file back; returns (points, frontier point names)."""
    reader = csv.DictReader(source)
    if reader.fieldnames is None or set(TRADEOFF_COLUMNS) - set(reader.fieldnames):
        raise DataError(f"trade-off file must carry columns {TRADEOFF_COLUMNS}")
    points = []
    frontier_names = []
    for row in reader:
        point = TradeoffPoint(
            name=row["policy"],
            x=float(row["d"]),
            y=float(row["mu"]),
            x_se=float(row["d_se"]),
            y_se=float(row["mu_se"]),
        )
        points.append(point)
        if row["frontier"] == "1":
            frontier_names.append(point.name)
    if not points:
        raise DataError("trade-off file has no rows")
    return points, frontier_names
