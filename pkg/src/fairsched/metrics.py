"""Efficiency and group-fairness measures over schedules.

Detection time T is the day offset of an inspection's assigned date from
its window start. Efficiency mu is the mean T over critical-violation
inspections (lower is better). Group deltas compare a group's mean T to the
overall mean under one of two modes: DP uses every inspection, EOpp only
those that found a critical violation. Unfairness d sums the absolute
deltas across groups.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from fairsched import DataError, UndefinedEfficiencyError
from fairsched.ingest import CLUSTERS, InspectionRecord
from fairsched.scheduling import Schedule

logger = logging.getLogger(__name__)

MODES = ("DP", "EOpp")
GROUPINGS = ("cluster", "region")


@dataclass(frozen=True)
class DetectionOutcome:
    inspection_id: str
    T: int
    Y: bool
    cluster: str
    region: str | None = None
    demographics: dict[str, float] | None = None

    def group(self, grouping: str) -> str | None:
        if grouping == "cluster":
            return self.cluster
        if grouping == "region":
            return self.region
        raise ValueError(f"unknown grouping {grouping!r}")


@dataclass(frozen=True)
class GroupDelta:
    group: str
    mode: str
    delta_days: float
    count: int


@dataclass(frozen=True)
class ClusterRate:
    cluster: str
    rate: float
    count: int


@dataclass(frozen=True)
class PairedMatrix:
    """cell (earlier cluster, later cluster) -> asymmetry in [-1, 1]; cells
    with no pairs carry count 0 and no value."""

    values: dict[tuple[str, str], float]
    counts: dict[tuple[str, str], int]


def detection_times(
    schedule: Schedule,
    labels: dict[str, bool],
    window_days: int = 60,
    regions: dict[str, str] | None = None,
    demographics: dict[str, dict[str, float]] | None = None,
) -> list[DetectionOutcome]:
    """T per scheduled inspection, carrying its label and group labels.

    An assigned date outside [window_start, window_start + window_days)
    means the schedule and window disagree, and raises DataError.
    """
    outcomes = []
    for entry in schedule.entries:
        t = (entry.assigned_date - schedule.window_start).days
        if not 0 <= t < window_days:
            raise DataError(
                f"inspection {entry.inspection_id!r} assigned {t} days from window start, "
                f"outside the {window_days}-day window"
            )
        if entry.inspection_id not in labels:
            raise DataError(f"no label for inspection {entry.inspection_id!r}")
        outcomes.append(
            DetectionOutcome(
                inspection_id=entry.inspection_id,
                T=t,
                Y=labels[entry.inspection_id],
                cluster=entry.cluster,
                region=(regions or {}).get(entry.inspection_id),
                demographics=(demographics or {}).get(entry.inspection_id),
            )
        )
    return outcomes


def _mode_filter(outcomes: list[DetectionOutcome], mode: str) -> list[DetectionOutcome]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return list(outcomes) if mode == "DP" else [o for o in outcomes if o.Y]


def overall_mean_time(outcomes: list[DetectionOutcome], mode: str = "DP") -> float:
    kept = _mode_filter(outcomes, mode)
    if not kept:
        raise DataError(f"no outcomes qualify under mode {mode}")
    return sum(o.T for o in kept) / len(kept)


def group_mean_deltas(
    outcomes: list[DetectionOutcome], grouping: str, mode: str
) -> list[GroupDelta]:
    """Per-group mean T minus overall mean T, under the mode's filter.

    Outcomes missing the grouping label stay in the overall mean but join
    no group; empty groups are omitted. Results are ordered by group name.
    """
    kept = _mode_filter(outcomes, mode)
    if not kept:
        raise DataError(f"no outcomes qualify under mode {mode}")
    mu = sum(o.T for o in kept) / len(kept)
    groups: dict[str, list[int]] = {}
    unlabeled = 0
    for outcome in kept:
        label = outcome.group(grouping)
        if label is None:
            unlabeled += 1
        else:
            groups.setdefault(label, []).append(outcome.T)
    if unlabeled:
        logger.warning("%d outcomes lack a %s label; kept in overall mean only", unlabeled, grouping)
    if not groups:
        raise DataError(f"no outcome carries a {grouping} label")
    return [
        GroupDelta(group=g, mode=mode, delta_days=sum(ts) / len(ts) - mu, count=len(ts))
        for g, ts in sorted(groups.items())
    ]


def unfairness_d(
    outcomes: list[DetectionOutcome], grouping: str, mode: str, normalized: bool = False
) -> float:
    """Sum over groups of |group mean T - overall mean T|; ``normalized``
    divides by the group count for comparisons that average instead."""
    deltas = group_mean_deltas(outcomes, grouping, mode)
    total = sum(abs(d.delta_days) for d in deltas)
    return total / len(deltas) if normalized else total


def efficiency_mu(outcomes: list[DetectionOutcome]) -> float:
    """Mean detection time over critical-violation inspections."""
    positive = [o.T for o in outcomes if o.Y]
    if not positive:
        raise UndefinedEfficiencyError("no critical-violation inspections in scope")
    return sum(positive) / len(positive)


def violation_rate_by_cluster(records: list[InspectionRecord]) -> list[ClusterRate]:
    """Critical-violation fraction per cluster, highest rate first; clusters
    with no inspections are omitted."""
    counts: dict[str, int] = {}
    positives: dict[str, int] = {}
    for record in records:
        counts[record.cluster] = counts.get(record.cluster, 0) + 1
        if record.critical_found:
            positives[record.cluster] = positives.get(record.cluster, 0) + 1
    rates = [
        ClusterRate(cluster=c, rate=positives.get(c, 0) / n, count=n)
        for c, n in counts.items()
    ]
    rates.sort(key=lambda r: (-r.rate, r.cluster))
    return rates


def consecutive_pairs(
    records: list[InspectionRecord],
) -> list[tuple[InspectionRecord, InspectionRecord]]:
    """Consecutive same-establishment inspection pairs in time order."""
    by_establishment: dict[str, list[InspectionRecord]] = {}
    for record in records:
        by_establishment.setdefault(record.establishment_id, []).append(record)
    pairs = []
    for history in by_establishment.values():
        history.sort(key=lambda r: (r.date, r.inspection_id))
        pairs.extend(zip(history, history[1:]))
    return pairs


def cross_cluster_subset(records: list[InspectionRecord]) -> list[InspectionRecord]:
    """Inspections of establishments that more than one cluster inspected."""
    clusters_seen: dict[str, set[str]] = {}
    for record in records:
        clusters_seen.setdefault(record.establishment_id, set()).add(record.cluster)
    return [r for r in records if len(clusters_seen[r.establishment_id]) > 1]


def paired_matrix(records: list[InspectionRecord]) -> PairedMatrix:
    """Disagreement asymmetry between consecutive inspections of the same
    establishment.

    cell(i, j) = fraction of (earlier cluster i, later cluster j) pairs
    where the earlier found nothing but the later found a critical
    violation, minus the fraction where the earlier found one and the later
    did not.
    """
    tallies: dict[tuple[str, str], list[int]] = {}
    for earlier, later in consecutive_pairs(records):
        cell = tallies.setdefault((earlier.cluster, later.cluster), [0, 0, 0])
        cell[0] += 1
        if not earlier.critical_found and later.critical_found:
            cell[1] += 1
        elif earlier.critical_found and not later.critical_found:
            cell[2] += 1
    values = {}
    counts = {}
    for i in CLUSTERS:
        for j in CLUSTERS:
            total, up, down = tallies.get((i, j), [0, 0, 0])
            counts[(i, j)] = total
            if total:
                values[(i, j)] = (up - down) / total
    return PairedMatrix(values=values, counts=counts)


def weighted_demographic_deltas(
    outcomes: list[DetectionOutcome], mode: str
) -> dict[str, tuple[float, float]]:
    """Composition-weighted mean of (T - mu) per demographic group.

    Only outcomes carrying a composition participate; mu is their mean so
    that uniform compositions give exactly zero deltas. Each group's sum is
    normalized by that group's total weight; zero-weight groups are
    omitted. Returns group -> (delta_days, total_weight).
    """
    kept = [o for o in _mode_filter(outcomes, mode) if o.demographics is not None]
    skipped = len(_mode_filter(outcomes, mode)) - len(kept)
    if skipped:
        logger.warning("%d outcomes lack demographic composition; excluded", skipped)
    if not kept:
        raise DataError("no outcomes carry demographic composition")
    mu = sum(o.T for o in kept) / len(kept)
    groups = sorted({g for o in kept for g in o.demographics})
    out: dict[str, tuple[float, float]] = {}
    for group in groups:
        total_weight = sum(o.demographics.get(group, 0.0) for o in kept)
        if total_weight <= 0:
            continue
        weighted = sum(o.demographics.get(group, 0.0) * (o.T - mu) for o in kept)
        out[group] = (weighted / total_weight, total_weight)
    return out
