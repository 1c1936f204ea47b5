"""Schedule construction: turn risk scores into inspection-date assignments.

All policies preserve the original capacity: the multiset of assigned dates
equals the multiset of original dates (globally, or per cluster for the
in-cluster policy), and every inspection keeps its sanitarian cluster.
Ties are broken by (score descending, original date ascending, inspection
id ascending) so output is deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date

from fairsched import DataError
from fairsched.ingest import (
    CLUSTER_INDICATOR_NAMES,
    EvaluationWindow,
    FeatureRow,
    InspectionRecord,
    blind_cluster_indicators,
)
from fairsched.logistic import TrainedModel, predict_score


@dataclass(frozen=True)
class ScheduleEntry:
    inspection_id: str
    original_date: date
    assigned_date: date
    cluster: str


@dataclass(frozen=True)
class Schedule:
    window_start: date
    entries: tuple[ScheduleEntry, ...]


def _window_records(
    window: EvaluationWindow, records_by_id: dict[str, InspectionRecord]
) -> list[InspectionRecord]:
    try:
        return [records_by_id[i] for i in window.test_ids]
    except KeyError as exc:
        raise DataError(f"window references unknown inspection {exc.args[0]!r}") from None


def default_schedule(
    window: EvaluationWindow, records_by_id: dict[str, InspectionRecord]
) -> Schedule:
    """The dates the inspections actually happened on: assigned = original."""
    entries = tuple(
        ScheduleEntry(r.inspection_id, r.date, r.date, r.cluster)
        for r in sorted(_window_records(window, records_by_id), key=lambda r: (r.date, r.inspection_id))
    )
    return Schedule(window.start_date, entries)


def _ranked(records, scores: dict[str, float]):
    missing = [r.inspection_id for r in records if r.inspection_id not in scores]
    if missing:
        raise DataError(f"scores missing for inspections {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return sorted(records, key=lambda r: (-scores[r.inspection_id], r.date, r.inspection_id))


def global_reorder(
    scores: dict[str, float],
    window: EvaluationWindow,
    records_by_id: dict[str, InspectionRecord],
) -> Schedule:
    """Assign score-ranked inspections to the window's date slots in
    chronological order, one slot per original inspection per date."""
    records = _window_records(window, records_by_id)
    slots = sorted(r.date for r in records)
    entries = [
        ScheduleEntry(r.inspection_id, r.date, slot, r.cluster)
        for r, slot in zip(_ranked(records, scores), slots)
    ]
    entries.sort(key=lambda e: (e.assigned_date, e.inspection_id))
    return Schedule(window.start_date, tuple(entries))


def in_cluster_reorder(
    scores: dict[str, float],
    window: EvaluationWindow,
    records_by_id: dict[str, InspectionRecord],
) -> Schedule:
    """Global reorder applied independently inside each cluster, so per
    (cluster, date) counts are preserved exactly."""
    records = _window_records(window, records_by_id)
    by_cluster: dict[str, list[InspectionRecord]] = {}
    for record in records:
        by_cluster.setdefault(record.cluster, []).append(record)
    entries = []
    for cluster_records in by_cluster.values():
        slots = sorted(r.date for r in cluster_records)
        entries.extend(
            ScheduleEntry(r.inspection_id, r.date, slot, r.cluster)
            for r, slot in zip(_ranked(cluster_records, scores), slots)
        )
    entries.sort(key=lambda e: (e.assigned_date, e.inspection_id))
    return Schedule(window.start_date, tuple(entries))


def sanitarian_blind_scores(model: TrainedModel, rows: list[FeatureRow]) -> dict[str, float]:
    """Scores with every cluster indicator forced to zero at predict time.

    The model must actually contain cluster indicator features; blinding a
    model that never saw them is a policy mix-up, not a computation.
    """
    if not any(name in CLUSTER_INDICATOR_NAMES for name in model.feature_names):
        raise ValueError("sanitarian-blind scoring needs a model with cluster indicator features")
    return {row.inspection_id: predict_score(model, blind_cluster_indicators(row)).score for row in rows}


SCHEDULE_COLUMNS = ("inspection_id", "original_date", "assigned_date", "cluster", "score", "critical_found")


def write_schedule(
    schedule: Schedule,
    scores: dict[str, float],
    labels: dict[str, bool],
    sink,
) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SCHEDULE_COLUMNS)
    for entry in schedule.entries:
        writer.writerow(
            [
                entry.inspection_id,
                entry.original_date.isoformat(),
                entry.assigned_date.isoformat(),
                entry.cluster,
                format(scores.get(entry.inspection_id, 0.0), ".17g"),
                "1" if labels.get(entry.inspection_id, False) else "0",
            ]
        )


def load_schedule(source) -> tuple[Schedule, dict[str, float], dict[str, bool]]:
    reader = csv.DictReader(source)
    if reader.fieldnames is None or set(SCHEDULE_COLUMNS) - set(reader.fieldnames):
        raise DataError(f"schedule file must carry columns {SCHEDULE_COLUMNS}")
    entries = []
    scores: dict[str, float] = {}
    labels: dict[str, bool] = {}
    for row in reader:
        entry = ScheduleEntry(
            inspection_id=row["inspection_id"],
            original_date=date.fromisoformat(row["original_date"]),
            assigned_date=date.fromisoformat(row["assigned_date"]),
            cluster=row["cluster"],
        )
        entries.append(entry)
        scores[entry.inspection_id] = float(row["score"])
        labels[entry.inspection_id] = row["critical_found"] == "1"
    if not entries:
        raise DataError("schedule file has no rows")
    # the format does not carry the window start; for a complete window the
    # earliest original date is exactly it
    window_start = min(e.original_date for e in entries)
    return Schedule(window_start, tuple(entries)), scores, labels
