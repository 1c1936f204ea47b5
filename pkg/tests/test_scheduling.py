"""Schedule-construction tests, including brute-force permutation oracles."""

import io
import itertools
from datetime import timedelta

import numpy as np
import pytest

from fairsched import DataError
from fairsched.ingest import CLUSTERS, EvaluationWindow, blind_cluster_indicators
from fairsched.logistic import TrainedModel, predict_score
from fairsched.scheduling import (
    default_schedule,
    global_reorder,
    in_cluster_reorder,
    load_schedule,
    sanitarian_blind_scores,
    write_schedule,
)

from conftest import START, feature_row, record


def _window(records):
    dates = [r.date for r in records]
    return EvaluationWindow(
        index=0,
        start_date=min(dates),
        end_date=max(dates) + timedelta(days=1),
        train_ids=(),
        test_ids=tuple(r.inspection_id for r in records),
        complete=True,
    )


def _by_id(records):
    return {r.inspection_id: r for r in records}


def _random_case(rng, n, clusters=CLUSTERS[:3]):
    records = [
        record(
            i,
            int(rng.integers(0, 6)),
            clusters[int(rng.integers(0, len(clusters)))],
            critical=int(rng.integers(0, 2)),
        )
        for i in range(n)
    ]
    # duplicate scores exercise the (date, id) tie-break
    scores = {r.inspection_id: float(rng.choice([0.1, 0.4, 0.4, 0.9])) for r in records}
    return records, scores


def _oracle_assignment(records, scores):
    """Brute force: try every assignment of records to the sorted date slots
    and keep the one whose slot-ordered key sequence is lexicographically
    smallest under (-score, original date, id). That sequence is exactly
    'highest score first, ties by earliest original date then id'."""
    slots = sorted(r.date for r in records)
    best_perm, best_key = None, None
    for perm in itertools.permutations(records):
        key = tuple((-scores[r.inspection_id], r.date, r.inspection_id) for r in perm)
        if best_key is None or key < best_key:
            best_perm, best_key = perm, key
    return {r.inspection_id: slot for r, slot in zip(best_perm, slots)}


def test_default_schedule_is_identity():
    records = [record(3, 5, "Blue"), record(1, 2, "Purple"), record(2, 2, "Brown")]
    schedule = default_schedule(_window(records), _by_id(records))
    assert [e.inspection_id for e in schedule.entries] == ["I0001", "I0002", "I0003"]
    assert all(e.assigned_date == e.original_date for e in schedule.entries)
    assert schedule.window_start == START + timedelta(days=2)


def test_global_reorder_hand_case():
    records = [
        record(1, 0, "Purple"),
        record(2, 1, "Blue"),
        record(3, 2, "Brown"),
        record(4, 3, "Green"),
    ]
    scores = {"I0001": 0.2, "I0002": 0.9, "I0003": 0.9, "I0004": 0.5}
    schedule = global_reorder(scores, _window(records), _by_id(records))
    assigned = {e.inspection_id: e.assigned_date for e in schedule.entries}
    # I0002 and I0003 tie on score; I0002 has the earlier original date
    assert assigned["I0002"] == START + timedelta(days=0)
    assert assigned["I0003"] == START + timedelta(days=1)
    assert assigned["I0004"] == START + timedelta(days=2)
    assert assigned["I0001"] == START + timedelta(days=3)
    # clusters ride along with their inspection
    clusters = {e.inspection_id: e.cluster for e in schedule.entries}
    assert clusters == {"I0001": "Purple", "I0002": "Blue", "I0003": "Brown", "I0004": "Green"}


def test_global_reorder_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for trial in range(40):
        records, scores = _random_case(rng, n=int(rng.integers(2, 8)))
        got = global_reorder(scores, _window(records), _by_id(records))
        expected = _oracle_assignment(records, scores)
        assert {e.inspection_id: e.assigned_date for e in got.entries} == expected, f"trial {trial}"


def test_in_cluster_reorder_matches_per_cluster_oracle():
    rng = np.random.default_rng(11)
    for trial in range(30):
        records, scores = _random_case(rng, n=int(rng.integers(2, 9)))
        got = in_cluster_reorder(scores, _window(records), _by_id(records))
        expected = {}
        for cluster in {r.cluster for r in records}:
            members = [r for r in records if r.cluster == cluster]
            if len(members) <= 8:
                expected.update(_oracle_assignment(members, scores))
        got_map = {e.inspection_id: e.assigned_date for e in got.entries}
        assert got_map == expected, f"trial {trial}"


def test_reorders_preserve_counts():
    rng = np.random.default_rng(23)
    for _ in range(50):
        records, scores = _random_case(rng, n=20)
        window, by_id = _window(records), _by_id(records)
        original_dates = sorted(r.date for r in records)

        global_sched = global_reorder(scores, window, by_id)
        assert sorted(e.assigned_date for e in global_sched.entries) == original_dates

        cluster_sched = in_cluster_reorder(scores, window, by_id)
        for cluster in {r.cluster for r in records}:
            original = sorted(r.date for r in records if r.cluster == cluster)
            assigned = sorted(e.assigned_date for e in cluster_sched.entries if e.cluster == cluster)
            assert assigned == original


def test_missing_scores_and_unknown_ids_rejected():
    records = [record(1, 0, "Purple"), record(2, 1, "Blue")]
    window = _window(records)
    with pytest.raises(DataError, match="scores missing"):
        global_reorder({"I0001": 0.5}, window, _by_id(records))
    with pytest.raises(DataError, match="unknown inspection"):
        global_reorder({"I0001": 0.5, "I0002": 0.4}, window, _by_id(records[:1]))


def test_sanitarian_blind_scores():
    records = [record(1, 0, "Purple"), record(2, 1, "Brown")]
    rows = [feature_row(r, timeSinceLast=float(i)) for i, r in enumerate(records)]
    names = rows[0].names
    model = TrainedModel(
        feature_names=names,
        coefficients=tuple(1.5 if n.startswith("Inspector") else 0.25 for n in names),
        intercept=-0.3,
    )
    blinded = sanitarian_blind_scores(model, rows)
    for row in rows:
        expected = predict_score(model, blind_cluster_indicators(row)).score
        assert blinded[row.inspection_id] == expected
    # blinding must change the Purple score (its indicator was active)
    assert blinded["I0001"] != predict_score(model, rows[0]).score

    clusterless = TrainedModel(feature_names=("timeSinceLast",), coefficients=(0.1,), intercept=0.0)
    with pytest.raises(ValueError):
        sanitarian_blind_scores(clusterless, rows)


def test_schedule_file_round_trip():
    records = [record(1, 0, "Purple", critical=1), record(2, 1, "Blue"), record(3, 2, "Brown")]
    scores = {"I0001": 0.7071067811865476, "I0002": 1e-15, "I0003": 0.25}
    labels = {r.inspection_id: r.critical_found for r in records}
    schedule = global_reorder(scores, _window(records), _by_id(records))

    sink = io.StringIO()
    write_schedule(schedule, scores, labels, sink)
    loaded, loaded_scores, loaded_labels = load_schedule(io.StringIO(sink.getvalue()))

    assert loaded.entries == schedule.entries
    assert loaded.window_start == schedule.window_start
    assert loaded_scores == scores
    assert loaded_labels == {"I0001": True, "I0002": False, "I0003": False}

    with pytest.raises(DataError):
        load_schedule(io.StringIO("inspection_id,original_date\n"))
    header = ",".join(
        ("inspection_id", "original_date", "assigned_date", "cluster", "score", "critical_found")
    )
    with pytest.raises(DataError):
        load_schedule(io.StringIO(header + "\n"))
