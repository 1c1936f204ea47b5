"""Metric tests: detection times, group deltas, unfairness, paired analysis."""

from datetime import timedelta

import numpy as np
import pytest

from fairsched import DataError, UndefinedEfficiencyError
from fairsched.ingest import CLUSTERS
from fairsched.metrics import (
    DetectionOutcome,
    cross_cluster_subset,
    consecutive_pairs,
    detection_times,
    efficiency_mu,
    group_mean_deltas,
    overall_mean_time,
    paired_matrix,
    unfairness_d,
    violation_rate_by_cluster,
    weighted_demographic_deltas,
)
from fairsched.scheduling import Schedule, ScheduleEntry

from conftest import START, record


def _outcome(i, T, Y, cluster, region=None, demographics=None):
    return DetectionOutcome(
        inspection_id=f"I{i:04d}", T=T, Y=Y, cluster=cluster, region=region,
        demographics=demographics,
    )


def _entry(i, original_day, assigned_day, cluster):
    return ScheduleEntry(
        inspection_id=f"I{i:04d}",
        original_date=START + timedelta(days=original_day),
        assigned_date=START + timedelta(days=assigned_day),
        cluster=cluster,
    )


def test_detection_times_and_bounds():
    schedule = Schedule(START, (_entry(1, 5, 0, "Purple"), _entry(2, 0, 59, "Brown")))
    labels = {"I0001": True, "I0002": False}
    outcomes = detection_times(schedule, labels, window_days=60)
    assert [(o.T, o.Y) for o in outcomes] == [(0, True), (59, False)]

    out_of_window = Schedule(START, (_entry(1, 0, 60, "Purple"),))
    with pytest.raises(DataError, match="outside"):
        detection_times(out_of_window, labels, window_days=60)
    with pytest.raises(DataError, match="label"):
        detection_times(schedule, {"I0001": True}, window_days=60)


def test_detection_times_attach_region_and_demographics():
    schedule = Schedule(START, (_entry(1, 0, 3, "Purple"),))
    outcomes = detection_times(
        schedule,
        {"I0001": True},
        regions={"I0001": "North"},
        demographics={"I0001": {"White": 0.5}},
    )
    assert outcomes[0].region == "North"
    assert outcomes[0].demographics == {"White": 0.5}
    assert outcomes[0].group("region") == "North"
    with pytest.raises(ValueError):
        outcomes[0].group("zodiac")


def test_group_mean_deltas_hand_case():
    outcomes = [
        _outcome(1, 0, True, "Purple"),
        _outcome(2, 10, True, "Purple"),
        _outcome(3, 20, False, "Brown"),
        _outcome(4, 30, True, "Brown"),
    ]
    # DP: overall mean 15; Purple mean 5 -> -10; Brown mean 25 -> +10
    deltas = group_mean_deltas(outcomes, "cluster", "DP")
    assert [(d.group, d.delta_days, d.count) for d in deltas] == [
        ("Brown", 10.0, 2),
        ("Purple", -10.0, 2),
    ]
    # EOpp keeps only Y=1: overall mean 40/3; Brown delta 30 - 40/3
    deltas = group_mean_deltas(outcomes, "cluster", "EOpp")
    assert deltas[0].group == "Brown"
    assert deltas[0].delta_days == pytest.approx(30 - 40 / 3)
    assert deltas[0].count == 1
    assert deltas[1].delta_days == pytest.approx(5 - 40 / 3)

    assert unfairness_d(outcomes, "cluster", "DP") == pytest.approx(20.0)
    assert unfairness_d(outcomes, "cluster", "DP", normalized=True) == pytest.approx(10.0)


def test_unlabeled_outcomes_stay_in_overall_mean():
    outcomes = [
        _outcome(1, 0, True, "Purple", region="North"),
        _outcome(2, 30, True, "Purple", region=None),
    ]
    deltas = group_mean_deltas(outcomes, "region", "DP")
    # overall mean is 15 even though only one outcome carries a region
    assert [(d.group, d.delta_days, d.count) for d in deltas] == [("North", -15.0, 1)]
    with pytest.raises(DataError):
        group_mean_deltas([_outcome(1, 0, True, "Purple")], "region", "DP")


def test_dp_deltas_are_count_weighted_zero_sum():
    rng = np.random.default_rng(3)
    outcomes = [
        _outcome(i, int(rng.integers(0, 60)), bool(rng.integers(0, 2)),
                 CLUSTERS[int(rng.integers(0, 6))])
        for i in range(500)
    ]
    deltas = group_mean_deltas(outcomes, "cluster", "DP")
    assert sum(d.delta_days * d.count for d in deltas) == pytest.approx(0.0, abs=1e-9)


def test_d_is_exactly_zero_for_equal_group_means():
    outcomes = []
    for i, cluster in enumerate(CLUSTERS):
        outcomes.append(_outcome(2 * i, 10, True, cluster))
        outcomes.append(_outcome(2 * i + 1, 20, True, cluster))
    assert unfairness_d(outcomes, "cluster", "DP") == 0.0
    assert unfairness_d(outcomes, "cluster", "EOpp") == 0.0


def test_efficiency_mu():
    outcomes = [
        _outcome(1, 10, True, "Purple"),
        _outcome(2, 50, False, "Purple"),
        _outcome(3, 20, True, "Brown"),
    ]
    assert efficiency_mu(outcomes) == pytest.approx(15.0)
    assert overall_mean_time(outcomes, "DP") == pytest.approx(80 / 3)
    with pytest.raises(UndefinedEfficiencyError):
        efficiency_mu([_outcome(1, 10, False, "Purple")])


def test_violation_rates_sorted_by_rate():
    records = (
        [record(i, 0, "Purple", critical=1) for i in range(4)]
        + [record(10 + i, 0, "Purple", critical=0) for i in range(6)]
        + [record(20 + i, 0, "Brown", critical=i == 0) for i in range(10)]
        + [record(30 + i, 0, "Blue", critical=i < 2) for i in range(10)]
    )
    rates = violation_rate_by_cluster(records)
    assert [(r.cluster, r.rate, r.count) for r in rates] == [
        ("Purple", 0.4, 10),
        ("Blue", 0.2, 10),
        ("Brown", 0.1, 10),
    ]


def test_consecutive_pairs_and_cross_cluster_subset():
    records = [
        record(1, 0, "Purple", establishment="E1"),
        record(2, 10, "Brown", establishment="E1"),
        record(3, 20, "Purple", establishment="E1"),
        record(4, 0, "Blue", establishment="E2"),
        record(5, 9, "Blue", establishment="E2"),
        record(6, 0, "Green", establishment="E3"),
    ]
    pairs = consecutive_pairs(records)
    ids = sorted((a.inspection_id, b.inspection_id) for a, b in pairs)
    assert ids == [("I0001", "I0002"), ("I0002", "I0003"), ("I0004", "I0005")]
    subset = cross_cluster_subset(records)
    assert sorted(r.inspection_id for r in subset) == ["I0001", "I0002", "I0003"]


def test_paired_matrix_hand_case():
    records = [
        # E1: Brown finds nothing, then Purple finds one -> (Brown, Purple) up
        record(1, 0, "Brown", critical=0, establishment="E1"),
        record(2, 10, "Purple", critical=1, establishment="E1"),
        # E2: same directed pair, no disagreement
        record(3, 0, "Brown", critical=0, establishment="E2"),
        record(4, 10, "Purple", critical=0, establishment="E2"),
        # E3: Purple finds one, then Brown finds nothing -> (Purple, Brown) down
        record(5, 0, "Purple", critical=1, establishment="E3"),
        record(6, 10, "Brown", critical=0, establishment="E3"),
    ]
    matrix = paired_matrix(records)
    assert matrix.counts[("Brown", "Purple")] == 2
    assert matrix.values[("Brown", "Purple")] == pytest.approx(0.5)
    assert matrix.counts[("Purple", "Brown")] == 1
    assert matrix.values[("Purple", "Brown")] == pytest.approx(-1.0)
    assert matrix.counts[("Blue", "Blue")] == 0
    assert ("Blue", "Blue") not in matrix.values
    # every cluster pair is present in counts
    assert set(matrix.counts) == {(i, j) for i in CLUSTERS for j in CLUSTERS}


def test_paired_matrix_expectation_tracks_rate_difference():
    # with independent per-cluster violation rates, E[cell(i, j)] = r_j - r_i
    rng = np.random.default_rng(5)
    rates = {"Purple": 0.6, "Brown": 0.1}
    records = []
    for e in range(3000):
        first, second = ("Purple", "Brown") if e % 2 else ("Brown", "Purple")
        records.append(
            record(2 * e, 0, first, critical=int(rng.random() < rates[first]),
                   establishment=f"E{e:05d}")
        )
        records.append(
            record(2 * e + 1, 10, second, critical=int(rng.random() < rates[second]),
                   establishment=f"E{e:05d}")
        )
    matrix = paired_matrix(records)
    assert matrix.values[("Brown", "Purple")] == pytest.approx(0.5, abs=0.05)
    assert matrix.values[("Purple", "Brown")] == pytest.approx(-0.5, abs=0.05)


def test_weighted_demographic_deltas():
    uniform = {"White": 0.25, "Black": 0.25, "Asian": 0.25, "Hispanic": 0.25}
    outcomes = [
        _outcome(1, 10, True, "Purple", demographics=uniform),
        _outcome(2, 50, True, "Brown", demographics=uniform),
    ]
    deltas = weighted_demographic_deltas(outcomes, "DP")
    for group, (delta, weight) in deltas.items():
        assert delta == 0.0
        assert weight == pytest.approx(0.5)

    # all weight on one group per outcome: deltas equal plain group deltas
    outcomes = [
        _outcome(1, 10, True, "Purple", demographics={"White": 1.0, "Black": 0.0}),
        _outcome(2, 50, True, "Brown", demographics={"White": 0.0, "Black": 1.0}),
    ]
    deltas = weighted_demographic_deltas(outcomes, "DP")
    assert deltas["White"] == (pytest.approx(-20.0), pytest.approx(1.0))
    assert deltas["Black"] == (pytest.approx(20.0), pytest.approx(1.0))
    assert "Asian" not in deltas  # zero total weight

    with pytest.raises(DataError):
        weighted_demographic_deltas([_outcome(1, 10, True, "Purple")], "DP")
