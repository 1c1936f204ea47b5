"""Fairness-aware trainer tests: constraint satisfaction, gap reduction,
ensemble structure, and serialization."""

import io

import numpy as np
import pytest

from fairsched import DataError, DegenerateLabelsError
from fairsched.fair import (
    BINARY_FAIR_GRID,
    EnsembleModel,
    ZAFAR_GRID,
    binary_cluster_protected,
    cluster_protected,
    covariance_decision_protected,
    ensemble_score,
    ensemble_score_rows,
    load_ensemble,
    save_ensemble,
    score_gap,
    train_binary_fair,
    train_no_sanitarian,
    train_proportional_ensemble,
    train_zafar,
)
from fairsched.ingest import NONCLUSTER_FEATURE_NAMES
from fairsched.logistic import TrainConfig, TrainedModel, predict_score, train_logistic
from fairsched.synth import SynthConfig, generate

from conftest import feature_row, record

_DATASET = generate(SynthConfig(seed=5, days=100, per_cluster_per_day=1)).dataset
_RECORDS = _DATASET.records
_ROWS = [_DATASET.feature_rows[r.inspection_id] for r in _RECORDS]
_LABELS = [r.critical_found for r in _RECORDS]
_CONFIG = TrainConfig(l2_weight=1e-4)
_BASELINE = train_logistic(_ROWS, _LABELS, _CONFIG)


def test_protected_specs():
    protected = cluster_protected(_RECORDS)
    assert protected.value_for(_RECORDS[0].inspection_id) == _RECORDS[0].cluster
    with pytest.raises(DataError):
        protected.value_for("nope")
    binary = binary_cluster_protected(_RECORDS)
    assert set(binary.values.values()) == {0, 1}


def test_no_sanitarian_uses_only_noncluster_features():
    model = train_no_sanitarian(_ROWS, _LABELS, _CONFIG)
    assert model.feature_names == NONCLUSTER_FEATURE_NAMES


def test_covariance_matches_direct_computation():
    protected = cluster_protected(_RECORDS)
    covariances = covariance_decision_protected(_BASELINE, _ROWS, protected)
    w = np.array(_BASELINE.coefficients)
    X = np.array([row.values for row in _ROWS])
    z = X @ w + _BASELINE.intercept
    for cluster, reported in covariances.items():
        indicator = np.array([1.0 if r.cluster == cluster else 0.0 for r in _RECORDS])
        direct = float(np.cov(z, indicator, bias=True)[0, 1])
        assert reported == pytest.approx(direct, rel=1e-10, abs=1e-15)


def test_zafar_meets_constraint_across_grid():
    protected = cluster_protected(_RECORDS)
    baseline_cov = covariance_decision_protected(_BASELINE, _ROWS, protected)
    assert max(abs(v) for v in baseline_cov.values()) > 0.01  # constraint binds
    for c in ZAFAR_GRID:
        model = train_zafar(_ROWS, _LABELS, protected, c, _CONFIG)
        covariances = covariance_decision_protected(model, _ROWS, protected)
        worst = max(abs(v) for v in covariances.values())
        assert worst <= c + 1e-4 + 1e-12, f"c={c}: worst covariance {worst}"


def test_zafar_slack_threshold_recovers_baseline():
    # a never-binding constraint leaves exactly the baseline objective
    protected = cluster_protected(_RECORDS)
    model = train_zafar(_ROWS, _LABELS, protected, 1e6, _CONFIG)
    deviation = max(
        abs(a - b) for a, b in zip(model.coefficients, _BASELINE.coefficients)
    )
    assert deviation < 1e-9
    assert model.intercept == pytest.approx(_BASELINE.intercept, abs=1e-9)


def test_zafar_rejects_negative_threshold():
    with pytest.raises(ValueError):
        train_zafar(_ROWS, _LABELS, cluster_protected(_RECORDS), -0.1, _CONFIG)


def test_binary_fair_shrinks_gap_monotonically():
    protected = binary_cluster_protected(_RECORDS)
    gap_baseline = abs(score_gap(_BASELINE, _ROWS, protected))
    mild = train_binary_fair(_ROWS, _LABELS, protected, "DP", 0.5, _CONFIG)
    harsh = train_binary_fair(_ROWS, _LABELS, protected, "DP", 50.0, _CONFIG)
    gap_mild = abs(score_gap(mild, _ROWS, protected))
    gap_harsh = abs(score_gap(harsh, _ROWS, protected))
    assert gap_mild < gap_baseline
    assert gap_harsh < gap_mild
    assert gap_harsh < 0.01


def test_binary_fair_eopp_restricts_to_positives():
    protected = binary_cluster_protected(_RECORDS)
    model = train_binary_fair(_ROWS, _LABELS, protected, "EOpp", 50.0, _CONFIG)
    eopp_gap = abs(score_gap(model, _ROWS, protected, labels=_LABELS))
    baseline_gap = abs(score_gap(_BASELINE, _ROWS, protected, labels=_LABELS))
    assert eopp_gap < baseline_gap
    assert eopp_gap < 0.01


def test_binary_fair_argument_validation():
    protected = binary_cluster_protected(_RECORDS)
    with pytest.raises(ValueError):
        train_binary_fair(_ROWS, _LABELS, protected, "EqOdds", 0.5, _CONFIG)
    with pytest.raises(ValueError):
        train_binary_fair(_ROWS, _LABELS, protected, "DP", 0.0, _CONFIG)
    with pytest.raises(DataError):
        train_binary_fair(_ROWS, _LABELS, cluster_protected(_RECORDS), "DP", 0.5, _CONFIG)


def test_binary_fair_degenerate_group():
    # every high-rate-cluster inspection is negative: EOpp has an empty side
    records = [record(i, i % 10, "Purple", critical=0) for i in range(12)]
    records += [record(100 + i, i % 10, "Brown", critical=i % 2) for i in range(12)]
    rows = [feature_row(r) for r in records]
    labels = [r.critical_found for r in records]
    with pytest.raises(DegenerateLabelsError):
        train_binary_fair(rows, labels, binary_cluster_protected(records), "EOpp", 1.0, _CONFIG)


def test_score_gap_hand_computed():
    records = [record(1, 0, "Purple"), record(2, 0, "Purple"), record(3, 0, "Brown")]
    rows = [feature_row(r) for r in records]
    model = TrainedModel(
        feature_names=rows[0].names,
        coefficients=tuple(2.0 if n == "Inspectorpurple" else 0.0 for n in rows[0].names),
        intercept=0.0,
    )
    gap = score_gap(model, rows, binary_cluster_protected(records))
    expected = 1.0 / (1.0 + np.exp(-2.0)) - 0.5
    assert gap == pytest.approx(expected, rel=1e-12)


def test_proportional_ensemble_structure():
    groups = [r.cluster for r in _RECORDS]
    ensemble = train_proportional_ensemble(_ROWS, _LABELS, groups, rounds=4, config=_CONFIG)
    assert len(ensemble.members) == 4
    weights = [w for _, w in ensemble.members]
    assert all(w == pytest.approx(0.25) for w in weights)
    # round 1 is the uniformly-weighted baseline
    np.testing.assert_allclose(
        ensemble.members[0][0].coefficients, _BASELINE.coefficients, atol=1e-9
    )
    assert ensemble.members[1][0].coefficients != ensemble.members[0][0].coefficients


def test_ensemble_score_counts_agreeing_members():
    groups = [r.cluster for r in _RECORDS]
    ensemble = train_proportional_ensemble(_ROWS, _LABELS, groups, rounds=3, config=_CONFIG)
    row = _ROWS[0]
    agreeing = sum(
        weight
        for model, weight in ensemble.members
        if predict_score(model, row).score >= 0.5
    )
    got = ensemble_score(ensemble, row).score
    assert got == pytest.approx(min(max(agreeing, 1e-15), 1.0 - 1e-15), abs=1e-12)
    scores = ensemble_score_rows(ensemble, _ROWS[:10])
    assert set(scores) == {r.inspection_id for r in _ROWS[:10]}
    assert all(0.0 < s < 1.0 for s in scores.values())


def test_tiny_groups_fall_back_to_majority_target():
    records = [record(i, i % 20, "Purple", critical=i % 3 == 0) for i in range(40)]
    records += [record(100 + i, i % 20, "Brown", critical=i % 2) for i in range(3)]
    rows = [feature_row(r) for r in records]
    labels = [r.critical_found for r in records]
    ensemble = train_proportional_ensemble(
        rows, labels, [r.cluster for r in records], rounds=2, config=_CONFIG
    )
    assert len(ensemble.members) == 2


def test_ensemble_validation():
    model = TrainedModel(feature_names=("f0",), coefficients=(1.0,), intercept=0.0)
    with pytest.raises(ValueError):
        EnsembleModel(members=())
    with pytest.raises(ValueError):
        EnsembleModel(members=((model, 0.4), (model, 0.4)))
    with pytest.raises(ValueError):
        EnsembleModel(members=((model, -0.2), (model, 1.2)))
    normalized = EnsembleModel.from_unnormalized([(model, 2.0), (model, 6.0)])
    assert [w for _, w in normalized.members] == [0.25, 0.75]


def test_ensemble_round_trip_is_bit_exact():
    groups = [r.cluster for r in _RECORDS]
    ensemble = train_proportional_ensemble(_ROWS, _LABELS, groups, rounds=3, config=_CONFIG)
    sink = io.StringIO()
    save_ensemble(ensemble, sink)
    loaded = load_ensemble(io.StringIO(sink.getvalue()))
    assert len(loaded.members) == len(ensemble.members)
    for (ma, wa), (mb, wb) in zip(ensemble.members, loaded.members):
        assert wa == wb
        assert ma.coefficients == mb.coefficients
        assert ma.intercept == mb.intercept
        assert ma.feature_names == mb.feature_names


def test_grids_match_published_sweeps():
    assert ZAFAR_GRID == (0.0, 1e-6, 0.001, 0.01, 0.1)
    assert BINARY_FAIR_GRID[0] == 0.001 and BINARY_FAIR_GRID[-1] == 0.5
