"""Synthetic-generator tests: determinism, planted structure, modes."""

import numpy as np
import pytest

from fairsched.ingest import (
    CLUSTER_INDICATOR_NAMES,
    CLUSTERS,
    DEMOGRAPHIC_GROUPS,
    NONCLUSTER_FEATURE_NAMES,
    REGIONS,
    cluster_indicator_name,
)
from fairsched.metrics import cross_cluster_subset, violation_rate_by_cluster
from fairsched.synth import DEFAULT_RATES, SynthConfig, generate


def _counts_by_cluster(records):
    out = {}
    for r in records:
        out[r.cluster] = out.get(r.cluster, 0) + 1
    return out


def test_generation_is_deterministic():
    a = generate(SynthConfig(seed=3, days=30))
    b = generate(SynthConfig(seed=3, days=30))
    assert a.dataset.records == b.dataset.records
    assert a.dataset.feature_rows == b.dataset.feature_rows
    assert a.dataset.demographics == b.dataset.demographics
    assert a.region_table == b.region_table
    c = generate(SynthConfig(seed=4, days=30))
    assert c.dataset.records != a.dataset.records


def test_counts_and_ids():
    config = SynthConfig(seed=0, days=25, per_cluster_per_day=3)
    dataset = generate(config).dataset
    assert len(dataset.records) == 25 * len(CLUSTERS) * 3
    counts = _counts_by_cluster(dataset.records)
    assert all(counts[c] == 75 for c in CLUSTERS)
    assert len({r.inspection_id for r in dataset.records}) == len(dataset.records)
    assert set(dataset.feature_rows) == {r.inspection_id for r in dataset.records}
    # every day of the span has inspections (windows will be complete)
    assert len({r.date for r in dataset.records}) == 25


def test_bernoulli_rates_approach_targets():
    config = SynthConfig(seed=1, days=400, per_cluster_per_day=2)
    dataset = generate(config).dataset
    for cluster_rate in violation_rate_by_cluster(dataset.records):
        target = DEFAULT_RATES[cluster_rate.cluster]
        # rates drift upward slightly from the past-critical boost
        sigma = (target * (1 - target) / cluster_rate.count) ** 0.5
        assert cluster_rate.rate == pytest.approx(target, abs=0.05 + 5 * sigma)


def test_stratified_mode_hits_rates_exactly():
    rates = {"Purple": 0.4, "Blue": 0.25, "Orange": 0.15, "Green": 0.1, "Yellow": 0.05, "Brown": 0.025}
    config = SynthConfig(seed=2, days=80, per_cluster_per_day=1, label_mode="stratified",
                         cluster_rates=rates)
    dataset = generate(config).dataset
    counts = _counts_by_cluster(dataset.records)
    for cluster_rate in violation_rate_by_cluster(dataset.records):
        expected = rates[cluster_rate.cluster]
        n = counts[cluster_rate.cluster]
        assert abs(cluster_rate.rate * n - round(expected * n)) <= 1


def test_cluster_only_mode_zeroes_context_features():
    config = SynthConfig(seed=3, days=20, feature_mode="cluster-only")
    dataset = generate(config).dataset
    for row in dataset.feature_rows.values():
        for name in NONCLUSTER_FEATURE_NAMES:
            assert row.value(name) == 0.0
        active = [n for n in CLUSTER_INDICATOR_NAMES if row.value(n) == 1.0]
        assert len(active) == 1


def test_rich_mode_plants_cluster_proxy():
    config = SynthConfig(seed=4, days=120, heat_proxy_strength=2.0)
    dataset = generate(config).dataset
    by_cluster = {}
    for r in dataset.records:
        value = dataset.feature_rows[r.inspection_id].value("heat_burglary")
        by_cluster.setdefault(r.cluster, []).append(value)
    means = {c: float(np.mean(v)) for c, v in by_cluster.items()}
    # proxy strength orders cluster means by violation rate
    assert means["Purple"] > means["Green"] > means["Brown"]
    # history features agree with the records
    indicator = {r.inspection_id: r for r in dataset.records}
    by_establishment = {}
    for r in sorted(dataset.records, key=lambda r: (r.date, r.inspection_id)):
        by_establishment.setdefault(r.establishment_id, []).append(r)
    checked = 0
    for history in by_establishment.values():
        for previous, current in zip(history, history[1:]):
            row = dataset.feature_rows[current.inspection_id]
            assert row.value("pastCritical") == (1.0 if previous.critical_found else 0.0)
            assert row.value("timeSinceLast") == float((current.date - previous.date).days)
            checked += 1
    assert checked > 50  # establishments really are revisited


def test_regions_and_demographics_are_consistent():
    result = generate(SynthConfig(seed=5, days=30))
    dataset = result.dataset
    assert set(result.region_table.values()) <= set(REGIONS)
    for r in dataset.records:
        assert r.zip_code in result.region_table
        assert dataset.regions[r.inspection_id] == result.region_table[r.zip_code]
        composition = dataset.demographics[r.inspection_id]
        assert set(composition) == set(DEMOGRAPHIC_GROUPS)
        assert sum(composition.values()) == pytest.approx(1.0)
    assert len(result.region_table) == len(REGIONS) * 3


def test_cross_cluster_revisits_controlled_by_fraction():
    with_crossing = generate(SynthConfig(seed=6, days=60, cross_cluster_fraction=0.3)).dataset
    assert len(cross_cluster_subset(with_crossing.records)) > 0
    without = generate(SynthConfig(seed=6, days=60, cross_cluster_fraction=0.0)).dataset
    assert len(cross_cluster_subset(without.records)) == 0


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(days=0)
    with pytest.raises(ValueError):
        SynthConfig(label_mode="poisson")
    with pytest.raises(ValueError):
        SynthConfig(feature_mode="sparse")
    with pytest.raises(ValueError):
        SynthConfig(cluster_rates={"Purple": 0.4})
    with pytest.raises(ValueError):
        SynthConfig(cluster_rates=dict(DEFAULT_RATES, Purple=1.5))
    with pytest.raises(ValueError):
        SynthConfig(cross_cluster_fraction=1.5)
