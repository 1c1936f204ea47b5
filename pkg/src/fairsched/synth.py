"""Synthetic inspection datasets with controllable structure.

The generator plants exactly the regularities the toolkit is meant to
detect: per-cluster violation rates, a continuous feature correlated with
cluster membership (a proxy channel), geographic concentration of clusters
in regions, repeat visits to establishments (including cross-cluster
revisits), and region-linked demographic composition. Everything is driven
by one seed, so identical configs give identical datasets.

Two label modes:

- "bernoulli": each inspection draws its label at the cluster's rate (with
  an optional lift after a previous critical finding), giving realistic
  sampling noise;
- "stratified": positives are laid down deterministically at an even
  per-cluster cadence, so the actual schedule's per-group detection times
  are balanced by construction; useful when a test needs near-zero group
  deltas rather than statistical convergence toward them.

Two feature modes:

- "rich": history, establishment, weather, and spatial-intensity features;
- "cluster-only": every non-indicator feature is written as zero, so the
  cluster is the only signal and within-cluster risk scores are constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from fairsched.ingest import (
    CLUSTERS,
    Dataset,
    FeatureRow,
    InspectionRecord,
    NONCLUSTER_FEATURE_NAMES,
    REGIONS,
    build_feature_row,
    derive_history_features,
)

# Default per-cluster critical-violation rates, highest to lowest.
DEFAULT_RATES = {
    "Purple": 0.40,
    "Blue": 0.25,
    "Orange": 0.14,
    "Green": 0.10,
    "Yellow": 0.06,
    "Brown": 0.025,
}

# Region -> (White, Black, Asian, Hispanic) composition; rows sum to 1.
_REGION_DEMOGRAPHICS = {
    "Central": (0.45, 0.20, 0.20, 0.15),
    "Far North": (0.55, 0.10, 0.20, 0.15),
    "Far Southeast": (0.10, 0.70, 0.02, 0.18),
    "Far Southwest": (0.20, 0.55, 0.03, 0.22),
    "North": (0.60, 0.08, 0.12, 0.20),
    "Northwest": (0.50, 0.05, 0.10, 0.35),
    "South": (0.08, 0.75, 0.04, 0.13),
    "Southwest": (0.25, 0.30, 0.05, 0.40),
    "West": (0.20, 0.45, 0.05, 0.30),
}

_ZIPS_PER_REGION = 3


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    days: int = 300
    per_cluster_per_day: int = 2
    start: date = date(2014, 1, 1)
    cluster_rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RATES))
    label_mode: str = "bernoulli"
    feature_mode: str = "rich"
    establishments_per_cluster: int = 60
    cross_cluster_fraction: float = 0.15
    heat_proxy_strength: float = 2.0
    past_critical_boost: float = 0.3

    def __post_init__(self):
        if self.label_mode not in ("bernoulli", "stratified"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")
        if self.feature_mode not in ("rich", "cluster-only"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if set(self.cluster_rates) != set(CLUSTERS):
            raise ValueError("cluster_rates must cover exactly the six clusters")
        if any(not 0.0 <= r <= 1.0 for r in self.cluster_rates.values()):
            raise ValueError("cluster rates must lie in [0, 1]")
        if self.days < 1 or self.per_cluster_per_day < 1:
            raise ValueError("days and per_cluster_per_day must be >= 1")
        if self.establishments_per_cluster < 1:
            raise ValueError("establishments_per_cluster must be >= 1")
        if not 0.0 <= self.cross_cluster_fraction <= 1.0:
            raise ValueError("cross_cluster_fraction must lie in [0, 1]")


@dataclass
class SynthResult:
    dataset: Dataset
    region_table: dict[str, str]


@dataclass
class _Establishment:
    establishment_id: str
    region: str
    zip_code: str
    latitude: float
    longitude: float
    age_years: float
    consumption: float
    tobacco: float


def _region_zips() -> dict[str, list[str]]:
    zips = {}
    for index, region in enumerate(REGIONS):
        zips[region] = [f"60{index * _ZIPS_PER_REGION + k + 10:03d}" for k in range(_ZIPS_PER_REGION)]
    return zips


def _cluster_regions() -> dict[str, list[str]]:
    """Each cluster concentrates in one or two home regions."""
    homes: dict[str, list[str]] = {c: [] for c in CLUSTERS}
    for index, region in enumerate(REGIONS):
        homes[CLUSTERS[index % len(CLUSTERS)]].append(region)
    return homes


def _build_establishments(config: SynthConfig, rng: np.random.Generator) -> dict[str, list[_Establishment]]:
    zips = _region_zips()
    homes = _cluster_regions()
    pools: dict[str, list[_Establishment]] = {}
    for cluster in CLUSTERS:
        pool = []
        for k in range(config.establishments_per_cluster):
            region = homes[cluster][k % len(homes[cluster])]
            region_index = REGIONS.index(region)
            zip_code = zips[region][int(rng.integers(_ZIPS_PER_REGION))]
            pool.append(
                _Establishment(
                    establishment_id=f"E-{cluster}-{k:03d}",
                    region=region,
                    zip_code=zip_code,
                    latitude=41.65 + 0.04 * region_index + float(rng.uniform(-0.015, 0.015)),
                    longitude=-87.90 + 0.04 * region_index + float(rng.uniform(-0.015, 0.015)),
                    age_years=float(rng.uniform(0.5, 25.0)),
                    consumption=float(rng.random() < 0.35),
                    tobacco=float(rng.random() < 0.15),
                )
            )
        pools[cluster] = pool
    return pools


def generate(config: SynthConfig) -> SynthResult:
    """Build a full synthetic dataset: records, features, regions, and
    demographics, plus the zip-to-region table needed to re-ingest it."""
    rng = np.random.default_rng(config.seed)
    pools = _build_establishments(config, rng)
    all_establishments = [e for cluster in CLUSTERS for e in pools[cluster]]

    records: list[InspectionRecord] = []
    chosen: dict[str, _Establishment] = {}
    last_critical: dict[str, bool] = {}
    cum_critical = {c: 0.0 for c in CLUSTERS}
    cum_serious = {c: 0.0 for c in CLUSTERS}
    counter = 0
    for day in range(config.days):
        when = config.start + timedelta(days=day)
        for cluster in CLUSTERS:
            rate = config.cluster_rates[cluster]
            for _ in range(config.per_cluster_per_day):
                if rng.random() < config.cross_cluster_fraction:
                    est = all_establishments[int(rng.integers(len(all_establishments)))]
                else:
                    pool = pools[cluster]
                    est = pool[int(rng.integers(len(pool)))]

                if config.label_mode == "bernoulli":
                    p = rate
                    if last_critical.get(est.establishment_id):
                        p = min(p * (1.0 + config.past_critical_boost), 0.95)
                    critical = bool(rng.random() < p)
                    serious = bool(rng.random() < min(rate * 1.5, 0.9))
                else:
                    before = cum_critical[cluster]
                    cum_critical[cluster] = before + rate
                    critical = math.floor(cum_critical[cluster]) > math.floor(before)
                    before = cum_serious[cluster]
                    cum_serious[cluster] = before + min(rate * 1.5, 0.9)
                    serious = math.floor(cum_serious[cluster]) > math.floor(before)

                inspection_id = f"I{counter:06d}"
                counter += 1
                records.append(
                    InspectionRecord(
                        inspection_id=inspection_id,
                        establishment_id=est.establishment_id,
                        date=when,
                        cluster=cluster,
                        zip_code=est.zip_code,
                        latitude=est.latitude,
                        longitude=est.longitude,
                        critical_found=critical,
                        serious_found=serious,
                    )
                )
                chosen[inspection_id] = est
                last_critical[est.establishment_id] = critical

    feature_rows = _feature_rows(config, rng, records, chosen)

    zips = _region_zips()
    region_table = {z: region for region, zlist in zips.items() for z in zlist}
    regions = {r.inspection_id: chosen[r.inspection_id].region for r in records}
    demographics = {}
    for record in records:
        base = _REGION_DEMOGRAPHICS[regions[record.inspection_id]]
        demographics[record.inspection_id] = {
            "White": base[0], "Black": base[1], "Asian": base[2], "Hispanic": base[3]
        }

    dataset = Dataset(
        records=records,
        feature_rows=feature_rows,
        regions=regions,
        demographics=demographics,
    )
    return SynthResult(dataset=dataset, region_table=region_table)


def _feature_rows(
    config: SynthConfig,
    rng: np.random.Generator,
    records: list[InspectionRecord],
    chosen: dict[str, _Establishment],
) -> dict[str, FeatureRow]:
    rows: dict[str, FeatureRow] = {}
    if config.feature_mode == "cluster-only":
        for record in records:
            values = {name: 0.0 for name in NONCLUSTER_FEATURE_NAMES}
            rows[record.inspection_id] = build_feature_row(record.inspection_id, record.cluster, values)
        return rows

    history = derive_history_features(records)
    for record in records:
        est = chosen[record.inspection_id]
        past_critical, past_serious, gap = history[record.inspection_id]
        day_of_year = record.date.timetuple().tm_yday
        rate = config.cluster_rates[record.cluster]
        values = {
            "pastCritical": past_critical,
            "pastSerious": past_serious,
            "timeSinceLast": gap,
            "ageAtInspection": est.age_years + (record.date - config.start).days / 365.0,
            "consumption_on_premises_incidental_activity": est.consumption,
            "tobacco_retail_over_counter": est.tobacco,
            "temperatureMax": 55.0
            + 30.0 * math.sin(2.0 * math.pi * (day_of_year - 100) / 365.0)
            + float(rng.normal(0.0, 5.0)),
            "heat_burglary": 1.0 + config.heat_proxy_strength * rate + float(rng.normal(0.0, 0.3)),
            "heat_sanitation": 2.0 + float(rng.normal(0.0, 0.5)),
            "heat_garbage": 1.5 + float(rng.normal(0.0, 0.4)),
        }
        rows[record.inspection_id] = build_feature_row(record.inspection_id, record.cluster, values)
    return rows
