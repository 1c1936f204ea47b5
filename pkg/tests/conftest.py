"""Shared helpers for the test suite: compact dataset builders and the
terminal-summary hook that echoes acceptance-criteria results."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from fairsched.ingest import (
    FEATURE_NAMES,
    FeatureRow,
    InspectionRecord,
    cluster_indicator_name,
)

START = date(2014, 1, 1)

# collected by tests/test_acceptance.py, printed after the run so the
# one-line-per-criterion log survives pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record(
    index: int,
    day: int,
    cluster: str,
    critical: int = 0,
    serious: int = 0,
    establishment: str | None = None,
    zip_code: str = "60601",
    latitude: float | None = None,
    longitude: float | None = None,
) -> InspectionRecord:
    return InspectionRecord(
        inspection_id=f"I{index:04d}",
        establishment_id=establishment if establishment is not None else f"E{index:04d}",
        date=START + timedelta(days=day),
        cluster=cluster,
        zip_code=zip_code,
        latitude=latitude,
        longitude=longitude,
        critical_found=bool(critical),
        serious_found=bool(serious),
    )


def feature_row(rec: InspectionRecord, **overrides) -> FeatureRow:
    values = {name: 0.0 for name in FEATURE_NAMES}
    values[cluster_indicator_name(rec.cluster)] = 1.0
    values.update(overrides)
    return FeatureRow(
        inspection_id=rec.inspection_id,
        names=FEATURE_NAMES,
        values=tuple(values[name] for name in FEATURE_NAMES),
    )


def rows_from_matrix(X, names: tuple[str, ...] | None = None) -> list[FeatureRow]:
    X = np.asarray(X, dtype=float)
    if names is None:
        names = tuple(f"f{j}" for j in range(X.shape[1]))
    return [
        FeatureRow(inspection_id=f"R{i:05d}", names=names, values=tuple(map(float, X[i])))
        for i in range(X.shape[0])
    ]


def logistic_problem(n: int, d: int, seed: int, scale: float = 1.0):
    """Random separable-ish logistic data with known generating weights."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * scale
    w = rng.normal(size=d)
    b = rng.normal()
    p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
    y = (rng.random(n) < p).astype(np.float64)
    return X, y, w, b
