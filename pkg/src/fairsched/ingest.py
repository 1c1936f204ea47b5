"""Dataset ingestion: parsing, history features, regions, and windows.

Input files are comma-delimited text with a header row. Column names are
externalized through a schema mapping so differently-headed extracts load
without code changes; ``DEFAULT_SCHEMA`` matches the canonical file this
package writes and ``CITY_SCHEMA`` matches the public Chicago extract.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta

from fairsched import DataError, SchemaError, UnmappedRegionError

logger = logging.getLogger(__name__)

CLUSTERS = ("Blue", "Brown", "Green", "Orange", "Purple", "Yellow")

# Clusters whose critical-violation rate sits above the dataset-wide split,
# mapped to protected value 1 when a binary attribute is required.
HIGH_RATE_CLUSTERS = frozenset({"Purple", "Blue", "Orange"})

REGIONS = (
    "Central",
    "Far North",
    "Far Southeast",
    "Far Southwest",
    "North",
    "Northwest",
    "South",
    "Southwest",
    "West",
)

DEMOGRAPHIC_GROUPS = ("White", "Black", "Asian", "Hispanic")

CLUSTER_INDICATOR_NAMES = tuple(f"Inspector{c.lower()}" for c in CLUSTERS)

NONCLUSTER_FEATURE_NAMES = (
    "pastCritical",
    "pastSerious",
    "timeSinceLast",
    "ageAtInspection",
    "consumption_on_premises_incidental_activity",
    "tobacco_retail_over_counter",
    "temperatureMax",
    "heat_burglary",
    "heat_sanitation",
    "heat_garbage",
)

FEATURE_NAMES = CLUSTER_INDICATOR_NAMES + NONCLUSTER_FEATURE_NAMES

DEFAULT_HISTORY_GAP_DAYS = 730.0

DEFAULT_SCHEMA = {
    "inspection_id": "inspection_id",
    "establishment_id": "establishment_id",
    "date": "inspection_date",
    "cluster": "cluster",
    "zip": "zip",
    "latitude": "latitude",
    "longitude": "longitude",
    "critical_found": "critical_found",
    "serious_found": "serious_found",
    **{name: name for name in NONCLUSTER_FEATURE_NAMES},
}

# Column names used by the published city extract.
CITY_SCHEMA = {
    "inspection_id": "Inspection_ID",
    "establishment_id": "License",
    "date": "Inspection_Date",
    "cluster": "Inspector_Assigned",
    "zip": "Zip",
    "latitude": "Latitude",
    "longitude": "Longitude",
    "critical_found": "criticalFound",
    "serious_found": "seriousFound",
    **{name: name for name in NONCLUSTER_FEATURE_NAMES},
}

SCHEMA_PRESETS = {"canonical": DEFAULT_SCHEMA, "city": CITY_SCHEMA}

_REQUIRED_FIELDS = ("inspection_id", "establishment_id", "date", "cluster", "zip", "critical_found")

_TRUE_STRINGS = frozenset({"1", "true", "t", "yes", "y"})
_FALSE_STRINGS = frozenset({"0", "false", "f", "no", "n"})


@dataclass(frozen=True)
class InspectionRecord:
    """One inspection event; ``critical_found`` is the outcome label."""

    inspection_id: str
    establishment_id: str
    date: date
    cluster: str
    zip_code: str
    latitude: float | None = None
    longitude: float | None = None
    critical_found: bool = False
    serious_found: bool = False


@dataclass(frozen=True)
class FeatureRow:
    """Named numeric feature vector for one inspection, in canonical order."""

    inspection_id: str
    names: tuple[str, ...]
    values: tuple[float, ...]

    def value(self, name: str) -> float:
        from fairsched import MissingFeatureError

        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise MissingFeatureError(
                f"feature row {self.inspection_id!r} has no feature {name!r}"
            ) from None

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class EvaluationWindow:
    """A fixed-length evaluation period plus its train/test id split."""

    index: int
    start_date: date
    end_date: date
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    complete: bool


@dataclass
class ParseResult:
    records: list[InspectionRecord]
    feature_rows: list[FeatureRow]
    errors: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class Dataset:
    """Parsed records plus optional region / demographic joins."""

    records: list[InspectionRecord]
    feature_rows: dict[str, FeatureRow]
    regions: dict[str, str] = field(default_factory=dict)
    demographics: dict[str, dict[str, float]] = field(default_factory=dict)

    def records_by_id(self) -> dict[str, InspectionRecord]:
        return {r.inspection_id: r for r in self.records}


def normalize_cluster(raw: str) -> str:
    """Map a raw cluster spelling ('purple', 'Inspectorpurple', ...) to its canonical name."""
    text = raw.strip().lower()
    if text.startswith("inspector"):
        text = text[len("inspector"):].lstrip(" _")
    name = text.capitalize()
    if name not in CLUSTERS:
        raise DataError(f"unknown sanitarian cluster {raw!r}")
    return name


def binarize_cluster(cluster: str) -> int:
    """Collapse the six clusters to a binary protected value.

    High-violation-rate clusters (Purple, Blue, Orange) map to 1, the rest
    (Green, Yellow, Brown) to 0.
    """
    name = normalize_cluster(cluster)
    return 1 if name in HIGH_RATE_CLUSTERS else 0


def cluster_indicator_name(cluster: str) -> str:
    return f"Inspector{normalize_cluster(cluster).lower()}"


def _parse_date(text: str) -> date:
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%Y", "%m/%d/%y"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"malformed date {text!r}")


def _parse_bool(text: str) -> bool:
    token = text.strip().lower()
    if token in _TRUE_STRINGS:
        return True
    if token in _FALSE_STRINGS:
        return False
    try:
        return float(token) > 0
    except ValueError:
        raise ValueError(f"malformed boolean {text!r}") from None


def _parse_zip(text: str) -> str:
    token = text.strip().split("-")[0]
    if token.endswith(".0"):
        token = token[:-2]
    if len(token) != 5 or not token.isdigit():
        raise ValueError(f"malformed zip {text!r}")
    return token


def build_feature_row(
    inspection_id: str, cluster: str, values: dict[str, float]
) -> FeatureRow:
    """Assemble the canonical 16-feature row: cluster indicators plus the
    ten numeric features, validated against their domain constraints."""
    name = normalize_cluster(cluster)
    missing = [f for f in NONCLUSTER_FEATURE_NAMES if f not in values]
    if missing:
        raise DataError(f"feature row {inspection_id!r} missing {missing}")
    if values["pastCritical"] not in (0.0, 1.0) or values["pastSerious"] not in (0.0, 1.0):
        raise DataError(f"feature row {inspection_id!r}: pastCritical/pastSerious must be 0 or 1")
    if values["timeSinceLast"] < 0:
        raise DataError(f"feature row {inspection_id!r}: timeSinceLast must be >= 0")
    indicator = cluster_indicator_name(name)
    full = tuple(
        (1.0 if fname == indicator else 0.0) if fname in CLUSTER_INDICATOR_NAMES else float(values[fname])
        for fname in FEATURE_NAMES
    )
    return FeatureRow(inspection_id=inspection_id, names=FEATURE_NAMES, values=full)


def parse_inspections(source, schema: dict[str, str] | None = None) -> ParseResult:
    """Parse a delimited inspection extract into records and feature rows.

    ``source`` is an iterable of text lines (an open file works). Rows with
    unparseable required fields are rejected and reported in
    ``result.errors`` as (row_number, message) pairs, numbering the first
    data row 1. Feature rows are produced only when all ten non-cluster
    feature columns are present in the header.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        return ParseResult(records=[], feature_rows=[])
    header = set(reader.fieldnames)

    for logical in _REQUIRED_FIELDS:
        column = schema.get(logical)
        if column is None:
            raise SchemaError(f"schema does not map required field {logical!r}")
        if column not in header:
            raise SchemaError(f"required column {column!r} ({logical}) not in header")

    have_features = all(schema.get(f) in header for f in NONCLUSTER_FEATURE_NAMES)
    have_serious = schema.get("serious_found") in header

    records: list[InspectionRecord] = []
    feature_rows: list[FeatureRow] = []
    errors: list[tuple[int, str]] = []
    seen_ids: set[str] = set()

    for row_number, row in enumerate(reader, start=1):
        try:
            inspection_id = row[schema["inspection_id"]].strip()
            if not inspection_id:
                raise ValueError("empty inspection_id")
            if inspection_id in seen_ids:
                raise ValueError(f"duplicate inspection_id {inspection_id!r}")
            establishment_id = row[schema["establishment_id"]].strip()
            if not establishment_id:
                raise ValueError("empty establishment_id")
            when = _parse_date(row[schema["date"]])
            cluster = normalize_cluster(row[schema["cluster"]])
            zip_code = _parse_zip(row[schema["zip"]])
            critical = _parse_bool(row[schema["critical_found"]])
            serious = False
            if have_serious and row.get(schema["serious_found"], "").strip():
                serious = _parse_bool(row[schema["serious_found"]])
        except (ValueError, DataError, KeyError) as exc:
            errors.append((row_number, str(exc)))
            continue

        latitude = _parse_optional_float(row, schema.get("latitude"), header)
        longitude = _parse_optional_float(row, schema.get("longitude"), header)

        record = InspectionRecord(
            inspection_id=inspection_id,
            establishment_id=establishment_id,
            date=when,
            cluster=cluster,
            zip_code=zip_code,
            latitude=latitude,
            longitude=longitude,
            critical_found=critical,
            serious_found=serious,
        )

        if have_features:
            try:
                values = {f: float(row[schema[f]]) for f in NONCLUSTER_FEATURE_NAMES}
                feature_rows.append(build_feature_row(inspection_id, cluster, values))
            except (ValueError, DataError) as exc:
                errors.append((row_number, f"feature row rejected: {exc}"))

        seen_ids.add(inspection_id)
        records.append(record)

    if errors:
        logger.warning("rejected %d of %d data rows", len(errors), len(errors) + len(records))
    return ParseResult(records=records, feature_rows=feature_rows, errors=errors)


def _parse_optional_float(row, column, header):
    if column is None or column not in header:
        return None
    text = (row.get(column) or "").strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        return None


def derive_history_features(
    records: list[InspectionRecord], default_gap_days: float = DEFAULT_HISTORY_GAP_DAYS
) -> dict[str, tuple[float, float, float]]:
    """Per-inspection (pastCritical, pastSerious, timeSinceLast) from the
    immediately preceding inspection of the same establishment.

    First-ever inspections get zeros and ``default_gap_days``. Same-day
    repeats are ordered by inspection_id.
    """
    by_establishment: dict[str, list[InspectionRecord]] = {}
    for record in records:
        by_establishment.setdefault(record.establishment_id, []).append(record)

    out: dict[str, tuple[float, float, float]] = {}
    for history in by_establishment.values():
        history.sort(key=lambda r: (r.date, r.inspection_id))
        previous = None
        for record in history:
            if previous is None:
                out[record.inspection_id] = (0.0, 0.0, float(default_gap_days))
            else:
                out[record.inspection_id] = (
                    1.0 if previous.critical_found else 0.0,
                    1.0 if previous.serious_found else 0.0,
                    float((record.date - previous.date).days),
                )
            previous = record
    return out


def load_region_table(source) -> dict[str, str]:
    """Read a two-column (zip, region) delimited file into a lookup table."""
    reader = csv.DictReader(source)
    if reader.fieldnames is None or len(reader.fieldnames) < 2:
        raise SchemaError("region table needs a header with zip and region columns")
    lowered = {name.lower(): name for name in reader.fieldnames}
    if "zip" not in lowered or "region" not in lowered:
        raise SchemaError("region table header must contain 'zip' and 'region'")
    table: dict[str, str] = {}
    for row in reader:
        zip_code = row[lowered["zip"]].strip()
        region = row[lowered["region"]].strip()
        if region not in REGIONS:
            raise DataError(f"unknown region {region!r} for zip {zip_code!r}")
        table[zip_code] = region
    return table


def map_region(zip_code: str, table: dict[str, str]) -> str:
    """Look up the region for a zip; unknown zips raise UnmappedRegionError."""
    try:
        return table[zip_code]
    except KeyError:
        raise UnmappedRegionError(f"zip {zip_code!r} has no region mapping") from None


def map_regions(records: list[InspectionRecord], table: dict[str, str]) -> dict[str, str]:
    """Region per inspection id; unmapped zips are skipped (callers keep
    those inspections in overall metrics but out of region groupings)."""
    regions: dict[str, str] = {}
    unmapped = 0
    for record in records:
        region = table.get(record.zip_code)
        if region is None:
            unmapped += 1
        else:
            regions[record.inspection_id] = region
    if unmapped:
        logger.warning("%d inspections have zips outside the region table", unmapped)
    return regions


def split_windows(records: list[InspectionRecord], window_days: int = 60) -> list[EvaluationWindow]:
    """Partition the timeline into consecutive fixed-length windows.

    Windows anchor at the first inspection date. A window is complete iff
    every calendar day inside it has at least one inspection; incomplete
    windows are flagged so evaluation can exclude them.
    """
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    if not records:
        raise DataError("no records to window")
    ordered = sorted(records, key=lambda r: (r.date, r.inspection_id))
    first = ordered[0].date
    last = ordered[-1].date
    span = (last - first).days + 1
    count = span // window_days
    if count == 0:
        raise DataError(
            f"dataset spans {span} days; at least {window_days} required for one window"
        )

    dates_present = {r.date for r in records}
    windows: list[EvaluationWindow] = []
    position = 0
    for index in range(count):
        start = first + timedelta(days=index * window_days)
        end = start + timedelta(days=window_days - 1)
        train_ids = tuple(r.inspection_id for r in ordered[:position])
        test_ids = []
        while position < len(ordered) and ordered[position].date <= end:
            test_ids.append(ordered[position].inspection_id)
            position += 1
        complete = all(
            start + timedelta(days=offset) in dates_present for offset in range(window_days)
        )
        windows.append(
            EvaluationWindow(
                index=index,
                start_date=start,
                end_date=end,
                train_ids=train_ids,
                test_ids=tuple(test_ids),
                complete=complete,
            )
        )
    return windows


def load_demographics(source) -> dict[str, dict[str, float]]:
    """Read per-inspection fractional demographic composition.

    Expects a header of inspection_id plus the four group columns; each
    fraction must lie in [0, 1] and a row's fractions must sum to at most 1
    (a residual share may be unassigned).
    """
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise SchemaError("demographics file is empty")
    lowered = {name.lower(): name for name in reader.fieldnames}
    if "inspection_id" not in lowered:
        raise SchemaError("demographics header must contain 'inspection_id'")
    group_columns = {}
    for group in DEMOGRAPHIC_GROUPS:
        if group.lower() not in lowered:
            raise SchemaError(f"demographics header must contain {group!r}")
        group_columns[group] = lowered[group.lower()]

    table: dict[str, dict[str, float]] = {}
    for row in reader:
        inspection_id = row[lowered["inspection_id"]].strip()
        composition = {}
        for group, column in group_columns.items():
            value = float(row[column])
            if not 0.0 <= value <= 1.0:
                raise DataError(
                    f"composition {value} for {group} of {inspection_id!r} outside [0, 1]"
                )
            composition[group] = value
        if sum(composition.values()) > 1.0 + 1e-9:
            raise DataError(f"composition for {inspection_id!r} sums above 1")
        table[inspection_id] = composition
    return table


CANONICAL_COLUMNS = (
    "inspection_id",
    "establishment_id",
    "inspection_date",
    "cluster",
    "zip",
    "latitude",
    "longitude",
    "critical_found",
    "serious_found",
) + NONCLUSTER_FEATURE_NAMES


def write_canonical(records: list[InspectionRecord], feature_rows: dict[str, FeatureRow], sink) -> int:
    """Write records plus their feature columns in the canonical layout.

    Floats are rendered with 17 significant digits so a read/write cycle is
    byte-identical. Returns the number of rows written.
    """
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CANONICAL_COLUMNS)
    written = 0
    for record in sorted(records, key=lambda r: (r.date, r.inspection_id)):
        row = [
            record.inspection_id,
            record.establishment_id,
            record.date.isoformat(),
            record.cluster,
            record.zip_code,
            _format_float(record.latitude),
            _format_float(record.longitude),
            "1" if record.critical_found else "0",
            "1" if record.serious_found else "0",
        ]
        features = feature_rows.get(record.inspection_id)
        if features is None:
            row.extend([""] * len(NONCLUSTER_FEATURE_NAMES))
        else:
            row.extend(_format_float(features.value(name)) for name in NONCLUSTER_FEATURE_NAMES)
        writer.writerow(row)
        written += 1
    return written


def _format_float(value) -> str:
    return "" if value is None else format(float(value), ".17g")


def write_region_table(table: dict[str, str], sink) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["zip", "region"])
    for zip_code in sorted(table):
        writer.writerow([zip_code, table[zip_code]])


def write_demographics(table: dict[str, dict[str, float]], sink) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["inspection_id", *DEMOGRAPHIC_GROUPS])
    for inspection_id in sorted(table):
        row = table[inspection_id]
        writer.writerow(
            [inspection_id, *(_format_float(row.get(g, 0.0)) for g in DEMOGRAPHIC_GROUPS)]
        )


def complete_feature_rows(
    result: ParseResult, default_gap_days: float = DEFAULT_HISTORY_GAP_DAYS
) -> dict[str, FeatureRow]:
    """Feature rows keyed by id, deriving the three history features when
    the extract did not ship them precomputed.

    Derived rows carry zeros for the non-history context features, so this
    path suits minimal extracts (ids, dates, clusters, labels only); richer
    extracts should ship the full feature columns instead.
    """
    rows = {fr.inspection_id: fr for fr in result.feature_rows}
    missing = [r for r in result.records if r.inspection_id not in rows]
    if not missing:
        return rows
    if len(missing) != len(result.records):
        logger.warning(
            "%d records lack feature rows while others have them; deriving history for the gap",
            len(missing),
        )
    history = derive_history_features(result.records, default_gap_days)
    for record in missing:
        past_critical, past_serious, gap = history[record.inspection_id]
        values = {name: 0.0 for name in NONCLUSTER_FEATURE_NAMES}
        values["pastCritical"] = past_critical
        values["pastSerious"] = past_serious
        values["timeSinceLast"] = gap
        rows[record.inspection_id] = build_feature_row(record.inspection_id, record.cluster, values)
    return rows


def blind_cluster_indicators(row: FeatureRow) -> FeatureRow:
    """Copy of a feature row with all six cluster indicators forced to 0."""
    values = tuple(
        0.0 if name in CLUSTER_INDICATOR_NAMES else value
        for name, value in zip(row.names, row.values)
    )
    return replace(row, values=values)
