"""Raw traffic/weather CSV ingestion and hourly per-district aggregation.

Traffic rows are assigned to the nearest registry district, summed per
(hour, district), then joined with weather features on the same key. The
prepared output is a single CSV, one row per (hour, district).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .districts import DEFAULT_DISTRICTS, District, assign_district

TRAFFIC_COLUMNS = (
    "_id",
    "DATE_TIME",
    "LONGITUDE",
    "LATITUDE",
    "GEOHASH",
    "MINIMUM_SPEED",
    "MAXIMUM_SPEED",
    "AVERAGE_SPEED",
    "NUMBER_OF_VEHICLES",
)
# The municipal export spells the geohash column GEHASH.
_TRAFFIC_ALIASES = {"GEHASH": "GEOHASH"}

WEATHER_FEATURES = ("T2M", "QV2M", "WD2M", "WS2M", "PRECTOTCORR")
WEATHER_REQUIRED = ("YEAR", "MO", "DY", "HR") + WEATHER_FEATURES + ("LOC_NAME",)

PREPARED_HEADER = (
    "DATE_TIME",
    "DISTANCE_LOC",
    "MINIMUM_SPEED",
    "MAXIMUM_SPEED",
    "AVERAGE_SPEED",
    "NUMBER_OF_VEHICLES",
    "T2M",
    "QV2M",
    "WD2M",
    "WS2M",
    "PRECTOTCORR",
)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:00:00"


class SchemaError(ValueError):
    """Input file header does not match the expected schema."""


@dataclass(frozen=True)
class TrafficRecord:
    row_id: int
    timestamp: datetime
    longitude: float
    latitude: float
    geohash: str
    min_speed: float
    max_speed: float
    avg_speed: float
    num_vehicles: int


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    t2m: float
    qv2m: float
    wd: float
    ws: float
    precip: float
    latitude: float
    longitude: float
    district_name: str


@dataclass
class HourlyDistrictRow:
    timestamp: datetime
    district: str
    min_speed: float
    max_speed: float
    avg_speed: float
    num_vehicles: int
    t2m: float | None = None
    qv2m: float | None = None
    wd: float | None = None
    ws: float | None = None
    precip: float | None = None


@dataclass
class TrafficParseResult:
    records: list[TrafficRecord] = field(default_factory=list)
    skipped: int = 0

    @property
    def count(self) -> int:
        return len(self.records)


@dataclass
class WeatherParseResult:
    records: list[WeatherRecord] = field(default_factory=list)
    skipped: int = 0
    divisors: dict[str, float] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.records)


def _normalize_traffic_header(fieldnames: Sequence[str] | None) -> dict[str, str]:
    if fieldnames is None:
        raise SchemaError("traffic file has no header row")
    mapping = {}
    for raw in fieldnames:
        name = raw.strip()
        mapping[_TRAFFIC_ALIASES.get(name, name)] = raw
    missing = [c for c in TRAFFIC_COLUMNS if c not in mapping]
    if missing:
        raise SchemaError(f"traffic header missing columns: {missing}")
    return mapping


def _hour(dt: datetime) -> datetime:
    return dt.replace(minute=0, second=0, microsecond=0)


def parse_traffic_csv(path: str | Path) -> TrafficParseResult:
    """Parse one traffic CSV; malformed rows are skipped and counted.

    A row is malformed when a field fails to parse, coordinates are out of
    range, the speed ordering min <= avg <= max is violated, or the vehicle
    count is negative. Header problems raise SchemaError.
    """
    result = TrafficParseResult()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        mapping = _normalize_traffic_header(reader.fieldnames)
        for raw in reader:
            try:
                rec = TrafficRecord(
                    row_id=int(raw[mapping["_id"]]),
                    timestamp=_hour(datetime.fromisoformat(raw[mapping["DATE_TIME"]].strip())),
                    longitude=float(raw[mapping["LONGITUDE"]]),
                    latitude=float(raw[mapping["LATITUDE"]]),
                    geohash=raw[mapping["GEOHASH"]].strip(),
                    min_speed=float(raw[mapping["MINIMUM_SPEED"]]),
                    max_speed=float(raw[mapping["MAXIMUM_SPEED"]]),
                    avg_speed=float(raw[mapping["AVERAGE_SPEED"]]),
                    num_vehicles=int(raw[mapping["NUMBER_OF_VEHICLES"]]),
                )
            except (ValueError, TypeError, KeyError):
                result.skipped += 1
                continue
            if not (-90.0 <= rec.latitude <= 90.0 and -180.0 <= rec.longitude <= 180.0):
                result.skipped += 1
                continue
            if not (rec.min_speed <= rec.avg_speed <= rec.max_speed):
                result.skipped += 1
                continue
            if rec.num_vehicles < 0:
                result.skipped += 1
                continue
            result.records.append(rec)
    return result


def parse_weather_csv(
    path: str | Path, divisors: dict[str, float] | None = None
) -> WeatherParseResult:
    """Parse one weather CSV, fusing YEAR/MO/DY/HR into hourly timestamps.

    `divisors` maps feature column -> scale divisor. When omitted, the file
    is sniffed: integer-encoded exports carry implausibly large values
    (T2M > 100), in which case every feature column is divided by 100.
    Rows with an invalid calendar combination or negative precipitation
    (missing-data sentinels) are skipped and counted.
    """
    raw_rows: list[dict[str, float | str]] = []
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("weather file has no header row")
        names = {c.strip() for c in reader.fieldnames}
        missing = [c for c in WEATHER_REQUIRED if c not in names]
        if missing:
            raise SchemaError(f"weather header missing columns: {missing}")
        has_coords = "LATITUDE" in names and "LONGITUDE" in names
        for raw in reader:
            try:
                row: dict[str, float | str] = {
                    "timestamp": datetime(
                        int(raw["YEAR"]), int(raw["MO"]), int(raw["DY"]), int(raw["HR"])
                    ),
                    "district": raw["LOC_NAME"].strip(),
                    "latitude": float(raw["LATITUDE"]) if has_coords else 0.0,
                    "longitude": float(raw["LONGITUDE"]) if has_coords else 0.0,
                }
                for col in WEATHER_FEATURES:
                    row[col] = float(raw[col])
            except (ValueError, TypeError, KeyError):
                skipped += 1
                continue
            raw_rows.append(row)

    if divisors is None:
        implausible = any(abs(float(r["T2M"])) > 100.0 for r in raw_rows)
        scale = 100.0 if implausible else 1.0
        divisors = {col: scale for col in WEATHER_FEATURES}

    result = WeatherParseResult(skipped=skipped, divisors=dict(divisors))
    for row in raw_rows:
        t2m = float(row["T2M"]) / divisors.get("T2M", 1.0)
        qv2m = float(row["QV2M"]) / divisors.get("QV2M", 1.0)
        wd = (float(row["WD2M"]) / divisors.get("WD2M", 1.0)) % 360.0
        ws = float(row["WS2M"]) / divisors.get("WS2M", 1.0)
        precip = float(row["PRECTOTCORR"]) / divisors.get("PRECTOTCORR", 1.0)
        if precip < 0:
            result.skipped += 1
            continue
        result.records.append(
            WeatherRecord(
                timestamp=row["timestamp"],  # type: ignore[arg-type]
                t2m=t2m,
                qv2m=qv2m,
                wd=wd,
                ws=ws,
                precip=precip,
                latitude=float(row["latitude"]),
                longitude=float(row["longitude"]),
                district_name=str(row["district"]),
            )
        )
    return result


def assign_records(
    records: Iterable[TrafficRecord], registry: tuple[District, ...] = DEFAULT_DISTRICTS
) -> list[tuple[TrafficRecord, str]]:
    """Pair each record with its nearest district name."""
    return [(rec, assign_district(rec.latitude, rec.longitude, registry)) for rec in records]


def aggregate_hourly(assigned: Iterable[tuple[TrafficRecord, str]]) -> list[HourlyDistrictRow]:
    """Group assigned records by (hour, district) into summed hourly rows.

    Vehicle counts are summed, min/max speeds are group extremes, and
    avg_speed is the vehicle-count-weighted mean (plain mean when the
    group's total count is zero). Output is sorted by (timestamp, district).
    """
    groups: dict[tuple[datetime, str], list[TrafficRecord]] = {}
    for rec, district in assigned:
        groups.setdefault((rec.timestamp, district), []).append(rec)

    rows = []
    for (ts, district), recs in groups.items():
        total = sum(r.num_vehicles for r in recs)
        if total > 0:
            avg = sum(r.avg_speed * r.num_vehicles for r in recs) / total
        else:
            avg = sum(r.avg_speed for r in recs) / len(recs)
        rows.append(
            HourlyDistrictRow(
                timestamp=ts,
                district=district,
                min_speed=min(r.min_speed for r in recs),
                max_speed=max(r.max_speed for r in recs),
                avg_speed=avg,
                num_vehicles=total,
            )
        )
    rows.sort(key=lambda r: (r.timestamp, r.district))
    return rows


def join_weather(
    rows: Iterable[HourlyDistrictRow], weather: Iterable[WeatherRecord]
) -> tuple[list[HourlyDistrictRow], int]:
    """Exact (hour, district) join; traffic rows without weather are dropped.

    Returns the joined rows and the drop count. Duplicate weather keys keep
    the first occurrence.
    """
    table: dict[tuple[datetime, str], WeatherRecord] = {}
    for w in weather:
        table.setdefault((w.timestamp, w.district_name), w)

    joined = []
    dropped = 0
    for row in rows:
        w = table.get((row.timestamp, row.district))
        if w is None:
            dropped += 1
            continue
        row.t2m, row.qv2m, row.wd, row.ws, row.precip = w.t2m, w.qv2m, w.wd, w.ws, w.precip
        joined.append(row)
    return joined, dropped


def district_counts(assigned: Iterable[tuple[TrafficRecord, str]]) -> Counter[str]:
    """Record count per assigned district."""
    return Counter(district for _, district in assigned)


@dataclass(frozen=True)
class PeriodStats:
    total_vehicles: int
    mean_avg_speed: float


def period_summary(
    records: Iterable[TrafficRecord],
    morning_hours: tuple[int, int] = (6, 9),
    afternoon_hours: tuple[int, int] = (17, 20),
) -> dict[str, PeriodStats]:
    """Vehicle totals and unweighted mean avg_speed for two half-open hour windows."""
    buckets = {"morning": morning_hours, "afternoon": afternoon_hours}
    totals = {name: 0 for name in buckets}
    speeds: dict[str, list[float]] = {name: [] for name in buckets}
    for rec in records:
        for name, (lo, hi) in buckets.items():
            if lo <= rec.timestamp.hour < hi:
                totals[name] += rec.num_vehicles
                speeds[name].append(rec.avg_speed)
    return {
        name: PeriodStats(
            total_vehicles=totals[name],
            mean_avg_speed=sum(speeds[name]) / len(speeds[name]) if speeds[name] else 0.0,
        )
        for name in buckets
    }


def _fmt_num(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_prepared_csv(rows: Iterable[HourlyDistrictRow], path: str | Path) -> None:
    """Write prepared rows with the fixed column order; deterministic bytes."""
    ordered = sorted(rows, key=lambda r: (r.timestamp, r.district))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREPARED_HEADER)
        for r in ordered:
            if r.t2m is None:
                raise ValueError(f"row {r.timestamp} {r.district} has no weather features")
            writer.writerow(
                [
                    r.timestamp.strftime(TIMESTAMP_FORMAT),
                    r.district,
                    _fmt_num(r.min_speed),
                    _fmt_num(r.max_speed),
                    _fmt_num(r.avg_speed),
                    int(r.num_vehicles),
                    _fmt_num(r.t2m),
                    _fmt_num(r.qv2m),
                    _fmt_num(r.wd),
                    _fmt_num(r.ws),
                    _fmt_num(r.precip),
                ]
            )


def read_prepared_csv(path: str | Path) -> list[HourlyDistrictRow]:
    """Read a prepared CSV back into hourly rows (all districts)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(PREPARED_HEADER):
            raise SchemaError(f"prepared file header must be {','.join(PREPARED_HEADER)}")
        for raw in reader:
            rows.append(
                HourlyDistrictRow(
                    timestamp=datetime.strptime(raw["DATE_TIME"], "%Y-%m-%d %H:%M:%S"),
                    district=raw["DISTANCE_LOC"],
                    min_speed=float(raw["MINIMUM_SPEED"]),
                    max_speed=float(raw["MAXIMUM_SPEED"]),
                    avg_speed=float(raw["AVERAGE_SPEED"]),
                    num_vehicles=int(raw["NUMBER_OF_VEHICLES"]),
                    t2m=float(raw["T2M"]),
                    qv2m=float(raw["QV2M"]),
                    wd=float(raw["WD2M"]),
                    ws=float(raw["WS2M"]),
                    precip=float(raw["PRECTOTCORR"]),
                )
            )
    return rows


def rows_for_district(rows: Iterable[HourlyDistrictRow], district: str) -> list[HourlyDistrictRow]:
    """Chronological rows for one district."""
    out = [r for r in rows if r.district == district]
    out.sort(key=lambda r: r.timestamp)
    return out


def iter_districts(rows: Iterable[HourlyDistrictRow]) -> Iterator[str]:
    seen = set()
    for r in rows:
        if r.district not in seen:
            seen.add(r.district)
            yield r.district
