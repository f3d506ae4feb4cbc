"""Windowed supervised samples from prepared hourly rows.

Feature vector per hour: vehicle count plus the five weather features.
Speed columns are excluded from model input because future speeds are
unknown at serving time. Min-max normalization is fitted on the training
split only; the vehicle count doubles as the prediction target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .pipeline import HourlyDistrictRow

FEATURES = ("num_vehicles", "t2m", "qv2m", "wd", "ws", "precip")
TARGET_INDEX = 0  # num_vehicles

DEFAULT_WINDOW = 24
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


def _feature_matrix(rows: list[HourlyDistrictRow]) -> np.ndarray:
    return np.array(
        [[r.num_vehicles, r.t2m, r.qv2m, r.wd, r.ws, r.precip] for r in rows],
        dtype=np.float64,
    )


@dataclass
class NormalizationParams:
    """Per-feature (min, max) pairs; constant features map to 0."""

    feature_names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        safe = np.where(span == 0.0, 1.0, span)
        out = (values - self.mins) / safe
        return np.where(span == 0.0, 0.0, out)

    def invert(self, values: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        return values * span + self.mins

    def apply_target(self, value: float | np.ndarray) -> float | np.ndarray:
        span = self.maxs[TARGET_INDEX] - self.mins[TARGET_INDEX]
        if span == 0.0:
            return np.zeros_like(np.asarray(value, dtype=np.float64)) + 0.0
        return (value - self.mins[TARGET_INDEX]) / span

    def invert_target(self, value: float | np.ndarray) -> float | np.ndarray:
        span = self.maxs[TARGET_INDEX] - self.mins[TARGET_INDEX]
        return value * span + self.mins[TARGET_INDEX]

    def to_dict(self) -> dict:
        return {
            "features": list(self.feature_names),
            "min": [float(v) for v in self.mins],
            "max": [float(v) for v in self.maxs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationParams":
        return cls(
            feature_names=tuple(data["features"]),
            mins=np.array(data["min"], dtype=np.float64),
            maxs=np.array(data["max"], dtype=np.float64),
        )


def fit_normalization(rows: list[HourlyDistrictRow]) -> NormalizationParams:
    """Fit per-feature min/max on training-split rows only."""
    if not rows:
        raise ValueError("cannot fit normalization on an empty training split")
    values = _feature_matrix(rows)
    return NormalizationParams(
        feature_names=FEATURES,
        mins=values.min(axis=0),
        maxs=values.max(axis=0),
    )


@dataclass
class WindowedSample:
    """W consecutive hours of features and the following hour's vehicle count."""

    inputs: np.ndarray  # (W, F)
    target: float
    target_timestamp: datetime


@dataclass
class SplitRange:
    start: int
    end: int  # exclusive

    def __len__(self) -> int:
        return self.end - self.start

    def indices(self) -> range:
        return range(self.start, self.end)


@dataclass
class PreparedDataset:
    district: str
    samples: list[WindowedSample]
    train: SplitRange
    val: SplitRange
    test: SplitRange
    normalization: NormalizationParams

    def split_samples(self, name: str) -> list[WindowedSample]:
        rng = {"train": self.train, "val": self.val, "test": self.test}[name]
        return self.samples[rng.start : rng.end]

    def inputs_targets(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        samples = self.split_samples(name)
        x = np.stack([s.inputs for s in samples]) if samples else np.zeros((0, 0, 0))
        y = np.array([s.target for s in samples], dtype=np.float64)
        return x, y


def make_windows(rows: list[HourlyDistrictRow], window: int = DEFAULT_WINDOW) -> list[WindowedSample]:
    """Sliding windows over a chronological series; no window spans an hour gap.

    A gap-free series of N rows yields exactly N - window samples: sample i
    covers rows [i, i+window) with the target taken from row i + window.
    """
    if window < 1:
        raise ValueError("window length must be >= 1")
    n = len(rows)
    if n <= window:
        return []
    values = _feature_matrix(rows)
    # consecutive[i] is True when rows i and i+1 are one hour apart
    one_hour = timedelta(hours=1)
    consecutive = np.array(
        [rows[i + 1].timestamp - rows[i].timestamp == one_hour for i in range(n - 1)]
    )
    samples = []
    run = 0  # count of consecutive steps ending at index i
    for i in range(1, n):
        run = run + 1 if consecutive[i - 1] else 0
        if run >= window:
            start = i - window
            samples.append(
                WindowedSample(
                    inputs=values[start:i].copy(),
                    target=float(values[i, TARGET_INDEX]),
                    target_timestamp=rows[i].timestamp,
                )
            )
    return samples


def chrono_split(
    samples: list[WindowedSample],
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
    district: str = "",
    normalization: NormalizationParams | None = None,
) -> PreparedDataset:
    """Contiguous chronological train/val/test split over ordered samples.

    Sizes are floor(N * fraction) for train and val; the remainder goes to
    test. Fractions must sum to 1.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    n = len(samples)
    if n < 3:
        raise ValueError("need at least 3 samples to split")
    n_train = int(math.floor(n * fractions[0]))
    n_val = int(math.floor(n * fractions[1]))
    return PreparedDataset(
        district=district,
        samples=samples,
        train=SplitRange(0, n_train),
        val=SplitRange(n_train, n_train + n_val),
        test=SplitRange(n_train + n_val, n),
        normalization=normalization
        if normalization is not None
        else NormalizationParams(FEATURES, np.zeros(len(FEATURES)), np.ones(len(FEATURES))),
    )


def build_dataset(
    rows: list[HourlyDistrictRow],
    window: int = DEFAULT_WINDOW,
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
) -> PreparedDataset:
    """Full per-district preparation: windows, chronological split, normalization.

    Normalization is fitted on the rows observed by training samples (inputs
    and targets), never on validation or test rows, then applied to every
    sample.
    """
    rows = sorted(rows, key=lambda r: r.timestamp)
    district = rows[0].district if rows else ""
    raw_samples = make_windows(rows, window)
    dataset = chrono_split(raw_samples, fractions, district=district)

    last_train_ts = dataset.samples[dataset.train.end - 1].target_timestamp
    train_rows = [r for r in rows if r.timestamp <= last_train_ts]
    params = fit_normalization(train_rows)
    for s in dataset.samples:
        s.inputs = params.apply(s.inputs)
        s.target = float(params.apply_target(s.target))
    dataset.normalization = params
    return dataset


@dataclass
class SynthParams:
    """Shape of the synthetic hourly series used in desk-scale tests."""

    daily_amplitude: float = 0.35
    daily_phase: float = -math.pi / 2  # trough near 06:00, peak near 18:00
    weekday_amplitude: float = 0.15
    precip_coeff: float = -30.0
    noise_std: float = 40.0
    rain_probability: float = 0.08
    mean_temp: float = 15.0
    temp_amplitude: float = 8.0


def synth_series(
    seed: int,
    days: int,
    base: float = 1000.0,
    params: SynthParams | None = None,
    district: str = "SYNTH",
    start: datetime | None = None,
) -> list[HourlyDistrictRow]:
    """Deterministic synthetic hourly district series.

    vehicles = base * (1 + a*sin(2*pi*hour/24 + phase) + b*weekday_factor)
               + c*precip + noise, clamped at zero. weekday_factor is +1
    Monday-Friday and -1 on weekends.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    p = params or SynthParams()
    rng = np.random.default_rng(seed)
    t0 = start or datetime(2020, 6, 1)
    n = days * 24

    hours = np.arange(n)
    timestamps = [t0 + timedelta(hours=int(h)) for h in hours]
    hour_of_day = np.array([ts.hour for ts in timestamps], dtype=np.float64)
    weekday_factor = np.array([1.0 if ts.weekday() < 5 else -1.0 for ts in timestamps])

    precip = np.where(
        rng.random(n) < p.rain_probability, rng.exponential(0.5, size=n), 0.0
    )
    noise = rng.normal(0.0, p.noise_std, size=n) if p.noise_std > 0 else np.zeros(n)
    vehicles = (
        base
        * (
            1.0
            + p.daily_amplitude * np.sin(2.0 * math.pi * hour_of_day / 24.0 + p.daily_phase)
            + p.weekday_amplitude * weekday_factor
        )
        + p.precip_coeff * precip
        + noise
    )
    vehicles = np.maximum(vehicles, 0.0)

    t2m = (
        p.mean_temp
        + p.temp_amplitude * np.sin(2.0 * math.pi * (hour_of_day - 9.0) / 24.0)
        + rng.normal(0.0, 0.5, size=n)
    )
    qv2m = np.clip(8.0 + rng.normal(0.0, 1.0, size=n), 0.1, None)
    wd = rng.uniform(0.0, 360.0, size=n)
    ws = np.abs(2.0 + rng.normal(0.0, 1.0, size=n))
    avg_speed = np.clip(55.0 + rng.normal(0.0, 5.0, size=n), 5.0, None)

    rows = []
    for i in range(n):
        avg = float(avg_speed[i])
        rows.append(
            HourlyDistrictRow(
                timestamp=timestamps[i],
                district=district,
                min_speed=round(avg * 0.2, 4),
                max_speed=round(avg * 1.8, 4),
                avg_speed=round(avg, 4),
                num_vehicles=int(round(vehicles[i])),
                t2m=round(float(t2m[i]), 4),
                qv2m=round(float(qv2m[i]), 4),
                wd=round(float(wd[i]), 4),
                ws=round(float(ws[i]), 4),
                precip=round(float(precip[i]), 4),
            )
        )
    return rows
