"""MAPE / MAE / RMSE for vehicle-count regression.

MAPE divides by the actual value, so pairs with near-zero actuals (the
prepared data contains hour-boundary rows with tiny counts) are excluded
from MAPE via a configurable floor and reported in excluded_count. MAE and
RMSE always use all pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAPE_FLOOR = 1.0


@dataclass
class MetricReport:
    mape_percent: float | None  # None when every pair fell under the floor
    mae: float
    rmse: float
    excluded_count: int

    def to_dict(self) -> dict:
        return {
            "mape_percent": self.mape_percent,
            "mae": self.mae,
            "rmse": self.rmse,
            "excluded_count": self.excluded_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            mape_percent=data["mape_percent"],
            mae=float(data["mae"]),
            rmse=float(data["rmse"]),
            excluded_count=int(data["excluded_count"]),
        )


def compute_metrics(
    actual: np.ndarray | list[float],
    predicted: np.ndarray | list[float],
    mape_floor: float = DEFAULT_MAPE_FLOOR,
) -> MetricReport:
    """Error metrics over aligned actual/predicted vectors.

    MAE = mean |a - p|; RMSE = sqrt(mean (p - a)^2); MAPE = mean |a - p| / a
    over pairs with a >= mape_floor (as a percentage).
    """
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("metrics need at least one pair")

    err = a - p
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))

    included = a >= mape_floor
    excluded = int(a.size - included.sum())
    if included.any():
        mape = float(np.mean(np.abs(err[included]) / a[included])) * 100.0
    else:
        mape = None
    return MetricReport(mape_percent=mape, mae=mae, rmse=rmse, excluded_count=excluded)
