"""Per-district training, evaluation, and multi-hour forecasting.

Dispatches to the three model families, embeds normalization and test
metrics in the persisted artifact, and rolls single-step predictions
forward for multi-hour forecasts (each prediction is fed back as the next
vehicle count while weather features hold their last observed values).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, asdict
from datetime import datetime, timedelta

import numpy as np

from .artifact import (
    ModelArtifact,
    default_created_at,
    gbdt_payload,
    neural_payload,
)
from .dataset import (
    FEATURES,
    TARGET_INDEX,
    NormalizationParams,
    PreparedDataset,
    WindowedSample,
)
from .gbdt import (
    BoostingConfig,
    GbdtEnsemble,
    ensemble_predict_batch,
    featurize_sample,
    featurize_samples,
    train_boosting,
)
from .metrics import DEFAULT_MAPE_FLOOR, MetricReport, compute_metrics
from .neural.core import OptimizerState, TrainingSchedule, huber_loss, schedule_tick, sgd_step
from .neural.lstm import LstmNetwork
from .neural.transformer import TransformerNetwork
from .pipeline import HourlyDistrictRow

MODEL_TYPES = ("lstm", "transformer", "gbdt")
MAX_HORIZON = 48
DEFAULT_HORIZON = 12
CONGESTION_QUANTILES = (1.0 / 3.0, 2.0 / 3.0)


class InsufficientHistoryError(ValueError):
    """Not enough consecutive history hours to fill one input window."""


@dataclass
class TrainConfig:
    model_type: str
    district: str
    seed: int = 0
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 2.5e-5
    momentum: float = 0.90
    huber_delta: float = 1.0
    l2_lambda: float = 1e-4
    window: int = 24
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    mape_floor: float = DEFAULT_MAPE_FLOOR
    schedule: TrainingSchedule = field(default_factory=TrainingSchedule)
    boosting: BoostingConfig = field(default_factory=BoostingConfig)

    def __post_init__(self) -> None:
        if self.model_type not in MODEL_TYPES:
            raise ValueError(f"unknown model type {self.model_type!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ForecastPoint:
    timestamp: datetime
    vehicles: float
    level: str


@dataclass
class Forecast:
    district: str
    model_type: str
    generated_at: str
    points: list[ForecastPoint]


def congestion_level(vehicles: float, thresholds: tuple[float, float]) -> str:
    """low/medium/high band for a vehicle count; monotone in the count."""
    if vehicles < thresholds[0]:
        return "low"
    if vehicles < thresholds[1]:
        return "medium"
    return "high"


def predict_normalized(model, window: np.ndarray, target_ts: datetime) -> float:
    """Single-step normalized prediction for one (W, F) window."""
    if isinstance(model, GbdtEnsemble):
        sample = WindowedSample(inputs=window, target=0.0, target_timestamp=target_ts)
        x = featurize_sample(sample)[np.newaxis, :]
        return float(ensemble_predict_batch(x, model)[0])
    return model.predict_one(window)


def predict_samples(model, samples: list[WindowedSample]) -> np.ndarray:
    """Normalized predictions for a list of windowed samples."""
    if isinstance(model, GbdtEnsemble):
        x, _ = featurize_samples(samples)
        return ensemble_predict_batch(x, model)
    windows = np.stack([s.inputs for s in samples])
    return model.predict(windows)


def _metric_report(
    dataset: PreparedDataset, y_norm: np.ndarray, p_norm: np.ndarray, mape_floor: float
) -> MetricReport:
    """MAE/RMSE on normalized values; MAPE after inverse normalization."""
    norm_report = compute_metrics(y_norm, p_norm, mape_floor=mape_floor)
    y_raw = np.asarray(dataset.normalization.invert_target(y_norm))
    p_raw = np.asarray(dataset.normalization.invert_target(p_norm))
    raw_report = compute_metrics(y_raw, p_raw, mape_floor=mape_floor)
    return MetricReport(
        mape_percent=raw_report.mape_percent,
        mae=norm_report.mae,
        rmse=norm_report.rmse,
        excluded_count=raw_report.excluded_count,
    )


def evaluate_model(model, dataset: PreparedDataset, mape_floor: float = DEFAULT_MAPE_FLOOR) -> MetricReport:
    samples = dataset.split_samples("test")
    if not samples:
        raise ValueError("test split is empty")
    preds = predict_samples(model, samples)
    targets = np.array([s.target for s in samples])
    return _metric_report(dataset, targets, preds, mape_floor)


def evaluate(artifact: ModelArtifact, dataset: PreparedDataset) -> MetricReport:
    """Single-step predictions over the test split of a prepared dataset."""
    if tuple(artifact.normalization.feature_names) != tuple(dataset.normalization.feature_names):
        raise ValueError("artifact feature list does not match the dataset")
    model = artifact.build_model()
    floor = artifact.train_config.get("mape_floor", DEFAULT_MAPE_FLOOR)
    return evaluate_model(model, dataset, mape_floor=floor)


def _train_neural(dataset: PreparedDataset, config: TrainConfig):
    net_cls = LstmNetwork if config.model_type == "lstm" else TransformerNetwork
    net = net_cls(
        input_features=len(FEATURES),
        window=config.window,
        l2_lambda=config.l2_lambda,
        seed=config.seed,
    )
    x_train, y_train = dataset.inputs_targets("train")
    x_val, y_val = dataset.inputs_targets("val")

    state = OptimizerState(learning_rate=config.learning_rate, momentum=config.momentum)
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    best_loss = math.inf
    best_params = None

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(y_train))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads = net.loss_and_grads(x_train[batch], y_train[batch], config.huber_delta)
            sgd_step(net.params, grads, state)

        val_loss = huber_loss(net.predict(x_val), y_val, config.huber_delta)
        history.append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = copy.deepcopy(net.params)
        decision = schedule_tick(config.schedule, epoch, history, state.learning_rate)
        if decision.new_lr is not None:
            state.learning_rate = decision.new_lr
        if decision.stop:
            if best_params is not None:
                net.params = best_params
            break
    return net


def train_model(
    dataset: PreparedDataset, config: TrainConfig, created_at: str | None = None
) -> ModelArtifact:
    """Train one model family on a prepared per-district dataset."""
    for split in ("train", "val", "test"):
        if not dataset.split_samples(split):
            raise ValueError(f"{split} split is empty")

    if config.model_type == "gbdt":
        x_train, y_train = featurize_samples(dataset.split_samples("train"))
        x_val, y_val = featurize_samples(dataset.split_samples("val"))
        result = train_boosting(x_train, y_train, x_val, y_val, config.boosting, config.seed)
        model = result.ensemble
        payload = gbdt_payload(model)
    else:
        model = _train_neural(dataset, config)
        payload = neural_payload(model)

    train_targets_raw = dataset.normalization.invert_target(
        np.array([s.target for s in dataset.split_samples("train")])
    )
    thresholds = tuple(float(q) for q in np.quantile(train_targets_raw, CONGESTION_QUANTILES))
    metrics = evaluate_model(model, dataset, mape_floor=config.mape_floor)

    return ModelArtifact(
        model_type=config.model_type,
        district=config.district or dataset.district,
        created_at=created_at or default_created_at(),
        train_config=config.to_dict(),
        normalization=dataset.normalization,
        congestion_thresholds=thresholds,  # type: ignore[arg-type]
        payload=payload,
        test_metrics=metrics,
    )


def _check_history(rows: list[HourlyDistrictRow], window: int) -> list[HourlyDistrictRow]:
    if len(rows) < window:
        raise InsufficientHistoryError(
            f"need {window} consecutive history hours, got {len(rows)}"
        )
    tail = rows[-window:]
    for prev, cur in zip(tail, tail[1:]):
        if cur.timestamp - prev.timestamp != timedelta(hours=1):
            raise InsufficientHistoryError(
                f"history has a gap between {prev.timestamp} and {cur.timestamp}"
            )
    return tail


def forecast(
    artifact: ModelArtifact,
    history: list[HourlyDistrictRow],
    horizon: int = DEFAULT_HORIZON,
    generated_at: str | None = None,
) -> Forecast:
    """Recursive single-step rollout for `horizon` hours past the history.

    Weather features are held at their last observed values; each predicted
    vehicle count (inverse-normalized, clamped at zero) becomes the next
    window's input.
    """
    if not 1 <= horizon <= MAX_HORIZON:
        raise ValueError(f"horizon must be in [1, {MAX_HORIZON}], got {horizon}")
    window = int(artifact.train_config.get("window", 24))
    tail = _check_history(sorted(history, key=lambda r: r.timestamp), window)
    model = artifact.build_model()
    params = artifact.normalization

    raw = np.array(
        [[r.num_vehicles, r.t2m, r.qv2m, r.wd, r.ws, r.precip] for r in tail], dtype=np.float64
    )
    window_norm = params.apply(raw)
    last_weather = raw[-1, 1:]
    ts = tail[-1].timestamp

    points = []
    for _ in range(horizon):
        ts = ts + timedelta(hours=1)
        pred_norm = predict_normalized(model, window_norm, ts)
        vehicles = max(0.0, float(params.invert_target(pred_norm)))
        points.append(
            ForecastPoint(
                timestamp=ts,
                vehicles=vehicles,
                level=congestion_level(vehicles, artifact.congestion_thresholds),
            )
        )
        next_raw = np.concatenate([[vehicles], last_weather])
        next_norm = params.apply(next_raw)
        window_norm = np.vstack([window_norm[1:], next_norm])

    return Forecast(
        district=artifact.district,
        model_type=artifact.model_type,
        generated_at=generated_at or default_created_at(),
        points=points,
    )


def seasonal_naive_metrics(
    dataset: PreparedDataset, period: int = 24, mape_floor: float = DEFAULT_MAPE_FLOOR
) -> MetricReport:
    """Baseline that repeats the vehicle count from `period` hours earlier.

    Requires window >= period so the lagged value sits inside each sample's
    input window. Reported with the same MAE/RMSE-normalized, MAPE-raw
    convention as model evaluation.
    """
    samples = dataset.split_samples("test")
    if not samples:
        raise ValueError("test split is empty")
    window = samples[0].inputs.shape[0]
    if window < period:
        raise ValueError(f"window {window} shorter than naive period {period}")
    preds = np.array([s.inputs[window - period, TARGET_INDEX] for s in samples])
    targets = np.array([s.target for s in samples])
    return _metric_report(dataset, targets, preds, mape_floor)
