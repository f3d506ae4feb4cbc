"""Versioned, checksummed model artifacts.

One JSON document per trained model: metadata, the training configuration
snapshot, normalization parameters, congestion thresholds, test metrics,
and the payload (named float64 tensors as base64 little-endian bytes, or
the explicit tree list). A CRC-32 over the canonical payload encoding
rejects truncated or corrupted files.
"""

from __future__ import annotations

import base64
import json
import os
import zlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import NormalizationParams
from .gbdt import GbdtEnsemble
from .metrics import MetricReport
from .neural.lstm import LstmNetwork
from .neural.transformer import TransformerNetwork

FORMAT_VERSION = 1
MODEL_TYPES = ("lstm", "transformer", "gbdt")


class ArtifactError(ValueError):
    """Artifact file is unreadable, corrupt, or has an unsupported version."""


def default_created_at() -> str:
    """UTC creation stamp; honors SOURCE_DATE_EPOCH for reproducible builds."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        dt = datetime.now(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _encode_tensor(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "data": base64.b64encode(data).decode("ascii")}


def _decode_tensor(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(entry["shape"])


def _payload_crc(payload: dict) -> int:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return zlib.crc32(canonical) & 0xFFFFFFFF


@dataclass
class ModelArtifact:
    model_type: str
    district: str
    created_at: str
    train_config: dict
    normalization: NormalizationParams
    congestion_thresholds: tuple[float, float]
    payload: dict
    test_metrics: MetricReport
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "model_type": self.model_type,
            "district": self.district,
            "created_at": self.created_at,
            "train_config": self.train_config,
            "normalization": self.normalization.to_dict(),
            "congestion_thresholds": list(self.congestion_thresholds),
            "payload": self.payload,
            "payload_crc32": _payload_crc(self.payload),
            "test_metrics": self.test_metrics.to_dict(),
        }

    def build_model(self) -> LstmNetwork | TransformerNetwork | GbdtEnsemble:
        """Reconstruct the trained model from the payload."""
        if self.model_type == "gbdt":
            return GbdtEnsemble.from_dict(self.payload["ensemble"])
        arch = self.payload["architecture"]
        if self.model_type == "lstm":
            net: LstmNetwork | TransformerNetwork = LstmNetwork(
                input_features=arch["input_features"],
                window=arch["window"],
                conv_filters=arch["conv_filters"],
                hidden1=arch["hidden1"],
                hidden2=arch["hidden2"],
                head_sizes=tuple(arch["head_sizes"]),
                l2_lambda=arch["l2_lambda"],
            )
        elif self.model_type == "transformer":
            net = TransformerNetwork(
                input_features=arch["input_features"],
                window=arch["window"],
                d_model=arch["d_model"],
                heads=arch["heads"],
                ffn_hidden=arch["ffn_hidden"],
                head_sizes=tuple(arch["head_sizes"]),
                l2_lambda=arch["l2_lambda"],
                use_positional_encoding=arch["use_positional_encoding"],
            )
        else:
            raise ArtifactError(f"unknown model type {self.model_type!r}")
        tensors = self.payload["tensors"]
        missing = set(net.params) - set(tensors)
        if missing:
            raise ArtifactError(f"payload missing tensors: {sorted(missing)}")
        for name in net.params:
            net.params[name] = _decode_tensor(tensors[name])
        return net


def neural_payload(net: LstmNetwork | TransformerNetwork) -> dict:
    arch: dict = {"input_features": net.input_features, "window": net.window}
    if isinstance(net, LstmNetwork):
        arch.update(
            conv_filters=net.conv_filters,
            hidden1=net.hidden1,
            hidden2=net.hidden2,
            head_sizes=list(net.head_sizes),
            l2_lambda=net.l2_lambda,
        )
    else:
        arch.update(
            d_model=net.d_model,
            heads=net.heads,
            ffn_hidden=net.ffn_hidden,
            head_sizes=list(net.head_sizes),
            l2_lambda=net.l2_lambda,
            use_positional_encoding=net.use_positional_encoding,
        )
    return {
        "kind": "tensors",
        "architecture": arch,
        "tensors": {name: _encode_tensor(arr) for name, arr in net.params.items()},
    }


def gbdt_payload(model: GbdtEnsemble) -> dict:
    return {"kind": "trees", "ensemble": model.to_dict()}


def save_artifact(artifact: ModelArtifact, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(artifact.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_artifact(path: str | Path) -> ModelArtifact:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact file is not valid JSON: {exc}") from exc

    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"unsupported artifact format_version {version!r}")
    payload = data["payload"]
    if _payload_crc(payload) != data.get("payload_crc32"):
        raise ArtifactError("payload checksum mismatch; file is corrupt or truncated")
    if data["model_type"] not in MODEL_TYPES:
        raise ArtifactError(f"unknown model type {data['model_type']!r}")
    return ModelArtifact(
        model_type=data["model_type"],
        district=data["district"],
        created_at=data["created_at"],
        train_config=data["train_config"],
        normalization=NormalizationParams.from_dict(data["normalization"]),
        congestion_thresholds=tuple(data["congestion_thresholds"]),
        payload=payload,
        test_metrics=MetricReport.from_dict(data["test_metrics"]),
    )
