"""Loss, metrics, min-max scaling, Adam, and the early-stopping train loop.

The loop is sequential over optimizer steps; evaluation passes only read
parameters and could run concurrently, but a step has exclusive access.
Everything is deterministic given the settings seed, and wall-clock fields
are kept out of the machine-readable metrics payload so repeated runs
produce byte-identical metrics files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ShapeError
from .kan import param_count

__all__ = [
    "MinMaxScaler",
    "mse_loss",
    "mae",
    "rmse",
    "Adam",
    "TrainSettings",
    "EpochStats",
    "TrainReport",
    "train",
    "evaluate",
    "report_text",
    "metrics_payload",
    "write_metrics",
]


class MinMaxScaler:
    """Per-feature affine map of the training range onto [0, 1].

    A degenerate feature (max == min on the fit data) maps to zero rather
    than dividing by zero; the inverse is exact for every non-degenerate
    feature.
    """

    def __init__(self):
        self.min_: np.ndarray | None = None
        self.span_: np.ndarray | None = None

    def fit(self, values: np.ndarray) -> "MinMaxScaler":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError(f"scaler expects a non-empty [T, N] array, got {values.shape}")
        self.min_ = values.min(axis=0)
        span = values.max(axis=0) - self.min_
        self.span_ = np.where(span > 0, span, 1.0)
        return self

    def _require_fit(self):
        if self.min_ is None:
            raise ValueError("scaler used before fit()")

    def transform(self, values: np.ndarray) -> np.ndarray:
        self._require_fit()
        return (np.asarray(values, dtype=np.float64) - self.min_) / self.span_

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        self._require_fit()
        return np.asarray(values, dtype=np.float64) * self.span_ + self.min_

    def transform_channels(self, arr: np.ndarray) -> np.ndarray:
        """Normalize [.., N, K] arrays whose second-to-last axis is channels."""
        self._require_fit()
        return (np.asarray(arr, dtype=np.float64) - self.min_[:, None]) / self.span_[:, None]

    def inverse_channels(self, arr: np.ndarray) -> np.ndarray:
        self._require_fit()
        return np.asarray(arr, dtype=np.float64) * self.span_[:, None] + self.min_[:, None]

    def state(self) -> dict[str, np.ndarray]:
        self._require_fit()
        return {"scaler.min": self.min_.copy(), "scaler.span": self.span_.copy()}

    @classmethod
    def from_state(cls, state: dict[str, np.ndarray]) -> "MinMaxScaler":
        scaler = cls()
        scaler.min_ = np.asarray(state["scaler.min"], dtype=np.float64)
        scaler.span_ = np.asarray(state["scaler.span"], dtype=np.float64)
        return scaler


def mse_loss(pred: Node, target) -> Node:
    """Mean squared error over every element; differentiable scalar."""
    diff = ad.sub(pred, target if isinstance(target, Node) else ad.constant(target))
    return ad.mean(ad.mul(diff, diff))


def _check_pair(pred: np.ndarray, target: np.ndarray):
    if pred.shape != target.shape:
        raise ShapeError(f"metric shapes differ: {pred.shape} vs {target.shape}")


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    _check_pair(pred, target)
    return float(np.abs(pred - target).mean())


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    _check_pair(pred, target)
    return float(np.sqrt(((pred - target) ** 2).mean()))


class Adam:
    """Standard bias-corrected Adam over named parameter nodes."""

    def __init__(self, params: list[tuple[str, Node]], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for _, p in self.params]
        self._v = [np.zeros_like(p.value) for _, p in self.params]

    def step(self, grads: dict[Node, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (name, p) in enumerate(self.params):
            g = grads.get(p)
            if g is None:
                raise ValueError(f"missing gradient for parameter {name!r}")
            self._m[i] = b1 * self._m[i] + (1.0 - b1) * g
            self._v[i] = b2 * self._v[i] + (1.0 - b2) * g * g
            m_hat = self._m[i] / (1.0 - b1**self.t)
            v_hat = self._v[i] / (1.0 - b2**self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainSettings:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    patience: int = 3
    seed: int = 42

    def __post_init__(self):
        if not 1e-6 <= self.lr <= 1e-2:
            raise ValueError(f"lr must be within [1e-6, 1e-2], got {self.lr}")
        if not 4 <= self.batch_size <= 64:
            raise ValueError(f"batch_size must be within [4, 64], got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stopped_early: bool = False
    test_mae: float = float("nan")
    test_rmse: float = float("nan")
    test_mae_denorm: float | None = None
    test_rmse_denorm: float | None = None
    param_count: int = 0

    @property
    def best_val_loss(self) -> float:
        return min(e.val_loss for e in self.epochs)


def _predictions(model, dataset, split: str, batch_size: int):
    """Forward the whole split in order; returns stacked (pred, target)."""
    count = dataset.window_count(split)
    if count == 0:
        raise ValueError(f"{split} split has no windows")
    preds, targets = [], []
    for start in range(0, count, batch_size):
        idx = range(start, min(start + batch_size, count))
        x, y = dataset.batch(split, idx)
        preds.append(model.forward(x).value)
        targets.append(y)
    return np.concatenate(preds), np.concatenate(targets)


def evaluate(model, dataset, split: str = "test", batch_size: int = 64,
             denormalize: bool = False) -> dict[str, float]:
    """MAE/RMSE on the normalized scale, optionally also on the raw scale."""
    pred, target = _predictions(model, dataset, split, batch_size)
    out = {"mae": mae(pred, target), "rmse": rmse(pred, target)}
    if denormalize:
        pred_d = dataset.scaler.inverse_channels(pred)
        target_d = dataset.scaler.inverse_channels(target)
        out["mae_denorm"] = mae(pred_d, target_d)
        out["rmse_denorm"] = rmse(pred_d, target_d)
    return out


def _split_mse(model, dataset, split: str, batch_size: int) -> float:
    pred, target = _predictions(model, dataset, split, batch_size)
    return float(((pred - target) ** 2).mean())


def train(model, dataset, settings: TrainSettings = TrainSettings(),
          denormalize: bool = False) -> TrainReport:
    """Shuffled mini-batch epochs with early stopping on validation loss.

    Keeps the best-validation parameters and restores them before the test
    metrics are computed, so the model is left in its best state.
    """
    n_train = dataset.window_count("train")
    if n_train == 0:
        raise ValueError("train split has no windows")
    rng = np.random.default_rng(settings.seed)
    params = model.parameters()
    optimizer = Adam(params, lr=settings.lr)
    report = TrainReport(param_count=param_count(model))

    best_val = np.inf
    best_state: list[np.ndarray] = [p.value.copy() for _, p in params]
    since_best = 0
    for epoch in range(1, settings.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n_train)
        total, seen = 0.0, 0
        for start in range(0, n_train, settings.batch_size):
            chunk = order[start : start + settings.batch_size]
            x, y = dataset.batch("train", chunk)
            loss = mse_loss(model.forward(x), y)
            grads = ad.backward(loss)
            optimizer.step(grads)
            total += float(loss.value) * len(chunk)
            seen += len(chunk)
        val_loss = _split_mse(model, dataset, "val", settings.batch_size)
        report.epochs.append(
            EpochStats(total / seen, val_loss, time.perf_counter() - started)
        )
        if val_loss < best_val:
            best_val = val_loss
            best_state = [p.value.copy() for _, p in params]
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > settings.patience:
                report.stopped_early = True
                break

    for (_, p), saved in zip(params, best_state):
        p.value[...] = saved

    test = evaluate(model, dataset, "test", settings.batch_size, denormalize)
    report.test_mae = test["mae"]
    report.test_rmse = test["rmse"]
    if denormalize:
        report.test_mae_denorm = test["mae_denorm"]
        report.test_rmse_denorm = test["rmse_denorm"]
    return report


# ---------------------------------------------------------------------------
# report serialization

def metrics_payload(report: TrainReport, config: dict) -> dict:
    """Deterministic metrics structure: no wall-clock fields."""
    payload = {
        "config": config,
        "epochs": [
            {"train_loss": e.train_loss, "val_loss": e.val_loss} for e in report.epochs
        ],
        "best_epoch": report.best_epoch,
        "best_val_loss": report.best_val_loss,
        "stopped_early": report.stopped_early,
        "test_mae": report.test_mae,
        "test_rmse": report.test_rmse,
        "param_count": report.param_count,
    }
    if report.test_mae_denorm is not None:
        payload["test_mae_denorm"] = report.test_mae_denorm
        payload["test_rmse_denorm"] = report.test_rmse_denorm
    return payload


def write_metrics(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_text(report: TrainReport, config: dict) -> str:
    lines = ["training report", "==============="]
    for key in sorted(config):
        lines.append(f"{key} = {config[key]}")
    lines.append("")
    lines.append(f"{'epoch':>5} {'train_loss':>14} {'val_loss':>14} {'seconds':>9}")
    for i, e in enumerate(report.epochs, start=1):
        lines.append(f"{i:>5} {e.train_loss:>14.8f} {e.val_loss:>14.8f} {e.seconds:>9.2f}")
    lines.append("")
    lines.append(f"best_epoch = {report.best_epoch}")
    lines.append(f"best_val_loss = {report.best_val_loss:.8f}")
    lines.append(f"stopped_early = {report.stopped_early}")
    lines.append(f"param_count = {report.param_count}")
    lines.append(f"test_mae = {report.test_mae:.8f}")
    lines.append(f"test_rmse = {report.test_rmse:.8f}")
    if report.test_mae_denorm is not None:
        lines.append(f"test_mae_denorm = {report.test_mae_denorm:.8f}")
        lines.append(f"test_rmse_denorm = {report.test_rmse_denorm:.8f}")
    return "\n".join(lines) + "\n"
