"""Tabular baseline forecaster trained with ADAM on regularised L1/L2 losses.

The input is the auxiliary-feature vector: for each lag in 0, 2, 4, 6, 8
minutes, the block ``GHI, SZA, cos SZA, sin SZA, SAA, cos SAA, sin SAA``
(angles in degrees). Features are standardised with training-set statistics
and the network output is rescaled by training-target statistics, so weights
stay O(1) while predictions and losses are in W/m^2.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import RecordTable
from .metrics import forecast_skill
from .solar import clearsky_index, haurwitz

LAGS_MIN = (0, 2, 4, 6, 8)
BLOCK = ("ghi", "sza", "cos_sza", "sin_sza", "saa", "cos_saa", "sin_saa")
FEATURE_NAMES = tuple(f"{name}_t-{lag}" for lag in LAGS_MIN for name in BLOCK)
CHECKPOINT_FORMAT = "solareval-model"
CHECKPOINT_VERSION = 1


class IncompleteWindow(LookupError):
    pass


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


# --------------------------------------------------------------------------- features

def _feature_block(ghi, sza, saa):
    zs, za = np.radians(sza), np.radians(saa)
    return np.stack([ghi, sza, np.cos(zs), np.sin(zs), saa, np.cos(za), np.sin(za)], axis=-1)


def featurize(records: RecordTable, anchor: int, horizon: int, index_of: dict | None = None):
    """Raw feature vector at record ``anchor`` and the GHI target ``horizon`` seconds ahead."""
    index_of = index_of if index_of is not None else _index(records)
    t = int(records.timestamp[anchor])
    rows = []
    for lag in LAGS_MIN:
        k = index_of.get(t - 60 * lag)
        if k is None:
            raise IncompleteWindow(f"no record {lag} min before {t}")
        rows.append(k)
    target = index_of.get(t + horizon)
    if target is None:
        raise IncompleteWindow(f"no target record {horizon}s after {t}")
    rows = np.array(rows)
    if not (np.all(np.isfinite(records.sza_deg[rows])) and np.all(np.isfinite(records.saa_deg[rows]))):
        raise IncompleteWindow(f"missing solar angles near {t}")
    block = _feature_block(records.ghi[rows], records.sza_deg[rows], records.saa_deg[rows])
    return block.reshape(-1), float(records.ghi[target])


def _index(records: RecordTable) -> dict:
    return {t: i for i, t in enumerate(records.timestamp.tolist())}


def window_complete(records: RecordTable, horizon: int) -> np.ndarray:
    """Boolean mask of anchors for which :func:`featurize` succeeds."""
    ts = records.timestamp
    ok = np.isfinite(records.sza_deg) & np.isfinite(records.saa_deg)
    need = [-60 * lag for lag in LAGS_MIN] + [horizon]
    result = np.ones(ts.size, bool)
    for off in need:
        pos = np.searchsorted(ts, ts + off)
        pos_c = np.minimum(pos, ts.size - 1)
        hit = (pos < ts.size) & (ts[pos_c] == ts + off)
        if off <= 0:
            hit &= ok[pos_c]
        result &= hit
    return result


@dataclass(frozen=True)
class TabularSet:
    X: np.ndarray      # raw features (n, 35)
    y: np.ndarray      # target GHI
    spm: np.ndarray    # smart-persistence forecast of the same target
    timestamps: np.ndarray  # target timestamps

    def __len__(self) -> int:
        return int(self.y.size)

    def take(self, idx) -> TabularSet:
        return TabularSet(self.X[idx], self.y[idx], self.spm[idx], self.timestamps[idx])


def build_tabular(records: RecordTable, anchors, horizon: int) -> TabularSet:
    """Feature rows, targets and smart-persistence predictions for the given anchors.

    Clear-sky values come from the ``ghi_clr`` column where present, otherwise
    from the Haurwitz model on the recorded zenith angle.
    """
    index_of = _index(records)
    clr = np.where(np.isfinite(records.ghi_clr), records.ghi_clr, haurwitz(records.sza_deg))
    X, y, spm, tt = [], [], [], []
    for a in np.asarray(anchors, dtype=np.int64).tolist():
        x, target = featurize(records, a, horizon, index_of)
        k = index_of[int(records.timestamp[a]) + horizon]
        X.append(x)
        y.append(target)
        spm.append(clearsky_index(records.ghi[a], clr[a]) * clr[k])
        tt.append(records.timestamp[k])
    n_feat = len(FEATURE_NAMES)
    return TabularSet(np.array(X, dtype=np.float64).reshape(-1, n_feat), np.array(y),
                      np.array(spm), np.array(tt, dtype=np.int64))


# --------------------------------------------------------------------------- model

@dataclass
class TrainConfig:
    loss: str = "L2"
    weight_decay: float = 1e-5
    learning_rate: float = 1e-4
    batch_size: int = 10
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    horizon: int = 600
    architecture: str = "linear"
    hidden: int = 32

    def __post_init__(self):
        if self.loss not in ("L1", "L2"):
            raise ValueError(f"loss must be L1 or L2, got {self.loss!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.architecture not in ("linear", "mlp"):
            raise ValueError(f"unknown architecture {self.architecture!r}")


@dataclass
class ModelParams:
    architecture: str
    weights: dict[str, np.ndarray]
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    def copy(self) -> ModelParams:
        return replace(self, weights={k: v.copy() for k, v in self.weights.items()})

    @property
    def weight_names(self) -> tuple[str, ...]:
        """Parameters subject to weight decay (biases are exempt)."""
        return ("W",) if self.architecture == "linear" else ("W1", "W2")

    def normalize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.x_mean) / self.x_scale


def init_params(n_features: int, config: TrainConfig, x_mean=None, x_scale=None,
                y_mean: float = 0.0, y_scale: float = 1.0) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    if config.architecture == "linear":
        weights = {"W": np.zeros((n_features, 1)), "b": np.zeros(1)}
    else:
        H = config.hidden
        weights = {
            "W1": rng.standard_normal((n_features, H)) * math.sqrt(2.0 / n_features),
            "b1": np.zeros(H),
            "W2": rng.standard_normal((H, 1)) * math.sqrt(1.0 / H),
            "b2": np.zeros(1),
        }
    x_mean = np.zeros(n_features) if x_mean is None else np.asarray(x_mean, float)
    x_scale = np.ones(n_features) if x_scale is None else np.asarray(x_scale, float)
    return ModelParams(config.architecture, weights, x_mean, x_scale, float(y_mean), float(y_scale))


def fit_normalization(X, y):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    y_scale = float(np.std(y)) or 1.0
    return mean, scale, float(np.mean(y)), y_scale


def _forward(params: ModelParams, Z: np.ndarray):
    w = params.weights
    if params.architecture == "linear":
        out = Z @ w["W"] + w["b"]
        cache = None
    else:
        pre = Z @ w["W1"] + w["b1"]
        h = np.maximum(pre, 0.0)
        out = h @ w["W2"] + w["b2"]
        cache = (pre, h)
    return params.y_mean + params.y_scale * out[:, 0], cache


def predict(params: ModelParams, X) -> np.ndarray:
    """Predictions in W/m^2 for raw (unnormalised) feature rows."""
    return _forward(params, params.normalize(X))[0]


def penalty(params: ModelParams, weight_decay: float) -> float:
    return 0.5 * weight_decay * sum(float(np.sum(params.weights[k] ** 2))
                                    for k in params.weight_names)


def data_loss(pred, y, loss: str) -> float:
    r = np.asarray(pred) - np.asarray(y)
    return float(np.mean(np.abs(r))) if loss == "L1" else float(np.mean(r * r))


def loss_and_grad(params: ModelParams, batch, config: TrainConfig):
    """Regularised loss and its gradient w.r.t. every weight array.

    ``batch`` is ``(Z, y)`` with ``Z`` already normalised. The L1 subgradient
    uses ``sign(0) = 0``.
    """
    Z, y = batch
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n == 0:
        raise ValueError("empty batch")
    pred, cache = _forward(params, Z)
    r = pred - y
    if config.loss == "L1":
        value = float(np.mean(np.abs(r)))
        dpred = np.sign(r) / n
    else:
        value = float(np.mean(r * r))
        dpred = 2.0 * r / n
    dout = (params.y_scale * dpred)[:, None]

    w = params.weights
    if params.architecture == "linear":
        grads = {"W": Z.T @ dout, "b": dout.sum(axis=0)}
    else:
        pre, h = cache
        dh = dout @ w["W2"].T
        dpre = dh * (pre > 0)
        grads = {"W2": h.T @ dout, "b2": dout.sum(axis=0),
                 "W1": Z.T @ dpre, "b1": dpre.sum(axis=0)}
    lam = config.weight_decay
    if lam:
        for k in params.weight_names:
            grads[k] = grads[k] + lam * w[k]
    return value + penalty(params, lam), grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> AdamState:
        return cls({k: np.zeros_like(a) for k, a in params.weights.items()},
                   {k: np.zeros_like(a) for k, a in params.weights.items()}, 0)


def adam_step(params: ModelParams, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected ADAM update; returns new ``(params, state)`` without mutating inputs."""
    b1, b2, eps, lr = config.beta1, config.beta2, config.adam_eps, config.learning_rate
    t = state.step + 1
    new_w, new_m, new_v = {}, {}, {}
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k, p in params.weights.items():
        g = grads[k]
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * g * g
        new_w[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return replace(params, weights=new_w), AdamState(new_m, new_v, t)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    best_val_loss: float


def train(train_set, val_set, config: TrainConfig, params: ModelParams | None = None):
    """Mini-batch ADAM with seeded per-epoch shuffling.

    ``train_set``/``val_set`` are ``(X_raw, y)`` pairs or :class:`TabularSet`.
    Returns the parameters with the lowest validation loss and the per-epoch
    history (epoch 0 is the initial state).
    """
    Xtr, ytr = _xy(train_set)
    Xva, yva = _xy(val_set)
    if ytr.size == 0 or yva.size == 0:
        raise ValueError("train and validation sets must be non-empty")
    if params is None:
        params = init_params(Xtr.shape[1], config, *fit_normalization(Xtr, ytr))
    Ztr, Zva = params.normalize(Xtr), params.normalize(Xva)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.seed)

    def evaluate(p):
        tr = data_loss(_forward(p, Ztr)[0], ytr, config.loss) + penalty(p, config.weight_decay)
        va = data_loss(_forward(p, Zva)[0], yva, config.loss)
        return tr, va

    tr, va = evaluate(params)
    best, best_val = params.copy(), va
    history = [EpochRecord(0, tr, va, va)]
    bs = config.batch_size
    n = ytr.size
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            value, grads = loss_and_grad(params, (Ztr[idx], ytr[idx]), config)
            if not math.isfinite(value):
                raise TrainingDiverged(epoch)
            params, state = adam_step(params, grads, state, config)
        tr, va = evaluate(params)
        if not (math.isfinite(tr) and math.isfinite(va)):
            raise TrainingDiverged(epoch)
        if va < best_val:
            best, best_val = params.copy(), va
        history.append(EpochRecord(epoch, tr, va, best_val))
    return best, history


def _xy(data):
    if isinstance(data, TabularSet):
        return data.X, data.y
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)


def rmse(pred, y) -> float:
    r = np.asarray(pred) - np.asarray(y)
    return math.sqrt(float(np.mean(r * r)))


def learning_curve(train_set: TabularSet, val_set: TabularSet, test_set: TabularSet,
                   config: TrainConfig, fractions) -> list[dict]:
    """RMSE skill vs smart persistence on ``test_set`` for nested training subsets."""
    fractions = [float(f) for f in fractions]
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    perm = np.random.default_rng(config.seed).permutation(len(train_set))
    spm_rmse = rmse(test_set.spm, test_set.y)
    out = []
    for f in fractions:
        k = max(1, math.ceil(f * len(train_set)))
        subset = train_set if f == 1.0 else train_set.take(np.sort(perm[:k]))
        params, _ = train(subset, val_set, config)
        model_rmse = rmse(predict(params, test_set.X), test_set.y)
        out.append({"fraction": f, "n_train": len(subset), "rmse": model_rmse,
                    "rmse_spm": spm_rmse, "fs_rmse": forecast_skill(model_rmse, spm_rmse)})
    return out


# --------------------------------------------------------------------------- checkpoints

def save_checkpoint(path, params: ModelParams, config: TrainConfig | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": params.architecture,
        "features": list(FEATURE_NAMES) if params.x_mean.size == len(FEATURE_NAMES) else None,
        "normalization": {"x_mean": params.x_mean.tolist(), "x_scale": params.x_scale.tolist(),
                          "y_mean": params.y_mean, "y_scale": params.y_scale},
        "weights": {k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()}
                    for k, v in sorted(params.weights.items())},
        "config": asdict(config) if config is not None else None,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> ModelParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    norm = doc["normalization"]
    weights = {k: np.array(w["values"], dtype=np.float64).reshape(w["shape"])
               for k, w in doc["weights"].items()}
    return ModelParams(doc["architecture"], weights, np.array(norm["x_mean"]),
                       np.array(norm["x_scale"]), norm["y_mean"], norm["y_scale"])
