"""Learned intersection centrality.

A two-layer mean-aggregation graph network is fit to exact betweenness on a
few representative zones and then applied unchanged to every zone::

    h1  = W1 . mean_{u in {v} + N(v)} x_u + b1
    c_v = sigmoid(W2 . relu(h1) + b2)

Scores are compared only within a zone, so every input feature is scaled
zone-locally.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .roadgraph import RoadGraph, minmax

log = logging.getLogger(__name__)

MODEL_FORMAT = "evsiting-gnn"
MODEL_VERSION = 1
FREQUENCIES = (1.0, 2.0)
INPUT_DIM = 1 + 4 * len(FREQUENCIES) + 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    hidden_dim: int = 16
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0
    init: str = "xavier"  # or "zeros"
    weight_decay: float = 0.0


@dataclass
class GnnModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float = 0.0
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        self.W2 = np.asarray(self.W2, dtype=float).reshape(1, -1)
        self.b2 = float(self.b2)
        h = self.W1.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (1, h):
            raise ValueError("inconsistent parameter shapes")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1] if self.loss_history else math.nan

    @classmethod
    def initialise(cls, input_dim: int = INPUT_DIM, config: TrainConfig | None = None):
        config = config or TrainConfig()
        h = config.hidden_dim
        if config.init == "zeros":
            return cls(np.zeros((h, input_dim)), np.zeros(h), np.zeros((1, h)), 0.0)
        rng = np.random.default_rng(config.seed)
        lim1 = math.sqrt(6.0 / (input_dim + h))
        lim2 = math.sqrt(6.0 / (h + 1))
        return cls(rng.uniform(-lim1, lim1, (h, input_dim)), np.zeros(h),
                   rng.uniform(-lim2, lim2, (1, h)), 0.0)

    def params(self) -> list:
        return [self.W1, self.b1, self.W2, np.array([self.b2])]

    def set_params(self, params) -> None:
        self.W1, self.b1, self.W2 = (p.copy() for p in params[:3])
        self.b2 = float(params[3][0])

    def to_json(self) -> str:
        return json.dumps({
            "format": MODEL_FORMAT, "version": MODEL_VERSION,
            "W1": self.W1.tolist(), "b1": self.b1.tolist(),
            "W2": self.W2.tolist(), "b2": self.b2,
            "loss_history": [float(v) for v in self.loss_history],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GnnModel":
        data = json.loads(text)
        if data.get("format") != MODEL_FORMAT or data.get("version") != MODEL_VERSION:
            raise ValueError("unrecognised model file header")
        return cls(np.array(data["W1"]), np.array(data["b1"]), np.array(data["W2"]),
                   data["b2"], list(data.get("loss_history", [])))


@dataclass
class CentralityScores:
    zone_id: str
    node_ids: list
    scores: np.ndarray


# -- features -------------------------------------------------------------------

def positional_encoding(x, y) -> np.ndarray:
    """Sin/cos encodings of zone-centred, extent-scaled planar coordinates."""
    cols = []
    for coord in (np.asarray(x, float), np.asarray(y, float)):
        centre = 0.5 * (coord.max() + coord.min())
        half = 0.5 * (coord.max() - coord.min())
        u = (coord - centre) / half if half > 0 else np.zeros_like(coord)
        for f in FREQUENCIES:
            cols.append(np.sin(0.5 * np.pi * f * u))
            cols.append(np.cos(0.5 * np.pi * f * u))
    return np.column_stack(cols)


def node_features(g: RoadGraph, poi_density=None) -> np.ndarray:
    """``(n, INPUT_DIM)`` features: scaled degree, positional code, POI density."""
    deg = g.degree.astype(float)
    deg = deg / deg.max() if deg.max() > 0 else deg
    poi = np.zeros(g.n_nodes) if poi_density is None else minmax(poi_density)
    return np.column_stack([deg, positional_encoding(g.x, g.y), poi])


def mean_aggregator(g: RoadGraph) -> sp.csr_matrix:
    """Row-normalised ``A + I``: mean over each node and its neighbours."""
    n = g.n_nodes
    e = g.edges
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return sp.diags(1.0 / np.asarray(a.sum(axis=1)).ravel()) @ a


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward(model: GnnModel, agg: np.ndarray):
    h1 = agg @ model.W1.T + model.b1
    z = np.maximum(h1, 0.0)
    out = _sigmoid(z @ model.W2[0] + model.b2)
    return h1, z, out


def forward(model: GnnModel, g: RoadGraph, feats: np.ndarray) -> CentralityScores:
    feats = np.asarray(feats, dtype=float)
    if feats.ndim != 2 or feats.shape != (g.n_nodes, model.input_dim):
        raise ValueError(
            f"feature matrix {feats.shape} does not match ({g.n_nodes}, {model.input_dim})")
    _, _, out = _forward(model, mean_aggregator(g) @ feats)
    return CentralityScores(g.zone_id, list(g.node_ids), out)


# -- training --------------------------------------------------------------------

def loss_and_grads(model: GnnModel, agg: np.ndarray, target: np.ndarray,
                   weight_decay: float = 0.0):
    """Mean squared error (plus optional L2 on the weight matrices) and its
    gradients w.r.t. ``(W1, b1, W2, b2)``."""
    h1, z, out = _forward(model, agg)
    n = len(target)
    resid = out - target
    loss = float(np.mean(resid ** 2))
    g_s = (2.0 / n) * resid * out * (1.0 - out)
    dW2 = (g_s @ z).reshape(1, -1)
    db2 = np.array([g_s.sum()])
    dh1 = np.outer(g_s, model.W2[0]) * (h1 > 0)
    dW1 = dh1.T @ agg
    db1 = dh1.sum(axis=0)
    if weight_decay:
        loss += weight_decay * float(np.sum(model.W1 ** 2) + np.sum(model.W2 ** 2))
        dW1 = dW1 + 2.0 * weight_decay * model.W1
        dW2 = dW2 + 2.0 * weight_decay * model.W2
    return loss, [dW1, db1, dW2, db2]


def _stack(zones, poi=None):
    aggs, targets = [], []
    for k, (g, target) in enumerate(zones):
        target = np.asarray(target, dtype=float)
        if target.shape != (g.n_nodes,):
            raise ValueError(f"zone {g.zone_id}: target length mismatch")
        if np.any(target < 0) or np.any(target > 1):
            raise ValueError(f"zone {g.zone_id}: targets must be normalised to [0, 1]")
        feats = node_features(g, None if poi is None else poi[k])
        aggs.append(mean_aggregator(g) @ feats)
        targets.append(target)
    return np.vstack(aggs), np.concatenate(targets)


def train(zones, config: TrainConfig | None = None, poi=None) -> GnnModel:
    """Full-batch Adam on the pooled node set of the training zones.

    A step that would raise the loss is rejected and the learning rate halved,
    so ``loss_history`` never increases.
    """
    config = config or TrainConfig()
    zones = list(zones)
    if not zones:
        raise ValueError("at least one training zone is required")
    agg, target = _stack(zones, poi)
    model = GnnModel.initialise(agg.shape[1], config)
    lr = config.learning_rate
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(p) for p in model.params()]
    v = [np.zeros_like(p) for p in model.params()]
    loss, grads = loss_and_grads(model, agg, target, config.weight_decay)
    history = [loss]
    for step in range(1, config.epochs + 1):
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {step}")
        old = [p.copy() for p in model.params()]
        new = []
        for i, (p, gr) in enumerate(zip(old, grads)):
            m[i] = beta1 * m[i] + (1 - beta1) * gr
            v[i] = beta2 * v[i] + (1 - beta2) * gr * gr
            mhat = m[i] / (1 - beta1 ** step)
            vhat = v[i] / (1 - beta2 ** step)
            new.append(p - lr * mhat / (np.sqrt(vhat) + eps))
        model.set_params(new)
        new_loss, new_grads = loss_and_grads(model, agg, target, config.weight_decay)
        if not math.isfinite(new_loss):
            raise TrainingDiverged(f"non-finite loss at epoch {step} (lr={lr:g})")
        if new_loss > loss:
            model.set_params(old)
            lr *= 0.5
        else:
            loss, grads = new_loss, new_grads
        history.append(loss)
    model.loss_history = history
    log.info("trained on %d nodes, final loss %.6g", len(target), loss)
    return model


# -- filtering ---------------------------------------------------------------------

def quantile_threshold(values, tau: float) -> float:
    """Order statistic of rank ``floor(tau * n) + 1`` (1-based), capped at ``n``."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("empty score set")
    return float(v[min(int(math.floor(tau * v.size)), v.size - 1)])


def percentile_filter(scores: CentralityScores, tau: float = 0.5) -> set:
    """Node ids whose score reaches the zone's ``tau`` quantile (ties kept)."""
    thr = quantile_threshold(scores.scores, tau)
    return {nid for nid, s in zip(scores.node_ids, scores.scores) if s >= thr}


def write_scores_csv(path, scored) -> None:
    """``scored``: iterable of ``(CentralityScores, kept_id_set)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zone_id", "node_id", "c_v", "kept"])
        for sc, kept in scored:
            for nid, s in zip(sc.node_ids, sc.scores):
                writer.writerow([sc.zone_id, nid, f"{s:.9f}", int(nid in kept)])
