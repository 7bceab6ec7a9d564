"""Recurrent beam trackers: LiDAR-driven model and beam-history baseline.

Both share one architecture: an input embedding, a GRU unrolled over W
observed steps plus V zero-input padding steps, and a softmax classifier read
out at the last V + 1 steps (lead times 0..V). Parameters are tied across
time steps.
"""
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from .nn import (AdamState, DenseParams, EmbeddingTable, GruParams, adam_step,
                 dense_backward, dense_forward, embed_backward, embed_lookup,
                 gru_cell_backward, gru_cell_forward, softmax)

MODES = ("lidar", "baseline")


@dataclass(frozen=True)
class TrackerConfig:
    mode: str = "lidar"
    W: int = 8
    V: int = 3
    gamma: int = 4
    D: int = 180
    D_e: int = 64
    M: int = 64
    M_e: int = 64
    H: int = 64

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.W < 1 or self.V < 0:
            raise ValueError("need W >= 1 and V >= 0")
        if not 1 <= self.gamma <= self.V + 1:
            raise ValueError(f"gamma must lie in [1, V+1={self.V + 1}]")
        for name in ("D", "D_e", "M", "M_e", "H"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def embed_dim(self):
        return self.D_e if self.mode == "lidar" else self.M_e


@dataclass
class TrackerParams:
    embed: Union[DenseParams, EmbeddingTable]
    gru: GruParams
    classifier: DenseParams

    @classmethod
    def init(cls, cfg, rng):
        if cfg.mode == "lidar":
            embed = DenseParams.init(rng, cfg.D, cfg.D_e)
        else:
            embed = EmbeddingTable.init(rng, cfg.M, cfg.M_e)
        gru = GruParams.init(rng, cfg.embed_dim, cfg.H)
        classifier = DenseParams.init(rng, cfg.H, cfg.M)
        return cls(embed, gru, classifier)

    @classmethod
    def zeros(cls, cfg):
        p = cls.init(cfg, np.random.default_rng(0))
        for a in p.named_arrays().values():
            a[...] = 0.0
        return p

    def named_arrays(self):
        """Fixed-order mapping ``group.field -> array`` (views, not copies)."""
        out = {}
        for group in ("embed", "gru", "classifier"):
            for k, v in getattr(self, group).arrays().items():
                out[f"{group}.{k}"] = v
        return out

    def frozen_rows(self):
        if isinstance(self.embed, EmbeddingTable):
            return {"embed.table": [EmbeddingTable.PAD]}
        return {}

    def copy(self):
        return TrackerParams(self.embed.copy(), self.gru.copy(), self.classifier.copy())


@dataclass
class TrainingSample:
    observations: np.ndarray  # (W, D) normalized scans, or (W,) 1-based beam indices
    labels: np.ndarray  # (V + 1,) 1-based optimal beams for t..t+V


def _embed(params, cfg, obs):
    """Embedded observations, shape (B, W, E)."""
    if cfg.mode == "lidar":
        if obs.ndim != 3 or obs.shape[1:] != (cfg.W, cfg.D):
            raise ValueError(f"lidar observations must be (B, {cfg.W}, {cfg.D}), got {obs.shape}")
        if not isinstance(params.embed, DenseParams):
            raise ValueError("lidar mode needs a dense embedding")
        return dense_forward(params.embed, obs)
    if obs.ndim != 2 or obs.shape[1] != cfg.W:
        raise ValueError(f"beam observations must be (B, {cfg.W}), got {obs.shape}")
    if not isinstance(params.embed, EmbeddingTable):
        raise ValueError("baseline mode needs an embedding table")
    if np.any(obs < 1) or np.any(obs > cfg.M):
        raise ValueError("beam indices must lie in 1..M")
    return embed_lookup(params.embed, obs.astype(np.int64))


@dataclass
class _Trace:
    obs: np.ndarray
    inputs: np.ndarray  # (B, T, E)
    caches: list
    hidden: list  # hidden state after each output step
    probs: np.ndarray  # (B, V + 1, M)


def forward_batch(params, cfg, obs, keep_trace=False):
    """Scores for a batch: array of shape (B, V + 1, M)."""
    obs = np.asarray(obs)
    emb = _embed(params, cfg, obs)
    B = emb.shape[0]
    # padding steps feed the zero vector in embedding space
    inputs = np.concatenate([emb, np.zeros((B, cfg.V, emb.shape[2]))], axis=1)
    h = np.zeros((B, cfg.H))
    caches, hidden = [], []
    for t in range(cfg.W + cfg.V):
        h, cache = gru_cell_forward(params.gru, inputs[:, t], h)
        caches.append(cache)
        if t >= cfg.W - 1:
            hidden.append(h)
    hs = np.stack(hidden, axis=1)  # (B, V + 1, H)
    probs = softmax(dense_forward(params.classifier, hs))
    if keep_trace:
        return probs, _Trace(obs, inputs, caches, hs, probs)
    return probs


def _loss_and_dlogits(probs, labels, gamma):
    labels = np.asarray(labels)
    B, n_out, M = probs.shape
    if not 1 <= gamma <= n_out:
        raise ValueError(f"gamma must lie in [1, {n_out}]")
    if labels.shape != (B, n_out):
        raise ValueError(f"labels must be ({B}, {n_out}), got {labels.shape}")
    if np.any(labels < 1) or np.any(labels > M):
        raise IndexError("labels must lie in 1..M")
    tgt = labels - 1
    picked = np.take_along_axis(probs, tgt[..., None], axis=-1)[..., 0]
    ce = -np.log(np.maximum(picked, np.finfo(float).tiny))
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, tgt[..., None], 1.0, axis=-1)
    d = probs - onehot
    d[:, : n_out - gamma] = 0.0
    loss = ce[:, n_out - gamma:].mean()
    return float(loss), d / (B * gamma)


def tracker_loss(outputs, labels, gamma):
    """Mean cross-entropy over the last ``gamma`` outputs.

    ``outputs`` are score vectors (probabilities) for lead times 0..V; returns
    the loss and its gradient w.r.t. each output's logits. Earlier outputs get
    zero gradient. A leading batch axis is allowed; the loss is then averaged
    over it as well.
    """
    probs = np.asarray(outputs, dtype=float)
    single = probs.ndim == 2
    if single:
        probs = probs[None]
        labels = np.asarray(labels)[None]
    loss, d = _loss_and_dlogits(probs, labels, gamma)
    return loss, (d[0] if single else d)


def backward_batch(params, cfg, trace, dlogits):
    """Gradients of all parameters, keyed like ``params.named_arrays()``."""
    hs = trace.hidden
    dhs, dWc, dbc = dense_backward(params.classifier, hs, dlogits)
    B = hs.shape[0]
    gru_grads = params.gru.zeros_like()
    g_arrays = gru_grads.arrays()
    dinputs = np.zeros_like(trace.inputs)
    dh = np.zeros((B, cfg.H))
    for t in reversed(range(cfg.W + cfg.V)):
        if t >= cfg.W - 1:
            dh = dh + dhs[:, t - (cfg.W - 1)]
        dx, dh, g = gru_cell_backward(params.gru, trace.caches[t], dh)
        dinputs[:, t] = dx
        for k, v in g.arrays().items():
            g_arrays[k] += v
    demb = dinputs[:, : cfg.W]
    grads = {}
    if cfg.mode == "lidar":
        _, dW, db = dense_backward(params.embed, trace.obs, demb)
        grads["embed.weight"], grads["embed.bias"] = dW, db
    else:
        grads["embed.table"] = embed_backward(params.embed, trace.obs.astype(np.int64), demb)
    for k, v in g_arrays.items():
        grads[f"gru.{k}"] = v
    grads["classifier.weight"], grads["classifier.bias"] = dWc, dbc
    return grads


def loss_and_grad(params, cfg, obs, labels):
    probs, trace = forward_batch(params, cfg, obs, keep_trace=True)
    loss, d = _loss_and_dlogits(probs, labels, cfg.gamma)
    return loss, backward_batch(params, cfg, trace, d)


def tracker_forward(params, cfg, sample) -> List[np.ndarray]:
    """Score vectors for lead times 0..V of one sample."""
    probs = forward_batch(params, cfg, np.asarray(sample.observations)[None])
    return list(probs[0])


def stack_samples(samples, cfg):
    if not samples:
        raise ValueError("no samples")
    dtype = float if cfg.mode == "lidar" else np.int64
    obs = np.stack([np.asarray(s.observations, dtype=dtype) for s in samples])
    labels = np.stack([np.asarray(s.labels, dtype=np.int64) for s in samples])
    return obs, labels


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def train(params, cfg, train_set, train_cfg=TrainConfig(), log=None):
    """Mini-batch Adam training. Returns ``(params, per-epoch mean loss)``.

    ``train_set`` is a list of TrainingSample or a pre-stacked ``(obs, labels)``
    pair. ``params`` is updated in place.
    """
    if isinstance(train_set, tuple):
        obs, labels = train_set
    else:
        obs, labels = stack_samples(train_set, cfg)
    n = len(obs)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 2]))
    state = AdamState(train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
    arrays = params.named_arrays()
    frozen = params.frozen_rows()
    curve = []
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            loss, grads = loss_and_grad(params, cfg, obs[idx], labels[idx])
            adam_step(state, arrays, grads, frozen)
            total += loss * len(idx)
        curve.append(total / n)
        if log is not None:
            log(epoch, curve[-1])
    return params, curve


def rank_beams(scores):
    """1-based beam indices ordered by descending score, ties to the lowest index."""
    return np.argsort(-np.asarray(scores), axis=-1, kind="stable") + 1


def predict_topk(params, cfg, observations, v, k):
    if not 0 <= v <= cfg.V:
        raise ValueError(f"lead time must lie in [0, {cfg.V}]")
    if not 1 <= k <= cfg.M:
        raise ValueError(f"k must lie in [1, {cfg.M}]")
    probs = forward_batch(params, cfg, np.asarray(observations)[None])
    return [int(i) for i in rank_beams(probs[0, v])[:k]]
