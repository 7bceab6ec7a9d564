"""Small float64 neural-network kernel with hand-written backward passes.

Every forward accepts either a single vector or a batch with a leading axis.
Backward functions return gradients summed over the batch.
"""
from dataclasses import dataclass, field, fields
from typing import Dict

import numpy as np


def _check_finite(name, a):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(a):
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


class _ParamGroup:
    """Mixin for dataclasses whose fields are all numpy arrays."""

    def arrays(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def zeros_like(self):
        return type(self)(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    def copy(self):
        return type(self)(**{k: v.copy() for k, v in self.arrays().items()})


# ---------------------------------------------------------------- dense

@dataclass
class DenseParams(_ParamGroup):
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    @classmethod
    def init(cls, rng, n_in, n_out):
        return cls(uniform_init(rng, (n_out, n_in), n_in), uniform_init(rng, n_out, n_in))


def dense_forward(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.weight.shape[1]:
        raise ValueError(f"dense input width {x.shape[-1]} != {p.weight.shape[1]}")
    return x @ p.weight.T + p.bias


def dense_backward(p, x, dy):
    """Returns ``(dx, dW, db)`` for ``y = W x + b``."""
    x = np.asarray(x, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if dy.shape[-1] != p.weight.shape[0] or x.shape[:-1] != dy.shape[:-1]:
        raise ValueError("dense backward shape mismatch")
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dx = dy @ p.weight
    return dx, dy2.T @ x2, dy2.sum(axis=0)


# ---------------------------------------------------------------- embedding

@dataclass
class EmbeddingTable(_ParamGroup):
    """Lookup table whose row 0 is a frozen all-zero pad entry."""
    table: np.ndarray  # (M + 1, M_e)

    PAD = 0

    @classmethod
    def init(cls, rng, n_tokens, dim):
        table = uniform_init(rng, (n_tokens + 1, dim), 1)
        table[cls.PAD] = 0.0
        return cls(table)


def embed_lookup(t, idx):
    idx = np.asarray(idx)
    if np.any(idx < 0) or np.any(idx >= t.table.shape[0]):
        raise IndexError(f"embedding index out of range [0, {t.table.shape[0]})")
    return t.table[idx]


def embed_backward(t, idx, dy):
    """Gradient of the table; repeated indices accumulate, the pad row stays zero."""
    idx = np.asarray(idx).ravel()
    dy = np.asarray(dy, dtype=float).reshape(len(idx), -1)
    grad = np.zeros_like(t.table)
    np.add.at(grad, idx, dy)
    grad[EmbeddingTable.PAD] = 0.0
    return grad


# ---------------------------------------------------------------- GRU

@dataclass
class GruParams(_ParamGroup):
    W_z: np.ndarray
    W_r: np.ndarray
    W_n: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_n: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_in: np.ndarray
    b_hn: np.ndarray

    @property
    def hidden_size(self):
        return self.U_z.shape[0]

    @property
    def input_size(self):
        return self.W_z.shape[1]

    @classmethod
    def init(cls, rng, n_in, hidden):
        w = {k: uniform_init(rng, (hidden, n_in), n_in) for k in ("W_z", "W_r", "W_n")}
        u = {k: uniform_init(rng, (hidden, hidden), hidden) for k in ("U_z", "U_r", "U_n")}
        b = {k: uniform_init(rng, hidden, hidden) for k in ("b_z", "b_r", "b_in", "b_hn")}
        return cls(**w, **u, **b)

    @classmethod
    def zeros(cls, n_in, hidden):
        shapes = dict(W_z=(hidden, n_in), W_r=(hidden, n_in), W_n=(hidden, n_in),
                      U_z=(hidden, hidden), U_r=(hidden, hidden), U_n=(hidden, hidden),
                      b_z=hidden, b_r=hidden, b_in=hidden, b_hn=hidden)
        return cls(**{k: np.zeros(s) for k, s in shapes.items()})


@dataclass
class GruCache:
    x: np.ndarray
    h: np.ndarray
    z: np.ndarray
    r: np.ndarray
    n: np.ndarray
    hn_lin: np.ndarray  # U_n h + b_hn, before the reset gate


def gru_cell_forward(p, x, h):
    """One GRU step with the reset gate applied to ``U_n h + b_hn``.

    z = sig(W_z x + U_z h + b_z), r = sig(W_r x + U_r h + b_r),
    n = tanh(W_n x + b_in + r * (U_n h + b_hn)), h' = (1 - z) * n + z * h.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape[-1] != p.input_size or h.shape[-1] != p.hidden_size:
        raise ValueError("GRU input/hidden width mismatch")
    if x.shape[:-1] != h.shape[:-1]:
        raise ValueError("GRU batch shape mismatch")
    z = sigmoid(x @ p.W_z.T + h @ p.U_z.T + p.b_z)
    r = sigmoid(x @ p.W_r.T + h @ p.U_r.T + p.b_r)
    hn_lin = h @ p.U_n.T + p.b_hn
    n = np.tanh(x @ p.W_n.T + p.b_in + r * hn_lin)
    h_next = (1.0 - z) * n + z * h
    return h_next, GruCache(x, h, z, r, n, hn_lin)


def gru_cell_backward(p, cache, dh_next):
    """Returns ``(dx, dh, grads)``; ``grads`` is a GruParams of batch-summed gradients."""
    x, h, z, r, n, hn_lin = (cache.x, cache.h, cache.z, cache.r, cache.n, cache.hn_lin)
    dh_next = np.asarray(dh_next, dtype=float)
    dz = dh_next * (h - n)
    dn = dh_next * (1.0 - z)
    da_n = dn * (1.0 - n * n)
    dr = da_n * hn_lin
    dhn_lin = da_n * r
    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)

    dx = da_z @ p.W_z + da_r @ p.W_r + da_n @ p.W_n
    dh = dh_next * z + da_z @ p.U_z + da_r @ p.U_r + dhn_lin @ p.U_n

    x2 = x.reshape(-1, x.shape[-1])
    h2 = h.reshape(-1, h.shape[-1])
    H = p.hidden_size
    az, ar, an, ahn = (a.reshape(-1, H) for a in (da_z, da_r, da_n, dhn_lin))
    grads = GruParams(
        W_z=az.T @ x2, W_r=ar.T @ x2, W_n=an.T @ x2,
        U_z=az.T @ h2, U_r=ar.T @ h2, U_n=ahn.T @ h2,
        b_z=az.sum(0), b_r=ar.sum(0), b_in=an.sum(0), b_hn=ahn.sum(0),
    )
    return dx, dh, grads


# ---------------------------------------------------------------- loss

def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target):
    """Per-example ``-log softmax(logits)[target]`` and its gradient w.r.t. the logits.

    ``target`` is a 0-based class index (or an array of them for a batch).
    """
    logits = np.asarray(logits, dtype=float)
    _check_finite("logits", logits)
    target = np.asarray(target)
    M = logits.shape[-1]
    if np.any(target < 0) or np.any(target >= M):
        raise IndexError(f"target out of range [0, {M})")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_p = shifted - log_z
    onehot = np.zeros_like(logits)
    np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
    loss = -np.take_along_axis(log_p, target[..., None], axis=-1)[..., 0]
    return loss, np.exp(log_p) - onehot


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


def adam_step(state, params, grads, frozen_rows=None):
    """Bias-corrected Adam update of ``params`` (name -> array) in place.

    ``frozen_rows`` maps a parameter name to row indices that are never touched.
    """
    frozen_rows = frozen_rows or {}
    if set(params) != set(grads):
        raise ValueError("params and grads have different keys")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        rows = frozen_rows.get(name)
        if rows is not None:
            step[rows] = 0.0
        p -= step
    return params


# ---------------------------------------------------------------- checking

def numerical_grad(loss_fn, params, eps=1e-5, skip=None):
    """Central-difference gradient of ``loss_fn()`` w.r.t. every array in ``params``.

    Arrays are perturbed in place and restored. ``skip`` maps names to rows left at zero.
    """
    skip = skip or {}
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        skipped = np.zeros(p.shape, dtype=bool)
        if name in skip:
            skipped[skip[name]] = True
        skipped = skipped.reshape(-1)
        for i in range(flat.size):
            if skipped[i]:
                continue
            old = flat[i]
            flat[i] = old + eps
            lp = loss_fn()
            flat[i] = old - eps
            lm = loss_fn()
            flat[i] = old
            gflat[i] = (lp - lm) / (2 * eps)
        out[name] = g
    return out


def relative_error(a, n):
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return np.abs(a - n) / denom


def grad_check_groups(loss_and_grad, params, eps=1e-5, skip=None):
    """Max relative error per parameter name.

    ``loss_and_grad()`` must return ``(loss, grads)`` evaluated at the current
    contents of ``params``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    _, analytic = loss_and_grad()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    numeric = numerical_grad(lambda: loss_and_grad()[0], params, eps, skip)
    return {k: float(relative_error(analytic[k], numeric[k]).max(initial=0.0)) for k in params}


def grad_check(loss_and_grad, params, eps=1e-5, skip=None):
    """Largest relative error between analytic and central-difference gradients."""
    return max(grad_check_groups(loss_and_grad, params, eps, skip).values())
