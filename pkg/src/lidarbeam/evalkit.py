"""Top-k accuracy tables, the operation-window experiment and overhead accounting."""
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .datapipe import normalize_scan, window_arrays
from .tracker import forward_batch, rank_beams

DEFAULT_KS = (1, 2, 3, 5)


def topk_accuracy(predictions, truths, k):
    """Fraction of samples whose true beam is among the first ``k`` predictions."""
    if len(predictions) == 0:
        raise ValueError("no predictions")
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    hits = 0
    for pred, truth in zip(predictions, truths):
        if len(pred) < k:
            raise ValueError(f"prediction list shorter than k={k}")
        hits += int(truth) in [int(p) for p in pred[:k]]
    return hits / len(predictions)


def _topk_hits(ranked, truths, k):
    """Vectorised hit mask; ``ranked`` is (n, M) 1-based, ``truths`` (n,)."""
    return np.any(ranked[:, :k] == np.asarray(truths)[:, None], axis=1)


@dataclass
class AccuracyTable:
    ks: List[int]
    accuracy: np.ndarray  # (len(ks), V + 1)
    num_samples: int

    def column(self, v):
        return dict(zip(self.ks, self.accuracy[:, v]))

    def to_csv(self):
        V1 = self.accuracy.shape[1]
        head = "k," + ",".join(f"lead_{v}" for v in range(V1)) + ",samples"
        rows = [head]
        for k, acc in zip(self.ks, self.accuracy):
            rows.append(f"{k}," + ",".join(f"{a:.4f}" for a in acc) + f",{self.num_samples}")
        return "\n".join(rows) + "\n"


def evaluate_table(params, cfg, test_set, ks=DEFAULT_KS, batch_size=1024):
    """Top-k accuracy of every lead-time output over a windowed test set.

    ``test_set`` is a pre-stacked ``(obs, labels)`` pair.
    """
    obs, labels = test_set
    if len(obs) == 0:
        raise ValueError("empty test set")
    ranked = np.concatenate([
        rank_beams(forward_batch(params, cfg, obs[i:i + batch_size]))
        for i in range(0, len(obs), batch_size)
    ])  # (n, V + 1, M)
    acc = np.array([[_topk_hits(ranked[:, v], labels[:, v], k).mean()
                     for v in range(cfg.V + 1)] for k in ks])
    return AccuracyTable(list(ks), acc, len(obs))


@dataclass
class OpWindowCurve:
    windows: List[int]
    lidar: np.ndarray
    baseline: np.ndarray
    k: int
    targets: int  # distinct (sequence, step) prediction targets
    skipped: int  # sequences shorter than W + L_max

    def to_csv(self):
        rows = ["L,lidar,baseline"]
        for L, a, b in zip(self.windows, self.lidar, self.baseline):
            rows.append(f"{L},{a:.4f},{b:.4f}")
        return "\n".join(rows) + "\n"


def _eligible_targets(n, W, V):
    # a target tau is predicted from the window ending at tau - 1; restricting
    # tau - 1 + V < n keeps alignment with the windowed test samples
    return range(W, n - V + 1)


def _baseline_recursive_hits(params, cfg, truth, L, k):
    """Per-target hit rate of the baseline under refresh/predict cycles.

    Cycles of W exhaustive-search steps followed by L steps served by the
    model's own top-1 first-future predictions are simulated for every cycle
    phase; each target's hits are averaged over the phases that predict it.
    """
    n, W, V = len(truth), cfg.W, cfg.V
    hits: Dict[int, List[bool]] = {}
    # all phases run in lockstep so the model sees one batch per position j
    runs = []
    for phase in range(W + L):
        s = phase
        while s + W - 1 <= n - 1:
            runs.append(s)
            s += W + L
    if not runs:
        return hits
    starts = np.array(runs)
    buffers = np.stack([truth[s:s + W] for s in starts])  # refresh phase
    for j in range(1, L + 1):
        taus = starts + W + j - 1
        live = taus - 1 <= n - 1 - V
        if not live.any():
            break
        starts, buffers, taus = starts[live], buffers[live], taus[live]
        probs = forward_batch(params, cfg, buffers)
        ranked = rank_beams(probs[:, 1])
        ok = _topk_hits(ranked, truth[taus], k)
        for tau, hit in zip(taus, ok):
            hits.setdefault(int(tau), []).append(bool(hit))
        buffers = np.concatenate([buffers[:, 1:], ranked[:, :1]], axis=1)
    return hits


def operation_window_eval(baseline_params, lidar_params, baseline_cfg, lidar_cfg,
                          test_sequences, L_max=10, k=1, max_range=None):
    """First-future-beam top-k accuracy versus operation window length L.

    L = 0 is the standard evaluation with ground-truth beam histories. Each
    eligible target step is weighted equally, so the LiDAR curve (whose
    inputs never degrade) is the same at every L.
    """
    if baseline_cfg.W != lidar_cfg.W or baseline_cfg.V != lidar_cfg.V:
        raise ValueError("both models must share W and V")
    if baseline_cfg.V < 1:
        raise ValueError("first-future prediction needs V >= 1")
    W, V = lidar_cfg.W, lidar_cfg.V
    usable = [s for s in test_sequences if len(s) >= W + L_max]
    skipped = len(test_sequences) - len(usable)
    if not usable:
        raise ValueError("no test sequence is long enough")

    lidar_hit, base_hit0 = [], []
    for seq in usable:
        taus = np.array(list(_eligible_targets(len(seq), W, V)))
        if len(taus) == 0:
            continue
        scans = seq.scans if max_range is None else normalize_scan(seq.scans, max_range)
        obs = np.stack([scans[t - W:t] for t in taus]).astype(float)
        truth = seq.best_index[taus]
        lidar_hit.append(_topk_hits(rank_beams(forward_batch(lidar_params, lidar_cfg, obs)[:, 1]),
                                    truth, k))
        hist = np.stack([seq.best_index[t - W:t] for t in taus])
        base_hit0.append(_topk_hits(rank_beams(forward_batch(baseline_params, baseline_cfg, hist)[:, 1]),
                                    truth, k))
    lidar_acc = float(np.concatenate(lidar_hit).mean())
    targets = sum(len(h) for h in lidar_hit)

    windows = list(range(L_max + 1))
    base_curve = [float(np.concatenate(base_hit0).mean())]
    for L in windows[1:]:
        per_target = []
        for seq in usable:
            hits = _baseline_recursive_hits(baseline_params, baseline_cfg, seq.best_index, L, k)
            per_target.extend(np.mean(h) for h in hits.values())
        base_curve.append(float(np.mean(per_target)))
    return OpWindowCurve(windows, np.full(len(windows), lidar_acc), np.array(base_curve),
                         k, targets, skipped)


def training_overhead(L, W, k, M):
    """Beams measured per step by the LiDAR model relative to the baseline.

    The LiDAR model measures ``k`` beams every step. The baseline spends ``W``
    exhaustive steps of ``M`` beams and ``L`` refinement steps of ``k`` beams
    per cycle.
    """
    if min(L, W, k, M) <= 0:
        raise ValueError("all arguments must be positive")
    if k > M:
        raise ValueError("k cannot exceed M")
    return k / ((W * M + L * k) / (W + L))
