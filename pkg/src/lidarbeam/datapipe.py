"""Dataset file I/O, sequence-level splitting, windowing and scan normalization.

Binary layout (little-endian)::

    b"LBPD"  u32 version=1  u32 D  u32 M  u32 sequence_count
    per sequence:  u32 L, then L records of
                   D x f32 ranges, M x f32 powers, u32 best_index (1-based)

A text manifest ``<file>.manifest`` sits next to each dataset, one line per
sequence: ``id seed speed direction length`` separated by single spaces.
"""
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scene import SequenceRecord
from .tracker import TrainingSample

MAGIC = b"LBPD"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_U32 = struct.Struct("<I")


class DatasetFormatError(ValueError):
    pass


class BadMagicError(DatasetFormatError):
    pass


class VersionError(DatasetFormatError):
    pass


class TruncatedError(DatasetFormatError):
    pass


class DimensionError(DatasetFormatError):
    pass


def manifest_path(path):
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def _manifest_line(i, rec):
    meta = rec.meta or {}
    return (f"{meta.get('id', i)} {meta.get('seed', '-')} {meta.get('speed', '-')!r} "
            f"{meta.get('direction', '-')} {len(rec)}")


def write_dataset(path, records):
    if not records:
        raise ValueError("no records to write")
    D = records[0].scans.shape[1]
    M = records[0].powers.shape[1]
    chunks = [_HEADER.pack(MAGIC, VERSION, D, M, len(records))]
    rec_dtype = np.dtype([("r", "<f4", D), ("p", "<f4", M), ("b", "<u4")])
    for rec in records:
        L = len(rec)
        if rec.scans.shape != (L, D) or rec.powers.shape != (L, M) or rec.best_index.shape != (L,):
            raise DimensionError("all sequences must share D and M")
        body = np.empty(L, dtype=rec_dtype)
        body["r"] = rec.scans
        body["p"] = rec.powers
        body["b"] = rec.best_index
        chunks.append(_U32.pack(L))
        chunks.append(body.tobytes())
    Path(path).write_bytes(b"".join(chunks))
    lines = [_manifest_line(i, r) for i, r in enumerate(records)]
    manifest_path(path).write_text("\n".join(lines) + "\n")


def _parse_manifest(path, count):
    mp = manifest_path(path)
    if not mp.exists():
        return [None] * count
    lines = [ln for ln in mp.read_text().splitlines() if ln.strip()]
    if len(lines) != count:
        raise DatasetFormatError(f"manifest has {len(lines)} lines, expected {count}")
    metas = []
    for ln in lines:
        sid, seed, speed, direction, _length = ln.split()
        meta = {"id": int(sid)}
        if seed != "-":
            meta["seed"] = int(seed)
        if speed != "-":
            meta["speed"] = float(speed)
        if direction != "-":
            meta["direction"] = int(direction)
        metas.append(meta)
    return metas


def read_dataset(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedError("file shorter than header")
    magic, version, D, M, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    rec_dtype = np.dtype([("r", "<f4", D), ("p", "<f4", M), ("b", "<u4")])
    offset = _HEADER.size
    records = []
    metas = _parse_manifest(path, count)
    for i in range(count):
        if offset + 4 > len(data):
            raise TruncatedError(f"missing length of sequence {i}")
        (L,) = _U32.unpack_from(data, offset)
        offset += 4
        nbytes = L * rec_dtype.itemsize
        if offset + nbytes > len(data):
            raise TruncatedError(f"sequence {i} payload truncated")
        body = np.frombuffer(data, dtype=rec_dtype, count=L, offset=offset)
        offset += nbytes
        best = body["b"].astype(np.int64)
        if np.any(best < 1) or np.any(best > M):
            raise DimensionError(f"sequence {i} has beam index outside 1..{M}")
        powers = body["p"].astype(np.float32)
        if L and np.any(np.argmax(powers, axis=1) + 1 != best):
            raise DimensionError(
                f"sequence {i}: stored labels disagree with the {M}-beam power vectors")
        records.append(SequenceRecord(body["r"].astype(np.float32), powers, best, metas[i]))
    if offset != len(data):
        raise DimensionError(
            f"{len(data) - offset} trailing bytes: header D={D}, M={M} do not match payload")
    return records


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def split_sequences(records, spec=SplitSpec()):
    """Whole-sequence train/test split after a seeded shuffle."""
    n = len(records)
    if n < 2:
        raise ValueError("need at least two sequences to split")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 3]))
    order = rng.permutation(n)
    n_train = min(max(int(round(spec.train_fraction * n)), 1), n - 1)
    return [records[i] for i in order[:n_train]], [records[i] for i in order[n_train:]]


def normalize_scan(scan, max_range):
    scan = np.asarray(scan, dtype=float)
    if np.any(scan > max_range):
        raise ValueError("scan entry exceeds max_range")
    return scan / max_range


def window_samples(seq, W, V, mode, max_range=None):
    """Every stride-1 window of W observations with labels for lead times 0..V.

    In lidar mode the scans are normalized when ``max_range`` is given.
    """
    L = len(seq)
    out = []
    for o in range(L - (W + V) + 1):
        if mode == "lidar":
            obs = seq.scans[o:o + W]
            obs = normalize_scan(obs, max_range) if max_range else obs.astype(float)
        elif mode == "baseline":
            obs = seq.best_index[o:o + W].astype(np.int64)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        out.append(TrainingSample(obs, seq.best_index[o + W - 1:o + W + V].astype(np.int64)))
    return out


def window_arrays(records, W, V, mode, max_range=None):
    """Stacked ``(obs, labels)`` arrays over all windows of all records."""
    obs, labels = [], []
    for seq in records:
        for s in window_samples(seq, W, V, mode, max_range):
            obs.append(s.observations)
            labels.append(s.labels)
    if not obs:
        raise ValueError("no sequence is long enough for a single window")
    return np.stack(obs), np.stack(labels)
