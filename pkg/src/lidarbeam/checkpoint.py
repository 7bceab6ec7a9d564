"""Binary checkpoint for tracker parameters.

Little-endian layout::

    b"LBPC"  u32 version=1  u32 mode (0 lidar, 1 baseline)
    u32 W, V, gamma, D, D_e, M, M_e, H
    f64 parameters, each array row-major, in TrackerParams.named_arrays() order
    u32 n, then n bytes of UTF-8 JSON echoing the run configuration
"""
import struct
from pathlib import Path

import numpy as np

from .datapipe import DatasetFormatError
from .tracker import MODES, TrackerConfig, TrackerParams

MAGIC = b"LBPC"
VERSION = 1
_DIMS = ("W", "V", "gamma", "D", "D_e", "M", "M_e", "H")
_HEADER = struct.Struct("<4sII" + "I" * len(_DIMS))


class CheckpointError(DatasetFormatError):
    pass


def save_checkpoint(path, params, cfg, config_json="{}"):
    head = _HEADER.pack(MAGIC, VERSION, MODES.index(cfg.mode),
                        *(getattr(cfg, d) for d in _DIMS))
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in params.named_arrays().values())
    echo = config_json.encode("utf-8")
    Path(path).write_bytes(head + body + struct.pack("<I", len(echo)) + echo)


def load_checkpoint(path, expect=None):
    """Returns ``(params, cfg, config_json)``.

    ``expect`` is an optional mapping of TrackerConfig fields (including
    ``mode``) that must match the header.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError("checkpoint shorter than header")
    magic, version, mode_id, *dims = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if mode_id >= len(MODES):
        raise CheckpointError(f"unknown mode id {mode_id}")
    try:
        cfg = TrackerConfig(mode=MODES[mode_id], **dict(zip(_DIMS, dims)))
    except ValueError as exc:
        raise CheckpointError(f"invalid header: {exc}") from exc
    for key, want in (expect or {}).items():
        got = getattr(cfg, key)
        if got != want:
            raise CheckpointError(f"checkpoint {key}={got!r} but {want!r} was expected")
    params = TrackerParams.zeros(cfg)
    offset = _HEADER.size
    for name, arr in params.named_arrays().items():
        nbytes = arr.size * 8
        if offset + nbytes > len(data):
            raise CheckpointError(f"parameter payload truncated at {name}")
        arr[...] = np.frombuffer(data, dtype="<f8", count=arr.size, offset=offset).reshape(arr.shape)
        offset += nbytes
    if offset + 4 > len(data):
        raise CheckpointError("missing config echo")
    (n,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if offset + n != len(data):
        raise CheckpointError("config echo length does not match file size")
    return params, cfg, data[offset:].decode("utf-8")
