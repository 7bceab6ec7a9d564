"""Synthetic vehicle-to-infrastructure scene.

Top-down 2-D geometry: the base station (array and LiDAR) sits at the
origin with boresight along +y. The lane runs parallel to the x axis at
``y = road_offset``. Azimuths are measured from boresight, positive toward +x,
so a point (x, y) lies at ``atan2(x, y)``.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .beam import (SignalConfig, array_response, generate_codebook,
                   measure_power_vector, optimal_beam_index)


@dataclass(frozen=True)
class Rect:
    """Oriented rectangle: centre, extent along/across its heading, heading in radians."""
    cx: float
    cy: float
    length: float
    width: float
    heading: float = 0.0

    def corners(self):
        c, s = np.cos(self.heading), np.sin(self.heading)
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class ScenarioConfig:
    num_bins: int = 180
    lidar_fov: Tuple[float, float] = (-np.pi / 2, np.pi / 2)
    max_range: float = 60.0
    road_offset: float = 15.0
    road_span: Tuple[float, float] = (-24.0, 24.0)
    speed_range: Tuple[float, float] = (6.0, 12.0)
    dt: float = 0.1
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    clutter: Tuple[Rect, ...] = (
        Rect(-14.0, 26.0, 6.0, 3.0),
        Rect(9.0, 30.0, 10.0, 2.0),
        Rect(28.0, 20.0, 2.0, 8.0),
    )
    signal: SignalConfig = field(default_factory=lambda: SignalConfig(1.0, 1e-5))
    channel_gain: float = 1.0
    num_elements: int = 16
    num_beams: int = 64
    codebook_fov: Tuple[float, float] = (-np.pi / 3, np.pi / 3)
    min_steps: int = 11  # W + V

    def __post_init__(self):
        if self.num_bins < 8:
            raise ValueError("num_bins must be at least 8")
        if not self.lidar_fov[0] < self.lidar_fov[1]:
            raise ValueError("lidar_fov must be increasing")
        if not self.max_range > self.road_offset > 0:
            raise ValueError("need max_range > road_offset > 0")
        if not self.road_span[0] < self.road_span[1]:
            raise ValueError("road_span must be increasing")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed_range must be positive and ordered")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.min_steps < 1:
            raise ValueError("min_steps must be positive")

    def codebook(self):
        return generate_codebook(self.num_elements, self.num_beams,
                                 self.codebook_fov, self.signal.spacing)

    def bin_angles(self):
        lo, hi = self.lidar_fov
        width = (hi - lo) / self.num_bins
        return lo + width * (np.arange(self.num_bins) + 0.5)


@dataclass
class SequenceRecord:
    """One road pass. Arrays are float32 so they serialize bit-exactly."""
    scans: np.ndarray  # (L, D) float32 metres
    powers: np.ndarray  # (L, M) float32 watts
    best_index: np.ndarray  # (L,) int, 1-based
    meta: Optional[dict] = None

    def __len__(self):
        return self.scans.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SequenceRecord):
            return NotImplemented
        return (np.array_equal(self.scans, other.scans)
                and np.array_equal(self.powers, other.powers)
                and np.array_equal(self.best_index, other.best_index)
                and self.meta == other.meta)


def _draw_motion(cfg, rng):
    speed = float(rng.uniform(*cfg.speed_range))
    direction = 1 if rng.integers(2) == 0 else -1
    return speed, direction


def _poses(cfg, speed, direction):
    lo, hi = cfg.road_span
    step = speed * cfg.dt
    n = int(np.floor((hi - lo) / step + 1e-9))
    if n < cfg.min_steps:
        raise ValueError(
            f"trajectory has {n} steps (span {hi - lo} m at {speed:.3f} m/s, "
            f"dt {cfg.dt} s); at least {cfg.min_steps} are required")
    start = lo if direction > 0 else hi
    heading = 0.0 if direction > 0 else np.pi
    return [Pose(start + direction * step * i, cfg.road_offset, heading) for i in range(n)]


def sample_trajectory(cfg, rng) -> List[Pose]:
    """Constant-velocity pass along the lane at a random speed and direction.

    The step count is ``floor(span / (speed * dt))``; passes shorter than
    ``cfg.min_steps`` are rejected.
    """
    return _poses(cfg, *_draw_motion(cfg, rng))


def _segments(rects):
    segs = []
    for r in rects:
        c = r.corners()
        segs.extend((c[i], c[(i + 1) % 4]) for i in range(4))
    if not segs:
        return np.zeros((0, 2)), np.zeros((0, 2))
    a = np.array([s[0] for s in segs])
    b = np.array([s[1] for s in segs])
    return a, b


def cast_rays(angles, rects, max_range):
    """Distance from the origin along each azimuth to the nearest rectangle edge."""
    u = np.stack([np.sin(angles), np.cos(angles)], axis=1)  # (R, 2)
    a, b = _segments(rects)
    out = np.full(len(angles), float(max_range))
    if len(a) == 0:
        return out
    e = b - a  # (S, 2)
    # solve t*u = a + s*e  for t >= 0, s in [0, 1]
    denom = u[:, None, 0] * (-e[None, :, 1]) - u[:, None, 1] * (-e[None, :, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (a[None, :, 0] * (-e[None, :, 1]) - a[None, :, 1] * (-e[None, :, 0])) / denom
        s = (u[:, None, 0] * a[None, :, 1] - u[:, None, 1] * a[None, :, 0]) / denom
    hit = (denom != 0) & (t > 0) & (s >= 0) & (s <= 1)
    t = np.where(hit, t, np.inf)
    return np.minimum(out, t.min(axis=1))


def vehicle_rect(pose, cfg):
    return Rect(pose.x, pose.y, cfg.vehicle_length, cfg.vehicle_width, pose.heading)


def render_lidar(pose, cfg):
    """Range scan from the BS with bins at the centres of ``lidar_fov``."""
    rects = (vehicle_rect(pose, cfg),) + tuple(cfg.clutter)
    return cast_rays(cfg.bin_angles(), rects, cfg.max_range)


def synth_channel(pose, cfg):
    """Line-of-sight channel ``(g/d) * a(azimuth)`` toward the vehicle centroid."""
    d = np.hypot(pose.x, pose.y)
    if d == 0:
        raise ValueError("transmitter coincides with the base station")
    theta = np.arctan2(pose.x, pose.y)
    return (cfg.channel_gain / d) * array_response(theta, cfg.num_elements, cfg.signal.spacing)


def sequence_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([seed, 0, index]))


def generate_sequence(cfg, seed, index, codebook=None):
    codebook = codebook if codebook is not None else cfg.codebook()
    rng = sequence_rng(seed, index)
    speed, direction = _draw_motion(cfg, rng)
    poses = _poses(cfg, speed, direction)
    scans = np.empty((len(poses), cfg.num_bins), dtype=np.float32)
    powers = np.empty((len(poses), cfg.num_beams), dtype=np.float32)
    for i, pose in enumerate(poses):
        scans[i] = render_lidar(pose, cfg)
        powers[i] = measure_power_vector(synth_channel(pose, cfg), codebook, cfg.signal, rng)
    # labels come from the stored float32 powers so they survive serialization
    best = np.array([optimal_beam_index(p) for p in powers], dtype=np.int64)
    meta = {"id": index, "seed": seed, "speed": speed, "direction": direction}
    return SequenceRecord(scans, powers, best, meta)


def generate_dataset(cfg, num_sequences, seed):
    if num_sequences < 1:
        raise ValueError("num_sequences must be at least 1")
    codebook = cfg.codebook()
    return [generate_sequence(cfg, seed, i, codebook) for i in range(num_sequences)]
