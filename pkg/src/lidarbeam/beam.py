"""Geometric beamforming primitives for a uniform linear array (ULA).

Angles are azimuths in radians measured from array boresight. Beam indices
returned to callers are 1-based, matching the serialized formats.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SignalConfig:
    transmit_power: float = 1.0
    noise_variance: float = 0.0
    spacing: float = 1.0  # element spacing in half-wavelengths

    def __post_init__(self):
        if not self.transmit_power > 0:
            raise ValueError("transmit_power must be positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be non-negative")


@dataclass(frozen=True)
class BeamCodebook:
    beams: np.ndarray  # (M, N) complex, unit-norm rows
    steering_angles: np.ndarray  # (M,) radians, strictly increasing

    @property
    def num_beams(self):
        return self.beams.shape[0]

    @property
    def num_elements(self):
        return self.beams.shape[1]


def array_response(theta, n_elements, spacing=1.0):
    """Phase profile ``exp(j*pi*spacing*n*sin(theta))`` for n = 0..N-1 (not normalized)."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if n_elements < 1:
        raise ValueError("array needs at least one element")
    if abs(theta) >= np.pi / 2:
        raise ValueError("|theta| must be below pi/2 for a ULA")
    n = np.arange(n_elements)
    return np.exp(1j * np.pi * spacing * n * np.sin(theta))


def generate_codebook(n_elements, n_beams, fov=(-np.pi / 3, np.pi / 3), spacing=1.0):
    """Steering codebook with angles uniformly spaced over ``fov`` (inclusive)."""
    if n_beams < 2:
        raise ValueError("codebook needs at least two beams")
    lo, hi = fov
    if not lo < hi:
        raise ValueError("fov must satisfy lo < hi")
    angles = np.linspace(lo, hi, n_beams)
    beams = np.stack([array_response(a, n_elements, spacing) for a in angles])
    beams /= np.sqrt(n_elements)
    return BeamCodebook(beams=beams, steering_angles=angles)


def receive_power(h, f, cfg, noise_sample=None):
    """Receive power of a unit-power symbol sent over channel ``h`` with beam ``f``.

    Without a noise sample this is the noiseless ``P * |h^H f|^2``.
    """
    h = np.asarray(h)
    f = np.asarray(f)
    if h.shape != f.shape:
        raise ValueError(f"dimension mismatch: h{h.shape} vs f{f.shape}")
    gain = np.vdot(h, f)
    if noise_sample is None:
        return float(cfg.transmit_power * abs(gain) ** 2)
    return float(abs(gain * np.sqrt(cfg.transmit_power) + noise_sample) ** 2)


def measure_power_vector(h, codebook, cfg, rng=None):
    """Beam-training sweep: receive power for every codebook beam.

    A fresh complex Gaussian noise sample of variance ``cfg.noise_variance``
    is drawn from ``rng`` per beam. With zero noise variance the rng is unused.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape != (codebook.num_elements,):
        raise ValueError(
            f"channel length {h.shape} does not match codebook element count "
            f"{codebook.num_elements}"
        )
    gains = codebook.beams @ h.conj()  # h^H f_m for every m
    if cfg.noise_variance == 0:
        return cfg.transmit_power * np.abs(gains) ** 2
    if rng is None:
        raise ValueError("a noisy measurement needs an rng stream")
    scale = np.sqrt(cfg.noise_variance / 2)
    noise = scale * (rng.standard_normal(codebook.num_beams)
                     + 1j * rng.standard_normal(codebook.num_beams))
    return np.abs(gains * np.sqrt(cfg.transmit_power) + noise) ** 2


def optimal_beam_index(powers):
    """1-based index of the strongest beam; ties go to the lowest index."""
    powers = np.asarray(powers)
    if powers.size == 0:
        raise ValueError("empty power vector")
    # np.argmax returns the first occurrence of the maximum
    return int(np.argmax(powers)) + 1
