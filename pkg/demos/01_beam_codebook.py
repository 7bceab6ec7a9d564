"""
Steering codebook and exhaustive beam search
============================================

Build the 64-beam codebook of a 16-element half-wavelength ULA, sweep it
against a line-of-sight channel and pick the strongest beam.
"""
import numpy as np

from lidarbeam.beam import (SignalConfig, array_response, generate_codebook,
                            measure_power_vector, optimal_beam_index)

# %%
# 64 beams uniformly spaced in angle over [-60, 60] degrees
cb = generate_codebook(16, 64, np.radians([-60, 60]))
print("codebook", cb.beams.shape, "norms", np.linalg.norm(cb.beams, axis=1)[:3])

# %%
# A user at 20.95 degrees (between two beams), 15 m away. Noiseless sweep first.
h = array_response(np.radians(20.95), 16) / 15.0
pv = measure_power_vector(h, cb, SignalConfig(1.0, 0.0))
best = optimal_beam_index(pv)
print(f"best beam {best} steers to {np.degrees(cb.steering_angles[best - 1]):.2f} deg")

# %%
# With receiver noise the winner can move to a neighbouring beam
rng = np.random.default_rng(0)
noisy = [optimal_beam_index(measure_power_vector(h, cb, SignalConfig(1.0, 1e-5), rng))
         for _ in range(200)]
vals, counts = np.unique(noisy, return_counts=True)
print("noisy winners:", dict(zip(vals.tolist(), counts.tolist())))
