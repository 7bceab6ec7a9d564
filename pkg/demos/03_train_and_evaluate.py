"""
Training the LiDAR tracker and the beam-history baseline
========================================================

Generate a dataset, split it by whole sequences, train both recurrent models
and reproduce the top-k table, the operation-window comparison and the beam
training overhead. Takes a couple of minutes on one CPU core.
"""
import numpy as np

from lidarbeam.datapipe import SplitSpec, split_sequences, window_arrays
from lidarbeam.evalkit import evaluate_table, operation_window_eval, training_overhead
from lidarbeam.scene import ScenarioConfig, generate_dataset
from lidarbeam.tracker import TrackerConfig, TrackerParams, TrainConfig, train

scen = ScenarioConfig()
records = generate_dataset(scen, 200, seed=7)
train_recs, test_recs = split_sequences(records, SplitSpec(0.8, seed=7))
print(f"{len(train_recs)} training passes, {len(test_recs)} test passes")

# %%
models = {}
for mode in ("lidar", "baseline"):
    cfg = TrackerConfig(mode=mode, D=scen.num_bins, M=scen.num_beams)
    params = TrackerParams.init(cfg, np.random.default_rng(1))
    data = window_arrays(train_recs, cfg.W, cfg.V, mode, scen.max_range)
    _, curve = train(params, cfg, data, TrainConfig(epochs=20, seed=7),
                     log=lambda e, l: print(f"  {mode} epoch {e + 1} loss {l:.4f}") if e % 5 == 4 else None)
    models[mode] = (params, cfg)

# %%
# Top-k accuracy per lead time (the baseline's lead-0 column is trivial: it
# is given the current beam as input)
for mode, (params, cfg) in models.items():
    table = evaluate_table(params, cfg, window_arrays(test_recs, cfg.W, cfg.V, mode, scen.max_range))
    print(mode)
    print(table.to_csv())

# %%
# Baseline fed its own predictions between exhaustive refreshes
(bp, bcfg), (lp, lcfg) = models["baseline"], models["lidar"]
curve = operation_window_eval(bp, lp, bcfg, lcfg, test_recs, L_max=10, k=1, max_range=scen.max_range)
print(curve.to_csv())

# %%
for L in (1, 3, 10):
    print(f"L={L:2d}: LiDAR needs {100 * training_overhead(L, 8, 5, 64):.1f}% of the baseline's beam training")
