"""
Why z-score normalization matters
=================================

Two networks are trained on the same runs with the same seed. One sees
z-scored torques and temperatures, the other raw values in N m and degC.
Both losses are compared in degC^2.
"""

import numpy as np

from jointtherm.dataset import compute_norm_stats, simulate_trajectories, split_seen_unseen
from jointtherm.training import TrainingConfig, train

trajs = simulate_trajectories(count=8, seed=5, duration=300.0, dt=2.0)
seen, _ = split_seen_unseen(trajs, [])

variance = np.mean(compute_norm_stats(np.vstack(seen.targets)).std ** 2)
threshold = 0.5 * variance
print(f"mean target variance {variance:.3f} degC^2, threshold {threshold:.3f} degC^2")

base = dict(epochs=150, learning_rate=3e-3, dropout=0.1, seed=0, patience=0)
runs = {flag: train(seen, TrainingConfig(normalize=flag, **base)).history
        for flag in (True, False)}

for flag, hist in runs.items():
    label = "z-scored" if flag else "raw"
    print(f"{label:9s} first loss {hist.physical_loss[0]:9.3f}  "
          f"final loss {hist.physical_loss[-1]:7.4f}  "
          f"epochs to threshold {hist.epochs_to_reach(threshold)}")
