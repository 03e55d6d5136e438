"""
Learning motor temperatures from torques
========================================

Sixteen synthetic runs train the LSTM network; two runs with unseen
profile seeds test it. Errors are reported per motor as RMSE and MaxAE,
seen and unseen side by side. This is the same setup the acceptance check
for generalization uses.
"""

from jointtherm.evaluation import emit_prediction_artifacts, predict_sequence
from jointtherm.verify import GENERALIZATION_CONFIG, GENERALIZATION_RUNS, generalization_run

print("runs:", GENERALIZATION_RUNS)
print("training:", GENERALIZATION_CONFIG)

run = generalization_run()
print(f"trained {len(run['history'])} epochs in {run['elapsed']:.0f} s, "
      f"final loss {run['history'].loss[-1]:.4f} (normalized units)")

for tag in ("seen", "unseen"):
    print()
    print(run[tag].format())

ratio = run["unseen"].rmse / run["seen"].rmse
print()
print("unseen / seen RMSE per motor:", ratio.round(2))

# Overlay plots for the first unseen run.
unseen = run["unseen_data"]
pred = predict_sequence(run["params"], run["stats"], unseen.inputs[0])
paths = emit_prediction_artifacts(pred, unseen.targets[0], f"{unseen.provenance[0]}_prediction")
print("wrote", paths[0], "and", len(paths) - 1, "overlay plots")
