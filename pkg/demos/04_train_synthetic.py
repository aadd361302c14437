"""Training on synthetic ordinal data: FCRC against plain InfoNCE.

The features trace a noisy curve parameterized by the label, five age-style
bins provide the concepts, and both runs share data, split and initial
weights. Pass a number of epochs on the command line (default 100).
"""

import sys

from numsense import SyntheticConfig, TrainConfig, default_bins, evaluate, generate_synthetic, split, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 100
spec = default_bins(16, 77, 5)
print("bins:", list(zip(spec.concepts, spec.centers)))

data = generate_synthetic(SyntheticConfig(n=1000, seed=0), spec)
train_set, eval_set = split(data, 0.8, seed=0)

for loss in ("fcrc", "infonce"):
    model, history = train(TrainConfig(epochs=epochs, loss=loss, seed=0), train_set, spec, eval_set)
    m = evaluate(model, eval_set, spec)
    first, last = history.losses[0], history.losses[-1]
    print(f"\n{loss}: total loss {first.total:.3f} -> {last.total:.3f}")
    print(f"  eval MAE {m.mae:.3f}, coarse accuracy {m.coarse_accuracy:.3f}, prompt ordinality {m.ordinality_spearman:.2f}")
    print(f"  learned shifts delta = {model.delta.round(4).tolist()}")
