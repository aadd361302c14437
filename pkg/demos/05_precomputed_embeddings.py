"""Working with precomputed features and saved models.

Features exported from another model go through the CSV interchange format.
Training with the encoder bypassed uses the normalized rows directly as
embeddings, so only the prompt table and shifts are learned. Models
round-trip through the binary checkpoint format.
"""

import tempfile
from pathlib import Path

from numsense import (
    SyntheticConfig,
    TrainConfig,
    default_bins,
    evaluate,
    generate_synthetic,
    load_checkpoint,
    load_embeddings_csv,
    save_bins,
    save_checkpoint,
    split,
    train,
    write_embeddings_csv,
)
from numsense.binning import DECADE_CONCEPTS, load_bins

spec = default_bins(1930, 1980, 5, DECADE_CONCEPTS)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_embeddings_csv(generate_synthetic(SyntheticConfig(n=400, y_range=(1930, 1980), omega=0.12), spec), tmp / "feats.csv")
    save_bins(spec, tmp / "decades.txt")
    print((tmp / "decades.txt").read_text())

    spec = load_bins(tmp / "decades.txt")
    data = load_embeddings_csv(tmp / "feats.csv", spec)
    train_set, eval_set = split(data, 0.8, seed=0)
    model, _ = train(TrainConfig(epochs=20, use_encoder=False), train_set, spec)
    print("bypass-encoder eval:", evaluate(model, eval_set, spec))

    save_checkpoint(model, tmp / "model.ckpt")
    print("checkpoint bytes:", (tmp / "model.ckpt").stat().st_size)
    print("reloaded eval:   ", evaluate(load_checkpoint(tmp / "model.ckpt"), eval_set, spec))
