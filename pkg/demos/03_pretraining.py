"""
Pre-training the deficit model
==============================

A 7-64-32-16-8-4-2 ReLU network is trained with Adam on an MAE loss to
predict the sleep and distance deficits, with early stopping on a
validation split. A reduced corpus keeps this quick; the default
configuration uses 1,000 users x 10 days.
"""

import dataclasses

import numpy as np

from rimsim import config, mlp, pipeline

cfg = config.ExperimentConfig(seed=0)
cfg = cfg.replace(training=dataclasses.replace(cfg.training, pretrain_users=300, epochs=60))
res = pipeline.pretrain(cfg)

hist = res.history
print(f"{len(hist.epochs)} epochs, best at {hist.best_epoch}")
for e in hist.epochs[::10]:
    print(f"epoch {e.epoch:3d}  train {e.train_loss:.4f}  val {e.val_loss:.4f}  "
          f"val sign accuracy {e.val_sign_accuracy:.3f}")
print(f"held-out MAE {res.holdout_mae:.4f}, strict sign accuracy {res.holdout_sign_accuracy:.3f}")

# Many labels are exactly zero (inside the ideal range) while a linear
# output is almost never exactly zero; a small zero band shows the gap.
from rimsim import features, metrics, synthgen

recs = synthgen.flatten(synthgen.generate_dataset(100, 10, 123))
y = features.labels_many(recs)
pred = mlp.forward(res.checkpoint.params, res.checkpoint.scaler.transform(features.engineer_many(recs)))
for band in (0.0, 1e-3, 1e-2, 0.1):
    print(f"zero band {band:g}: sign accuracy {metrics.sign_accuracy(y, pred, band):.3f}")

mlp.save_checkpoint(res.checkpoint.params, res.checkpoint.scaler, res.checkpoint.arch,
                    "demo_checkpoint.json")
print("saved demo_checkpoint.json; weight norm", round(mlp.params_norm(res.checkpoint.params), 3))
