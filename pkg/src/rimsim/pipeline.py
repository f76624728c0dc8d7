"""End-to-end steps driven by an :class:`~rimsim.config.ExperimentConfig`."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from rimsim import features, fedsim, mlp, synthgen
from rimsim.config import ExperimentConfig
from rimsim.metrics import mae, sign_accuracy
from rimsim.mlp import Checkpoint, History


@dataclass
class PretrainResult:
    checkpoint: Checkpoint
    history: History
    holdout_mae: float | None
    holdout_sign_accuracy: float | None


def pretrain(cfg: ExperimentConfig) -> PretrainResult:
    """Fit the scaler and network on a synthetic corpus.

    The corpus is split three ways: a held-out test slice
    (``holdout_fraction``), then a validation slice of the remainder
    (``val_fraction``) that drives early stopping. The scaler is fitted on
    the training slice only.
    """
    tr = cfg.training
    records = synthgen.flatten(synthgen.generate_dataset(
        tr.pretrain_users, tr.pretrain_days, cfg.derive_seed("pretrain_data"), cfg.generator))
    x_raw = features.engineer_many(records)
    y = features.labels_many(records, cfg.model.ranges)

    rng = np.random.Generator(np.random.PCG64(cfg.derive_seed("pretrain_split")))
    order = rng.permutation(len(records))
    n_hold = int(round(len(records) * tr.holdout_fraction))
    hold, rest = order[:n_hold], order[n_hold:]
    n_val = max(1, int(round(len(rest) * tr.val_fraction)))
    val, fit = rest[:n_val], rest[n_val:]

    scaler = features.fit_scaler(x_raw[fit])
    x = scaler.transform(x_raw)
    arch = cfg.model.arch
    params = mlp.init_model(arch, cfg.derive_seed("pretrain_init"))
    train_cfg = dataclasses.replace(tr.train_cfg, seed=cfg.derive_seed("pretrain_train"))
    params, history = mlp.train(params, (x[fit], y[fit]), (x[val], y[val]), train_cfg,
                                arch.activation, cfg.metrics.eps_zero)
    hold_mae = hold_acc = None
    if n_hold:
        pred = mlp.forward(params, x[hold], arch.activation)
        hold_mae = mae(y[hold], pred)
        hold_acc = sign_accuracy(y[hold], pred, cfg.metrics.eps_zero)
    return PretrainResult(Checkpoint(params, scaler, arch), history, hold_mae, hold_acc)


def build_clients(cfg: ExperimentConfig) -> list[fedsim.ClientState]:
    fed = cfg.federated
    data = synthgen.generate_dataset(fed.n_clients, fed.days, cfg.derive_seed("client_data"),
                                     cfg.generator)
    return fedsim.partition_clients(data, fed, seed=cfg.derive_seed("partition"),
                                    ranges=cfg.model.ranges, gen=cfg.generator)


def run_federated(cfg: ExperimentConfig, checkpoint: Checkpoint,
                  strategy: str | None = None) -> fedsim.RunResult:
    if strategy is not None:
        cfg = cfg.replace(federated=dataclasses.replace(cfg.federated, strategy=strategy))
        cfg.validate()
    clients = build_clients(cfg)
    result = fedsim.run_experiment(
        checkpoint, clients, cfg.federated, cfg.training.train_cfg,
        cfg.derive_seed("federated"), cfg.model.ranges, cfg.metrics.eps_zero,
        cfg.metrics.per_output, cfg.digest(),
    )
    result.report.seed = cfg.seed
    return result
