"""In-process federated fine-tuning: FedAvg and FedPer.

Clients never see each other's records. The orchestration loop only moves
:class:`ClientUpdate` objects (parameters plus a sample count) from clients
to the server and aggregated parameters back. Under FedPer the server only
ever holds the shared root; each client's head lives in its
:class:`ClientState`.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rimsim import features, mlp, synthgen
from rimsim.features import IdealRanges, ScalerStats
from rimsim.metrics import MetricsReport, aggregate_report, client_metrics
from rimsim.mlp import Checkpoint, Dense, Params, TrainConfig
from rimsim.synthgen import DailyRecord, GeneratorConfig

log = logging.getLogger(__name__)

STRATEGIES = ("fedavg", "fedper")


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class FedConfig:
    strategy: str = "fedavg"
    n_clients: int = 10
    rounds: int = 5
    local_epochs: int = 2
    total_epochs: int = 10
    split_index: int = 3
    client_fraction: float = 1.0
    train_days: int = 8
    eval_days: int = 7
    ideal_clients: int = 3
    p_ideal: float = 0.9

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if self.rounds < 0 or self.local_epochs < 0:
            raise ValueError("rounds and local_epochs must be >= 0")
        if self.rounds * self.local_epochs != self.total_epochs:
            raise ValueError(
                f"rounds x local_epochs = {self.rounds * self.local_epochs} "
                f"but total_epochs = {self.total_epochs}"
            )
        if self.client_fraction != 1.0:
            raise ValueError("only full participation (client_fraction = 1.0) is supported")
        if self.train_days < 1 or self.eval_days < 1:
            raise ValueError("train_days and eval_days must be >= 1")
        if not 0 <= self.ideal_clients <= self.n_clients:
            raise ValueError("ideal_clients must lie in [0, n_clients]")
        if not 0.0 <= self.p_ideal <= 1.0:
            raise ValueError("p_ideal must lie in [0, 1]")

    @property
    def days(self) -> int:
        return self.train_days + self.eval_days


@dataclass
class ClientState:
    client_id: int
    train: list[DailyRecord]
    eval: list[DailyRecord]
    mostly_ideal: bool = False
    head: Params | None = None

    @property
    def n_samples(self) -> int:
        return len(self.train)


@dataclass
class ClientUpdate:
    client_id: int
    layers: Params
    n_samples: int
    train_loss: float = math.nan


# -- partitioning -----------------------------------------------------------

def _draw_in_range(rng: np.random.Generator, mean: float, sd: float,
                   lo: float, hi: float) -> float:
    return synthgen.truncated_normal(rng, min(max(mean, lo), hi), sd, lo, hi)


def idealize_day(record: DailyRecord, stride_km: float, rng: np.random.Generator,
                 ranges: IdealRanges, gen: GeneratorConfig) -> DailyRecord:
    """Redraw sleep and distance inside their ideal ranges, keeping the rest."""
    sleep = _draw_in_range(rng, gen.sleep_mean, gen.sleep_sd, *ranges.sleep)
    lo, hi = ranges.distance
    # whole steps whose stride multiple lands inside [lo, hi]
    lo_steps = math.ceil(lo / stride_km)
    hi_steps = math.floor(hi / stride_km)
    while lo_steps * stride_km < lo:
        lo_steps += 1
    while hi_steps * stride_km > hi:
        hi_steps -= 1
    steps = int(rng.integers(lo_steps, hi_steps + 1))
    return dataclasses.replace(record, sleep=sleep, steps=steps, distance=steps * stride_km)


def partition_clients(dataset: Sequence[Sequence[DailyRecord]], fed_cfg: FedConfig,
                      heterogeneity: float | None = None, seed: int = 0,
                      ranges: IdealRanges = IdealRanges(),
                      gen: GeneratorConfig | None = None) -> list[ClientState]:
    """One client per user: the first ``train_days`` days train, the next ``eval_days`` evaluate.

    ``heterogeneity`` is the fraction of clients made mostly-ideal (it
    overrides ``fed_cfg.ideal_clients`` when given). On a mostly-ideal
    client each day's sleep and distance are redrawn inside the ideal
    ranges with probability ``fed_cfg.p_ideal``. The mostly-ideal clients
    are the first ``k`` entries of a seeded permutation of client ids.
    """
    fed_cfg.validate()
    gen = gen or GeneratorConfig()
    if len(dataset) < fed_cfg.n_clients:
        raise ValueError(f"need {fed_cfg.n_clients} users, dataset has {len(dataset)}")
    n_ideal = fed_cfg.ideal_clients
    if heterogeneity is not None:
        if not 0.0 <= heterogeneity <= 1.0:
            raise ValueError("heterogeneity must lie in [0, 1]")
        n_ideal = round(heterogeneity * fed_cfg.n_clients)
    root = np.random.SeedSequence(seed)
    pick = np.random.Generator(np.random.PCG64(root.spawn(1)[0]))
    ideal_ids = set(pick.permutation(fed_cfg.n_clients)[:n_ideal].tolist())

    clients = []
    for cid in range(fed_cfg.n_clients):
        days = list(dataset[cid])
        if len(days) < fed_cfg.days:
            raise ValueError(f"client {cid} has {len(days)} days, needs {fed_cfg.days}")
        days = days[:fed_cfg.days]
        if cid in ideal_ids:
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(seed, spawn_key=(cid, 1))))
            stride = _stride_of(days, gen)
            days = [
                idealize_day(r, stride, rng, ranges, gen) if rng.random() < fed_cfg.p_ideal else r
                for r in days
            ]
        clients.append(ClientState(cid, days[:fed_cfg.train_days], days[fed_cfg.train_days:],
                                   mostly_ideal=cid in ideal_ids))
    return clients


def _stride_of(days: Sequence[DailyRecord], gen: GeneratorConfig) -> float:
    for r in days:
        if r.steps > 0:
            return r.distance / r.steps
    return gen.stride_mean_km


# -- client side ------------------------------------------------------------

def _xy(records: Sequence[DailyRecord], scaler: ScalerStats,
        ranges: IdealRanges) -> tuple[np.ndarray, np.ndarray]:
    return (scaler.transform(features.engineer_many(records)),
            features.labels_many(records, ranges))


def _client_seed(seed: int, round_idx: int, client_id: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(round_idx, client_id))
    return int(ss.generate_state(1)[0])


def local_finetune(client: ClientState, global_params: Params, fed_cfg: FedConfig,
                   train_cfg: TrainConfig, scaler: ScalerStats, arch: mlp.Architecture,
                   ranges: IdealRanges = IdealRanges(), round_idx: int = 0,
                   seed: int = 0) -> ClientUpdate:
    """Train a local copy for ``fed_cfg.local_epochs`` epochs.

    FedAvg: ``global_params`` is the full model and the full model is
    returned. FedPer: ``global_params`` is the shared root; the client's
    head completes the model, is updated in place on ``client`` after
    training, and only the root is returned.
    """
    if not client.train:
        raise ValueError(f"client {client.client_id} has no training data")
    if fed_cfg.strategy == "fedper":
        if len(global_params) != arch.split_index:
            raise ProtocolError(
                f"FedPer broadcast must hold {arch.split_index} root layers, got {len(global_params)}"
            )
        if client.head is None:
            raise ValueError(f"client {client.client_id} has no personal head")
        local = mlp.copy_params(list(global_params) + list(client.head))
    else:
        local = mlp.copy_params(global_params)
    mlp.check_shapes(local, arch)

    x, y = _xy(client.train, scaler, ranges)
    cfg = dataclasses.replace(train_cfg, epochs=fed_cfg.local_epochs,
                              seed=_client_seed(seed, round_idx, client.client_id))
    if fed_cfg.local_epochs:
        local, hist = mlp.train(local, (x, y), None, cfg, arch.activation)
        loss = hist.train_loss[-1]
    else:
        loss = mlp.evaluate_loss(local, x, y, arch.activation, train_cfg.loss)

    if fed_cfg.strategy == "fedper":
        client.head = local[arch.split_index:]
        return ClientUpdate(client.client_id, local[:arch.split_index], client.n_samples, loss)
    return ClientUpdate(client.client_id, local, client.n_samples, loss)


# -- server side ------------------------------------------------------------

def fedavg_aggregate(updates: Sequence[ClientUpdate]) -> Params:
    """Sample-weighted mean of every parameter, summed in client-id order."""
    if not updates:
        raise ValueError("no client updates to aggregate")
    ordered = sorted(updates, key=lambda u: u.client_id)
    shapes = [(p.weight.shape, p.bias.shape) for p in ordered[0].layers]
    for u in ordered[1:]:
        if [(p.weight.shape, p.bias.shape) for p in u.layers] != shapes:
            raise ProtocolError(f"client {u.client_id} sent mismatched layer shapes")
    total = sum(u.n_samples for u in ordered)
    if total <= 0:
        raise ValueError("aggregate sample count must be positive")
    out = []
    for i in range(len(shapes)):
        w = np.zeros(shapes[i][0])
        b = np.zeros(shapes[i][1])
        for u in ordered:
            frac = u.n_samples / total
            w += frac * u.layers[i].weight
            b += frac * u.layers[i].bias
        out.append(Dense(w, b))
    return out


def fedper_aggregate(updates: Sequence[ClientUpdate], split_index: int) -> Params:
    for u in updates:
        if len(u.layers) != split_index:
            raise ProtocolError(
                f"client {u.client_id} sent {len(u.layers)} layers; FedPer accepts "
                f"exactly the {split_index} root layers"
            )
    return fedavg_aggregate(updates)


# -- experiment loop --------------------------------------------------------

@dataclass
class RunResult:
    report: MetricsReport
    server_params: Params
    clients: list[ClientState] = field(default_factory=list)


def client_model(client: ClientState, server_params: Params, strategy: str) -> Params:
    if strategy == "fedper":
        return list(server_params) + list(client.head or [])
    return list(server_params)


def evaluate_clients(clients: Sequence[ClientState], server_params: Params, strategy: str,
                     scaler: ScalerStats, arch: mlp.Architecture,
                     ranges: IdealRanges = IdealRanges(), eps_zero: float = 0.0,
                     per_output: bool = False):
    rows = []
    for c in clients:
        x, y = _xy(c.eval, scaler, ranges)
        pred = mlp.forward(client_model(c, server_params, strategy), x, arch.activation)
        rows.append(client_metrics(c.client_id, y, pred, eps_zero, per_output))
    return rows


def run_experiment(checkpoint: Checkpoint, clients: list[ClientState], fed_cfg: FedConfig,
                   train_cfg: TrainConfig, seed: int, ranges: IdealRanges = IdealRanges(),
                   eps_zero: float = 0.0, per_output: bool = False,
                   config_digest: str = "") -> RunResult:
    """Broadcast, fine-tune locally, aggregate; repeat, then score every client.

    ``clients`` is modified in place: FedPer heads are (re)initialised from
    the checkpoint and then persist on each client across rounds.
    """
    fed_cfg.validate()
    arch = checkpoint.arch
    if fed_cfg.split_index != arch.split_index:
        arch = dataclasses.replace(arch, split_index=fed_cfg.split_index)
        arch.validate()
    params = mlp.copy_params(checkpoint.params)
    if fed_cfg.strategy == "fedper":
        server = params[:arch.split_index]
        for c in clients:
            c.head = mlp.copy_params(params[arch.split_index:])
    else:
        server = params

    telemetry = []
    for rnd in range(fed_cfg.rounds):
        updates = [
            local_finetune(c, server, fed_cfg, train_cfg, checkpoint.scaler, arch, ranges,
                           rnd, seed)
            for c in sorted(clients, key=lambda c: c.client_id)
        ]
        if fed_cfg.strategy == "fedper":
            server = fedper_aggregate(updates, arch.split_index)
        else:
            server = fedavg_aggregate(updates)
        entry = {
            "round": rnd + 1,
            "client_train_loss": {str(u.client_id): u.train_loss for u in updates},
            "aggregate_norm": mlp.params_norm(server),
        }
        log.debug("round %d: aggregate norm %.6f", rnd + 1, entry["aggregate_norm"])
        telemetry.append(entry)

    rows = evaluate_clients(clients, server, fed_cfg.strategy, checkpoint.scaler, arch,
                            ranges, eps_zero, per_output)
    report = aggregate_report(rows, fed_cfg.strategy, seed, config_digest)
    report.telemetry = telemetry
    return RunResult(report, server, list(clients))
