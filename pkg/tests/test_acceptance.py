"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``; the
lines are printed in the terminal summary. Tolerances are the stated ones.
"""

import dataclasses
import time

import numpy as np
import pytest

import conftest
from rimsim import cli, config, features, fedsim, mlp, pipeline, synthgen
from rimsim import recommender as rc
from rimsim import sensorsim as ss
from rimsim.metrics import ClientMetrics, aggregate_report, sign_accuracy
from rimsim.sensorsim import AccelSample, SensorConfig, TrackerState

import test_fedsim
import test_mlp
import test_sensorsim
from test_metrics import FEDAVG_ROWS, FEDPER_ROWS

SEEDS = (1, 2, 3, 4, 5)


def record(name, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


# the stated band is inclusive; 1e-12 absorbs binary representation error only
TOL = 0.005 + 1e-12


def test_table_arithmetic():
    t0 = time.perf_counter()
    r1 = aggregate_report([ClientMetrics(i, a, m) for i, (a, m) in enumerate(FEDAVG_ROWS, 1)])
    r2 = aggregate_report([ClientMetrics(i, a, m) for i, (a, m) in enumerate(FEDPER_ROWS, 1)])
    dt = time.perf_counter() - t0
    ok = (abs(r1.avg_sign_accuracy_pct - 60.71) <= TOL and abs(r1.avg_mae - 0.91) <= TOL
          and abs(r2.avg_sign_accuracy_pct - 46.34) <= TOL and abs(r2.avg_mae - 1.19) <= TOL
          and dt < 1.0)
    record("table arithmetic", ok,
           f"fedavg rows -> {r1.avg_sign_accuracy_pct:.4f}% / {r1.avg_mae:.4f}; "
           f"fedper rows -> {r2.avg_sign_accuracy_pct:.4f}% / {r2.avg_mae:.4f}; {dt * 1000:.1f} ms")


def _fed_pair(checkpoint, seed, eps_zero):
    base = config.ExperimentConfig(seed=seed)
    cfg = base.replace(metrics=dataclasses.replace(base.metrics, eps_zero=eps_zero))
    avg = pipeline.run_federated(cfg, checkpoint, "fedavg").report
    per = pipeline.run_federated(cfg, checkpoint, "fedper").report
    return avg, per


@pytest.mark.slow
def test_directional_fedavg_beats_fedper(default_pretrained):
    ck = default_pretrained.checkpoint
    t0 = time.perf_counter()
    wins, cells = 0, []
    for seed in SEEDS:
        avg, per = _fed_pair(ck, seed, 0.0)
        assert sum(c.mostly_ideal for c in pipeline.build_clients(
            config.ExperimentConfig(seed=seed))) >= 3
        wins += avg.avg_sign_accuracy_pct > per.avg_sign_accuracy_pct
        cells.append(f"{avg.avg_sign_accuracy_pct:.2f}/{per.avg_sign_accuracy_pct:.2f}")
    dt = time.perf_counter() - t0
    # informational only: the same comparison with a 1e-3 zero band
    banded = sum(a.avg_sign_accuracy_pct > p.avg_sign_accuracy_pct
                 for a, p in (_fed_pair(ck, s, 1e-3) for s in SEEDS))
    conftest.ACCEPTANCE_LINES.append(
        f"INFO  directional replication with eps_zero=1e-3: FedAvg ahead on {banded}/5 seeds")
    record("directional replication", wins >= 4 and dt < 600,
           f"FedAvg ahead on {wins}/5 seeds (FedAvg/FedPer accuracy %: {', '.join(cells)}); "
           f"{dt:.1f} s")


@pytest.mark.slow
def test_pretraining_learnability():
    t0 = time.perf_counter()
    res = pipeline.pretrain(config.ExperimentConfig(seed=42))
    dt = time.perf_counter() - t0
    epochs = len(res.history.epochs)
    ok = (res.holdout_mae <= 0.30 and res.holdout_sign_accuracy >= 0.85
          and epochs <= 200 and dt < 300)
    record("pre-training learnability", ok,
           f"held-out MAE {res.holdout_mae:.4f} (<= 0.30), sign accuracy "
           f"{100 * res.holdout_sign_accuracy:.2f}% (>= 85), {epochs} epochs, {dt:.1f} s")


def test_gradient_oracle():
    worst = 0.0
    archs = test_mlp.random_archs(20)
    for idx, arch in enumerate(archs):
        params, x, y = test_mlp.away_from_kinks(100 + idx, arch)
        _, grads = mlp.loss_and_grads(params, x, y)
        worst = max(worst, test_mlp.max_rel_error(grads, test_mlp.fd_grads(params, x, y)))
    record("gradient oracle", worst < 1e-4 and len(archs) >= 20,
           f"max relative error {worst:.2e} over {len(archs)} architectures")


def test_aggregation_oracle(small_pretrained):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        ups = test_fedsim._random_updates(rng)
        for g, w in zip(fedsim.fedavg_aggregate(ups), test_fedsim.brute_mean(ups)):
            worst = max(worst, np.abs(g.weight - w.weight).max(), np.abs(g.bias - w.bias).max())

    ck = small_pretrained.checkpoint
    cfg = fedsim.FedConfig(strategy="fedper")
    clients = pipeline.build_clients(config.ExperimentConfig(seed=42))
    server = mlp.copy_params(ck.params[:3])
    for c in clients:
        c.head = mlp.copy_params(ck.params[3:])
    heads_ok = True
    for rnd in range(5):
        ups = [fedsim.local_finetune(c, server, cfg, mlp.TrainConfig(), ck.scaler, ck.arch,
                                     round_idx=rnd) for c in clients]
        snap = [[(p.weight.tobytes(), p.bias.tobytes()) for p in c.head] for c in clients]
        server = fedsim.fedper_aggregate(ups, 3)
        heads_ok &= snap == [[(p.weight.tobytes(), p.bias.tobytes()) for p in c.head]
                             for c in clients]
        heads_ok &= len(server) == 3
    record("aggregation oracle", worst < 1e-12 and heads_ok,
           f"max |fedavg - brute force| {worst:.1e} on 100 fixtures; "
           f"heads bit-identical across aggregation in 5 rounds: {heads_ok}")


def test_sensor_hand_traces():
    cfg = SensorConfig()
    s = TrackerState()
    for sample in (AccelSample(1000, 3, 0, 0), AccelSample(1100, 0, 0, 0.5),
                   AccelSample(1500, 3, 0, 0)):
        s = ss.step_update(s, sample, cfg)
    night = ss.process_trace(
        test_sensorsim._night_trace(np.random.Generator(np.random.PCG64(0))), cfg)
    spikes = ss.process_trace(test_sensorsim._spikes(100), cfg)
    ok = ((s.step_count, s.distance_m) == (2, 1.0)
          and abs(night.sleep_hrs - 8.0) <= 2 / 60 and spikes.steps == 100)
    record("sensor hand traces", ok,
           f"debounce -> steps={s.step_count}, distance={s.distance_m} m; "
           f"night -> {night.sleep_hrs:.4f} h; spikes -> {spikes.steps} steps")


def test_determinism(small_checkpoint, tmp_path, capsys):
    paths = []
    for i in range(2):
        out = tmp_path / f"fed{i}.json"
        csv = tmp_path / f"gen{i}.csv"
        assert cli.main(["fed", "--strategy", "fedavg", "--seed", "42", "--checkpoint",
                         str(small_checkpoint), "--out", str(out)]) == 0
        assert cli.main(["generate", "--users", "20", "--days", "15", "--seed", "42",
                         "--out", str(csv)]) == 0
        paths.append((out.read_bytes(), csv.read_bytes()))
    capsys.readouterr()
    # the generator's first rows are also pinned byte-for-byte in test_synthgen
    ok = paths[0] == paths[1]
    record("determinism", ok, "fed reports and generated CSVs byte-identical across two runs")


def test_recommender_pipeline():
    cfg = rc.RecommenderConfig()
    items = [rc.RiskItem("sleep", 2.0, cfg.message("sleep", "low")),
             rc.RiskItem("distance", 1.6, cfg.message("distance", "low")),
             rc.RiskItem("bmi", 0.4, cfg.message("bmi", "high"))]
    out = rc.select(items, rc.composite(items), cfg)
    ideal = rc.recommend([6.0, 8.0, 22.0, 25, 1, 2, 0], [0.0, 0.0], cfg)
    ok = (len(out.messages) == 2 and [i.risk for i in out.items] == [2.0, 1.6]
          and out.high_priority is True
          and ideal.messages == ("Your lifestyle parameters are close to ideal. Keep it up!",))
    record("recommender pipeline", ok,
           f"worked example -> {len(out.messages)} messages, risks "
           f"{[i.risk for i in out.items]}, high_priority={out.high_priority}; "
           f"all-ideal -> {ideal.messages[0]!r}")


def test_strict_band_explains_learnability_gap(default_pretrained):
    """Not a criterion: shows where the strict-band accuracy is lost."""
    cfg = config.ExperimentConfig(seed=42)
    res = default_pretrained
    recs = synthgen.flatten(synthgen.generate_dataset(200, 10, 7, cfg.generator))
    y = features.labels_many(recs, cfg.model.ranges)
    pred = mlp.forward(res.checkpoint.params, res.checkpoint.scaler.transform(
        features.engineer_many(recs)))
    zero_share = float((y == 0).mean())
    conftest.ACCEPTANCE_LINES.append(
        f"INFO  fresh-sample sign accuracy: strict {sign_accuracy(y, pred):.2%}, "
        f"eps_zero=1e-3 {sign_accuracy(y, pred, 1e-3):.2%}, "
        f"eps_zero=1e-2 {sign_accuracy(y, pred, 1e-2):.2%}; exact-zero labels {zero_share:.1%}")
    # a linear output layer essentially never lands on exactly 0.0
    assert (pred == 0).mean() < 0.01 and zero_share > 0.3
