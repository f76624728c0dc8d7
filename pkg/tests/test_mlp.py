import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rimsim import features, mlp
from rimsim.mlp import Architecture, Dense, TrainConfig

SMALL = Architecture(7, (4,), 2, "relu", 1)


# -- independent reference used by the gradient oracle ----------------------

def ref_loss(params, x, y, loss="mae"):
    """Per-sample, per-unit loops; shares no code with rimsim.mlp."""
    total = 0.0
    for xi, yi in zip(x, y):
        a = list(xi)
        for li, layer in enumerate(params):
            z = [sum(layer.weight[o, i] * a[i] for i in range(len(a))) + layer.bias[o]
                 for o in range(layer.weight.shape[0])]
            a = z if li == len(params) - 1 else [max(v, 0.0) for v in z]
        for yo, ao in zip(yi, a):
            total += abs(ao - yo) if loss == "mae" else (ao - yo) ** 2
    return total / (len(x) * len(y[0]))


def ref_margins(params, x, y):
    """Smallest |pre-activation| in hidden layers and smallest |residual|."""
    hid, res = math.inf, math.inf
    for xi, yi in zip(x, y):
        a = np.asarray(xi, float)
        for li, layer in enumerate(params):
            z = layer.weight @ a + layer.bias
            if li < len(params) - 1:
                hid = min(hid, float(np.abs(z).min()))
                a = np.maximum(z, 0)
            else:
                res = min(res, float(np.abs(z - yi).min()))
    return hid, res


def fd_grads(params, x, y, h=1e-5, loss="mae"):
    out = []
    for li, layer in enumerate(params):
        g = []
        for arr in layer:
            ga = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = ref_loss(params, x, y, loss)
                arr[idx] = old - h
                down = ref_loss(params, x, y, loss)
                arr[idx] = old
                ga[idx] = (up - down) / (2 * h)
            g.append(ga)
        out.append(Dense(*g))
    return out


def away_from_kinks(seed, arch, n=3, margin=1e-3):
    rng = np.random.default_rng(seed)
    while True:
        params = mlp.init_model(arch, int(rng.integers(1 << 30)))
        params = [Dense(p.weight, rng.normal(0, 0.3, p.bias.shape)) for p in params]
        x = rng.normal(size=(n, arch.input_dim))
        y = rng.normal(size=(n, arch.output_dim))
        hid, res = ref_margins(params, x, y)
        if hid > margin and res > margin:
            return params, x, y


def max_rel_error(analytic, numeric):
    # the floor sits well above central-difference rounding noise (~1e-11)
    worst = 0.0
    for a_layer, n_layer in zip(analytic, numeric):
        for a, n in zip(a_layer, n_layer):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def random_archs(count, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        depth = int(rng.integers(1, 4))
        hidden = tuple(int(v) for v in rng.integers(2, 7, size=depth))
        out.append(Architecture(int(rng.integers(2, 8)), hidden, int(rng.integers(1, 3)),
                                "relu", 1))
    return out


def test_gradients_small_fixture():
    params, x, y = away_from_kinks(0, SMALL)
    _, grads = mlp.loss_and_grads(params, x, y)
    assert max_rel_error(grads, fd_grads(params, x, y)) < 1e-4


@pytest.mark.parametrize("idx,arch", list(enumerate(random_archs(20))))
def test_gradients_random_architectures(idx, arch):
    params, x, y = away_from_kinks(100 + idx, arch)
    loss, grads = mlp.loss_and_grads(params, x, y)
    assert loss == pytest.approx(ref_loss(params, x, y), rel=1e-12)
    assert max_rel_error(grads, fd_grads(params, x, y)) < 1e-4


def test_gradients_mse_option():
    params, x, y = away_from_kinks(7, SMALL)
    _, grads = mlp.loss_and_grads(params, x, y, loss="mse")
    assert max_rel_error(grads, fd_grads(params, x, y, loss="mse")) < 1e-4


def test_perfect_fit_has_zero_loss_and_gradients():
    params = mlp.init_model(SMALL, 0)
    x = np.random.default_rng(0).normal(size=(5, 7))
    y = mlp.forward(params, x)
    loss, grads = mlp.loss_and_grads(params, x, y)
    assert loss == 0.0
    assert all(not g.weight.any() and not g.bias.any() for g in grads)


def test_hand_loss():
    # output layer only: prediction equals the bias
    params = [Dense(np.zeros((2, 7)), np.array([2.0, 4.0]))]
    loss, _ = mlp.loss_and_grads(params, np.zeros((1, 7)), np.array([[1.0, 2.0]]))
    assert loss == 1.5


def test_non_finite_batch_rejected():
    params = mlp.init_model(SMALL, 0)
    with pytest.raises(ValueError):
        mlp.loss_and_grads(params, np.full((1, 7), np.nan), np.zeros((1, 2)))


# -- initialisation and forward ---------------------------------------------

def test_init_determinism_and_zero_bias():
    a = mlp.init_model(Architecture(), 3)
    b = mlp.init_model(Architecture(), 3)
    assert all(np.array_equal(p.weight, q.weight) for p, q in zip(a, b))
    assert all(not p.bias.any() for p in a)


def test_init_variance():
    arch = Architecture()
    for li, fan_in in enumerate(arch.widths[:-1]):
        var = np.mean([mlp.init_model(arch, s)[li].weight.var() for s in range(5)])
        assert abs(var / (2.0 / fan_in) - 1) < 0.2, li


def test_invalid_arch_rejected():
    with pytest.raises(ValueError):
        mlp.init_model(Architecture(split_index=6), 0)
    with pytest.raises(ValueError):
        mlp.init_model(Architecture(hidden=(64, 0)), 0)


def test_zero_params_give_zero_output():
    params = [Dense(np.zeros_like(p.weight), np.zeros_like(p.bias))
              for p in mlp.init_model(Architecture(), 0)]
    x = np.random.default_rng(0).normal(size=(4, 7))
    assert not mlp.forward(params, x).any()


def test_selection_fixture():
    w = np.zeros((2, 7))
    w[0, 1] = 1.0  # sleep
    w[1, 0] = 1.0  # distance
    out = mlp.forward([Dense(w, np.zeros(2))], np.arange(7.0))
    assert list(out) == [1.0, 0.0]


def test_shape_mismatch():
    with pytest.raises(ValueError):
        mlp.forward(mlp.init_model(Architecture(), 0), np.zeros(6))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (3, 7), elements=st.floats(-1e6, 1e6)))
def test_forward_finite(x):
    assert np.all(np.isfinite(mlp.forward(mlp.init_model(Architecture(), 1), x)))


# -- Adam -------------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    params = mlp.init_model(SMALL, 0)
    state = mlp.adam_init(params)
    zeros = [Dense(np.zeros_like(p.weight), np.zeros_like(p.bias)) for p in params]
    _, new = mlp.adam_step(state, params, zeros)
    assert all(np.array_equal(p.weight, q.weight) for p, q in zip(params, new))


def test_adam_first_step_is_lr_times_sign():
    params = mlp.init_model(SMALL, 0)
    rng = np.random.default_rng(1)
    grads = [Dense(rng.normal(size=p.weight.shape), rng.normal(size=p.bias.shape))
             for p in params]
    state, new = mlp.adam_step(mlp.adam_init(params, lr=1e-3), params, grads)
    for p, q, g in zip(params, new, grads):
        # m_hat / sqrt(v_hat) = g / |g|; eps perturbs at the 1e-8 / |g| level
        np.testing.assert_allclose(q.weight - p.weight, -1e-3 * np.sign(g.weight), rtol=1e-4)
        np.testing.assert_allclose(q.bias - p.bias, -1e-3 * np.sign(g.bias), rtol=1e-4)
    assert state.step == 1


def test_adam_deterministic():
    params = mlp.init_model(SMALL, 0)
    grads = mlp.loss_and_grads(params, np.ones((2, 7)), np.ones((2, 2)))[1]
    s = mlp.adam_init(params)
    a = mlp.adam_step(s, params, grads)[1]
    b = mlp.adam_step(s, params, grads)[1]
    assert all(np.array_equal(p.weight, q.weight) for p, q in zip(a, b))


# -- training ---------------------------------------------------------------

def _learnable(n=500, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 7))
    y = np.stack([np.maximum(-x[:, 1], 0) - np.maximum(x[:, 1] - 1, 0),
                  np.maximum(-x[:, 0], 0)], axis=1)
    return x, y


def test_patience_zero_runs_one_epoch():
    x, y = _learnable(64)
    _, hist = mlp.train(mlp.init_model(SMALL, 0), (x, y), (x[:16], y[:16]),
                        TrainConfig(patience=0, epochs=50))
    assert len(hist.epochs) == 1


def test_training_reduces_loss():
    x, y = _learnable()
    params = mlp.init_model(SMALL, 0)
    initial = mlp.evaluate_loss(params, x, y)
    trained, hist = mlp.train(params, (x, y), None, TrainConfig(epochs=30))
    assert mlp.evaluate_loss(trained, x, y) < initial
    assert hist.train_loss[-1] < hist.train_loss[0]


def test_training_determinism():
    x, y = _learnable(200)
    cfg = TrainConfig(epochs=5, seed=9)
    _, h1 = mlp.train(mlp.init_model(SMALL, 0), (x, y), (x[:50], y[:50]), cfg)
    _, h2 = mlp.train(mlp.init_model(SMALL, 0), (x, y), (x[:50], y[:50]), cfg)
    assert h1.to_dict() == h2.to_dict()


def test_early_stopping_returns_best_params():
    x, y = _learnable(300)
    vx, vy = _learnable(100, seed=1)
    best, hist = mlp.train(mlp.init_model(SMALL, 0), (x, y), (vx, vy),
                           TrainConfig(epochs=40, patience=3))
    assert mlp.evaluate_loss(best, vx, vy) == pytest.approx(
        min(e.val_loss for e in hist.epochs), rel=1e-12)


def test_empty_sets_rejected():
    x, y = _learnable(10)
    with pytest.raises(ValueError):
        mlp.train(mlp.init_model(SMALL, 0), (x[:0], y[:0]), None, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        mlp.train(mlp.init_model(SMALL, 0), (x, y), (x[:0], y[:0]), TrainConfig(epochs=1))


# -- checkpoints ------------------------------------------------------------

@pytest.fixture
def saved(tmp_path):
    arch = Architecture()
    params = mlp.init_model(arch, 5)
    scaler = features.fit_scaler(np.random.default_rng(0).normal(size=(30, 7)))
    path = tmp_path / "ck.json"
    mlp.save_checkpoint(params, scaler, arch, path)
    return path, params, scaler, arch


def test_checkpoint_round_trip(saved):
    path, params, scaler, arch = saved
    ck = mlp.load_checkpoint(path, expect_arch=arch)
    assert ck.arch == arch
    for p, q in zip(params, ck.params):
        assert p.weight.tobytes() == q.weight.tobytes()
        assert p.bias.tobytes() == q.bias.tobytes()
    assert ck.scaler.mean.tobytes() == scaler.mean.tobytes()


def test_truncated_checkpoint(saved):
    path = saved[0]
    path.write_bytes(path.read_bytes()[:-200])
    with pytest.raises(mlp.CheckpointError):
        mlp.load_checkpoint(path)


def test_tampered_checkpoint(saved):
    path = saved[0]
    doc = json.loads(path.read_text())
    doc["layers"][0]["bias"][0] = 1.0
    path.write_text(json.dumps(doc))
    with pytest.raises(mlp.CheckpointError, match="checksum"):
        mlp.load_checkpoint(path)


def test_version_mismatch(saved):
    path = saved[0]
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(mlp.CheckpointError, match="version"):
        mlp.load_checkpoint(path)


def test_architecture_guard(saved):
    with pytest.raises(mlp.CheckpointError):
        mlp.load_checkpoint(saved[0], expect_arch=Architecture(hidden=(32, 16)))
