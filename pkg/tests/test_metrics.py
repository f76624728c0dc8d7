import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rimsim.metrics import ClientMetrics, MetricsReport, aggregate_report, mae, sign_accuracy

FEDAVG_ROWS = [(81.42, 0.82), (67.14, 0.79), (34.63, 0.81), (65.67, 0.62), (25.18, 0.90),
            (74.28, 0.87), (74.28, 0.41), (38.57, 1.91), (69.28, 1.32), (76.67, 0.69)]
FEDPER_ROWS = [(63.57, 1.26), (47.32, 2.48), (31.33, 0.12), (60.72, 1.52), (25.71, 0.29),
            (25.91, 1.46), (60.83, 0.97), (46.67, 1.14), (47.14, 1.24), (54.16, 1.47)]


def rows(table):
    return [ClientMetrics(i, a, m) for i, (a, m) in enumerate(table)]


def test_sign_accuracy_examples():
    assert sign_accuracy([1, 0, -1], [2, 0, -3]) == 1.0
    assert sign_accuracy([1, -1], [-2, -1]) == 0.5
    assert sign_accuracy([0], [0.1], 0.0) == 0.0
    assert sign_accuracy([0], [0.1], 0.2) == 1.0


def test_mae_examples():
    assert mae([1, 2], [1, 2]) == 0.0
    assert mae([1, 2], [2, 4]) == 1.5


def test_length_mismatch():
    with pytest.raises(ValueError):
        sign_accuracy([1, 2], [1])
    with pytest.raises(ValueError):
        mae([1], [1, 2])
    with pytest.raises(ValueError):
        mae([], [])


def _brute_sign(v, eps):
    return 0 if abs(v) <= eps else (1 if v > 0 else -1)


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=50),
       st.sampled_from([0.0, 0.01, 0.5]))
def test_metrics_match_brute_force(pairs, eps):
    y = [a for a, _ in pairs]
    p = [b for _, b in pairs]
    hits = sum(_brute_sign(a, eps) == _brute_sign(b, eps) for a, b in pairs)
    assert abs(sign_accuracy(y, p, eps) - hits / len(pairs)) < 1e-12
    assert abs(mae(y, p) - sum(abs(a - b) for a, b in pairs) / len(pairs)) < 1e-12


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=30),
       st.randoms())
def test_mae_permutation_invariant(pairs, rnd):
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    a = mae([x for x, _ in pairs], [y for _, y in pairs])
    b = mae([x for x, _ in shuffled], [y for _, y in shuffled])
    assert a == pytest.approx(b, abs=1e-12)


def test_table_averages():
    r1 = aggregate_report(rows(FEDAVG_ROWS))
    assert f"{r1.avg_sign_accuracy_pct:.2f}" == "60.71"
    assert f"{r1.avg_mae:.2f}" == "0.91"
    r2 = aggregate_report(rows(FEDPER_ROWS))
    assert f"{r2.avg_sign_accuracy_pct:.2f}" == "46.34"
    assert abs(r2.avg_mae - 1.19) <= 0.005 + 1e-12


def test_single_client_identity():
    r = aggregate_report([ClientMetrics(3, 55.5, 0.7)])
    assert (r.avg_sign_accuracy_pct, r.avg_mae) == (55.5, 0.7)


def test_empty_rows_rejected():
    with pytest.raises(ValueError):
        aggregate_report([])


def test_report_round_trip_keeps_full_precision():
    r = aggregate_report(rows(FEDAVG_ROWS), strategy="fedavg", seed=1)
    back = MetricsReport.from_dict(r.to_dict())
    assert back.avg_sign_accuracy_pct == r.avg_sign_accuracy_pct
    assert r.to_dict()["average"]["sign_accuracy_pct"] == pytest.approx(60.712)
    assert "Average" in r.render() and "60.71" in r.render()
