"""Sign accuracy, MAE and per-client reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise ValueError("metrics need at least one value")
    return y, y_hat


def banded_sign(v: np.ndarray, eps_zero: float = 0.0) -> np.ndarray:
    """Signum with a dead band: ``|v| <= eps_zero`` maps to 0."""
    s = np.sign(v)
    s[np.abs(v) <= eps_zero] = 0.0
    return s


def sign_accuracy(y, y_hat, eps_zero: float = 0.0) -> float:
    """Fraction of pooled entries whose sign (+1, 0, -1) matches."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(banded_sign(y, eps_zero) == banded_sign(y_hat, eps_zero)))


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


@dataclass(frozen=True)
class ClientMetrics:
    client_id: int
    sign_accuracy_pct: float
    mae: float
    per_output: dict | None = None

    def to_dict(self) -> dict:
        d = {"client_id": self.client_id, "sign_accuracy_pct": self.sign_accuracy_pct,
             "mae": self.mae}
        if self.per_output is not None:
            d["per_output"] = self.per_output
        return d


@dataclass
class MetricsReport:
    clients: list[ClientMetrics]
    avg_sign_accuracy_pct: float
    avg_mae: float
    strategy: str = ""
    seed: int | None = None
    config_digest: str = ""
    telemetry: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "clients": [c.to_dict() for c in self.clients],
            "average": {
                "sign_accuracy_pct": self.avg_sign_accuracy_pct,
                "mae": self.avg_mae,
                "sign_accuracy_pct_display": f"{self.avg_sign_accuracy_pct:.2f}",
                "mae_display": f"{self.avg_mae:.2f}",
            },
            "telemetry": self.telemetry,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        """Rebuild a report from its client rows; averages are recomputed."""
        rows = [
            ClientMetrics(int(c["client_id"]), float(c["sign_accuracy_pct"]), float(c["mae"]),
                          c.get("per_output"))
            for c in d["clients"]
        ]
        report = aggregate_report(rows)
        report.strategy = d.get("strategy", "")
        report.seed = d.get("seed")
        report.config_digest = d.get("config_digest", "")
        report.telemetry = list(d.get("telemetry", []))
        return report

    def render(self) -> str:
        title = "Client-wise accuracy (%) and mean absolute error"
        if self.strategy:
            title += f" ({self.strategy})"
        lines = [title, f"{'Client ID':<12}{'Accuracy (%)':>14}{'MAE':>10}", "-" * 36]
        for c in self.clients:
            lines.append(f"{'Client ' + str(c.client_id):<12}"
                         f"{c.sign_accuracy_pct:>14.2f}{c.mae:>10.2f}")
        lines.append("-" * 36)
        lines.append(f"{'Average':<12}{self.avg_sign_accuracy_pct:>14.2f}{self.avg_mae:>10.2f}")
        return "\n".join(lines) + "\n"


def aggregate_report(rows: list[ClientMetrics], strategy: str = "", seed: int | None = None,
                     config_digest: str = "") -> MetricsReport:
    """Unweighted means over clients, at full precision, ordered by client id."""
    if not rows:
        raise ValueError("aggregate_report needs at least one client row")
    rows = sorted(rows, key=lambda r: r.client_id)
    for r in rows:
        if not 0.0 <= r.sign_accuracy_pct <= 100.0:
            raise ValueError(f"client {r.client_id}: accuracy {r.sign_accuracy_pct} outside [0, 100]")
    acc = float(np.mean([r.sign_accuracy_pct for r in rows]))
    err = float(np.mean([r.mae for r in rows]))
    return MetricsReport(rows, acc, err, strategy, seed, config_digest)


def client_metrics(client_id: int, y: np.ndarray, y_hat: np.ndarray, eps_zero: float = 0.0,
                   per_output: bool = False) -> ClientMetrics:
    extra = None
    if per_output:
        y2 = np.asarray(y, dtype=float).reshape(-1, 2)
        p2 = np.asarray(y_hat, dtype=float).reshape(-1, 2)
        extra = {
            name: {"sign_accuracy_pct": 100.0 * sign_accuracy(y2[:, j], p2[:, j], eps_zero),
                   "mae": mae(y2[:, j], p2[:, j])}
            for j, name in enumerate(("sleep", "distance"))
        }
    return ClientMetrics(client_id, 100.0 * sign_accuracy(y, y_hat, eps_zero), mae(y, y_hat), extra)
