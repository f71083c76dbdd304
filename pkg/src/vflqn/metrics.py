from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.stats import rankdata

DEFAULT_TOL = 1e-5


def auc(scores, labels) -> float:
    """ROC AUC via the Mann-Whitney rank statistic, ties counted as 1/2."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined with a single class")
    ranks = rankdata(scores)  # midranks for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def should_stop(losses, tol: float = DEFAULT_TOL) -> bool:
    if len(losses) < 2:
        return False
    return abs(losses[-1] - losses[-2]) < tol


REPORT_SCHEMA_VERSION = 1


@dataclass
class TrainingReport:
    method: str
    backend: str
    config: dict
    epochs: int
    epoch_losses: list
    round_losses: list
    stop_reason: str
    w_a: np.ndarray
    w_b: np.ndarray
    test_auc: Optional[float]
    train_auc: Optional[float]
    train_taylor_loss: float
    train_exact_loss: float
    rounds: int
    rebuilds: int = 0
    rejected_pairs: int = 0
    max_s_discrepancy: float = 0.0
    runtime_s: float = 0.0
    ledger: Any = None
    trajectory: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.stop_reason == "converged"

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.w_a, self.w_b])

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "method": self.method,
            "backend": self.backend,
            "config": self.config,
            "epochs": self.epochs,
            "final_loss": self.final_loss,
            "test_auc": self.test_auc,
            "train_auc": self.train_auc,
            "train_taylor_loss": self.train_taylor_loss,
            "train_exact_loss": self.train_exact_loss,
            "epoch_losses": list(self.epoch_losses),
            "round_losses": list(self.round_losses),
            "stop_reason": self.stop_reason,
            "converged": self.converged,
            "rounds": self.rounds,
            "rebuilds": self.rebuilds,
            "rejected_pairs": self.rejected_pairs,
            "memory_M": self.config.get("memory"),
            "max_s_discrepancy": self.max_s_discrepancy,
            "runtime_s": self.runtime_s,
            "w_a": self.w_a.tolist(),
            "w_b": self.w_b.tolist(),
            "ledger": self.ledger.to_json() if self.ledger is not None else None,
        }
