"""Centralized reference trainer.

Runs the same iteration as the federated protocol (same batches, same S_H,
same window averaging, same curvature memory) on the unpartitioned training
matrix with explicit weight copies. It is the trajectory oracle for
:func:`vflqn.protocol.run_protocol`.
"""
from dataclasses import dataclass, field

import numpy as np

from . import data, model
from .config import TrainingConfig
from .curvature import CurvatureStore
from .metrics import should_stop


@dataclass
class OracleResult:
    w: np.ndarray
    epoch_losses: list
    round_losses: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    stop_reason: str = "max_epochs"
    rounds: int = 0
    store: CurvatureStore = None


def oracle_train(dataset, config: TrainingConfig, w0=None, record_trajectory: bool = False) -> OracleResult:
    X = dataset.full_matrix()[dataset.train_idx]
    y = dataset.y[dataset.train_idx]
    T, n = X.shape
    w = np.zeros(n) if w0 is None else np.asarray(w0, dtype=float).copy()
    store = CurvatureStore(n, config.memory)
    L = config.curvature_window
    per_epoch = data.rounds_per_epoch(T, config.batch_size)

    history = []  # weights at the start of each round
    epoch_losses, round_losses = [], []
    trajectory = [w.copy()] if record_trajectory else []
    k = 0
    stop_reason = "max_epochs"
    for epoch in range(config.max_epochs):
        batches = data.batch_stream(T, config.batch_size, config.seed, epoch)
        start = len(round_losses)
        capped = False
        for S in batches[:per_epoch]:
            if config.max_rounds is not None and k >= config.max_rounds:
                capped = True
                break
            k += 1
            history.append(w.copy())
            round_losses.append(model.taylor_loss(w, X[S], y[S]))
            g = model.taylor_gradient(w, X[S], y[S])
            w_next = w - config.eta * (store.H @ g)
            if L is not None and k % L == 0 and k >= 2 * L:
                s = np.mean(history[-L:], axis=0) - np.mean(history[-2 * L:-L], axis=0)
                if config.hessian_batch_size is None:
                    S_H = S
                else:
                    S_H = data.hessian_batch(T, config.hessian_batch_size, config.seed, k)
                v = model.hessian_vector(X[S_H], s)
                if store.push_pair(s, v, t=k // L):
                    store.rebuild()
            w = w_next
            if record_trajectory:
                trajectory.append(w.copy())
        if len(round_losses) > start:
            epoch_losses.append(float(np.mean(round_losses[start:])))
        if capped or (config.max_rounds is not None and k >= config.max_rounds):
            stop_reason = "max_rounds"
            break
        if should_stop(epoch_losses, config.tol):
            stop_reason = "converged"
            break
    return OracleResult(w, epoch_losses, round_losses, trajectory, stop_reason, k, store)
