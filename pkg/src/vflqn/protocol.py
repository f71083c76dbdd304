"""Round-robin scheduler that runs the three parties over the transport."""
import time
from typing import Callable, Optional

import numpy as np

from . import data, model
from .config import TrainingConfig
from .data import PartitionedDataset
from .he import HEBackend, make_backend
from .metrics import TrainingReport, auc
from .parties import Coordinator, GuestParty, HostParty
from .transport import A, B, C, Kind, Network, ProtocolMessage


def _safe_auc(scores, labels) -> Optional[float]:
    if len(labels) == 0 or len(np.unique(labels)) < 2:
        return None
    return auc(scores, labels)


def evaluate(w: np.ndarray, dataset: PartitionedDataset) -> dict:
    X = dataset.full_matrix()
    Xtr, ytr = X[dataset.train_idx], dataset.y[dataset.train_idx]
    Xte, yte = X[dataset.test_idx], dataset.y[dataset.test_idx]
    return {
        "train_taylor_loss": model.taylor_loss(w, Xtr, ytr),
        "train_exact_loss": model.exact_loss(w, Xtr, ytr),
        "train_auc": _safe_auc(Xtr @ w, ytr),
        "test_auc": _safe_auc(Xte @ w, yte) if len(yte) else None,
    }


def run_protocol(
    dataset: PartitionedDataset,
    config: TrainingConfig,
    backend: "HEBackend | str" = "mock",
    *,
    key_bits: int = 2048,
    transcript_path=None,
    w0=None,
    on_rebuild: Optional[Callable] = None,
    record_trajectory: bool = False,
) -> TrainingReport:
    """Train with the three-party protocol until the stopping rule or a cap.

    ``backend`` is the coordinator's (private) backend or a backend name;
    A and B only get its public half. ``on_rebuild(coordinator, k)`` is
    called after every H rebuild.
    """
    started = time.perf_counter()
    he = make_backend(backend, key_bits) if isinstance(backend, str) else backend
    public = he.public_only()
    tr = dataset.train_idx
    w0 = np.zeros(dataset.n) if w0 is None else np.asarray(w0, dtype=float)

    host = HostParty(dataset.XA[tr], public, config, w0[:dataset.n_a])
    guest = GuestParty(dataset.XB[tr], dataset.y[tr], public, config, w0[dataset.n_a:])
    coord = Coordinator(he, dataset.n_a, dataset.n_b, config)

    net = Network(transcript_path)
    L = config.curvature_window
    net.ledger.meta.update(n=dataset.n, n_a=dataset.n_a, n_b=dataset.n_b, method=config.method,
                           window=L, batch_size=config.batch_size,
                           hessian_batch_size=config.hessian_batch_size, backend=he.name)
    key_meta = {"public_key": he.public_key.to_json()}
    net.send(ProtocolMessage(Kind.Setup, 0, C, A, meta=key_meta))
    net.send(ProtocolMessage(Kind.Setup, 0, C, B, meta=key_meta))
    net.send(ProtocolMessage(Kind.Setup, 0, A, B, meta={"shared_seed": config.seed}))
    for s, r in ((C, A), (C, B), (A, B)):
        net.recv(s, r, Kind.Setup)

    per_epoch = data.rounds_per_epoch(host.n_train, config.batch_size)
    k = 0
    stop_reason = "max_epochs"
    max_disc = 0.0
    trajectory = [w0.copy()] if record_trajectory else []

    for epoch in range(config.max_epochs):
        done_rounds = 0
        capped = False
        for pos in range(per_epoch):
            if config.max_rounds is not None and k >= config.max_rounds:
                capped = True
                break
            k += 1
            host.begin_round(k, epoch, pos)
            guest.begin_round(k, epoch, pos)
            coord.begin_round(k)

            host.send_u(net, k)
            guest.send_loss_and_d(net, k)
            host.send_gradient(net, k)
            guest.send_gradient(net, k)

            h_size = 0
            closes = config.closes_window(k)
            if closes:
                s_a, s_b = host.close_window(), guest.close_window()
                if s_a is not None:
                    host.send_delta_u(net, k)
                    guest.send_h(net, k)
                    host.send_v(net, k)
                    guest.send_v(net, k)
                    h_size = len(host.S_H)

            coord.step(net, k)
            if closes:
                s = coord.close_window(net, k)
                if s is not None:
                    max_disc = max(max_disc, float(np.max(np.abs(s - np.concatenate([s_a, s_b])))))
                    if coord.last_admitted and on_rebuild is not None:
                        on_rebuild(coord, k)
            host.apply_step(net, k, Kind.StepA)
            guest.apply_step(net, k, Kind.StepB)

            net.ledger.note_round(k, epoch=epoch, batch=len(host.S), hessian=h_size,
                                  rebuild=bool(closes and coord.last_admitted and h_size))
            if record_trajectory:
                trajectory.append(np.concatenate([host.w, guest.w]))
            done_rounds += 1

        if done_rounds:
            stop = coord.end_epoch(done_rounds)
        else:
            stop = False
        if capped:
            stop_reason = "max_rounds"
            break
        if stop:
            stop_reason = "converged"
            break
        if config.max_rounds is not None and k >= config.max_rounds:
            stop_reason = "max_rounds"
            break

    net.write_summary()
    net.close()
    w = np.concatenate([host.w, guest.w])
    ev = evaluate(w, dataset)
    return TrainingReport(
        method=config.method,
        backend=he.name,
        config=config.as_dict(),
        epochs=len(coord.epoch_losses),
        epoch_losses=list(coord.epoch_losses),
        round_losses=list(coord.round_losses),
        stop_reason=stop_reason,
        w_a=host.w.copy(),
        w_b=guest.w.copy(),
        rounds=k,
        rebuilds=coord.store.rebuilds,
        rejected_pairs=coord.store.rejected,
        max_s_discrepancy=max_disc,
        runtime_s=time.perf_counter() - started,
        ledger=net.ledger,
        trajectory=trajectory,
        **ev,
    )
