"""Host (A), guest (B) and coordinator (C) state machines.

Each party only ever sees its own plaintext plus what arrives on its
channels. Parties are driven one protocol step at a time by
:func:`vflqn.protocol.run_protocol`.
"""
import math
from typing import Optional

import numpy as np

from . import data
from .config import TrainingConfig
from .curvature import CurvatureStore, descent_direction
from .errors import DivergenceError, ProtocolError
from .he.base import HEBackend
from .he.encoding import DEFAULT_EXPONENT
from .metrics import should_stop
from .transport import A, B, C, Kind, Network, ProtocolMessage

LOG2 = math.log(2.0)
# exponent for values that get added to a (1/4) * ciphertext product
PRODUCT_EXPONENT = 2 * DEFAULT_EXPONENT


class _DataParty:
    """Bookkeeping shared by A and B: weights, batches, window averages."""

    __slots__ = ("w", "X", "he", "config", "S", "S_H", "window_sum", "window_rounds",
                 "prev_avg", "s", "_epoch", "_batches", "_pending")

    def __init__(self, X: np.ndarray, backend: HEBackend, config: TrainingConfig, w0=None):
        if backend.has_private_key:
            raise ProtocolError("data parties must only receive the public key")
        self.X = np.asarray(X, dtype=float)
        self.w = np.zeros(self.X.shape[1]) if w0 is None else np.asarray(w0, dtype=float).copy()
        if self.w.shape != (self.X.shape[1],):
            raise ValueError("initial weights do not match the local feature count")
        self.he = backend
        self.config = config
        self.S = None
        self.S_H = None
        self.window_sum = np.zeros_like(self.w)
        self.window_rounds = 0
        self.prev_avg = None
        self.s = None
        self._epoch = None
        self._batches = None
        self._pending = None

    @property
    def n_train(self) -> int:
        return self.X.shape[0]

    def begin_round(self, k: int, epoch: int, position: int) -> None:
        """Derive S (and S_H on window-closing rounds) from the shared seed."""
        if self._epoch != epoch:
            self._batches = data.batch_stream(self.n_train, self.config.batch_size, self.config.seed, epoch)
            self._epoch = epoch
        try:
            self.S = self._batches[position]
        except IndexError:
            raise ProtocolError(f"batch position {position} out of range in epoch {epoch}") from None
        self.S_H = None
        if self.config.curvature_window is not None:
            self.window_sum = self.window_sum + self.w
            self.window_rounds += 1
            if self.config.closes_window(k):
                if self.config.hessian_batch_size is None:
                    self.S_H = self.S
                else:
                    self.S_H = data.hessian_batch(self.n_train, self.config.hessian_batch_size,
                                                  self.config.seed, k)

    def close_window(self) -> Optional[np.ndarray]:
        """Average the finished window; return s for this party's block, if defined."""
        L = self.config.curvature_window
        if self.window_rounds != L:
            raise ProtocolError(f"window holds {self.window_rounds} rounds, expected {L}")
        avg = self.window_sum / L
        self.s = None if self.prev_avg is None else avg - self.prev_avg
        self.prev_avg = avg
        self.window_sum = np.zeros_like(self.w)
        self.window_rounds = 0
        return self.s

    def _send_partial(self, net: Network, k: int, kind: Kind, weights_rows, cts) -> None:
        rows = self.X[weights_rows]
        agg = self.he.weighted_sums(rows / len(weights_rows), cts)
        net.send(ProtocolMessage(kind, k, self._me, C, tuple(agg)))

    def apply_step(self, net: Network, k: int, kind: Kind) -> None:
        msg = net.recv(C, self._me, kind)
        if msg.round != k:
            raise ProtocolError(f"step for round {msg.round} arrived in round {k}")
        step = np.array(msg.payload, dtype=float)
        if step.shape != self.w.shape:
            raise ProtocolError("step length does not match local weights")
        self.w = self.w - step


class HostParty(_DataParty):
    """Party A: features only."""

    __slots__ = ()
    _me = A

    def send_u(self, net: Network, k: int) -> None:
        u = self.X[self.S] @ self.w
        cts = self.he.encrypt_vector(np.concatenate([u, u * u]))
        net.send(ProtocolMessage(Kind.UA, k, A, B, tuple(cts)))

    def send_gradient(self, net: Network, k: int) -> None:
        d = net.recv(B, A, Kind.D).payload
        if len(d) != len(self.S):
            raise ProtocolError(f"got {len(d)} d-values for a batch of {len(self.S)}")
        self._send_partial(net, k, Kind.PartialGradA, self.S, list(d))

    def send_delta_u(self, net: Network, k: int) -> None:
        if self.s is None or self.S_H is None:
            raise ProtocolError("no closed window to form a curvature pair")
        du = self.X[self.S_H] @ self.s
        net.send(ProtocolMessage(Kind.DeltaUA, k, A, B, tuple(self.he.encrypt_vector(du))))

    def send_v(self, net: Network, k: int) -> None:
        h = net.recv(B, A, Kind.H_SCALARS).payload
        if len(h) != len(self.S_H):
            raise ProtocolError(f"got {len(h)} h-values for |S_H| = {len(self.S_H)}")
        self._send_partial(net, k, Kind.V_A, self.S_H, list(h))


class GuestParty(_DataParty):
    """Party B: features and labels."""

    __slots__ = ("y",)
    _me = B

    def __init__(self, X, y, backend, config, w0=None):
        super().__init__(X, backend, config, w0)
        self.y = np.asarray(y, dtype=float)
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("labels do not match local rows")

    def send_loss_and_d(self, net: Network, k: int) -> None:
        """Encrypted Taylor loss to C and encrypted d_i = (u_A + u_B)/4 - y/2 to A.

        The loss is assembled as one ciphertext: B's purely local terms are
        summed in plaintext and encrypted once, the terms involving u_A
        (including the cross term 2 u_B u_A / 8) are applied as plaintext
        coefficients on A's ciphertexts.
        """
        msg = net.recv(A, B, Kind.UA)
        m = len(self.S)
        if len(msg.payload) != 2 * m:
            raise ProtocolError(f"UA carries {len(msg.payload)} values for a batch of {m}")
        enc_u, enc_u2 = list(msg.payload[:m]), list(msg.payload[m:])
        y = self.y[self.S]
        u_b = self.X[self.S] @ self.w

        local = float(np.sum(LOG2 - 0.5 * y * u_b + 0.125 * u_b * u_b)) / m
        coeff = np.concatenate([(-0.5 * y + 0.25 * u_b) / m, np.full(m, 0.125 / m)])
        (cross,) = self.he.weighted_sums(coeff[:, None], enc_u + enc_u2)
        loss = self.he.add(cross, self.he.encrypt(local, PRODUCT_EXPONENT))
        net.send(ProtocolMessage(Kind.Loss, k, B, C, (loss,)))

        quarter_ua = self.he.scale_vector(np.full(m, 0.25), enc_u)
        own = self.he.encrypt_vector(0.25 * u_b - 0.5 * y, PRODUCT_EXPONENT)
        self._pending = self.he.add_vectors(quarter_ua, own)
        net.send(ProtocolMessage(Kind.D, k, B, A, tuple(self._pending)))

    def send_gradient(self, net: Network, k: int) -> None:
        d, self._pending = self._pending, None
        if d is None:
            raise ProtocolError("gradient requested before d was formed")
        self._send_partial(net, k, Kind.PartialGradB, self.S, d)

    def send_h(self, net: Network, k: int) -> None:
        """h_i = (s_A.x_i^A + s_B.x_i^B) / 4, returned encrypted to A."""
        if self.s is None or self.S_H is None:
            raise ProtocolError("no closed window to form a curvature pair")
        du_a = list(net.recv(A, B, Kind.DeltaUA).payload)
        if len(du_a) != len(self.S_H):
            raise ProtocolError(f"got {len(du_a)} delta-u values for |S_H| = {len(self.S_H)}")
        du_b = self.X[self.S_H] @ self.s
        h = self.he.add_vectors(self.he.scale_vector(np.full(len(du_a), 0.25), du_a),
                                self.he.encrypt_vector(0.25 * du_b, PRODUCT_EXPONENT))
        self._pending = h
        net.send(ProtocolMessage(Kind.H_SCALARS, k, B, A, tuple(h)))

    def send_v(self, net: Network, k: int) -> None:
        h, self._pending = self._pending, None
        self._send_partial(net, k, Kind.V_B, self.S_H, h)


class Coordinator:
    """Holds the private key and the curvature memory; issues steps.

    Plaintext weights are never stored here. The averaged displacement s_t is
    rebuilt from the running sum of issued steps: with c_k the sum of the
    first k steps, the round-i weights are w_1 - c_{i-1}, so
    ``s_t = -(sum_{i in window t} c_{i-1} - sum_{i in window t-1} c_{i-1}) / L``.
    """

    __slots__ = ("he", "n_a", "n_b", "config", "store", "k", "cum_step", "window_c", "window_rounds",
                 "prev_window_c", "round_losses", "epoch_losses", "last_s", "last_v", "last_admitted",
                 "_g")

    def __init__(self, backend: HEBackend, n_a: int, n_b: int, config: TrainingConfig):
        if not backend.has_private_key:
            raise ProtocolError("coordinator needs the private key")
        self.he = backend
        self.n_a, self.n_b = n_a, n_b
        self.config = config
        self.store = CurvatureStore(n_a + n_b, config.memory)
        self.k = 0
        self.cum_step = np.zeros(n_a + n_b)
        self.window_c = np.zeros(n_a + n_b)
        self.window_rounds = 0
        self.prev_window_c = None
        self.round_losses: list[float] = []
        self.epoch_losses: list[float] = []
        self.last_s = self.last_v = None
        self.last_admitted = False
        self._g = None

    @property
    def H(self) -> np.ndarray:
        return self.store.H

    def begin_round(self, k: int) -> None:
        self.k = k
        if self.config.curvature_window is not None:
            self.window_c = self.window_c + self.cum_step
            self.window_rounds += 1

    def step(self, net: Network, k: int) -> np.ndarray:
        loss = self.he.decrypt(net.recv(B, C, Kind.Loss).payload[0])
        g_a = self.he.decrypt_vector(net.recv(A, C, Kind.PartialGradA).payload)
        g_b = self.he.decrypt_vector(net.recv(B, C, Kind.PartialGradB).payload)
        if len(g_a) != self.n_a or len(g_b) != self.n_b:
            raise ProtocolError("partial gradient lengths do not match the feature split")
        if not math.isfinite(loss) or abs(loss) > self.config.divergence_bound:
            raise DivergenceError(f"round {k}: loss {loss!r} is not finite or exceeds "
                                  f"{self.config.divergence_bound:g}")
        self.round_losses.append(loss)
        g = np.concatenate([g_a, g_b])
        self._g = g
        step = descent_direction(self.store.H, g, self.config.eta)
        if not np.all(np.isfinite(step)):
            raise DivergenceError(f"round {k}: non-finite step")
        net.send(ProtocolMessage(Kind.StepA, k, C, A, tuple(step[:self.n_a].tolist())))
        net.send(ProtocolMessage(Kind.StepB, k, C, B, tuple(step[self.n_a:].tolist())))
        self.cum_step = self.cum_step + step
        return step

    def close_window(self, net: Network, k: int) -> Optional[np.ndarray]:
        """Form s_t, take v_t from the parties, push the pair and rebuild H."""
        L = self.config.curvature_window
        if not self.config.closes_window(k):
            raise ProtocolError(f"round {k} does not close a window of length {L}")
        s = None if self.prev_window_c is None else -(self.window_c - self.prev_window_c) / L
        self.prev_window_c = self.window_c
        self.window_c = np.zeros_like(self.cum_step)
        self.window_rounds = 0
        self.last_s, self.last_v, self.last_admitted = s, None, False
        if s is None:
            # first window: no previous average, so no pair and no v traffic
            return None
        v = np.concatenate([self.he.decrypt_vector(net.recv(A, C, Kind.V_A).payload),
                            self.he.decrypt_vector(net.recv(B, C, Kind.V_B).payload)])
        self.last_v = v
        self.last_admitted = self.store.push_pair(s, v, t=k // L)
        if self.last_admitted:
            self.store.rebuild()
        return s

    def end_epoch(self, n_rounds: int) -> bool:
        """Record the epoch's mean loss; True when the stopping rule fires."""
        losses = self.round_losses[-n_rounds:]
        self.epoch_losses.append(float(np.mean(losses)))
        return should_stop(self.epoch_losses, self.config.tol)
