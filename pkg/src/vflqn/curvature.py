"""Curvature memory and dense inverse-Hessian reconstruction (BFGS form)."""
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CURVATURE_EPS = 1e-10


@dataclass(frozen=True)
class CurvaturePair:
    s: np.ndarray
    v: np.ndarray
    t: int = 0

    @property
    def sv(self) -> float:
        return float(self.v @ self.s)


@dataclass
class CurvatureStore:
    """Bounded FIFO of (s, v) pairs plus the current inverse-Hessian estimate.

    ``H`` is the identity until the first successful rebuild.
    """

    n: int
    memory: int = 10
    eps: float = CURVATURE_EPS
    pairs: deque = field(init=False)
    H: np.ndarray = field(init=False)
    rebuilds: int = field(default=0, init=False)
    rejected: int = field(default=0, init=False)

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        self.pairs = deque(maxlen=self.memory)
        self.H = np.eye(self.n)

    def push_pair(self, s, v, t: int = 0) -> bool:
        s = np.asarray(s, dtype=float).copy()
        v = np.asarray(v, dtype=float).copy()
        if s.shape != (self.n,) or v.shape != (self.n,):
            raise ValueError(f"curvature pair shapes {s.shape}, {v.shape} do not match n={self.n}")
        sv = float(v @ s)
        if not sv > self.eps * np.linalg.norm(s) * np.linalg.norm(v):
            self.rejected += 1
            return False
        self.pairs.append(CurvaturePair(s, v, t))
        return True

    def rebuild(self) -> np.ndarray:
        self.H = rebuild_h(self.pairs, self.n)
        self.rebuilds += 1
        return self.H


def rebuild_h(pairs, n: int) -> np.ndarray:
    """Rebuild H from scratch over the retained pairs, oldest first.

    Starts from ``(v.s / v.v) I`` scaled by the newest pair and applies
    ``H <- (I - rho s v^T) H (I - rho v s^T) + rho s s^T`` for each pair.
    """
    pairs = list(pairs)
    if not pairs:
        return np.eye(n)
    newest = pairs[-1]
    H = (newest.sv / float(newest.v @ newest.v)) * np.eye(n)
    eye = np.eye(n)
    for p in pairs:
        rho = 1.0 / p.sv
        left = eye - rho * np.outer(p.s, p.v)
        H = left @ H @ left.T + rho * np.outer(p.s, p.s)
    # symmetrise away round-off from the triple product
    return 0.5 * (H + H.T)


def descent_direction(H, g, eta: float) -> np.ndarray:
    if not eta > 0:
        raise ValueError("learning rate must be positive")
    return eta * (np.asarray(H) @ np.asarray(g, dtype=float))
