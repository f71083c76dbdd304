from dataclasses import asdict, dataclass
from typing import Optional

METHODS = ("sgd", "qn")


@dataclass
class TrainingConfig:
    """Hyper-parameters shared by the federated run and the centralized oracle.

    ``window=None`` means the curvature window never closes, so a ``qn`` run
    never rebuilds H. ``hessian_batch_size=None`` reuses the round's batch S
    as S_H.
    """

    method: str = "qn"
    batch_size: int = 1000
    hessian_batch_size: Optional[int] = None
    window: Optional[int] = 4
    memory: int = 10
    eta: float = 0.1
    seed: int = 0
    tol: float = 1e-5
    max_epochs: int = 100
    max_rounds: Optional[int] = None
    divergence_bound: float = 1e6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hessian_batch_size is not None and self.hessian_batch_size < 1:
            raise ValueError("hessian_batch_size must be >= 1")
        if self.window is not None and self.window < 1:
            raise ValueError("window L must be >= 1")
        if self.memory < 1:
            raise ValueError("memory M must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    @property
    def curvature_window(self) -> Optional[int]:
        """L if this run collects curvature pairs, else None."""
        return self.window if self.method == "qn" else None

    def closes_window(self, k: int) -> bool:
        L = self.curvature_window
        return L is not None and k % L == 0

    def as_dict(self) -> dict:
        return asdict(self)
