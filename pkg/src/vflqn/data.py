"""Dataset loading, scaling, vertical partitioning and minibatch streams."""
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: list[str]


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros_like(X)
        ok = self.std > 0
        out[:, ok] = (X[:, ok] - self.mean[ok]) / self.std[ok]
        return out


@dataclass
class PartitionedDataset:
    """Column-split view of a dataset.

    ``XA`` goes to the host, ``XB`` and ``y`` to the guest. Row order is the
    shared sample-ID order. ``columns_a``/``columns_b`` index the original
    columns so the split can be undone.
    """

    XA: np.ndarray
    XB: np.ndarray
    y: np.ndarray
    columns_a: np.ndarray
    columns_b: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    names: list[str] = field(default_factory=list)

    @property
    def n_a(self) -> int:
        return self.XA.shape[1]

    @property
    def n_b(self) -> int:
        return self.XB.shape[1]

    @property
    def n(self) -> int:
        return self.n_a + self.n_b

    @property
    def n_train(self) -> int:
        return len(self.train_idx)

    def full_matrix(self) -> np.ndarray:
        """Columns in (A then B) order; the order the weight vector uses."""
        return np.hstack([self.XA, self.XB])

    def reassemble(self) -> np.ndarray:
        """Undo the split: columns back in their original order."""
        X = np.empty((self.XA.shape[0], self.n))
        X[:, self.columns_a] = self.XA
        X[:, self.columns_b] = self.XB
        return X


def _label(raw: str) -> float:
    v = float(raw)
    if v in (0.0, -1.0):
        return -1.0
    if v == 1.0:
        return 1.0
    raise ValueError(f"label {raw!r} is not binary")


def load_csv(path, label_column: str = "label", drop_columns: Sequence[str] = ()) -> Dataset:
    """Read a header-first CSV. Labels 0/1 (or -1/+1) are mapped to -1/+1."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        missing = [c for c in drop_columns if c not in header]
        if missing:
            raise DataError(f"{path}: columns to drop not found: {missing}")
        li = header.index(label_column)
        keep = [i for i, h in enumerate(header) if i != li and h not in drop_columns]
        rows, labels, bad = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != len(header):
                    raise ValueError("wrong number of fields")
                rows.append([float(row[i]) for i in keep])
                labels.append(_label(row[li]))
            except ValueError:
                bad.append(lineno)
    if bad:
        shown = ", ".join(map(str, bad[:10])) + (" ..." if len(bad) > 10 else "")
        raise DataError(f"{path}: unparseable rows at lines {shown}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=float), np.array(labels), [header[i] for i in keep])


def train_test_split(T: int, train_fraction: float = 0.8, seed: int = 0):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    perm = rng.permutation(T)
    n_train = int(round(train_fraction * T))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def standardize(train: np.ndarray, test: Optional[np.ndarray] = None):
    """Z-score with train statistics. Constant columns become all zeros."""
    train = np.asarray(train, dtype=float)
    if train.shape[0] == 0:
        raise DataError("cannot standardize an empty training split")
    scaler = Scaler(train.mean(axis=0), train.std(axis=0))
    test_out = scaler.transform(test) if test is not None else None
    return scaler.transform(train), test_out, scaler


def vertical_split(
    X: np.ndarray,
    y: np.ndarray,
    n_a: int,
    *,
    train_idx=None,
    test_idx=None,
    shuffle_columns: bool = False,
    seed: int = 0,
    names: Optional[list[str]] = None,
) -> PartitionedDataset:
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not 1 <= n_a < n:
        raise DataError(f"n_a must satisfy 1 <= n_a < {n}, got {n_a}")
    order = np.arange(n)
    if shuffle_columns:
        order = np.random.default_rng(np.random.SeedSequence([seed, 0xC01])).permutation(n)
    cols_a, cols_b = np.sort(order[:n_a]), np.sort(order[n_a:])
    T = X.shape[0]
    if train_idx is None:
        train_idx = np.arange(T)
    if test_idx is None:
        test_idx = np.arange(0)
    return PartitionedDataset(
        XA=X[:, cols_a].copy(),
        XB=X[:, cols_b].copy(),
        y=np.asarray(y, dtype=float).copy(),
        columns_a=cols_a,
        columns_b=cols_b,
        train_idx=np.asarray(train_idx),
        test_idx=np.asarray(test_idx),
        names=list(names or []),
    )


def prepare(
    dataset: Dataset,
    n_a: Optional[int] = None,
    *,
    seed: int = 0,
    train_fraction: float = 0.8,
    scale: bool = True,
    intercept: bool = False,
    shuffle_columns: bool = False,
) -> PartitionedDataset:
    """Split rows 80/20, standardize with train statistics, split columns.

    ``intercept`` appends a constant-one column on the guest side.
    """
    T, n = dataset.X.shape
    train_idx, test_idx = train_test_split(T, train_fraction, seed)
    X = dataset.X.copy()
    if scale:
        X_train, X_test, _ = standardize(X[train_idx], X[test_idx])
        X[train_idx], X[test_idx] = X_train, X_test
    names = list(dataset.columns)
    if n_a is None:
        n_a = n // 2
    if intercept:
        X = np.hstack([X, np.ones((T, 1))])
        names.append("intercept")
        # keep the bias column with B even if columns are shuffled
        part = vertical_split(X[:, :n], dataset.y, n_a, train_idx=train_idx, test_idx=test_idx,
                              shuffle_columns=shuffle_columns, seed=seed, names=names)
        part.XB = np.hstack([part.XB, X[:, n:]])
        part.columns_b = np.append(part.columns_b, n)
        return part
    return vertical_split(X, dataset.y, n_a, train_idx=train_idx, test_idx=test_idx,
                          shuffle_columns=shuffle_columns, seed=seed, names=names)


def batch_stream(n_train: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Positions into the training index array for one epoch.

    A fresh permutation per (seed, epoch), cut into consecutive batches; the
    last batch may be short.
    """
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch, 0xBA7C]))
    perm = rng.permutation(n_train)
    return [perm[i:i + batch_size] for i in range(0, n_train, batch_size)]


def rounds_per_epoch(n_train: int, batch_size: int) -> int:
    return math.ceil(n_train / batch_size)


def hessian_batch(n_train: int, size: int, seed: int, k: int) -> np.ndarray:
    """Independent subsample S_H drawn for round ``k``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, k, 0x4E55]))
    return rng.choice(n_train, size=min(size, n_train), replace=False)


def make_synthetic(n: int, T: int, seed: int = 0, signal: float = 2.0):
    """Gaussian features with labels drawn from a planted logistic model.

    Returns ``(X, labels01, w_star)``; ``w_star`` has Euclidean norm ``signal``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5147]))
    w_star = rng.standard_normal(n)
    w_star *= signal / np.linalg.norm(w_star)
    X = rng.standard_normal((T, n))
    p = 1.0 / (1.0 + np.exp(-(X @ w_star)))
    labels = (rng.random(T) < p).astype(int)
    return X, labels, w_star


def write_csv(path, X, labels01, columns: Optional[list[str]] = None) -> None:
    X = np.asarray(X, dtype=float)
    columns = columns or [f"x{j}" for j in range(X.shape[1])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns) + ["label"])
        for row, lab in zip(X, labels01):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
