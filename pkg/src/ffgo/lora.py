"""Low-rank weight update kernel: delta, merge/unmerge, gradients, diagnostics.

All arithmetic is float64. Products go through einsum with a fixed reduction
order rather than a BLAS call, so results do not depend on the host's BLAS.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadRank, ShapeMismatch

_HEADER = struct.Struct("<4sqqqd")
_MAGIC = b"LRA1"


@dataclass(frozen=True)
class LoraAdapter:
    """Update factors: delta = alpha * (a @ b), a is d x r, b is r x k."""

    a: np.ndarray
    b: np.ndarray
    alpha: float
    rank: int

    def __post_init__(self):
        d, r_a = self.a.shape
        r_b, k = self.b.shape
        if r_a != self.rank or r_b != self.rank:
            raise ShapeMismatch(
                f"factor ranks {r_a}/{r_b} disagree with declared rank {self.rank}"
            )
        if self.rank < 1 or self.rank > min(d, k):
            raise BadRank(f"rank {self.rank} invalid for a {d}x{k} weight")

    @property
    def dims(self) -> tuple[int, int]:
        return self.a.shape[0], self.b.shape[1]


def init_adapter(d: int, k: int, r: int, alpha: float, seed: int) -> LoraAdapter:
    """Gaussian a (std 1/sqrt(r)), zero b, so the initial delta is exactly zero."""
    if r < 1 or r > min(d, k):
        raise BadRank(f"rank {r} invalid for a {d}x{k} weight")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.normal(0.0, 1.0 / np.sqrt(r), size=(d, r))
    b = np.zeros((r, k), dtype=np.float64)
    return LoraAdapter(a=a, b=b, alpha=float(alpha), rank=r)


def _matmul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # einsum with optimize=False sums over the contraction index in order,
    # independent of the BLAS backend
    return np.einsum("ij,jk->ik", x, y, optimize=False)


def delta(adapter: LoraAdapter) -> np.ndarray:
    if adapter.alpha == 0.0:
        return np.zeros(adapter.dims, dtype=np.float64)
    return adapter.alpha * _matmul(adapter.a, adapter.b)


def _check_weight(w: np.ndarray, adapter: LoraAdapter) -> None:
    if w.shape != adapter.dims:
        raise ShapeMismatch(f"weight is {w.shape}, adapter expects {adapter.dims}")


def merge(w: np.ndarray, adapter: LoraAdapter) -> np.ndarray:
    _check_weight(w, adapter)
    return w + delta(adapter)


def unmerge(w_merged: np.ndarray, adapter: LoraAdapter) -> np.ndarray:
    _check_weight(w_merged, adapter)
    return w_merged - delta(adapter)


def grad(adapter: LoraAdapter, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of L wrt the factors given dL/d(merged weight).

    d_a = alpha * upstream @ b.T and d_b = alpha * a.T @ upstream.
    """
    if upstream.shape != adapter.dims:
        raise ShapeMismatch(
            f"upstream gradient is {upstream.shape}, adapter expects {adapter.dims}"
        )
    d_a = adapter.alpha * _matmul(upstream, adapter.b.T)
    d_b = adapter.alpha * _matmul(adapter.a.T, upstream)
    return d_a, d_b


def numerical_rank(matrix: np.ndarray, tol: float = 1e-8) -> int:
    """Count singular values above tol * sigma_max."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    sigma = np.linalg.svd(np.asarray(matrix, dtype=np.float64), compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0]))


def param_savings(d: int, k: int, r: int) -> tuple[int, int, float]:
    """(adapter params, full-matrix params, ratio)."""
    lora_params = r * (d + k)
    full_params = d * k
    return lora_params, full_params, lora_params / full_params


def save_adapter(adapter: LoraAdapter, path: str | Path) -> None:
    """Flat binary: header (d, k, r, alpha), then a row-major, then b, all <f8."""
    d, k = adapter.dims
    blob = _HEADER.pack(_MAGIC, d, k, adapter.rank, adapter.alpha)
    blob += adapter.a.astype("<f8").tobytes(order="C")
    blob += adapter.b.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(blob)


def load_adapter(path: str | Path) -> LoraAdapter:
    blob = Path(path).read_bytes()
    magic, d, k, r, alpha = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ShapeMismatch(f"not an adapter file: {path}")
    offset = _HEADER.size
    a_bytes = d * r * 8
    a = np.frombuffer(blob, dtype="<f8", count=d * r, offset=offset).reshape(d, r)
    b = np.frombuffer(blob, dtype="<f8", count=r * k, offset=offset + a_bytes).reshape(r, k)
    return LoraAdapter(a=a.copy(), b=b.copy(), alpha=alpha, rank=r)
