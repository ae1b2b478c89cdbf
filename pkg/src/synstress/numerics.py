"""Minimal dense linear algebra, deterministic seeded random streams, and a
finite-difference gradient oracle.

Random streams are counter-based (numpy Philox keyed by (seed, stream_id)):
the same (seed, stream_id) yields a bit-identical draw sequence regardless
of process, thread, or call order, and new streams are derived by hashing
labels rather than by advancing shared state.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major dense matrix over float64."""

    rows: int
    cols: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != self.rows * self.cols:
            raise ValueError(
                f"data length {data.size} != rows*cols = {self.rows}x{self.cols}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "data", data)

    def as_2d(self) -> np.ndarray:
        return self.data.reshape(self.rows, self.cols)


def matvec(m: DenseMatrix, v: Sequence[float]) -> np.ndarray:
    """Standard matrix-vector product."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.cols,):
        raise ValueError(
            f"dimension mismatch: matrix is {m.rows}x{m.cols}, vector has length {v.size}"
        )
    return m.as_2d() @ v


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by (seed, stream_id).

    Streams are value types: drawing does not mutate them, and distinct
    stream_ids index independent Philox streams under the same seed.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))


def derive(stream: RngStream, *parts: int | str) -> RngStream:
    """Derive a child stream by hashing labels into a new stream_id."""
    h = hashlib.blake2b(digest_size=8)
    h.update((stream.stream_id & _MASK64).to_bytes(8, "little"))
    for part in parts:
        if isinstance(part, str):
            h.update(b"s")
            h.update(part.encode("utf-8"))
        else:
            h.update(b"i")
            h.update((int(part) & _MASK64).to_bytes(8, "little"))
    return RngStream(seed=stream.seed, stream_id=int.from_bytes(h.digest(), "little"))


def gaussian_draw(rng: RngStream, n: int) -> np.ndarray:
    """First n standard-normal draws of the stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.generator().standard_normal(n)


def uniform_draw(rng: RngStream, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """First n uniform draws of the stream on [low, high)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.generator().uniform(low, high, size=n)


def permutation(rng: RngStream, n: int) -> np.ndarray:
    """Deterministic permutation of range(n) for the stream."""
    return rng.generator().permutation(n)


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x: Sequence[float], h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient (f(x+h*e_i) - f(x-h*e_i)) / (2h)."""
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
