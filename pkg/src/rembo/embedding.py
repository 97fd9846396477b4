"""Random embeddings y -> p_X(Ay), with optional categorical decoding.

Row ``i`` of ``A`` is a pure function of ``(seed, i)``: it is drawn from a
Philox counter-based stream whose key is the seed and whose high counter word
is the row index, so rows never share counter ranges. Dense storage simply
caches those rows; lazy storage regenerates them on demand, which keeps
``D = 10**9`` at O(1) memory as long as callers only ask for a few coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .box import Box

LAZY_THRESHOLD = 100_000


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class CategoricalTable:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 1 for c in counts):
            raise ValueError("every category count must be >= 1")
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.counts)


def _row(seed: int, i: int, d: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed, counter=np.array([0, i, 0, 0], dtype=np.uint64))
    return np.random.Generator(bitgen).standard_normal(d)


@dataclass(eq=False)
class Embedding:
    """Random matrix ``A`` (D x d) plus the boxes it maps between.

    ``x_box=None`` stands for the centered cube [-1, 1]^D without
    materializing bounds, which is what lazy storage at huge ``D`` needs.
    """

    D: int
    d: int
    seed: int
    y_box: Box
    x_box: Box | None = None
    decode: CategoricalTable | None = None
    scale: float = 1.0
    lazy: bool = False
    _dense: np.ndarray | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)
    rows_generated: int = 0

    @property
    def storage(self) -> str:
        return "lazy" if self.lazy else "dense"

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.D:
            raise IndexError(f"row {i} outside [0, {self.D})")
        if self._dense is not None:
            return self._dense[i]
        r = self._cache.get(i)
        if r is None:
            r = self.scale * _row(self.seed, int(i), self.d)
            self.rows_generated += 1
            if len(self._cache) < 4096:
                self._cache[i] = r
        return r

    def rows(self, idx: Sequence[int]) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self._dense is not None:
            return self._dense[idx]
        return np.array([self.row(int(i)) for i in idx]).reshape(len(idx), self.d)

    def matrix(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        if self.D > LAZY_THRESHOLD:
            raise EmbeddingError(f"refusing to materialize a dense {self.D} x {self.d} matrix")
        return self.rows(np.arange(self.D))

    def x_bounds(self, idx=None) -> tuple[np.ndarray | float, np.ndarray | float]:
        if self.x_box is None:
            return -1.0, 1.0
        if idx is None:
            return self.x_box.lower, self.x_box.upper
        return self.x_box.lower[idx], self.x_box.upper[idx]


def draw_embedding(D: int, d: int, seed: int, x_box: Box | None = None,
                   decode: CategoricalTable | None = None, scale: float = 1.0,
                   lazy: bool | None = None) -> Embedding:
    """Draw ``A`` with N(0, 1) entries (times ``scale``) and set Y = [-sqrt(d), sqrt(d)]^d.

    Storage is lazy when ``D`` exceeds ``LAZY_THRESHOLD`` unless forced.
    """
    if d < 1 or D < 1:
        raise EmbeddingError("dimensions must be positive")
    if d > D:
        raise EmbeddingError(f"embedding dimension d={d} exceeds D={D}")
    if x_box is not None and x_box.dim != D:
        raise EmbeddingError(f"x_box has dimension {x_box.dim}, expected {D}")
    if decode is not None and len(decode) != D:
        raise EmbeddingError(f"categorical table has {len(decode)} entries, expected {D}")
    if lazy is None:
        lazy = D > LAZY_THRESHOLD
    emb = Embedding(D=D, d=d, seed=int(seed), y_box=Box.cube(d, np.sqrt(d)),
                    x_box=x_box, decode=decode, scale=float(scale), lazy=lazy)
    if not lazy:
        emb._dense = scale * np.array([_row(emb.seed, i, d) for i in range(D)]).reshape(D, d)
    return emb


def embedding_from_matrix(A, x_box: Box | None = None, decode: CategoricalTable | None = None,
                          y_box: Box | None = None) -> Embedding:
    """Wrap a hand-built matrix (tests, adversarial cases)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D, d = A.shape
    emb = Embedding(D=D, d=d, seed=-1, y_box=y_box or Box.cube(d, np.sqrt(d)),
                    x_box=x_box, decode=decode)
    emb._dense = A
    return emb


def map_to_x(emb: Embedding, y, coords=None) -> np.ndarray:
    """Return ``p_X(A y)``; for a batch ``y`` of shape (n, d) returns (n, D).

    Projection onto the axis-aligned box is coordinate clamping. With
    ``coords`` only those coordinates are materialized.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != emb.d:
        raise ValueError(f"expected y of dimension {emb.d}, got {y.shape[-1]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if coords is None:
        A = emb.matrix()
        lo, hi = emb.x_bounds()
    else:
        coords = np.asarray(coords, dtype=np.int64)
        A = emb.rows(coords)
        lo, hi = emb.x_bounds(coords)
    # explicit sum over the d columns: the same float operations for every
    # subset, shape and batch size, so sparse and full maps agree bit for bit
    Ay = y[..., 0, None] * A[:, 0]
    for k in range(1, emb.d):
        Ay = Ay + y[..., k, None] * A[:, k]
    return np.clip(Ay, lo, hi)


def decode_categorical(emb: Embedding, x) -> np.ndarray:
    """Map a continuous D-vector (or batch) to integer categories ``s(x)``."""
    if emb.decode is None:
        raise EmbeddingError("embedding has no categorical decoding table")
    return decode_values(emb.decode.counts, x)


def decode_values(counts, x) -> np.ndarray:
    """Clamp to [-1, 1], rescale to [0, count_i), floor, keep the top edge in range."""
    counts = np.asarray(counts)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != counts.shape[0]:
        raise ValueError(f"expected {counts.shape[0]} coordinates, got {x.shape[-1]}")
    xbar = np.clip(x, -1.0, 1.0)
    cat = np.floor((xbar + 1.0) / 2.0 * counts).astype(np.int64)
    return np.minimum(cat, counts - 1)


def subspace_distance_check(emb: Embedding, effective_basis, rtol: float = 1e-10) -> bool:
    """True iff Phi^T A has full row rank d_e (smallest singular value > rtol * largest)."""
    Phi = np.asarray(effective_basis, dtype=float)
    M = Phi.T @ emb.matrix()
    s = np.linalg.svd(M, compute_uv=False)
    d_e = Phi.shape[1]
    if len(s) < d_e or s.max() == 0.0:
        return False
    return bool(s[d_e - 1] > rtol * s[0])
