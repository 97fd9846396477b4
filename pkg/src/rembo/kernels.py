"""Covariance functions.

Pointwise kernels (``k_se`` and friends) follow the textbook definitions one
pair at a time. The GP uses :class:`KernelSpec`, which splits every kernel
into a feature map (identity, ``p_X(Ay)`` or ``s(p_X(Ay))``) and a Gram
computation on those features, so projections are computed once per point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .embedding import Embedding, decode_categorical, map_to_x

SE = "se"
SE_HIGHDIM = "se_highdim"
CATEGORICAL = "categorical"
SKEW_SE = "skew_se"
VARIANTS = (SE, SE_HIGHDIM, CATEGORICAL, SKEW_SE)


class KernelConfigError(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def _check_ell(ell):
    if not ell > 0:
        raise ValueError(f"length scale must be positive, got {ell}")


def k_se(y1, y2, ell: float) -> float:
    a, b = _pair(y1, y2)
    _check_ell(ell)
    return float(np.exp(-np.sum((a - b) ** 2) / (2 * ell ** 2)))


def k_se_highdim(y1, y2, emb: Embedding, ell: float) -> float:
    a, b = _pair(y1, y2)
    if a.shape[0] != emb.d:
        raise ValueError(f"expected {emb.d}-dimensional inputs, got {a.shape[0]}")
    return k_se(map_to_x(emb, a), map_to_x(emb, b), ell)


def hamming(x1, x2) -> int:
    a = np.asarray(x1).ravel()
    b = np.asarray(x2).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return int(np.count_nonzero(a != b))


def k_categorical(y1, y2, emb: Embedding, lam: float) -> float:
    a, b = _pair(y1, y2)
    if emb.decode is None:
        raise KernelConfigError("categorical kernel needs an embedding with a decoding table")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    h = hamming(decode_categorical(emb, map_to_x(emb, a)), decode_categorical(emb, map_to_x(emb, b)))
    return float(np.exp(-0.5 * lam * h ** 2))


def _spd_cholesky(Lambda) -> np.ndarray:
    Lam = np.atleast_2d(np.asarray(Lambda, dtype=float))
    if Lam.shape[0] != Lam.shape[1] or not np.allclose(Lam, Lam.T, rtol=0, atol=1e-12):
        raise ValueError("Lambda must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(Lam)
    except np.linalg.LinAlgError:
        raise ValueError("Lambda must be positive definite") from None


def k_skew_se(x1, x2, Lambda) -> float:
    """``exp(-(x1 - x2)^T Lambda^{-1} (x1 - x2))``; note: no factor 1/2.

    With ``Lambda = 2 ell^2 I`` this coincides with ``k_se(x1, x2, ell)``.
    """
    a, b = _pair(x1, x2)
    L = _spd_cholesky(Lambda)
    if L.shape[0] != a.shape[0]:
        raise ValueError(f"Lambda is {L.shape[0]}x{L.shape[0]} but inputs have dimension {a.shape[0]}")
    z = np.linalg.solve(L, a - b)
    return float(np.exp(-z @ z))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Kernel choice plus its parameters.

    ``ell`` drives the SE variants. For the categorical kernel the Hamming
    weight is ``lam``; when only ``ell`` is given, ``lam = 1 / ell**2`` so
    the length-scale controller can tune every variant the same way.
    """

    variant: str = SE
    ell: Optional[float] = None
    lam: Optional[float] = None
    Lambda: Optional[np.ndarray] = None
    embedding: Optional[Embedding] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise KernelConfigError(f"unknown kernel variant {self.variant!r}")
        if self.variant in (SE, SE_HIGHDIM):
            if self.ell is None:
                raise KernelConfigError(f"{self.variant} kernel needs ell")
            _check_ell(self.ell)
            if self.lam is not None or self.Lambda is not None:
                raise KernelConfigError(f"{self.variant} kernel takes only ell")
        if self.variant == CATEGORICAL:
            if (self.lam is None) == (self.ell is None):
                raise KernelConfigError("categorical kernel needs exactly one of lam or ell")
            if self.ell is not None:
                _check_ell(self.ell)
            elif not self.lam > 0:
                raise ValueError("lambda must be positive")
            if self.Lambda is not None:
                raise KernelConfigError("categorical kernel takes no Lambda")
        if self.variant == SKEW_SE:
            if self.Lambda is None or self.ell is not None or self.lam is not None:
                raise KernelConfigError("skew_se kernel takes only Lambda")
            L = _spd_cholesky(self.Lambda)
            object.__setattr__(self, "_chol", L)
        if self.variant in (SE_HIGHDIM, CATEGORICAL):
            if self.embedding is None:
                raise KernelConfigError(f"{self.variant} kernel needs an embedding")
            if self.variant == CATEGORICAL and self.embedding.decode is None:
                raise KernelConfigError("categorical kernel needs an embedding with a decoding table")

    @property
    def psd(self) -> bool:
        # exp(-lam/2 h^2) on Hamming distance can give indefinite Gram matrices
        return self.variant != CATEGORICAL

    @property
    def hamming_weight(self) -> float:
        return self.lam if self.lam is not None else 1.0 / self.ell ** 2

    def with_ell(self, ell: float) -> "KernelSpec":
        if self.variant == SKEW_SE:
            raise KernelConfigError("skew_se kernel has no length scale")
        return replace(self, ell=float(ell), lam=None)

    @property
    def input_dim(self) -> Optional[int]:
        if self.embedding is not None:
            return self.embedding.d
        if self.variant == SKEW_SE:
            return self._chol.shape[0]
        return None

    def features(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant == SE_HIGHDIM:
            return map_to_x(self.embedding, X)
        if self.variant == CATEGORICAL:
            return decode_categorical(self.embedding, map_to_x(self.embedding, X))
        if self.variant == SKEW_SE:
            # whiten so that the kernel becomes exp(-||u1 - u2||^2)
            return np.linalg.solve(self._chol, X.T).T
        return X

    def distances(self, F1, F2) -> np.ndarray:
        """The parameter-free part of the Gram computation (squared distances or Hamming counts)."""
        if self.variant == CATEGORICAL:
            return np.rint(cdist(F1, F2, metric="hamming") * F1.shape[1])
        return cdist(F1, F2, metric="sqeuclidean")

    def gram_from_distances(self, S) -> np.ndarray:
        if self.variant == CATEGORICAL:
            return np.exp(-0.5 * self.hamming_weight * np.square(S))
        if self.variant == SKEW_SE:
            return np.exp(-S)
        return np.exp(S * (-0.5 / self.ell ** 2))

    def gram_features(self, F1, F2) -> np.ndarray:
        return self.gram_from_distances(self.distances(F1, F2))

    def gram(self, X1, X2=None) -> np.ndarray:
        F1 = self.features(X1)
        F2 = F1 if X2 is None else self.features(X2)
        return self.gram_features(F1, F2)

    def __call__(self, x1, x2) -> float:
        a, b = _pair(x1, x2)
        return float(self.gram(a[None, :], b[None, :])[0, 0])
