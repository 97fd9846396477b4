"""Zero-mean, noise-free GP regression with a jitter ladder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import KernelSpec

JITTER_LADDER = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2)
LOG_2PI = np.log(2 * np.pi)


class GPNumericalError(np.linalg.LinAlgError):
    """Cholesky failed for every jitter tried."""

    def __init__(self, ladder):
        self.ladder = tuple(ladder)
        super().__init__(f"covariance not positive definite for jitter in {self.ladder}")


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float).ravel()
        if points.ndim == 1:
            points = points[:, None] if len(values) != 1 else points[None, :]
        if points.ndim != 2 or len(points) != len(values):
            raise ValueError(f"{len(points)} points but {len(values)} values")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def append(self, x, f) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if len(self) and x.shape[1] != self.dim:
            raise ValueError(f"point of dimension {x.shape[1]} added to {self.dim}-dimensional data")
        pts = x if len(self) == 0 else np.vstack([self.points, x])
        return Dataset(pts, np.append(self.values, f))

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.empty((0, dim)), np.empty(0))


def _ladder(jitter: float):
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    return [jitter] + [j for j in JITTER_LADDER if j > jitter]


def _factor(K: np.ndarray, jitter: float, psd: bool = True):
    """Cholesky of K + j I for the first j on the ladder that works.

    For a kernel that is not positive semidefinite, a failed ladder is
    followed by one more try with the diagonal loaded past the most negative
    eigenvalue of K.
    """
    tried = []
    eye = np.eye(len(K))
    for j in _ladder(jitter):
        tried.append(j)
        try:
            return np.linalg.cholesky(K + j * eye), j
        except np.linalg.LinAlgError:
            continue
    if not psd and np.isfinite(K).all():
        j = tried[-1] - min(float(np.linalg.eigvalsh(K)[0]), 0.0)
        tried.append(j)
        try:
            return np.linalg.cholesky(K + j * eye), j
        except np.linalg.LinAlgError:
            pass
    raise GPNumericalError(tried)


@dataclass(frozen=True, eq=False)
class GpModel:
    kernel: KernelSpec
    jitter: float
    factor: np.ndarray
    alpha: np.ndarray
    data: Dataset
    train_features: np.ndarray
    factor_inv_t: np.ndarray  # (L^-1)^T, for O(t^2) variances

    def predict(self, query, clamp: bool = True):
        """Posterior mean and variance.

        A single point returns floats; an ``(m, dim)`` batch returns arrays.
        """
        q = np.asarray(query, dtype=float)
        single = q.ndim == 1
        Q = q[None, :] if single else q
        if Q.ndim != 2 or Q.shape[1] != self.data.dim:
            raise ValueError(f"query dimension {Q.shape[1]} != data dimension {self.data.dim}")
        F = Q if self.kernel.variant == "se" else self.kernel.features(Q)
        Ks = self.kernel.gram_features(F, self.train_features)
        mu = Ks @ self.alpha
        v = Ks @ self.factor_inv_t
        var = 1.0 - np.einsum("ij,ij->i", v, v)
        if clamp:
            var = np.maximum(var, 0.0)
        if single:
            return float(mu[0]), float(var[0])
        return mu, var


def _validate(data: Dataset, kernel: KernelSpec):
    if len(data) == 0:
        raise ValueError("cannot fit a GP to an empty dataset")
    want = kernel.input_dim
    if want is not None and data.dim != want:
        raise ValueError(f"kernel expects {want}-dimensional inputs, data has {data.dim}")


def _factorize(data: Dataset, kernel: KernelSpec, jitter: float):
    _validate(data, kernel)
    F = kernel.features(data.points)
    K = kernel.gram_features(F, F)
    L, used = _factor(K, jitter, kernel.psd)
    alpha = solve_triangular(L.T, solve_triangular(L, data.values, lower=True), lower=False)
    return F, L, used, alpha


def fit(data: Dataset, kernel: KernelSpec, jitter: float = 1e-6) -> GpModel:
    F, L, used, alpha = _factorize(data, kernel, jitter)
    Linv = solve_triangular(L, np.eye(len(L)), lower=True)
    return GpModel(kernel, used, L, alpha, data, F, np.ascontiguousarray(Linv.T))


def predict(model: GpModel, query, clamp: bool = True):
    return model.predict(query, clamp=clamp)


def log_marginal_likelihood(data: Dataset, kernel: KernelSpec, jitter: float = 1e-6) -> float:
    """log N(f | 0, K + jitter I), using the jitter actually needed to factorize."""
    _, L, _, alpha = _factorize(data, kernel, jitter)
    return _lml(L, alpha, data.values)


def _lml(L, alpha, f) -> float:
    return float(-0.5 * f @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(f) * LOG_2PI)


def lml_from_gram(K: np.ndarray, values: np.ndarray, jitter: float = 1e-6) -> float:
    """Same as :func:`log_marginal_likelihood` for a precomputed Gram matrix."""
    L, _ = _factor(K, jitter)
    alpha = solve_triangular(L.T, solve_triangular(L, values, lower=True), lower=False)
    return _lml(L, alpha, values)
