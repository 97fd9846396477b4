"""Monte-Carlo checks of the embedding guarantees and an empirical regret-decay probe.

Theorem-style statements checked here:

* existence: for any ``x`` there is ``y`` with ``f(x) = f(Ay)`` (almost surely
  over ``A``), checked by solving ``(Phi^T A) y = Phi^T x``;
* boundedness: an optimizer ``y*`` with ``||y*|| <= sqrt(d_e)/eps * ||x*||``
  exists with probability at least ``1 - eps``, checked through the
  ``d_e x d_e`` block ``B`` of ``A`` that satisfies ``B y* = x*``;
* regret: with a fixed length scale, REMBO's simple regret on a function in
  the skew-SE RKHS decays at least polynomially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .box import Box
from .driver import RunConfig, run_single


@dataclass(eq=False)
class EffectiveSubspaceInstance:
    """``f(x) = base_function(Phi^T x)`` with ``Phi`` a D x d_e orthonormal basis."""

    D: int
    d_e: int
    basis: np.ndarray
    base_function: Callable[[np.ndarray], float]
    optimizer_in_T: np.ndarray

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        self.optimizer_in_T = np.asarray(self.optimizer_in_T, dtype=float).reshape(-1)
        if self.basis.shape != (self.D, self.d_e):
            raise ValueError(f"basis has shape {self.basis.shape}, expected {(self.D, self.d_e)}")
        if not np.allclose(self.basis.T @ self.basis, np.eye(self.d_e), rtol=0, atol=1e-10):
            raise ValueError("basis columns must be orthonormal")
        if self.optimizer_in_T.shape != (self.d_e,):
            raise ValueError("optimizer_in_T must have d_e entries")

    def __call__(self, x) -> float:
        return float(self.base_function(self.basis.T @ np.asarray(x, dtype=float)))

    @property
    def axis_aligned(self) -> Optional[np.ndarray]:
        """Coordinate indices spanning the subspace, or None if it is not axis-aligned."""
        B = np.abs(self.basis)
        idx = B.argmax(axis=0)
        ok = np.allclose(B[idx, np.arange(self.d_e)], 1.0, atol=1e-12) and len(set(idx)) == self.d_e
        return idx if ok else None

    @classmethod
    def random(cls, D: int, d_e: int, seed: int, axis_aligned: bool = False,
               base_function=None, optimizer_in_T=None) -> "EffectiveSubspaceInstance":
        """Random subspace with a smooth default base function peaked at ``optimizer_in_T``."""
        if not 1 <= d_e <= D:
            raise ValueError(f"need 1 <= d_e <= D, got d_e={d_e}, D={D}")
        rng = np.random.default_rng(seed)
        if axis_aligned:
            basis = np.zeros((D, d_e))
            basis[rng.choice(D, d_e, replace=False), np.arange(d_e)] = 1.0
        else:
            Q, R = np.linalg.qr(rng.standard_normal((D, d_e)))
            basis = Q * np.sign(np.diag(R))
        xstar = rng.uniform(-0.5, 0.5, d_e) if optimizer_in_T is None else optimizer_in_T
        xstar = np.asarray(xstar, dtype=float)
        if base_function is None:
            def base_function(z, c=xstar):
                return -float(np.sum((z - c) ** 2)) + math.sin(float(np.sum(z)))
        return cls(D, d_e, basis, base_function, xstar)


@dataclass
class TheoremCheckReport:
    trials: int
    successes: int
    bound: float
    verdict: bool
    degenerate: int = 0

    def __post_init__(self):
        if not 0 <= self.successes + self.degenerate <= self.trials:
            raise ValueError("successes + degenerate cannot exceed trials")

    @property
    def frequency(self) -> float:
        return self.successes / self.trials if self.trials else math.nan

    @property
    def failures(self) -> int:
        return self.trials - self.successes - self.degenerate


def _gaussian_matrix(rng, D, d):
    return rng.standard_normal((D, d))


def check_theorem1(instance: EffectiveSubspaceInstance, d: int, trials: int, seed: int,
                   tol: float = 1e-6, draw_matrix=None) -> TheoremCheckReport:
    """For random ``A`` and ``x``, find ``y`` with ``f(Ay) = f(x)`` by least squares.

    ``draw_matrix(rng, D, d)`` replaces the Gaussian draw (used to inject
    degenerate matrices). A rank-deficient ``Phi^T A`` is reported as
    degenerate, not as a failure. ``bound`` is the relative tolerance.
    """
    if d < instance.d_e:
        raise ValueError(f"need d >= d_e, got d={d} < d_e={instance.d_e}")
    if trials < 1:
        raise ValueError("trials must be positive")
    draw = draw_matrix or _gaussian_matrix
    rng = np.random.default_rng(seed)
    Phi = instance.basis
    ok = degenerate = 0
    for _ in range(trials):
        A = draw(rng, instance.D, d)
        x = rng.standard_normal(instance.D)
        M = Phi.T @ A
        y, _, rank, _ = np.linalg.lstsq(M, Phi.T @ x, rcond=None)
        if rank < instance.d_e:
            degenerate += 1
            continue
        fx = instance(x)
        if abs(fx - instance(A @ y)) <= tol * (1 + abs(fx)):
            ok += 1
    return TheoremCheckReport(trials, ok, tol, ok + degenerate == trials, degenerate)


def theorem2_slack(epsilon: float, trials: int) -> float:
    return 3.0 * math.sqrt(epsilon * (1 - epsilon) / trials)


def check_theorem2(instance: EffectiveSubspaceInstance, d: int, epsilon: float, trials: int,
                   seed: int, draw_matrix=None) -> TheoremCheckReport:
    """Frequency of ``||B^{-1} x*|| <= sqrt(d_e)/eps * ||x*||`` over random ``A``.

    ``B`` is the block of ``A`` on the effective coordinates and the first
    ``d_e`` columns (the remaining columns may be set to zero in ``y``).
    Singular ``B`` counts as a failure. ``bound`` is the frequency threshold
    ``1 - eps`` minus three binomial standard errors.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if d < instance.d_e:
        raise ValueError(f"need d >= d_e, got d={d} < d_e={instance.d_e}")
    if trials < 1:
        raise ValueError("trials must be positive")
    idx = instance.axis_aligned
    if idx is None:
        raise ValueError("the bound is stated for an axis-aligned effective subspace")
    draw = draw_matrix or _gaussian_matrix
    rng = np.random.default_rng(seed)
    de = instance.d_e
    # coordinates of x* in the standard basis restricted to the effective indices
    xbar = (instance.basis @ instance.optimizer_in_T)[idx]
    radius = math.sqrt(de) / epsilon * float(np.linalg.norm(instance.optimizer_in_T))
    ok = 0
    for _ in range(trials):
        B = draw(rng, instance.D, d)[idx, :de]
        try:
            y = np.linalg.solve(B, xbar)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(y)) and np.linalg.norm(y) <= radius * (1 + 1e-12):
            ok += 1
    bound = 1 - epsilon - theorem2_slack(epsilon, trials)
    return TheoremCheckReport(trials, ok, bound, ok / trials >= bound)


# ---------------------------------------------------------------------------
# regret decay


@dataclass(eq=False)
class SkewExpansion:
    """``f(x) = sum_j w_j exp(-(z - c_j)^T Lambda^{-1} (z - c_j))`` with ``z = x[coords]``.

    Minimization-sense callable (returns ``-f``) so it plugs into the driver;
    ``known_optimum`` is ``-max f``.
    """

    D: int
    coords: np.ndarray
    weights: np.ndarray
    centers: np.ndarray
    Lambda: np.ndarray
    known_optimum: float = field(init=False)
    categorical = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.int64)
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        self._P = np.linalg.inv(np.asarray(self.Lambda, dtype=float))
        self.known_optimum = -self._maximum()

    def value(self, z) -> float:
        diff = np.asarray(z, dtype=float)[None, :] - self.centers
        q = np.einsum("ij,jk,ik->i", diff, self._P, diff)
        return float(self.weights @ np.exp(-q))

    def _maximum(self) -> float:
        from scipy.optimize import minimize

        box = Box.cube(len(self.coords))
        best = -math.inf
        for c in self.centers:
            res = minimize(lambda z: -self.value(z), np.clip(c, -1, 1), method="L-BFGS-B",
                           bounds=list(zip(box.lower, box.upper)),
                           options={"ftol": 1e-15, "gtol": 1e-12})
            best = max(best, -float(res.fun), self.value(np.clip(c, -1, 1)))
        return best

    def __call__(self, x) -> float:
        return -self.value(np.array([x[int(i)] for i in self.coords]))


def sse_probe_objective(D: int, d: int, seed: int) -> SkewExpansion:
    """A fixed finite SSE expansion on ``d`` random coordinates with one dominant bump."""
    rng = np.random.default_rng(seed)
    coords = rng.choice(D, d, replace=False)
    centers = np.vstack([rng.uniform(-0.3, 0.3, d), rng.uniform(-0.9, 0.9, (2, d))])
    weights = np.array([1.0, 0.4, 0.3])
    Lambda = 2 * 0.35 ** 2 * np.eye(d)
    return SkewExpansion(D, coords, weights, centers, Lambda)


@dataclass
class RegretProbeResult:
    slope: float
    median_regret: np.ndarray
    excluded: int
    regrets: np.ndarray  # seeds x budget


# below this the regret is treated as exactly zero
REGRET_FLOOR = 1e-12


def fit_tail_slope(regret, floor: float = REGRET_FLOOR) -> tuple[float, int]:
    """Least-squares slope of log r against log t over the second half of ``t``.

    Points with ``r <= floor`` are dropped and counted.
    """
    r = np.asarray(regret, dtype=float)
    t = np.arange(1, len(r) + 1)
    tail = slice(len(r) // 2, len(r))
    rt, tt = r[tail], t[tail]
    keep = rt > floor
    excluded = int((~keep).sum())
    if keep.sum() < 2:
        return -math.inf, excluded
    slope = np.polyfit(np.log(tt[keep]), np.log(rt[keep]), 1)[0]
    return float(slope), excluded


def regret_decay_probe(d: int, seeds: int, budget: int, D: int = 10, ell: float = 0.25,
                       objective=None, objective_seed: int = 0) -> RegretProbeResult:
    """Run REMBO with EI and fixed ``ell`` on a skew-SE expansion and fit the decay.

    ``A`` is scaled by ``1/sqrt(d)``. The fitted slope is for the median
    (over seeds) simple regret; ``objective`` overrides the default probe.
    """
    if d < 1 or seeds < 1 or budget < 4:
        raise ValueError("need d >= 1, seeds >= 1 and budget >= 4")
    obj = objective if objective is not None else sse_probe_objective(D, d, objective_seed)
    cfg = RunConfig(d=d, k=1, budget=budget, ell0=ell, L=min(ell, 0.01), U=max(ell, 50.0),
                    adapt_ell=False, embedding_scale=1 / math.sqrt(d))
    regrets = np.empty((seeds, budget))
    for s in range(seeds):
        state = run_single(cfg, obj, seed=s)
        best = np.minimum.accumulate(np.asarray(state.raw_values))
        regrets[s] = np.maximum(best - obj.known_optimum, 0.0)
    med = np.median(regrets, axis=0)
    slope, excluded = fit_tail_slope(med)
    return RegretProbeResult(slope, med, excluded, regrets)
