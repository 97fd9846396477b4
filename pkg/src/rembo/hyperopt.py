"""Adaptive length-scale control.

The length scale is refit by bounded marginal-likelihood maximization every
``every`` iterations, and the upper bound shrinks whenever the proposals have
looked like pure exploitation (predictive std below ``t_sigma``) for
``patience`` iterations in a row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .box import Box
from .gp import Dataset, lml_from_gram
from .inner_opt import InnerOptBudget, direct_maximize
from .kernels import KernelSpec

RETUNE_EVALS = 200


@dataclass(frozen=True)
class HyperState:
    ell: float = 1.0
    L: float = 0.01
    U: float = 50.0
    C: int = 0
    t_sigma: float = 0.002
    iter: int = 0
    every: int = 20
    patience: int = 5
    retunes: int = 0

    def __post_init__(self):
        if not 0 < self.L <= self.U:
            raise ValueError(f"need 0 < L <= U, got L={self.L}, U={self.U}")
        if not self.L <= self.ell <= self.U:
            raise ValueError(f"ell={self.ell} outside [{self.L}, {self.U}]")
        if not 0 <= self.C <= self.patience:
            raise ValueError(f"C={self.C} outside [0, {self.patience}]")
        if not self.t_sigma > 0:
            raise ValueError("t_sigma must be positive")


def observe_proposal(state: HyperState, proposal_std: float) -> HyperState:
    """Count consecutive low-uncertainty proposals."""
    if proposal_std < state.t_sigma:
        return replace(state, C=min(state.C + 1, state.patience))
    return replace(state, C=0)


def likelihood_score(data: Dataset, kernel: KernelSpec, jitter: float = 1e-6) -> Callable[[float], float]:
    """``ell -> log marginal likelihood``; failures score -inf."""
    if len(data) == 0:
        raise ValueError("cannot score an empty dataset")
    # distances do not depend on ell, so compute them once
    F = kernel.features(data.points)
    S = kernel.distances(F, F)

    def score(ell: float) -> float:
        try:
            v = lml_from_gram(kernel.with_ell(ell).gram_from_distances(S), data.values, jitter)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            return -math.inf
        return v if math.isfinite(v) else -math.inf

    return score


def argmax_length_scale(score: Callable[[float], float], L: float, U: float,
                        evals: int = RETUNE_EVALS) -> float:
    """Maximize ``score`` over [L, U] with DIRECT in log space.

    Both endpoints are scored as well, so a likelihood that keeps rising
    toward a bound returns that bound exactly.
    """
    if L == U:
        return L
    box = Box([math.log(L)], [math.log(U)])

    def batch(X):
        return np.array([score(math.exp(x)) for x in X[:, 0]])

    res = direct_maximize(batch, box, InnerOptBudget(evals))
    cands = [(res.value, math.exp(res.point[0]))]
    cands += [(score(L), L), (score(U), U)]
    best_val = max(c[0] for c in cands)
    for val, ell in cands:
        if val == best_val:
            return float(min(max(ell, L), U))
    return float(min(max(cands[0][1], L), U))


def maybe_retune(state: HyperState, data: Dataset, kernel: KernelSpec, jitter: float = 1e-6,
                 score: Optional[Callable[[float], float]] = None) -> HyperState:
    """Complete one iteration; refit ``ell`` when the cadence or the exploitation counter fires.

    ``state.iter`` counts completed iterations, so the call that completes
    iteration 20 (40, 60, ...) retunes. ``score`` overrides the marginal
    likelihood as the function of ``ell`` being maximized.
    """
    if len(data) == 0:
        raise ValueError("retuning needs at least one observation")
    it = state.iter + 1
    if not (it % state.every == 0 or state.C >= state.patience):
        return replace(state, iter=it)
    U, C = state.U, state.C
    if C >= state.patience:
        U = max(0.9 * state.ell, state.L)
        C = 0
    if score is None:
        score = likelihood_score(data, kernel, jitter)
    ell = argmax_length_scale(score, state.L, U)
    return replace(state, ell=ell, U=U, C=C, iter=it, retunes=state.retunes + 1)
