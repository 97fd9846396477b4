"""Acquisition functions (maximization convention) and their box maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .box import Box
from .inner_opt import InnerOptBudget, cmaes_maximize, direct_maximize

EI = "ei"
UCB = "ucb"
_INV_SQRT_2PI = 1.0 / math.sqrt(2 * math.pi)


class AcquisitionError(RuntimeError):
    pass


@dataclass(frozen=True)
class AcquisitionSpec:
    variant: str = EI
    ucb_beta: float | None = None

    def __post_init__(self):
        if self.variant == EI and self.ucb_beta is not None:
            raise ValueError("ucb_beta only applies to UCB")
        if self.variant == UCB and not (self.ucb_beta is not None and self.ucb_beta > 0):
            raise ValueError("UCB needs a positive ucb_beta")
        if self.variant not in (EI, UCB):
            raise ValueError(f"unknown acquisition {self.variant!r}")


@dataclass(frozen=True, eq=False)
class Incumbent:
    point: np.ndarray
    value: float


def norm_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def norm_cdf(z):
    # ndtr is erf/erfc based and keeps full relative accuracy in the lower tail
    return ndtr(z)


def expected_improvement(mu, var, incumbent_value):
    """E[max(0, F - incumbent)] for F ~ N(mu, var)."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if (var < 0).any():
        raise ValueError("variance must be nonnegative; clamp GP output first")
    diff = mu - incumbent_value
    sigma = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / sigma
        ei = diff * norm_cdf(z) + sigma * norm_pdf(z)
    flat = sigma == 0
    if flat.any():
        ei = np.where(flat, np.maximum(diff, 0.0), ei)
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def ucb(mu, var, beta: float):
    if not beta > 0:
        raise ValueError("beta must be positive")
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    out = np.asarray(mu, dtype=float) + math.sqrt(beta) * np.sqrt(var)
    return float(out) if out.ndim == 0 else out


def acquisition_values(model, spec: AcquisitionSpec, X, incumbent: Incumbent) -> np.ndarray:
    mu, var = model.predict(X)
    if spec.variant == EI:
        return expected_improvement(mu, var, incumbent.value)
    return ucb(mu, var, spec.ucb_beta)


def maximize_acquisition(model, spec: AcquisitionSpec, domain: Box, incumbent: Incumbent,
                         budget: InnerOptBudget, seed: int = 0):
    """Run DIRECT and CMA-ES on half the budget each and keep the better point.

    ``model`` only needs ``predict(X) -> (mu, var)`` on batches.
    """

    def objective(X):
        return acquisition_values(model, spec, X, incumbent)

    half = max(budget.max_evals // 2, domain.dim + 1)
    sub = InnerOptBudget(half, budget.max_iters, budget.tol)
    results, errors = [], []
    for name, run in (("direct", lambda: direct_maximize(objective, domain, sub)),
                      ("cmaes", lambda: cmaes_maximize(objective, domain, sub, seed))):
        try:
            r = run()
            if r.point is not None and np.isfinite(r.value):
                results.append(r)
            else:
                errors.append(f"{name}: no finite acquisition value found")
        except Exception as exc:  # noqa: BLE001 - both failures are reported together
            errors.append(f"{name}: {exc!r}")
    if not results:
        raise AcquisitionError("both inner optimizers failed: " + "; ".join(errors))
    # DIRECT wins ties: it comes first and max() keeps the first maximum
    best = max(results, key=lambda r: r.value)
    return best.point, best.value
