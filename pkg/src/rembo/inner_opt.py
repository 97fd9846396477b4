"""Derivative-free box maximizers: DIRECT and CMA-ES.

Both optimizers take a *batch* objective ``f(X) -> values`` where ``X`` has
shape ``(n, dim)``; wrap pointwise functions with :func:`batched`. Every point
handed to the objective lies inside the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .box import Box

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InnerOptBudget:
    max_evals: int
    max_iters: int = 10_000
    tol: float = 0.0

    def __post_init__(self):
        if self.max_evals < 1 or self.max_iters < 1:
            raise ValueError("budget counts must be positive")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")

    def check(self, dim: int):
        if self.max_evals < dim + 1:
            raise ValueError(f"max_evals={self.max_evals} is below dimension + 1 = {dim + 1}")


@dataclass
class InnerResult:
    point: np.ndarray
    value: float
    evals: int


def batched(fn: Callable[[np.ndarray], float]) -> BatchObjective:
    """Lift a pointwise objective to the batch calling convention."""

    def wrapper(X):
        return np.array([fn(x) for x in np.atleast_2d(X)], dtype=float)

    return wrapper


class _Counter:
    # Wraps the user objective: enforces the box, counts calls, tracks the best.
    def __init__(self, objective: BatchObjective, box: Box, max_evals: int):
        self.objective = objective
        self.box = box
        self.max_evals = max_evals
        self.evals = 0
        self.best_x: np.ndarray | None = None
        self.best_f = -np.inf

    @property
    def remaining(self) -> int:
        return self.max_evals - self.evals

    def __call__(self, X: np.ndarray) -> np.ndarray:
        if len(X) > self.remaining:
            raise RuntimeError("inner optimizer exceeded its evaluation budget")
        if (X < self.box.lower).any() or (X > self.box.upper).any():
            raise RuntimeError("inner optimizer proposed a point outside the box")
        f = np.asarray(self.objective(X), dtype=float).reshape(len(X))
        self.evals += len(X)
        if np.isnan(f).any():
            # NaN never wins
            f = np.where(np.isnan(f), -np.inf, f)
        i = int(f.argmax())
        if self.best_x is None or f[i] > self.best_f:
            self.best_f = float(f[i])
            self.best_x = X[i].copy()
        return f

    def result(self) -> InnerResult:
        return InnerResult(self.best_x, self.best_f, self.evals)


# ---------------------------------------------------------------------------
# DIRECT


def _lower_right_hull(pts):
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1, _), (x2, y2, _) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) < 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _potentially_optimal(sizes: np.ndarray, f: np.ndarray, keys: np.ndarray, eps: float) -> list[int]:
    """Indices of potentially optimal rectangles (minimization of ``f``).

    ``keys`` identifies the size class of each rectangle, larger key meaning
    smaller rectangle.
    """
    idx = np.arange(len(f))
    order = np.lexsort((idx, f, -keys))  # size class (largest first), f, index
    sk = keys[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sk[1:] != sk[:-1]
    reps = order[first]  # one per size class, smallest rectangles first

    fmin = float(f.min())
    rf = f[reps]
    # start the hull at the largest rectangle attaining fmin
    start = int(np.flatnonzero(rf == fmin).max())
    pts = [(float(sizes[i]), float(f[i]), int(i)) for i in reps[start:]]
    hull = _lower_right_hull(pts)

    chosen = []
    thresh = fmin - eps * abs(fmin)
    for n, (d, fv, i) in enumerate(hull):
        if n == len(hull) - 1:
            chosen.append(i)
            continue
        d2, f2, _ = hull[n + 1]
        slope = (f2 - fv) / (d2 - d)
        if fv - slope * d <= thresh + 1e-15 * abs(thresh):
            chosen.append(i)
    # larger rectangles first, then lower index
    chosen.sort(key=lambda i: (-sizes[i], i))
    return chosen


def direct_maximize(objective: BatchObjective, box: Box, budget: InnerOptBudget,
                    eps: float = 1e-4) -> InnerResult:
    """Maximize ``objective`` over ``box`` with DIRECT (Jones et al. 1993).

    The box is normalized to the unit cube; potentially optimal rectangles are
    trisected along their longest sides, sampling the two new centers per side.
    Deterministic.
    """
    n = box.dim
    counter = _Counter(objective, box, budget.max_evals)
    cap = budget.max_evals
    centers = np.empty((cap, n))
    levels = np.zeros((cap, n), dtype=np.int64)
    fvals = np.empty(cap)
    # side lengths are 3^-m or 3^-(m+1), so the level sum fixes the size
    keys = np.zeros(cap, dtype=np.int64)
    sizes = np.empty(cap)

    def size(key):
        m, r = divmod(key, n)
        return 0.5 * math.sqrt((n - r) * 9.0 ** -m + r * 9.0 ** -(m + 1))

    centers[0] = 0.5
    fvals[0] = -counter(box.from_unit(centers[:1]))[0]
    sizes[0] = size(0)
    N = 1

    for _ in range(budget.max_iters):
        if counter.remaining <= 0:
            break
        po = _potentially_optimal(sizes[:N], fvals[:N], keys[:N], eps)
        plans, batch = [], []
        reserved = 0
        for r in po:
            lv = levels[r]
            lmin = lv.min()
            dims = np.flatnonzero(lv == lmin)
            need = 2 * len(dims)
            if reserved + need > counter.remaining:
                break
            reserved += need
            delta = 3.0 ** (-(lmin + 1))
            m = len(dims)
            pts = np.repeat(centers[r][None, :], 2 * m, axis=0)
            pts[np.arange(m), dims] += delta
            pts[m + np.arange(m), dims] -= delta
            plans.append((r, dims))
            batch.append(pts)
        if not plans:
            break
        batch = np.vstack(batch)
        fb = -counter(box.from_unit(batch))
        pos = 0
        for r, dims in plans:
            m = len(dims)
            fp, fm = fb[pos:pos + m], fb[pos + m:pos + 2 * m]
            pp, pm = batch[pos:pos + m], batch[pos + m:pos + 2 * m]
            pos += 2 * m
            lv = levels[r].copy()
            for k in np.argsort(np.minimum(fp, fm), kind="stable"):
                lv[dims[k]] += 1
                key = int(lv.sum())
                s = size(key)
                centers[N], centers[N + 1] = pp[k], pm[k]
                fvals[N], fvals[N + 1] = fp[k], fm[k]
                levels[N] = levels[N + 1] = lv
                sizes[N] = sizes[N + 1] = s
                keys[N] = keys[N + 1] = key
                N += 2
            levels[r] = lv
            keys[r] = int(lv.sum())
            sizes[r] = size(keys[r])
    return counter.result()


# ---------------------------------------------------------------------------
# CMA-ES


def cmaes_maximize(objective: BatchObjective, box: Box, budget: InnerOptBudget, seed: int,
                   sigma0: float = 0.3, popsize: int | None = None,
                   max_resample: int = 100) -> InnerResult:
    """Maximize ``objective`` over ``box`` with (mu/mu_w, lambda)-CMA-ES.

    Works in unit-cube coordinates, so the initial step size is ``sigma0`` box
    widths. Out-of-box samples are redrawn up to ``max_resample`` times and
    then clamped. Stagnation or a degenerate covariance triggers a restart
    from a fresh uniform mean; restarts share the single evaluation budget.
    """
    rng = np.random.default_rng(seed)
    n = box.dim
    counter = _Counter(objective, box, budget.max_evals)
    lam = popsize or 4 + int(3 * math.log(n))
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w ** 2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chin = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    patience = 10 + math.ceil(30 * n / lam)

    def fresh():
        return rng.random(n), sigma0, np.eye(n), np.zeros(n), np.zeros(n)

    mean, sigma, C, pc, ps = fresh()
    BD = np.eye(n)  # B @ diag(D)
    invsqrt = np.eye(n)
    gen = 0
    history: list[float] = []
    restart_gap = patience

    for _ in range(budget.max_iters):
        if counter.remaining <= 0:
            break
        m = min(lam, counter.remaining)
        X = mean + sigma * rng.standard_normal((m, n)) @ BD.T
        bad = np.flatnonzero(((X < 0) | (X > 1)).any(axis=1))
        if len(bad) and max_resample > 0:
            # all redraws at once; each bad row takes its first in-box redraw, else the last one
            R = mean + sigma * (rng.standard_normal((max_resample * len(bad), n)) @ BD.T)
            R = R.reshape(max_resample, len(bad), n)
            inside = ~((R < 0) | (R > 1)).any(axis=2)
            pick = np.where(inside.any(axis=0), inside.argmax(axis=0), max_resample - 1)
            X[bad] = R[pick, np.arange(len(bad))]
        np.clip(X, 0.0, 1.0, out=X)
        f = counter(box.from_unit(X))
        if m < lam:
            break
        gen += 1
        order = np.argsort(-f, kind="stable")[:mu]
        old = mean
        sel = X[order]
        mean = w @ sel
        y = (mean - old) / sigma
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (invsqrt @ y)
        psn = math.sqrt(ps @ ps)
        hsig = psn / math.sqrt(1 - (1 - cs) ** (2 * gen)) / chin < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y
        art = (sel - old) / sigma
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (not hsig) * cc * (2 - cc) * C)
             + cmu * (art.T * w) @ art)
        C = 0.5 * (C + C.T)
        sigma *= math.exp((cs / damps) * (psn / chin - 1))

        history.append(float(f.max()))
        degenerate = not (np.isfinite(C).all() and math.isfinite(sigma))
        if not degenerate:
            ev, B = np.linalg.eigh(C)
            degenerate = ev[0] <= 0 or ev[-1] > 1e14 * ev[0] or sigma * math.sqrt(ev[-1]) < 1e-12
            if not degenerate:
                Dg = np.sqrt(ev)
                BD = B * Dg
                invsqrt = (B / Dg) @ B.T
        stalled = (len(history) > restart_gap
                   and max(history[-restart_gap:]) - max(history[:-restart_gap]) <= budget.tol)
        if degenerate or stalled:
            mean, sigma, C, pc, ps = fresh()
            BD, invsqrt = np.eye(n), np.eye(n)
            gen = 0
            history = []
    return counter.result()
