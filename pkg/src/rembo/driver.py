"""Optimization loops: plain GP-EI BO, REMBO, random search, interleaved runs.

Objectives are minimized (benchmark convention); internally every loop
maximizes the negated, standardized values so the GP and acquisition code
only ever see one sense.

An objective is a callable with attributes ``D``, ``coords`` (indices it
reads, or None), ``categorical`` (category counts, or None) and
``known_optimum`` (or None).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels as K
from .acquisition import AcquisitionSpec, Incumbent, maximize_acquisition
from .bench import EvaluationError, SparseVector
from .box import Box
from .embedding import CategoricalTable, Embedding, decode_values, draw_embedding, map_to_x
from .gp import Dataset, fit
from .hyperopt import HyperState, maybe_retune, observe_proposal
from .inner_opt import InnerOptBudget
from .report import RunReport, TraceRow

log = logging.getLogger(__name__)

REMBO, BO, RANDOM = "rembo", "bo", "random"
MAX_BO_DIM = 10_000


@dataclass
class RunConfig:
    mode: str = REMBO
    d: int = 2
    kernel: str = K.SE
    k: int = 1
    budget: int = 500
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    seed: int = 0
    ell0: float = 1.0
    L: float = 0.01
    U: float = 50.0
    t_sigma: float = 0.002
    adapt_ell: bool = True
    jitter: float = 1e-6
    acq_evals_per_dim: int = 500
    acq_max_evals: int = 2000
    embedding_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in (REMBO, BO, RANDOM):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.kernel not in (K.SE, K.SE_HIGHDIM, K.CATEGORICAL):
            raise ValueError(f"unknown kernel variant {self.kernel!r}")
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be positive")
        if self.mode != RANDOM and self.budget // self.k < 2:
            raise ValueError(f"budget {self.budget} leaves fewer than 2 evaluations per each of {self.k} runs")
        if self.budget < 1:
            raise ValueError("budget must be positive")

    def run_budgets(self) -> list[int]:
        base, extra = divmod(self.budget, self.k)
        return [base + (r < extra) for r in range(self.k)]

    def echo(self) -> dict:
        out = asdict(self)
        out["acquisition"] = self.acquisition.variant
        return out


@dataclass(eq=False)
class OptimizerState:
    domain: Box
    embedding: Optional[Embedding]
    data: Dataset
    hyper: HyperState
    rng: np.random.Generator
    budget: int
    seed: int = 0
    raw_values: list = field(default_factory=list)
    incumbent: Optional[Incumbent] = None
    evals_used: int = 0
    failures: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def best_value(self) -> float:
        return self.incumbent.value if self.incumbent is not None else math.inf


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def init_state(config: RunConfig, objective, seed, budget: Optional[int] = None) -> OptimizerState:
    """Fresh state for one run; ``seed`` is an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    emb_ss, rng_ss = ss.spawn(2)
    emb = None
    if config.mode == REMBO:
        table = CategoricalTable(objective.categorical) if objective.categorical is not None else None
        emb = draw_embedding(objective.D, config.d, _seed_int(emb_ss), decode=table,
                             scale=config.embedding_scale)
        domain = emb.y_box
    else:
        if config.mode == BO and objective.D > MAX_BO_DIM:
            raise ValueError(f"plain BO over D={objective.D} dimensions is not supported")
        domain = Box.cube(objective.D) if objective.D <= MAX_BO_DIM else None
    hyper = HyperState(ell=min(max(config.ell0, config.L), config.U), L=config.L, U=config.U,
                       t_sigma=config.t_sigma)
    dim = domain.dim if domain is not None else 0
    return OptimizerState(domain=domain, embedding=emb, data=Dataset.empty(dim), hyper=hyper,
                          rng=np.random.default_rng(rng_ss), budget=budget or config.budget,
                          seed=_seed_int(ss))


def kernel_for(config: RunConfig, state: OptimizerState) -> K.KernelSpec:
    ell = state.hyper.ell
    if config.mode == BO or config.kernel == K.SE:
        return K.KernelSpec(K.SE, ell=ell)
    return K.KernelSpec(config.kernel, ell=ell, embedding=state.embedding)


def _standardized(values: np.ndarray) -> np.ndarray:
    # maximize -f; zero mean, unit spread
    g = -np.asarray(values, dtype=float)
    sd = g.std()
    return (g - g.mean()) / (sd if sd > 1e-12 else 1.0)


def _materialize(objective, state: OptimizerState, point: np.ndarray):
    """What the objective sees for a search-space point."""
    if state.embedding is not None:
        emb = state.embedding
        if objective.categorical is not None:
            return decode_values(objective.categorical, map_to_x(emb, point))
        if objective.coords is not None:
            idx = np.asarray(objective.coords)
            return SparseVector(emb.D, idx, map_to_x(emb, point, idx))
        return map_to_x(emb, point)
    if objective.categorical is not None:
        return decode_values(objective.categorical, point)
    return point


def _evaluate(objective, state: OptimizerState, point) -> float:
    x = _materialize(objective, state, point)
    try:
        value = float(objective(x))
        if not math.isfinite(value):
            raise EvaluationError(f"objective returned {value}")
        return value
    except EvaluationError as exc:
        worst = max(state.raw_values) if state.raw_values else 0.0
        state.failures.append((state.evals_used + 1, type(exc).__name__, str(exc)))
        log.warning("evaluation %d failed (%s); scoring %g", state.evals_used + 1, exc, worst + 1.0)
        return worst + 1.0


def _acq_budget(config: RunConfig, dim: int) -> InnerOptBudget:
    n = max(min(config.acq_evals_per_dim * dim, config.acq_max_evals), 2 * (dim + 1))
    return InnerOptBudget(n)


def _step(state: OptimizerState, objective, config: RunConfig) -> OptimizerState:
    if state.evals_used >= state.budget:
        raise RuntimeError("run budget exhausted")
    kernel = kernel_for(config, state)
    if len(state.data) == 0:
        point, std = state.domain.center, 1.0
    else:
        z = _standardized(state.data.values)
        model = fit(Dataset(state.data.points, z), kernel, config.jitter)
        inc = Incumbent(state.incumbent.point, float(z.max()))
        point, _ = maximize_acquisition(model, config.acquisition, state.domain, inc,
                                        _acq_budget(config, state.domain.dim),
                                        seed=int(state.rng.integers(2 ** 31)))
        point = state.domain.clip(point)
        std = math.sqrt(model.predict(point)[1])
    state.hyper = observe_proposal(state.hyper, std)

    value = _evaluate(objective, state, point)
    state.raw_values.append(value)
    state.data = state.data.append(point, value)
    state.evals_used += 1
    if state.incumbent is None or value < state.incumbent.value:
        state.incumbent = Incumbent(np.array(point, dtype=float), value)

    if config.adapt_ell:
        z = _standardized(state.data.values)
        state.hyper = maybe_retune(state.hyper, Dataset(state.data.points, z), kernel, config.jitter)
    else:
        state.hyper = replace(state.hyper, iter=state.hyper.iter + 1)
    state.trace.append((state.evals_used, state.incumbent.value, state.hyper.ell,
                        state.hyper.U, state.hyper.C))
    return state


def bo_step(state: OptimizerState, objective, config: RunConfig) -> OptimizerState:
    """One iteration of GP-EI BO directly in the objective's box."""
    if state.embedding is not None:
        raise ValueError("bo_step on a REMBO state; use rembo_step")
    return _step(state, objective, config)


def rembo_step(state: OptimizerState, objective, config: RunConfig) -> OptimizerState:
    """One iteration of BO over Y, evaluating the objective at p_X(A y)."""
    if state.embedding is None:
        raise ValueError("rembo_step needs an embedding")
    return _step(state, objective, config)


def _gap(value: float, objective) -> float:
    opt = getattr(objective, "known_optimum", None)
    return value - opt if opt is not None else math.nan


def run_single(config: RunConfig, objective, seed=None, budget: Optional[int] = None) -> OptimizerState:
    state = init_state(config, objective, config.seed if seed is None else seed, budget)
    step = rembo_step if config.mode == REMBO else bo_step
    while state.evals_used < state.budget:
        step(state, objective, config)
    return state


def run_interleaved(config: RunConfig, objective) -> RunReport:
    """Advance ``k`` independent runs round-robin, one evaluation at a time.

    The pooled trace has one row per objective evaluation.
    """
    if config.mode == RANDOM:
        return random_search(config, objective)
    t0 = time.perf_counter()
    subs = np.random.SeedSequence(config.seed).spawn(config.k)
    budgets = config.run_budgets()
    states = [init_state(config, objective, ss, b) for ss, b in zip(subs, budgets)]
    step = rembo_step if config.mode == REMBO else bo_step
    trace, best = [], math.inf
    for s in range(max(budgets)):
        for r, st in enumerate(states):
            if st.evals_used >= st.budget:
                continue
            step(st, objective, config)
            best = min(best, st.incumbent.value)
            h = st.hyper
            trace.append(TraceRow(len(trace) + 1, best, _gap(best, objective), r, s + 1, h.ell, h.U, h.C))
    failures = [(r, ev, kind) for r, st in enumerate(states) for ev, kind, _ in st.failures]
    return RunReport(trace, config.echo(), config.seed, time.perf_counter() - t0, failures)


def random_search(config: RunConfig, objective) -> RunReport:
    """Uniform sampling over [-1, 1]^D (only the read coordinates are drawn)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    trace, best, failures = [], math.inf, []
    worst = None
    for t in range(config.budget):
        if objective.coords is not None:
            idx = np.asarray(objective.coords)
            x = SparseVector(objective.D, idx, rng.uniform(-1.0, 1.0, len(idx)))
        else:
            x = rng.uniform(-1.0, 1.0, objective.D)
            if objective.categorical is not None:
                x = decode_values(objective.categorical, x)
        try:
            v = float(objective(x))
            if not math.isfinite(v):
                raise EvaluationError(f"objective returned {v}")
        except EvaluationError as exc:
            v = (worst if worst is not None else 0.0) + 1.0
            failures.append((0, t + 1, type(exc).__name__))
        worst = v if worst is None else max(worst, v)
        best = min(best, v)
        trace.append(TraceRow(t + 1, best, _gap(best, objective), 0, t + 1, math.nan, math.nan, 0))
    return RunReport(trace, config.echo(), config.seed, time.perf_counter() - t0, failures)
