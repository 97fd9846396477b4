"""Benchmark objectives, all in minimization sense on [-1, 1]^D inputs.

Objectives may declare ``coords``: the only coordinates they read. The driver
then hands them a :class:`SparseVector` instead of materializing all ``D``
coordinates, which is what makes lazily embedded problems with ``D = 10**9``
cheap.
"""

from __future__ import annotations

import itertools
import math
import re
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BRANIN_U = (-5.0, 10.0)
BRANIN_V = (0.0, 15.0)
BRANIN_MIN = 5.0 / (4.0 * math.pi)  # 10 (1 - 1/(8 pi)) cos(u) + 10 bottoms out here
BRANIN_ARGMINS = ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475))
MAX_DENSE_ROTATION = 1000


class EvaluationError(RuntimeError):
    """An objective could not produce a value; the driver records a penalty."""


class SpawnError(EvaluationError):
    pass


class CommandTimeout(EvaluationError):
    pass


class CommandFailed(EvaluationError):
    pass


class UnparseableOutput(EvaluationError):
    pass


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Selected coordinates of a conceptual D-vector."""

    D: int
    index: np.ndarray
    values: np.ndarray

    def __getitem__(self, i: int) -> float:
        hit = np.flatnonzero(self.index == i)
        if len(hit) == 0:
            raise KeyError(f"coordinate {i} was not materialized")
        return float(self.values[hit[0]])


def branin(u, v):
    """Standard Branin-Hoo function on its native (u, v) domain."""
    a, b, c = 1.0, 5.1 / (4 * math.pi ** 2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * math.pi)
    return a * (v - b * u ** 2 + c * u - r) ** 2 + s * (1 - t) * np.cos(u) + s


def _to_native(x, lo_hi):
    lo, hi = lo_hi
    return lo + (np.asarray(x, dtype=float) + 1.0) * 0.5 * (hi - lo)


def _from_native(z, lo_hi):
    lo, hi = lo_hi
    return 2.0 * (z - lo) / (hi - lo) - 1.0


@dataclass(eq=False)
class BraninEmbedded:
    """f(x) = branin(x_i, x_j) with x rescaled from [-1, 1] to Branin's box."""

    D: int
    i: int
    j: int
    known_optimum: float = BRANIN_MIN
    categorical = None

    def __post_init__(self):
        if self.D < 2:
            raise ValueError("need D >= 2")
        if self.i == self.j or not (0 <= self.i < self.D and 0 <= self.j < self.D):
            raise ValueError("effective indices must be distinct and < D")

    @classmethod
    def from_seed(cls, D: int, seed: int) -> "BraninEmbedded":
        rng = np.random.default_rng(seed)
        i, j = (int(v) for v in rng.choice(D, size=2, replace=False))
        return cls(D, i, j)

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.i, self.j])

    def optimizer_x(self, which: int = 1) -> dict[int, float]:
        u, v = BRANIN_ARGMINS[which]
        return {self.i: float(_from_native(u, BRANIN_U)), self.j: float(_from_native(v, BRANIN_V))}

    def __call__(self, x) -> float:
        if isinstance(x, SparseVector):
            try:
                xi, xj = x[self.i], x[self.j]
            except KeyError as exc:
                raise ValueError(f"sparse input lacks an effective coordinate: {exc}") from None
        else:
            x = np.asarray(x, dtype=float)
            if x.shape[-1] != self.D:
                raise ValueError(f"expected a {self.D}-vector, got {x.shape[-1]}")
            xi, xj = x[..., self.i], x[..., self.j]
        return branin(_to_native(xi, BRANIN_U), _to_native(xj, BRANIN_V))


def random_rotation(D: int, seed: int | None) -> np.ndarray:
    """Haar-random orthogonal matrix (QR of a Gaussian, sign-fixed); identity for seed None."""
    if D > MAX_DENSE_ROTATION:
        raise ValueError(f"dense rotation limited to D <= {MAX_DENSE_ROTATION}, got {D}")
    if seed is None:
        return np.eye(D)
    G = np.random.default_rng(seed).standard_normal((D, D))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


@dataclass(eq=False)
class BraninRotated:
    """x -> base(R x). Needs every coordinate, so no ``coords``."""

    base: BraninEmbedded
    R: np.ndarray
    categorical = None
    coords = None

    @classmethod
    def from_seed(cls, D: int, seed: int, rotation_seed: int | None) -> "BraninRotated":
        return cls(BraninEmbedded.from_seed(D, seed), random_rotation(D, rotation_seed))

    @property
    def D(self) -> int:
        return self.base.D

    @property
    def known_optimum(self) -> float:
        return self.base.known_optimum

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        # only rows i and j of R matter
        rows = self.R[[self.base.i, self.base.j]]
        z = np.zeros(self.D)
        z[[self.base.i, self.base.j]] = rows @ x
        return self.base(z)


LPSOLVE_LIKE_COUNTS = (2,) * 40 + (7,) * 7


@dataclass(eq=False)
class SyntheticCategorical:
    """Categorical configuration stand-in with a hidden set of effective parameters.

    Cost is additive main effects over the effective parameters plus small
    pairwise interactions; the optimum is found by enumeration at construction.
    """

    counts: tuple[int, ...]
    effective: tuple[int, ...]
    main: list = field(repr=False)
    inter: dict = field(repr=False)
    known_optimum: float = 0.0
    best_config: tuple[int, ...] = ()
    coords = None

    @classmethod
    def from_seed(cls, seed: int, counts: Sequence[int] = LPSOLVE_LIKE_COUNTS, n_effective: int = 5,
                  interaction: float = 0.25) -> "SyntheticCategorical":
        rng = np.random.default_rng(seed)
        counts = tuple(int(c) for c in counts)
        # hidden parameters come from the many-valued ones first so the
        # effective space is not trivially small
        multi = [i for i, c in enumerate(counts) if c > 2]
        rest = [i for i, c in enumerate(counts) if c <= 2]
        n_multi = min(len(multi), n_effective)
        eff = sorted(rng.choice(multi, n_multi, replace=False).tolist()
                     + rng.choice(rest, n_effective - n_multi, replace=False).tolist())
        main = [rng.random(counts[k]) for k in eff]
        inter = {(a, b): interaction * rng.random((counts[eff[a]], counts[eff[b]]))
                 for a, b in itertools.combinations(range(len(eff)), 2)}
        obj = cls(counts, tuple(int(e) for e in eff), main, inter)
        obj._enumerate()
        return obj

    @property
    def D(self) -> int:
        return len(self.counts)

    @property
    def categorical(self) -> tuple[int, ...]:
        return self.counts

    def _effective_cost(self, cats) -> float:
        cost = sum(float(self.main[a][c]) for a, c in enumerate(cats))
        for (a, b), table in self.inter.items():
            cost += float(table[cats[a], cats[b]])
        return cost

    def _enumerate(self):
        grids = [range(self.counts[k]) for k in self.effective]
        best, arg = math.inf, None
        for cats in itertools.product(*grids):
            c = self._effective_cost(cats)
            if c < best:
                best, arg = c, cats
        self.known_optimum = best
        self.best_config = tuple(arg)

    def __call__(self, x) -> float:
        x = np.asarray(x)
        if x.shape != (self.D,):
            raise ValueError(f"expected {self.D} categorical values")
        if not np.all(np.equal(np.mod(x, 1), 0)):
            raise ValueError("categorical input must be integer valued")
        x = x.astype(np.int64)
        if np.any(x < 0) or np.any(x >= np.asarray(self.counts)):
            raise ValueError("category out of range")
        return self._effective_cost([int(x[k]) for k in self.effective])


_FLOAT_RE = re.compile(r"^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*$|^\s*[-+]?(inf|nan)\s*$", re.I)


@dataclass(eq=False)
class ExternalCommand:
    """Evaluate parameters by running a program and reading a number off stdout.

    argv is ``[program, *args, *[param_template.format(i=i, v=v) ...]]`` with
    parameters in index order. The last stdout line that parses as a float
    is the value.
    """

    program: str
    args: tuple[str, ...] = ()
    param_template: str | None = "--p{i}={v}"
    timeout: float = 60.0
    D: int = 0
    categorical: tuple[int, ...] | None = None
    known_optimum: float | None = None
    max_concurrent: int = 1
    coords = None

    def __post_init__(self):
        self._slots = threading.BoundedSemaphore(max(1, self.max_concurrent))

    def render(self, x) -> list[str]:
        argv = [self.program, *self.args]
        if self.param_template is not None:
            for i, v in enumerate(np.asarray(x).ravel().tolist()):
                argv.append(self.param_template.format(i=i, v=v))
        return argv

    def __call__(self, x) -> float:
        argv = self.render(x)
        with self._slots:
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired:
                raise CommandTimeout(f"{argv[0]} exceeded {self.timeout}s") from None
            except OSError as exc:
                raise SpawnError(f"could not start {argv[0]}: {exc}") from None
        if proc.returncode != 0:
            raise CommandFailed(f"{argv[0]} exited with status {proc.returncode}")
        for line in reversed(proc.stdout.splitlines()):
            if _FLOAT_RE.match(line):
                return float(line)
        raise UnparseableOutput(f"no numeric line in output of {argv[0]}")


BRANIN_EMBEDDED = "branin_embedded"
BRANIN_ROTATED = "branin_rotated"
SYNTHETIC_CATEGORICAL = "synthetic_categorical"
EXTERNAL_COMMAND = "external_command"
OBJECTIVES = (BRANIN_EMBEDDED, BRANIN_ROTATED, SYNTHETIC_CATEGORICAL, EXTERNAL_COMMAND)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Everything needed to rebuild an objective; ``build(seed)`` fixes the hidden parts."""

    id: str = BRANIN_EMBEDDED
    D: int = 25
    rotation_seed: int | None = None
    effective_dims: tuple[int, ...] | None = None
    command: tuple[str, ...] = ()
    param_template: str | None = "--p{i}={v}"
    timeout: float = 60.0
    categorical: tuple[int, ...] | None = None
    known_optimum: float | None = None
    max_concurrent: int = 1

    def __post_init__(self):
        if self.id not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.id!r}; expected one of {', '.join(OBJECTIVES)}")
        if self.id == SYNTHETIC_CATEGORICAL:
            object.__setattr__(self, "D", len(self.categorical or LPSOLVE_LIKE_COUNTS))
        if self.D < 2 and self.id != EXTERNAL_COMMAND:
            raise ValueError("D must be at least 2")
        if self.id == BRANIN_ROTATED and self.D > MAX_DENSE_ROTATION:
            raise ValueError(f"rotated objective needs D <= {MAX_DENSE_ROTATION}")
        if self.effective_dims is not None:
            dims = tuple(int(i) for i in self.effective_dims)
            if len(set(dims)) != len(dims) or not all(0 <= i < self.D for i in dims):
                raise ValueError("effective indices must be distinct and < D")
            if self.id in (BRANIN_EMBEDDED, BRANIN_ROTATED) and len(dims) != 2:
                raise ValueError("Branin needs exactly two effective indices")
            object.__setattr__(self, "effective_dims", dims)
        if self.id == EXTERNAL_COMMAND:
            if not self.command:
                raise ValueError("external_command needs a command")
            if self.D < 1:
                raise ValueError("D must be positive")
            if self.timeout <= 0:
                raise ValueError("timeout must be positive")

    def build(self, seed: int):
        if self.id in (BRANIN_EMBEDDED, BRANIN_ROTATED):
            if self.effective_dims is not None:
                base = BraninEmbedded(self.D, *self.effective_dims)
            else:
                base = BraninEmbedded.from_seed(self.D, seed)
            if self.id == BRANIN_EMBEDDED:
                return base
            return BraninRotated(base, random_rotation(self.D, self.rotation_seed))
        if self.id == SYNTHETIC_CATEGORICAL:
            return SyntheticCategorical.from_seed(seed, self.categorical or LPSOLVE_LIKE_COUNTS)
        return ExternalCommand(self.command[0], tuple(self.command[1:]), self.param_template,
                               self.timeout, self.D, self.categorical, self.known_optimum,
                               self.max_concurrent)
