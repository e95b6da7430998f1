"""Time grids, sample paths, cylindrical Brownian motion and realized variations.

All processes live on a uniform grid ``t_k = k T / K``. Paths may carry the
exact increments they were built from; downstream operations use those
instead of differencing the cumulative values, which keeps identities such as
"M e1 equals the first coordinate of W" exact in floating point.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    GridMisalignment,
    GridMismatch,
    HorizonTooShort,
    NonMonotonePath,
)
from .operator_calculus import as_psd, borel_calc
from .rng import RngSeed

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    T: float
    K: int

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError(f"horizon must be positive, got {self.T}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"steps must be a positive integer, got {self.K}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "K", int(self.K))

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time ``t``; raises GridMisalignment when off-grid."""
        x = t / self.dt
        k = int(round(x))
        if abs(x - k) > tol * max(1.0, abs(x)) or not 0 <= k <= self.K:
            raise GridMisalignment(f"time {t} is not a point of the grid T={self.T}, K={self.K}")
        return k

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T, self.K * factor)


def _same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise GridMismatch(f"paths live on different grids: {a} vs {b}")


@dataclass(frozen=True)
class ScalarPath:
    grid: TimeGrid
    values: np.ndarray
    exact_increments: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.K + 1,):
            raise DimensionMismatch(f"expected {self.grid.K + 1} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_increments(cls, grid: TimeGrid, inc: np.ndarray, start: float = 0.0) -> "ScalarPath":
        inc = np.asarray(inc, dtype=float)
        vals = np.empty(grid.K + 1)
        vals[0] = start
        np.cumsum(inc, out=vals[1:])
        if start:
            vals[1:] += start
        return cls(grid, vals, inc)

    def increments(self) -> np.ndarray:
        if self.exact_increments is not None:
            return self.exact_increments
        return np.diff(self.values)

    def at(self, k: int) -> float:
        return float(self.values[k])

    def stopped(self, k: int) -> "ScalarPath":
        """The path stopped at grid index ``k``."""
        inc = self.increments().copy()
        inc[k:] = 0.0
        return ScalarPath.from_increments(self.grid, inc, self.values[0])

    def __add__(self, other: "ScalarPath") -> "ScalarPath":
        _same_grid(self.grid, other.grid)
        return ScalarPath.from_increments(self.grid, self.increments() + other.increments(),
                                          self.values[0] + other.values[0])

    def __sub__(self, other: "ScalarPath") -> "ScalarPath":
        _same_grid(self.grid, other.grid)
        return ScalarPath.from_increments(self.grid, self.increments() - other.increments(),
                                          self.values[0] - other.values[0])

    def scaled(self, a: float) -> "ScalarPath":
        return ScalarPath.from_increments(self.grid, a * self.increments(), a * self.values[0])

    def to_csv(self) -> str:
        return paths_to_csv(self.grid, self.values[:, None])


@dataclass(frozen=True)
class VectorPath:
    grid: TimeGrid
    values: np.ndarray  # (K+1, d)
    exact_increments: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.K + 1:
            raise DimensionMismatch(f"expected ({self.grid.K + 1}, d) values, got {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_increments(cls, grid: TimeGrid, inc: np.ndarray) -> "VectorPath":
        inc = np.asarray(inc, dtype=float)
        vals = np.zeros((grid.K + 1, inc.shape[1]))
        np.cumsum(inc, axis=0, out=vals[1:])
        return cls(grid, vals, inc)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def increments(self) -> np.ndarray:
        if self.exact_increments is not None:
            return self.exact_increments
        return np.diff(self.values, axis=0)

    def coord(self, i: int) -> ScalarPath:
        return ScalarPath.from_increments(self.grid, self.increments()[:, i], self.values[0, i])

    def to_csv(self) -> str:
        return paths_to_csv(self.grid, self.values)


def paths_to_csv(grid: TimeGrid, values: np.ndarray) -> str:
    """CSV with header ``t,v_1,...,v_d``; 17 significant digits."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"v_{i + 1}" for i in range(values.shape[1])])
    for t, row in zip(grid.times, values):
        w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in row])
    return buf.getvalue()


def paths_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:]


def simulate_cyl_bm(Q, grid: TimeGrid, seed: RngSeed, d: int | None = None) -> VectorPath:
    """Q-Brownian motion on ``grid``: independent N(0, Q dt) increments, W_0 = 0."""
    Q = as_psd(Q)
    if d is not None and d != Q.dim:
        raise DimensionMismatch(f"dimension {d} does not match covariance of size {Q.dim}")
    root = borel_calc(np.sqrt, Q)
    z = seed.generator().standard_normal((grid.K, Q.dim))
    inc = np.sqrt(grid.dt) * (z @ root.T)
    return VectorPath.from_increments(grid, inc)


def brownian_increments(grid: TimeGrid, seed: RngSeed, d: int = 1) -> np.ndarray:
    """Standard (Q = I) increments of shape (K, d)."""
    return np.sqrt(grid.dt) * seed.generator().standard_normal((grid.K, d))


@dataclass
class EventTerm:
    """One predictable event ``B_mn`` with its finite-rank operator ``Σ_k x*_k ⊗ y_kmn``.

    ``indicator`` is either a bool or a callable ``(k0, history) -> bool``
    that only sees the functional paths up to the left breakpoint index k0.
    """

    indicator: bool | Callable
    xstars: np.ndarray  # (n_terms, d_X)
    ys: np.ndarray  # (n_terms, d_Y)


@dataclass
class ElementaryProcess:
    breakpoints: Sequence[float]
    terms: list  # per interval: list[EventTerm]

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0) or b[0] < 0:
            raise ValueError("breakpoints must be strictly increasing and start at t >= 0")
        if len(self.terms) != b.size - 1:
            raise ValueError(f"{b.size - 1} intervals but {len(self.terms)} term lists")

    @property
    def d_Y(self) -> int:
        for block in self.terms:
            for ev in block:
                return np.atleast_2d(ev.ys).shape[1]
        return 1

    @classmethod
    def deterministic(cls, breakpoints: Sequence[float], coeffs: np.ndarray) -> "ElementaryProcess":
        """Scalar-valued process ``Σ_n 1_(t_{n-1}, t_n] ⟨coeffs[n-1], ·⟩``."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        terms = [[EventTerm(True, np.eye(coeffs.shape[1]), c[:, None])] for c in coeffs]
        return cls(list(breakpoints), terms)


def _lookup(M, xstar: np.ndarray) -> ScalarPath:
    if isinstance(M, Mapping):
        return M[tuple(float(x) for x in xstar)]
    return M(xstar)


def step_integral(f: ElementaryProcess, M) -> VectorPath:
    """Integral of an elementary process against a family of scalar paths.

    ``M`` maps a functional (1-D array) to its ScalarPath; a callable or a
    mapping keyed by the tuple of functional entries. Sums run over
    intervals, events and rank-one terms in the order given.
    """
    grid = None
    bps = np.asarray(f.breakpoints, dtype=float)
    cache: dict = {}

    def path_of(x):
        key = tuple(float(v) for v in x)
        if key not in cache:
            p = _lookup(M, np.asarray(x, dtype=float))
            cache[key] = p
        return cache[key]

    out = None
    idx = None
    for n in range(len(bps) - 1):
        for ev in f.terms[n]:
            X = np.atleast_2d(np.asarray(ev.xstars, dtype=float))
            Y = np.atleast_2d(np.asarray(ev.ys, dtype=float))
            if X.shape[0] != Y.shape[0]:
                raise DimensionMismatch("each x* needs exactly one y")
            paths = [path_of(x) for x in X]
            if grid is None:
                grid = paths[0].grid
                idx = np.arange(grid.K + 1)
                out = np.zeros((grid.K + 1, Y.shape[1]))
            a, b = grid.index_of(bps[n]), grid.index_of(bps[n + 1])
            if callable(ev.indicator):
                hist = {tuple(float(v) for v in x): p.values[: a + 1] for x, p in zip(X, paths)}
                on = bool(ev.indicator(a, hist))
            else:
                on = bool(ev.indicator)
            if not on:
                continue
            lo, hi = np.minimum(idx, a), np.minimum(idx, b)
            for p, y in zip(paths, Y):
                _same_grid(grid, p.grid)
                out += (p.values[hi] - p.values[lo])[:, None] * y[None, :]
    if out is None:
        raise ValueError("elementary process has no terms; grid cannot be inferred")
    return VectorPath(grid, out)


def realized_qv(M: ScalarPath) -> ScalarPath:
    dm = M.increments()
    return ScalarPath.from_increments(M.grid, dm * dm)


def realized_cov(M: ScalarPath, N: ScalarPath) -> ScalarPath:
    _same_grid(M.grid, N.grid)
    return ScalarPath.from_increments(M.grid, M.increments() * N.increments())


def qv_sum_hilbert(M: VectorPath) -> ScalarPath:
    """Σ_i [M e_i]: cumulative Σ_k ‖ΔM_k‖², independent of the orthonormal basis."""
    dm = M.increments()
    return ScalarPath.from_increments(M.grid, np.einsum("ki,ki->k", dm, dm))


class UcpDistance(NamedTuple):
    value: float
    stderr: float
    tail_bound: float
    n_trials: int


def ucp_terms(diff_values: np.ndarray, grid: TimeGrid, n_max: int) -> np.ndarray:
    """Per-trial Σ_{n≤n_max} 2^-n (1 ∧ sup_[0,n] |D|) for rows of ``diff_values``."""
    D = np.abs(np.atleast_2d(np.asarray(diff_values, dtype=float)))
    if grid.T < n_max * (1 - 1e-12):
        raise HorizonTooShort(f"grid horizon {grid.T} is shorter than n_max={n_max}")
    running = np.maximum.accumulate(D, axis=1)
    out = np.zeros(D.shape[0])
    for n in range(1, n_max + 1):
        k = min(grid.K, int(np.floor(n / grid.dt + 1e-9)))
        out += 2.0 ** -n * np.minimum(1.0, running[:, k])
    return out


def _stack(paths) -> tuple[np.ndarray, TimeGrid]:
    if isinstance(paths, ScalarPath):
        paths = [paths]
    paths = list(paths)
    grid = paths[0].grid
    for p in paths:
        _same_grid(grid, p.grid)
    return np.array([p.values for p in paths]), grid


def ucp_distance(M, N, n_max: int = 1) -> UcpDistance:
    """Monte Carlo ucp-metric distance between two families of paths (one per trial).

    The series is truncated at ``n_max``; the omitted tail is at most 2^-n_max.
    """
    a, ga = _stack(M)
    b, gb = _stack(N)
    _same_grid(ga, gb)
    if a.shape != b.shape:
        raise DimensionMismatch("families must have the same number of trials")
    vals = ucp_terms(a - b, ga, n_max)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return UcpDistance(float(vals.mean()), se, 2.0 ** -n_max, int(vals.size))


def stieltjes_increments(F: ScalarPath, tol: float = MONOTONE_TOL) -> np.ndarray:
    """Cell masses of the Lebesgue-Stieltjes measure of a nondecreasing path."""
    inc = np.diff(F.values) if F.exact_increments is None else F.exact_increments.copy()
    if np.any(inc < -tol):
        k = int(np.argmin(inc))
        raise NonMonotonePath(f"path decreases by {-inc[k]:.3g} on cell {k}")
    return np.maximum(inc, 0.0)


def ac_diagnostic(mu: np.ndarray, nu: np.ndarray) -> float:
    """max_k mu_k / nu_k with 0/0 = 0 and x/0 = +inf; finite means mu << nu on the grid."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise DimensionMismatch("increment sequences differ in length")
    ratio = np.zeros_like(mu)
    pos = nu > 0
    ratio[pos] = mu[pos] / nu[pos]
    ratio[~pos & (mu > 0)] = np.inf
    return float(ratio.max()) if ratio.size else 0.0
