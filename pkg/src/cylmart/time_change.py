"""Time change to absolute continuity.

F(t) = t (1 + Σ_n 2^-n arctan [M x_n*]_t) is strictly increasing with
F(t) ≥ t; τ_s = inf{t : F(t) > s} is its right-continuous inverse, taken on
the input grid. Quadratic-variation mass of a cell (t_{k-1}, t_k] is carried
to the changed-time interval (F(t_{k-1}), F(t_k)], whose length is at least
t_k 2^-n Δ[M x_n*] / (1 + K²) by the mean value theorem for arctan.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridMismatch, HorizonExceeded, NonMonotonePath
from .martingale import CylModel, eval_M
from .paths import ScalarPath, TimeGrid, realized_qv, stieltjes_increments


def dual_sequence(d: int, xstars: Sequence | None = None) -> list:
    """Functionals for F, each scaled into the closed unit ball (default: coordinate basis)."""
    if xstars is None:
        return [np.eye(d)[i] for i in range(d)]
    out = []
    for x in xstars:
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        out.append(x / n if n > 1 else x)
    return out


def functional_paths(model: CylModel, xstars: Sequence | None = None) -> list:
    return [eval_M(model, x) for x in dual_sequence(model.d_X, xstars)]


def build_F_from_qv(qv_paths: Sequence[ScalarPath], n_terms: int | None = None) -> ScalarPath:
    if not qv_paths:
        raise ValueError("need at least one quadratic variation path")
    grid = qv_paths[0].grid
    N = len(qv_paths) if n_terms is None else min(int(n_terms), len(qv_paths))
    acc = np.zeros(grid.K + 1)
    for n, q in enumerate(qv_paths[:N], start=1):
        if q.grid != grid:
            raise GridMismatch("quadratic variation paths live on different grids")
        stieltjes_increments(q)  # raises NonMonotonePath
        acc += 2.0 ** -n * np.arctan(q.values)
    return ScalarPath(grid, grid.times * (1.0 + acc))


def build_F(M_paths: Sequence[ScalarPath], n_terms: int | None = None) -> ScalarPath:
    """F from the realized quadratic variations of the given functional paths."""
    return build_F_from_qv([realized_qv(p) for p in M_paths], n_terms)


@dataclass(frozen=True)
class TimeChange:
    F_path: ScalarPath
    s_grid: TimeGrid
    tau_index: np.ndarray  # index into the input grid, per changed-time point
    n_terms: int | None = None

    @property
    def input_grid(self) -> TimeGrid:
        return self.F_path.grid

    @property
    def tau(self) -> np.ndarray:
        return self.input_grid.times[self.tau_index]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "tau_s", "F_tau_s"])
        F = self.F_path.values
        for s, k in zip(self.s_grid.times, self.tau_index):
            w.writerow([f"{s:.17g}", f"{self.input_grid.times[k]:.17g}", f"{F[k]:.17g}"])
        return buf.getvalue()


def changed_time_grid(F: ScalarPath, ds: float | None = None) -> TimeGrid:
    """Uniform s-grid with step about ``ds`` (default: input dt) and horizon strictly below F(T)."""
    ds = F.grid.dt if ds is None else ds
    FT = float(F.values[-1])
    n = int(np.floor(FT / ds))
    while n * ds >= FT and n > 1:
        n -= 1
    return TimeGrid(n * ds, n)


def invert_F(F: ScalarPath, s_grid: TimeGrid, n_terms: int | None = None) -> TimeChange:
    """τ_s = smallest grid time t_k with F(t_k) > s."""
    inc = np.diff(F.values)
    if np.any(inc <= 0):
        raise NonMonotonePath("F must be strictly increasing")
    FT = float(F.values[-1])
    s = s_grid.times
    if s[-1] > FT:
        raise HorizonExceeded(f"changed-time horizon {s[-1]} exceeds F(T) = {FT}")
    idx = np.searchsorted(F.values, s, side="right")
    idx = np.minimum(idx, F.grid.K)
    return TimeChange(F, s_grid, idx, n_terms)


def apply_time_change(path: ScalarPath, tc: TimeChange) -> ScalarPath:
    if path.grid != tc.input_grid:
        raise GridMismatch("path and time change use different input grids")
    return ScalarPath(tc.s_grid, path.values[tc.tau_index])


def sandwich_gaps(tc: TimeChange) -> tuple[float, float]:
    """(max F(τ_s⁻) - s, min F(τ_s) - s); the discrete sandwich holds iff first ≤ 0 < second."""
    F = tc.F_path.values
    s = tc.s_grid.times
    k = tc.tau_index
    before = F[np.maximum(k - 1, 0)] - s
    after = F[k] - s
    return float(before.max()), float(after.min())


def qv_time_change_gap(path: ScalarPath, tc: TimeChange) -> tuple[float, float]:
    """sup_s |[M∘τ]_s - [M]_τ_s| and the largest single-cell qv mass of M."""
    q = realized_qv(path)
    lhs = realized_qv(apply_time_change(path, tc)).values
    rhs = q.values[tc.tau_index] - q.values[tc.tau_index[0]]
    cell = float(np.max(np.diff(q.values))) if path.grid.K else 0.0
    return float(np.max(np.abs(lhs - rhs))), cell


@dataclass
class Certificate:
    n: int
    K: float
    bound: float
    max_density: float
    violations: list = field(default_factory=list)
    max_ratio: float = 0.0  # max over cells of density / local bound

    @property
    def certified(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "K": self.K, "bound": self.bound,
                           "max_density": self.max_density, "violations": self.violations})


def certify_ac(M_paths: Sequence[ScalarPath], tc: TimeChange, n: int,
               slack: float = 1e-9) -> Certificate:
    """Density of [M x_n* ∘ τ] with respect to changed time, checked cell by cell.

    Each input cell k carries qv mass Δq_k onto a changed-time interval of
    length ΔF_k. The certified bound is 2^n (1 + K²) / min(1, t_k), with
    K = [M x_n*]_T: the constant 2^n (1 + K²) from the arctan mean value
    theorem, divided by the factor t_k that multiplies the arctan sum in F.
    """
    if not 1 <= n <= len(M_paths):
        raise ValueError(f"functional index must lie in [1, {len(M_paths)}]")
    p = M_paths[n - 1]
    if p.grid != tc.input_grid:
        raise GridMismatch("paths and time change use different input grids")
    dq = np.diff(realized_qv(p).values)
    dF = np.diff(tc.F_path.values)
    K = float(realized_qv(p).values[-1])
    const = 2.0 ** n * (1.0 + K * K)
    t = tc.input_grid.times[1:]
    local = const / np.minimum(1.0, t) * (1.0 + slack)
    dens = dq / dF
    bad = np.nonzero(dens > local)[0]
    viol = [{"cell": int(k), "t": float(t[k]), "density": float(dens[k]), "bound": float(local[k])}
            for k in bad[:20]]
    return Certificate(n, K, const, float(dens.max()) if dens.size else 0.0, viol,
                       float(np.max(dens / local)) if dens.size else 0.0)


def changed_time_densities(path: ScalarPath, tc: TimeChange) -> np.ndarray:
    """Δ[M∘τ]_j / Δs_j on the changed-time grid."""
    q = realized_qv(apply_time_change(path, tc)).values
    return np.diff(q) / tc.s_grid.dt
