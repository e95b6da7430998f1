"""Cylindrical martingales driven by a Brownian motion: ``Mx* = ∫ ⟨Gᵀx*, dW⟩``.

``G`` represents the operator H -> X as a matrix of shape (d_X, d_H), frozen
at the left endpoint of every grid cell. ``M`` applied to a functional x* in
R^{d_X} is the scalar path with increments ``⟨G(t_k)ᵀ x*, ΔW_k⟩``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch
from .paths import (
    ElementaryProcess,
    ScalarPath,
    TimeGrid,
    VectorPath,
    realized_cov,
    realized_qv,
    simulate_cyl_bm,
    step_integral,
    ucp_terms,
)
from .rng import RngSeed


@dataclass(frozen=True)
class CylModel:
    grid: TimeGrid
    G: np.ndarray  # (K, d_X, d_H); read-only broadcast view when constant
    W: VectorPath
    seed: RngSeed | None = None
    constant: bool = field(default=False)

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 2:
            G = np.broadcast_to(G, (self.grid.K, *G.shape))
            object.__setattr__(self, "constant", True)
        if G.ndim != 3 or G.shape[0] != self.grid.K:
            raise DimensionMismatch(f"G must have shape (K, d_X, d_H), got {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("G has non-finite entries")
        if self.W.grid != self.grid:
            raise DimensionMismatch("W and G must share the grid")
        if self.W.dim != G.shape[2]:
            raise DimensionMismatch(f"W has dimension {self.W.dim}, G expects d_H={G.shape[2]}")
        object.__setattr__(self, "G", G)

    @classmethod
    def simulate(cls, G, grid: TimeGrid, seed: RngSeed) -> "CylModel":
        """Model with ``G`` (constant (d_X, d_H), per-cell (K, d_X, d_H), or callable of t)."""
        if callable(G):
            G = np.array([np.asarray(G(t), dtype=float) for t in grid.times[:-1]])
        G = np.asarray(G, dtype=float)
        d_H = G.shape[-1]
        W = simulate_cyl_bm(np.eye(d_H), grid, seed)
        return cls(grid, G, W, seed)

    @property
    def d_X(self) -> int:
        return self.G.shape[1]

    @property
    def d_H(self) -> int:
        return self.G.shape[2]

    def operator_norms(self) -> np.ndarray:
        """Largest singular value of G on every cell."""
        if self.constant:
            return np.full(self.grid.K, np.linalg.norm(self.G[0], 2))
        return np.linalg.norm(self.G, ord=2, axis=(1, 2))

    def increments(self) -> np.ndarray:
        """ΔM e_j for all coordinate functionals, shape (K, d_X)."""
        dW = self.W.increments()
        if self.constant:
            return dW @ self.G[0].T
        return np.einsum("kxh,kh->kx", self.G, dW)

    def stopped(self, k: int) -> "CylModel":
        """The model stopped at grid index ``k`` (G set to zero afterwards)."""
        G = np.array(self.G)
        G[k:] = 0.0
        return CylModel(self.grid, G, self.W, self.seed)

    def to_json(self) -> str:
        doc = {
            "d_H": self.d_H,
            "d_X": self.d_X,
            "grid": {"T": self.grid.T, "K": self.grid.K},
            "seed": None if self.seed is None else self.seed.seed,
            "stream": None if self.seed is None else self.seed.stream,
            "G": "constant" if self.constant else "per_cell",
            "entries": (self.G[0] if self.constant else self.G).tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "CylModel":
        doc = json.loads(text)
        grid = TimeGrid(doc["grid"]["T"], doc["grid"]["K"])
        G = np.asarray(doc["entries"], dtype=float)
        shape = (doc["d_X"], doc["d_H"]) if doc["G"] == "constant" else (grid.K, doc["d_X"], doc["d_H"])
        if G.shape != shape:
            raise DimensionMismatch(f"entries have shape {G.shape}, expected {shape}")
        if doc.get("seed") is None:
            raise ValueError("model document needs a seed to regenerate W")
        return cls.simulate(G, grid, RngSeed(doc["seed"], doc.get("stream") or 0))


def _check_functional(model: CylModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d_X,):
        raise DimensionMismatch(f"functional has shape {x.shape}, expected ({model.d_X},)")
    return x


def eval_M(model: CylModel, xstar) -> ScalarPath:
    x = _check_functional(model, xstar)
    dW = model.W.increments()
    if model.constant:
        gx = model.G[0].T @ x
        inc = dW @ gx
    else:
        gx = np.einsum("kxh,x->kh", model.G, x)
        inc = np.einsum("kh,kh->k", gx, dW)
    return ScalarPath.from_increments(model.grid, inc)


def functional_family(model: CylModel) -> Callable[[np.ndarray], ScalarPath]:
    """``x* -> M x*`` as a callable, for :func:`step_integral`."""
    return lambda x: eval_M(model, x)


def _gt(model: CylModel, x: np.ndarray) -> np.ndarray:
    """Gᵀx on every cell, shape (K, d_H)."""
    if model.constant:
        return np.broadcast_to(model.G[0].T @ x, (model.grid.K, model.d_H))
    return np.einsum("kxh,x->kh", model.G, x)


class IdentityCheck(NamedTuple):
    lhs: ScalarPath
    rhs: ScalarPath
    sup_gap: float


def covariation_identity_check(model: CylModel, xstar, ystar) -> IdentityCheck:
    """Realized [Mx*, My*] against the cumulative ∫⟨Gᵀx*, Gᵀy*⟩ ds."""
    x = _check_functional(model, xstar)
    y = _check_functional(model, ystar)
    lhs = realized_cov(eval_M(model, x), eval_M(model, y))
    dens = np.einsum("kh,kh->k", _gt(model, x), _gt(model, y))
    rhs = ScalarPath.from_increments(model.grid, dens * model.grid.dt)
    return IdentityCheck(lhs, rhs, float(np.max(np.abs(lhs.values - rhs.values))))


def as_integrand(f, grid: TimeGrid, shape: tuple) -> np.ndarray:
    """Left-endpoint values of an integrand as an array (K, *shape).

    Accepts a callable of t, a constant of the given shape, or grid-indexed
    arrays with K or K+1 rows (the last row of a K+1 array is ignored).
    """
    if callable(f):
        arr = np.array([np.asarray(f(t), dtype=float) for t in grid.times[:-1]])
    else:
        arr = np.asarray(f, dtype=float)
        if arr.shape == shape:
            arr = np.broadcast_to(arr, (grid.K, *shape))
        elif arr.shape[:1] == (grid.K + 1,):
            arr = arr[:-1]
    if arr.shape != (grid.K, *shape):
        raise DimensionMismatch(f"integrand has shape {arr.shape}, expected {(grid.K, *shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("integrand has non-finite entries")
    return arr


def integrate_vs_M(model: CylModel, f) -> ScalarPath:
    """∫ f dM with increments Σ_i f_i(t_k) ΔM e_i, f frozen at left endpoints."""
    fa = as_integrand(f, model.grid, (model.d_X,))
    inc = np.einsum("ki,ki->k", fa, model.increments())
    return ScalarPath.from_increments(model.grid, inc)


def integrand_qv_density(model: CylModel, f) -> np.ndarray:
    """‖G(t_k)ᵀ f(t_k)‖² per cell."""
    fa = as_integrand(f, model.grid, (model.d_X,))
    gf = np.einsum("kxh,kx->kh", model.G, fa)
    return np.einsum("kh,kh->k", gf, gf)


def compose_martingale(model: CylModel, Psi, phi) -> IdentityCheck:
    """∫ φ dN with N h = ∫ Ψᵀh dM, against ∫ Ψᵀφ dM.

    The left side first builds the increments of N on the coordinate
    functionals, ΔN = Ψ ΔM, then pairs them with φ; the right side applies
    Ψᵀ to φ first.
    """
    d = model.d_X
    P = as_integrand(Psi, model.grid, (d, d))
    ph = as_integrand(phi, model.grid, (d,))
    dM = model.increments()
    dN = np.einsum("kij,kj->ki", P, dM)
    lhs = ScalarPath.from_increments(model.grid, np.einsum("ki,ki->k", ph, dN))
    psi_phi = np.einsum("kji,kj->ki", P, ph)
    rhs = ScalarPath.from_increments(model.grid, np.einsum("ki,ki->k", psi_phi, dM))
    return IdentityCheck(lhs, rhs, float(np.max(np.abs(lhs.values - rhs.values))))


@dataclass
class LimitReport:
    distances: list
    distance_stderr: list
    qv_means: list
    qv_stderr: list
    qv_target: float
    qv_gaps: list
    monotone: bool
    n_trials: int


def _integrate_approximant(model: CylModel, fn) -> ScalarPath:
    if isinstance(fn, ElementaryProcess):
        out = step_integral(fn, functional_family(model))
        if out.dim != 1:
            raise DimensionMismatch("approximants must be scalar-valued (d_Y = 1)")
        return ScalarPath(model.grid, out.values[:, 0])
    return integrate_vs_M(model, fn)


def inttheory_limit_check(models: Sequence[CylModel], approximants: Sequence, f,
                          n_max: int = 1) -> LimitReport:
    """Certify ``f_n·M -> f·M`` along the supplied approximating sequence.

    ``models`` holds one independent model per Monte Carlo trial. The report
    carries the ucp distance of each approximant to the grid integral of f,
    and the realized quadratic variation at T against Σ‖Gᵀf‖² dt.
    Non-convergence is reported, never raised.
    """
    n_a = len(approximants)
    per_trial = np.zeros((n_a, len(models)))
    qv = np.zeros((n_a, len(models)))
    target = np.zeros(len(models))
    for j, model in enumerate(models):
        N = integrate_vs_M(model, f)
        target[j] = float(np.sum(integrand_qv_density(model, f)) * model.grid.dt)
        for i, fn in enumerate(approximants):
            Nn = _integrate_approximant(model, fn)
            per_trial[i, j] = ucp_terms(Nn.values - N.values, model.grid, n_max)[0]
            qv[i, j] = realized_qv(Nn).values[-1]
    sq = np.sqrt(len(models))
    dist = per_trial.mean(axis=1)
    dse = per_trial.std(axis=1, ddof=1) / sq if len(models) > 1 else np.full(n_a, np.nan)
    qm = qv.mean(axis=1)
    qse = qv.std(axis=1, ddof=1) / sq if len(models) > 1 else np.full(n_a, np.nan)
    tgt = float(target.mean())
    return LimitReport(
        distances=dist.tolist(),
        distance_stderr=dse.tolist(),
        qv_means=qm.tolist(),
        qv_stderr=qse.tolist(),
        qv_target=tgt,
        qv_gaps=np.abs(qm - tgt).tolist(),
        monotone=bool(np.all(np.diff(dist) <= 0)),
        n_trials=len(models),
    )


def piecewise_constant(f: Callable, T: float, pieces: int) -> ElementaryProcess:
    """Elementary approximation of a deterministic integrand: f frozen on ``pieces`` intervals."""
    bps = np.linspace(0.0, T, pieces + 1)
    coeffs = np.array([np.asarray(f(t), dtype=float) for t in bps[:-1]])
    return ElementaryProcess.deterministic(bps, coeffs)
