"""Rebuilding the driving Brownian motion from (M, G), and cross-covariation representations.

The band construction splits the spectrum of S = GᵀG into dyadic bands.
Band n contributes ΔW_n = ψ_n(S) Gᵀ ΔM, which only uses the increments of M;
the kernel of S is filled by an independent auxiliary Brownian motion.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, WindowTooLarge
from .martingale import CylModel, eval_M
from .operator_calculus import KERNEL_THRESHOLD, BandSystem, band_operators_stack
from .paths import ScalarPath, TimeGrid, VectorPath, brownian_increments, paths_to_csv
from .rng import RngSeed


@dataclass(frozen=True)
class ReconstructionResult:
    W_hat: VectorPath
    components: list  # components[0] kernel part, components[n] band n
    band_system: BandSystem

    @property
    def grid(self) -> TimeGrid:
        return self.W_hat.grid

    def qv_paths(self) -> np.ndarray:
        """Realized quadratic variation of every coordinate of Ŵ, shape (K+1, d)."""
        dw = self.W_hat.increments()
        out = np.zeros((self.grid.K + 1, dw.shape[1]))
        np.cumsum(dw * dw, axis=0, out=out[1:])
        return out

    def cross_covariations(self) -> np.ndarray:
        """Matrix of realized [Ŵe_i, Ŵe_j]_T."""
        dw = self.W_hat.increments()
        return dw.T @ dw

    def component_qv(self) -> np.ndarray:
        """[W_n e_i]_T per component n (rows) and coordinate i (columns)."""
        return np.array([np.sum(c.increments() ** 2, axis=0) for c in self.components])

    def diagnostics(self) -> dict:
        T = self.grid.T
        cc = self.cross_covariations()
        d = cc.shape[0]
        off = [cc[i, j] for i in range(d) for j in range(i + 1, d)]
        return {
            "qv_slopes": (np.diag(cc) / T).tolist(),
            "max_abs_cross_cov": float(max(np.abs(off))) if off else 0.0,
            "component_qv": self.component_qv().tolist(),
        }

    def diagnostics_csv(self) -> str:
        return paths_to_csv(self.grid, self.qv_paths())


def reconstruct_W(model: CylModel, depth: int, aux_seed: RngSeed,
                  eps0: float = KERNEL_THRESHOLD) -> ReconstructionResult:
    """Recover an H-cylindrical Brownian motion Ŵ with M x* = ∫⟨Gᵀx*, dŴ⟩."""
    if model.d_X != model.d_H:
        raise DimensionMismatch(f"reconstruction needs d_X == d_H, got {model.d_X} != {model.d_H}")
    grid = model.grid
    bs = BandSystem(depth, eps0)
    dM = model.increments()  # (K, d): ΔM e_j
    if model.constant:
        G0 = model.G[0]
        psi, psi0 = band_operators_stack((G0.T @ G0)[None], bs)
        # ψ_n Gᵀ per band, shared by all cells
        A = np.einsum("nij,kj->nki", psi[0] @ G0.T[None], dM)
        P0 = psi0[0]
        dbar = brownian_increments(grid, aux_seed, model.d_H)
        kern = dbar @ P0.T
    else:
        G = np.asarray(model.G)
        S = np.einsum("kxi,kxj->kij", G, G)
        psi, psi0 = band_operators_stack(S, bs)
        pg = np.einsum("knij,kxj->knix", psi, G)  # ψ_n(S) Gᵀ
        A = np.einsum("knix,kx->nki", pg, dM)
        dbar = brownian_increments(grid, aux_seed, model.d_H)
        kern = np.einsum("kij,kj->ki", psi0, dbar)
    comps_inc = [kern] + [A[n] for n in range(depth)]
    total = comps_inc[0].copy()
    for c in comps_inc[1:]:
        total += c
    comps = [VectorPath.from_increments(grid, c) for c in comps_inc]
    return ReconstructionResult(VectorPath.from_increments(grid, total), comps, bs)


class Roundtrip(NamedTuple):
    M_orig: ScalarPath
    M_rebuilt: ScalarPath
    sup_gap: float


def roundtrip_check(model: CylModel, result: ReconstructionResult, xstar) -> Roundtrip:
    x = np.asarray(xstar, dtype=float)
    orig = eval_M(model, x)
    dW = result.W_hat.increments()
    if model.constant:
        inc = dW @ (model.G[0].T @ x)
    else:
        inc = np.einsum("kh,kh->k", np.einsum("kxh,x->kh", model.G, x), dW)
    rebuilt = ScalarPath.from_increments(model.grid, inc)
    return Roundtrip(orig, rebuilt, float(np.max(np.abs(orig.values - rebuilt.values))))


def ks_normality(terminal_values: np.ndarray, T: float) -> list:
    """KS p-values of Ŵe_i(T)/√T against N(0,1); rows are trials, columns coordinates."""
    z = np.asarray(terminal_values, dtype=float) / math.sqrt(T)
    return [float(stats.kstest(z[:, i], "norm").pvalue) for i in range(z.shape[1])]


def summary_json(qv_slopes: Sequence[float], max_cross_corr: float, ks_pvalues: Sequence[float]) -> str:
    return json.dumps({"qv_slopes": list(qv_slopes), "max_cross_corr": max_cross_corr,
                       "ks_pvalues": list(ks_pvalues)})


@dataclass(frozen=True)
class CrossCovEstimate:
    a: np.ndarray  # (K, n_functionals, d_H): row h holds â_h(t_k)
    window: int
    kw_ratio_max: float  # max |f_nh| / sqrt(f_h f_nn), ≤ 1 by Cauchy-Schwarz
    kw_excess: float  # max |f_nh| - sqrt(f_h) (Kunita-Watanabe with ‖x_n‖ = 1)

    def integrate(self, W: VectorPath) -> np.ndarray:
        """∫ â_h dW for every functional h, shape (K+1, n_functionals)."""
        inc = np.einsum("khn,kn->kh", self.a, W.increments())
        out = np.zeros((W.grid.K + 1, inc.shape[1]))
        np.cumsum(inc, axis=0, out=out[1:])
        return out


def _boxcar(x: np.ndarray, w: int) -> np.ndarray:
    """Centred moving average along axis 0, window clipped at the ends."""
    K = x.shape[0]
    c = np.zeros((K + 1, *x.shape[1:]))
    np.cumsum(x, axis=0, out=c[1:])
    lo = np.clip(np.arange(K) - w // 2, 0, K - w)
    hi = lo + w
    return (c[hi] - c[lo]) / w


def default_window(K: int) -> int:
    return int(math.ceil(math.sqrt(K)))


def crosscov_representation(M_paths: Sequence[ScalarPath], W: VectorPath,
                            window: int | None = None) -> CrossCovEstimate:
    """Estimate â_h(t) = d[Mh, W e_n]/dt by boxcar-smoothed realized covariation."""
    grid = W.grid
    w = default_window(grid.K) if window is None else int(window)
    if w < 1:
        raise ValueError("window must be at least one cell")
    if w > grid.K:
        raise WindowTooLarge(f"window {w} exceeds the {grid.K} grid cells")
    for p in M_paths:
        if p.grid != grid:
            raise DimensionMismatch("M paths and W must share the grid")
    dM = np.stack([p.increments() for p in M_paths], axis=1)  # (K, m)
    dW = W.increments()  # (K, d)
    cross = _boxcar(dM[:, :, None] * dW[:, None, :], w) / grid.dt
    fh = _boxcar(dM * dM, w) / grid.dt
    fn = _boxcar(dW * dW, w) / grid.dt
    denom = np.sqrt(fh[:, :, None] * fn[:, None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(denom > 0, np.abs(cross) / denom, 0.0)
    excess = np.abs(cross) - np.sqrt(fh)[:, :, None]
    return CrossCovEstimate(cross, w, float(ratio.max()), float(excess.max()))
