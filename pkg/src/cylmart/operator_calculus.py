"""Finite-dimensional Borel functional calculus for symmetric PSD matrices.

Matrices are plain ``numpy`` arrays. :class:`SymmetricPSD` validates and
caches the spectral decomposition, which is the primary route for every
function of a matrix; the resolvent helpers solve linear systems directly
and serve as an independent cross-check.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BandDepthInsufficient,
    DimensionMismatch,
    FunctionUnboundedOnSpectrum,
    LinearlyDependentBasis,
    NotSymmetricPSD,
)

TOL_SYM = 1e-10
TOL_EIG = 1e-10
KERNEL_THRESHOLD = 1e-12
RANK_TOL = 1e-10
DROP_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # nonincreasing
    eigenvectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def _spectral_stack(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a stack (..., d, d); eigenvalues nonincreasing, negatives clamped."""
    lam, q = np.linalg.eigh(S)
    lam = lam[..., ::-1]
    q = q[..., ::-1]
    return np.maximum(lam, 0.0), q


@dataclass(frozen=True)
class SymmetricPSD:
    """A validated symmetric positive semidefinite matrix."""

    entries: np.ndarray

    def __post_init__(self):
        S = np.array(self.entries, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise NotSymmetricPSD(f"expected a nonempty square matrix, got shape {S.shape}")
        if not np.all(np.isfinite(S)):
            raise NotSymmetricPSD("matrix has non-finite entries")
        asym = np.max(np.abs(S - S.T))
        if asym > TOL_SYM:
            raise NotSymmetricPSD(f"asymmetry {asym:.3g} exceeds {TOL_SYM}")
        S = 0.5 * (S + S.T)
        S.setflags(write=False)
        object.__setattr__(self, "entries", S)
        lam_min = np.linalg.eigvalsh(S)[0]
        if lam_min < -TOL_EIG:
            raise NotSymmetricPSD(f"smallest eigenvalue {lam_min:.3g} below -{TOL_EIG}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectral(self) -> SpectralDecomposition:
        lam, q = _spectral_stack(self.entries)
        return SpectralDecomposition(lam, q)

    @classmethod
    def gram(cls, A: np.ndarray) -> "SymmetricPSD":
        """``AᵀA`` for a rectangular ``A``."""
        A = np.asarray(A, dtype=float)
        return cls(A.T @ A)


def as_psd(S) -> SymmetricPSD:
    return S if isinstance(S, SymmetricPSD) else SymmetricPSD(S)


def _apply_scalar(g: Callable, lam: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(g(lam), dtype=float)
        if out.shape != lam.shape:
            raise ValueError
    except (TypeError, ValueError):
        out = np.array([float(g(float(x))) for x in lam.ravel()]).reshape(lam.shape)
    return out


def borel_calc(g: Callable, S) -> np.ndarray:
    """Return ``g(S) = Q diag(g(λ)) Qᵀ``.

    ``g`` may be vectorised or scalar. Its values on the computed spectrum
    must be finite, otherwise :class:`FunctionUnboundedOnSpectrum` is raised.
    """
    S = as_psd(S)
    sd = S.spectral
    vals = _apply_scalar(g, sd.eigenvalues)
    if not np.all(np.isfinite(vals)):
        raise FunctionUnboundedOnSpectrum(
            f"g is not finite on the spectrum {sd.eigenvalues.tolist()}")
    q = sd.eigenvectors
    return (q * vals) @ q.T


def kernel_indicator(eps0: float = KERNEL_THRESHOLD) -> Callable:
    """Indicator of {0}, read through the threshold ``eps0``."""
    return lambda t: (np.abs(np.asarray(t, dtype=float)) <= eps0).astype(float)


@dataclass(frozen=True)
class BandSystem:
    """Dyadic bands B1=(1,∞), Bn=(2^-(n-1), 2^-(n-2)] plus the kernel {λ ≤ eps0}."""

    num_bands: int
    kernel_threshold: float = KERNEL_THRESHOLD
    bands: tuple = field(init=False)

    def __post_init__(self):
        if self.num_bands < 1:
            raise ValueError("band depth must be >= 1")
        b = [(1.0, math.inf)]
        b += [(2.0 ** -(n - 1), 2.0 ** -(n - 2)) for n in range(2, self.num_bands + 1)]
        object.__setattr__(self, "bands", tuple(b))

    @property
    def floor(self) -> float:
        """Lower edge of the smallest band; eigenvalues in (eps0, floor] are uncovered."""
        return self.bands[-1][0]

    def labels(self, lam: np.ndarray) -> np.ndarray:
        """Band index per eigenvalue: 0 for kernel, n for B_n, -1 when uncovered."""
        lam = np.asarray(lam, dtype=float)
        out = np.full(lam.shape, -1, dtype=int)
        out[lam <= self.kernel_threshold] = 0
        for n, (lo, hi) in enumerate(self.bands, start=1):
            out[(lam > lo) & (lam <= hi)] = n
        return out

    def check(self, lam: np.ndarray) -> np.ndarray:
        lab = self.labels(lam)
        if np.any(lab < 0):
            bad = np.asarray(lam)[lab < 0]
            raise BandDepthInsufficient(
                f"eigenvalues {np.unique(bad)[:5].tolist()} lie in "
                f"({self.kernel_threshold}, {self.floor}]; increase depth beyond {self.num_bands}")
        return lab

    def indicator(self, n: int) -> Callable:
        if n == 0:
            return kernel_indicator(self.kernel_threshold)
        lo, hi = self.bands[n - 1]
        return lambda t: ((np.asarray(t) > lo) & (np.asarray(t) <= hi)).astype(float)

    def psi(self, n: int) -> Callable:
        """ψ_n(t) = t⁻¹ 1_{B_n}(t) for n ≥ 1; ψ_0 is the kernel indicator."""
        if n == 0:
            return self.indicator(0)
        ind = self.indicator(n)

        def f(t):
            t = np.asarray(t, dtype=float)
            m = ind(t)
            return np.divide(m, t, out=np.zeros_like(t), where=m > 0)
        return f


def band_system(S, depth: int, eps0: float = KERNEL_THRESHOLD) -> BandSystem:
    bs = BandSystem(depth, eps0)
    bs.check(as_psd(S).spectral.eigenvalues)
    return bs


@dataclass(frozen=True)
class BandFunctions:
    psi: list  # ψ_n(S), n = 1..N_b
    C: list  # C_n(S) = 1_{B_n}(S)
    psi0: np.ndarray


def band_functions(S, bs: BandSystem) -> BandFunctions:
    S = as_psd(S)
    bs.check(S.spectral.eigenvalues)
    psi = [borel_calc(bs.psi(n), S) for n in range(1, bs.num_bands + 1)]
    C = [borel_calc(bs.indicator(n), S) for n in range(1, bs.num_bands + 1)]
    return BandFunctions(psi, C, borel_calc(bs.indicator(0), S))


def band_operators_stack(S: np.ndarray, bs: BandSystem) -> tuple[np.ndarray, np.ndarray]:
    """Batched ψ_n and ψ_0 for a stack of PSD matrices of shape (K, d, d).

    Returns ``psi`` of shape (K, N_b, d, d) and ``psi0`` of shape (K, d, d).
    Same spectral route as :func:`band_functions`, without per-matrix overhead.
    """
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    lam, q = _spectral_stack(S)
    lab = bs.check(lam)
    inv = np.divide(1.0, lam, out=np.zeros_like(lam), where=lam > 0)
    K, d = lam.shape
    psi = np.empty((K, bs.num_bands, d, d))
    for n in range(1, bs.num_bands + 1):
        w = np.where(lab == n, inv, 0.0)
        psi[:, n - 1] = np.einsum("kij,kj,klj->kil", q, w, q)
    w0 = (lab == 0).astype(float)
    psi0 = np.einsum("kij,kj,klj->kil", q, w0, q)
    return psi, psi0


def gram_schmidt_left_inverse(F: np.ndarray, basis_X0: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Projection onto ``F(X0)`` and a left-inverse ``L`` with range in ``X0``.

    The image vectors ``F x_j`` are orthonormalised by modified Gram-Schmidt
    (two passes). Images whose residual is numerically zero are dropped. Each
    kept ``g_i`` is tracked as a combination ``Σ_j c_ij F x_j`` so that
    ``L = Σ_i (Σ_j c_ij x_j) g_iᵀ`` satisfies ``F L = P̃``.
    """
    F = np.asarray(F, dtype=float)
    X = np.atleast_2d(np.asarray(basis_X0, dtype=float))
    if X.shape[1] != F.shape[1]:
        raise DimensionMismatch(f"basis vectors have length {X.shape[1]}, F has {F.shape[1]} columns")
    k = X.shape[0]
    if np.linalg.matrix_rank(X, tol=RANK_TOL) < k:
        raise LinearlyDependentBasis("basis of X0 is linearly dependent")
    V = X @ F.T  # row j is F x_j
    scale = max(1.0, float(np.max(np.linalg.norm(V, axis=1))) if k else 1.0)
    gs, coefs = [], []
    for j in range(k):
        r = V[j].copy()
        c = np.zeros(k)
        c[j] = 1.0
        for _ in range(2):
            for g, cg in zip(gs, coefs):
                p = r @ g
                r -= p * g
                c -= p * cg
        nrm = np.linalg.norm(r)
        if nrm < DROP_TOL * scale:
            continue
        gs.append(r / nrm)
        coefs.append(c / nrm)
    m = F.shape[0]
    if not gs:
        return np.zeros((m, m)), np.zeros((F.shape[1], m))
    G = np.array(gs)  # (r, m)
    Cm = np.array(coefs)  # (r, k)
    P = G.T @ G
    L = (Cm @ X).T @ G  # (p, m)
    return P, L


def resolvent_oracle(S) -> np.ndarray:
    """``(I + S²)⁻¹`` by a direct solve, i.e. ``(i+S)⁻¹(S-i)⁻¹`` in real form."""
    S = as_psd(S).entries
    eye = np.eye(S.shape[0])
    return np.linalg.solve(eye + S @ S, eye)


def resolvent_truncation_convergence(A: np.ndarray, k: int) -> np.ndarray:
    """``(I + A_kᵀ A_k)⁻¹`` with ``A_k`` the first ``k`` rows of ``A`` (others zeroed)."""
    A = np.asarray(A, dtype=float)
    if not 1 <= k <= A.shape[0]:
        raise ValueError(f"k must lie in [1, {A.shape[0]}], got {k}")
    Ak = A.copy()
    Ak[k:] = 0.0
    eye = np.eye(A.shape[1])
    return np.linalg.solve(eye + Ak.T @ Ak, eye)


def matrix_to_csv(A: np.ndarray) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    buf = io.StringIO()
    buf.write(f"{A.shape[0]},{A.shape[1]}\n")
    for row in A:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    rows, cols = (int(x) for x in lines[0].split(","))
    A = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    if A.shape != (rows, cols):
        raise DimensionMismatch(f"header says {rows}x{cols}, body is {A.shape}")
    return A
