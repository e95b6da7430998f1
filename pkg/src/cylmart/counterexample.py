"""A cylindrical martingale with absolutely continuous covariation that no
closed operator can generate, truncated to 2^N coordinates.

Ladder variables ξ_n are uniform on the dyadic blocks {2^(n-1), ..., 2^n - 1}
and independent; c_n = 2^(n/4). The random functional ℓ(h) = Σ_n c_n h[ξ_n]
is finite for every fixed h but Σ_i ℓ(e_i)² = Σ_n c_n² diverges with N.

Arrays indexed by coordinates have length 2^N; position k is basis vector
h_k, and position 0 is never hit by any ladder variable.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch
from .paths import ScalarPath, TimeGrid, brownian_increments
from .rng import RngSeed

ENUMERATION_MAX_N = 7


def ladder_constants(N: int) -> np.ndarray:
    return np.array([2.0 ** (n / 4) for n in range(1, N + 1)])


def block(n: int) -> range:
    return range(2 ** (n - 1), 2 ** n)


@dataclass(frozen=True)
class LadderSample:
    n_terms: int
    xi: np.ndarray  # int64, ξ_n for n = 1..N
    c: np.ndarray
    seed: RngSeed

    @property
    def dim(self) -> int:
        return 2 ** self.n_terms


def sample_ladder(N: int, seed: RngSeed) -> LadderSample:
    """Draw ξ_1..ξ_N; ξ_n uses its own stream so samples are nested in N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if N > 62:
        raise ValueError("N > 62 overflows 64-bit coordinate indices")
    xi = np.array([seed.generator(0x1ADD, n).integers(2 ** (n - 1), 2 ** n) for n in range(1, N + 1)],
                  dtype=np.int64)
    return LadderSample(N, xi, ladder_constants(N), seed)


def anchor_vector(N: int) -> np.ndarray:
    """a_k = 2^(-3n/4) for k in block n."""
    a = np.zeros(2 ** N)
    for n in range(1, N + 1):
        a[2 ** (n - 1): 2 ** n] = 2.0 ** (-3 * n / 4)
    return a


def anchor_norm_sq(N: int) -> float:
    return 0.5 * sum(2.0 ** (-n / 2) for n in range(1, N + 1))


def ell(sample: LadderSample, h) -> float:
    """ℓ(h) = Σ_n c_n h[ξ_n]; coordinates beyond ``len(h)`` count as zero."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size > sample.dim:
        raise DimensionMismatch(f"h must be a vector of length <= {sample.dim}")
    total = 0.0
    for cn, k in zip(sample.c, sample.xi):
        if k < h.size:
            total += cn * h[k]
    return float(total)


def basis_densities(sample: LadderSample) -> dict:
    """Sparse map i -> ℓ(e_i)² over the coordinates actually hit."""
    out: dict = {}
    for cn, k in zip(sample.c, sample.xi):
        v = out.get(int(k), 0.0) + cn
        out[int(k)] = v
    return {k: v * v for k, v in sorted(out.items())}


def unboundedness_certificate(sample: LadderSample) -> float:
    """Σ_i ℓ(e_i)² over all 2^N coordinates."""
    return float(sum(basis_densities(sample).values()))


def certificate_closed_form(N: int) -> float:
    return float(sum(2.0 ** (n / 2) for n in range(1, N + 1)))


def certificate_threshold(B: float) -> int:
    """Smallest N with Σ_{n≤N} 2^(n/2) > B."""
    r = math.sqrt(2.0)
    N = max(1, math.ceil(2 * math.log2(B * (r - 1) / r + 1)))
    while certificate_closed_form(N) <= B:
        N += 1
    while N > 1 and certificate_closed_form(N - 1) > B:
        N -= 1
    return N


class Enumeration(NamedTuple):
    first_moment: float  # E Σ_n c_n |h[ξ_n]|
    second_moment: float  # E (Σ_n c_n |h[ξ_n]|)²
    n_outcomes: int


def enumerate_majorant(h, N: int) -> Enumeration:
    """Exact moments of ℓ(|h|) by summing over every ξ outcome (N ≤ 7)."""
    if N > ENUMERATION_MAX_N:
        raise ValueError(f"exhaustive enumeration is capped at N={ENUMERATION_MAX_N}")
    ht = np.zeros(2 ** N)
    h = np.abs(np.asarray(h, dtype=float))
    ht[: h.size] = h
    c = ladder_constants(N)
    total = np.zeros(())
    for n in range(1, N + 1):
        term = c[n - 1] * ht[2 ** (n - 1): 2 ** n]
        total = total[..., None] + term.reshape((1,) * total.ndim + term.shape)
    flat = total.ravel()
    return Enumeration(float(flat.mean()), float(np.mean(flat * flat)), int(flat.size))


def majorant_moments_closed_form(h, N: int) -> tuple[float, float]:
    """First and second moments of ℓ(|h|) from block means.

    With u_n = c_n mean_{k∈B_n}|h_k| = 2^(1-3n/4) Σ_{k∈B_n} |h_k|, the first
    moment is Σ u_n = 2⟨|h|, a⟩ and the second is Σ_n c_n² mean(|h_k|²) + Σ_{n≠m} u_n u_m.
    """
    ht = np.zeros(2 ** N)
    h = np.abs(np.asarray(h, dtype=float))
    ht[: h.size] = h
    c = ladder_constants(N)
    u = np.array([c[n - 1] * ht[block(n).start: block(n).stop].mean() for n in range(1, N + 1)])
    sq = np.array([c[n - 1] ** 2 * np.mean(ht[block(n).start: block(n).stop] ** 2) for n in range(1, N + 1)])
    first = float(u.sum())
    second = float(sq.sum() + first ** 2 - np.sum(u * u))
    return first, second


class L2Check(NamedTuple):
    estimate: float
    stderr: float
    bound: float  # (√2 + 4‖a‖²)‖h‖², valid at every N
    stated_bound: float  # (1 + ‖a‖²/4)‖h‖²
    exact: float | None  # enumeration value when N ≤ 7


def l2_bound_check(N: int, h, trials: int, seed: RngSeed) -> L2Check:
    """Monte Carlo E[ℓ(|h|)²] over fresh ladders, with both bounds."""
    h = np.asarray(h, dtype=float)
    ht = np.abs(h)
    vals = np.array([ell(sample_ladder(N, seed.child(i)), ht) ** 2 for i in range(trials)])
    a2 = anchor_norm_sq(N)
    hn = float(h @ h)
    exact = enumerate_majorant(ht, N).second_moment if N <= ENUMERATION_MAX_N else None
    se = float(vals.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return L2Check(float(vals.mean()), se, (math.sqrt(2) + 4 * a2) * hn, (1 + a2 / 4) * hn, exact)


def counterexample_driver(grid: TimeGrid, seed: RngSeed) -> np.ndarray:
    """Scalar Brownian increments shared by every M(h) built from ``seed``."""
    return brownian_increments(grid, seed, 1)[:, 0]


def simulate_counterexample_M(sample: LadderSample, h, grid: TimeGrid, seed: RngSeed) -> ScalarPath:
    """M_t(h) = ∫_0^t 1_[1,2](s) ℓ(h) dW_s on a grid that contains 1 and 2."""
    k1, k2 = grid.index_of(1.0), grid.index_of(2.0)
    dW = counterexample_driver(grid, seed)
    inc = np.zeros(grid.K)
    inc[k1:k2] = ell(sample, h) * dW[k1:k2]
    return ScalarPath.from_increments(grid, inc)


@dataclass
class RankOneReport:
    d: int
    trace: float
    fit: float  # top eigenvalue kept by the best rank-one fit
    residual: float  # trace - fit (nuclear-norm residual)
    frobenius_residual: float


def rank_one_falsification(sample: LadderSample, d: int | None = None) -> RankOneReport:
    """Best rank-one fit to the diagonal density matrix diag(ℓ(e_i)², i < d).

    The dominant eigenpair of a nonnegative diagonal matrix is its largest
    entry, so the fit keeps one coordinate and the residual is the rest.
    """
    d = sample.dim if d is None else int(d)
    if d > sample.dim:
        raise DimensionMismatch(f"d must be <= 2^N = {sample.dim}")
    dens = np.array([v for k, v in basis_densities(sample).items() if k < d])
    if dens.size == 0:
        return RankOneReport(d, 0.0, 0.0, 0.0, 0.0)
    top = float(dens.max())
    tr = float(dens.sum())
    frob = math.sqrt(max(0.0, float(np.sum(dens ** 2)) - top ** 2))
    return RankOneReport(d, tr, top, tr - top, frob)


def fixture_json(N: int, seed: RngSeed, certificate: float, bound: float, estimate: float) -> str:
    return json.dumps({"N": N, "seed": seed.seed, "certificate": certificate,
                       "bound": bound, "estimate": estimate})


def brute_force_outcomes(N: int):
    """Iterator over all ξ outcomes (tuples), for small-N tests."""
    return itertools.product(*[block(n) for n in range(1, N + 1)])
