import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylmart.errors import (
    BandDepthInsufficient,
    FunctionUnboundedOnSpectrum,
    LinearlyDependentBasis,
    NotSymmetricPSD,
)
from cylmart.operator_calculus import (
    BandSystem,
    SymmetricPSD,
    band_functions,
    band_system,
    borel_calc,
    gram_schmidt_left_inverse,
    kernel_indicator,
    matrix_from_csv,
    matrix_to_csv,
    resolvent_oracle,
    resolvent_truncation_convergence,
)


def random_psd(rng, d, lo=0.0, hi=4.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(lo, hi, d)
    return (q * lam) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


class TestSymmetricPSD:
    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricPSD):
            SymmetricPSD([[1.0, 1e-6], [0.0, 1.0]])

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(NotSymmetricPSD):
            SymmetricPSD(np.diag([1.0, -1e-6]))

    def test_clamps_tiny_negative(self):
        S = SymmetricPSD(np.diag([1.0, -1e-12]))
        assert S.spectral.eigenvalues.min() == 0.0

    def test_spectral_reconstructs(self, rng):
        A = random_psd(rng, 5)
        sd = SymmetricPSD(A).spectral
        assert np.linalg.norm(sd.reconstruct() - A) <= 1e-9 * np.linalg.norm(A)
        q = sd.eigenvectors
        assert np.allclose(q.T @ q, np.eye(5), atol=1e-10)
        assert np.all(np.diff(sd.eigenvalues) <= 0)


class TestBorelCalc:
    def test_kernel_indicator(self):
        out = borel_calc(kernel_indicator(), np.diag([0.0, 3.0]))
        np.testing.assert_allclose(out, np.diag([1.0, 0.0]), atol=1e-15)

    def test_identity_function(self, rng):
        S = random_psd(rng, 4)
        assert np.linalg.norm(borel_calc(lambda t: t, S) - S) <= 1e-9

    def test_square_root_squares_back(self, rng):
        S = random_psd(rng, 3)
        R = borel_calc(np.sqrt, S)
        # oracle: explicit eigendecomposition, independently assembled
        lam, q = np.linalg.eigh(S)
        R2 = q @ np.diag(np.sqrt(np.clip(lam, 0, None))) @ q.T
        np.testing.assert_allclose(R, R2, atol=1e-10)
        np.testing.assert_allclose(R @ R, S, atol=1e-8)

    def test_scalar_callable_accepted(self):
        out = borel_calc(lambda t: 2.0 * t if isinstance(t, float) else float("nan"), np.diag([1.0, 2.0]))
        np.testing.assert_allclose(out, np.diag([2.0, 4.0]))

    def test_unbounded_raises(self):
        with pytest.raises(FunctionUnboundedOnSpectrum):
            borel_calc(lambda t: 1.0 / t, np.diag([0.0, 1.0]))

    def test_deterministic(self, rng):
        S = random_psd(rng, 4)
        assert np.array_equal(borel_calc(np.sqrt, S), borel_calc(np.sqrt, S))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6),
           which=st.sampled_from(["sin", "exp", "step", "cos"]))
    def test_norm_bounded_by_sup_on_spectrum(self, seed, d, which):
        g = {"sin": np.sin, "exp": lambda t: np.exp(-t), "cos": np.cos,
             "step": lambda t: (t > 1.0).astype(float)}[which]
        S = SymmetricPSD(random_psd(np.random.default_rng(seed), d))
        sup = np.max(np.abs(g(S.spectral.eigenvalues)))
        assert np.linalg.norm(borel_calc(g, S), 2) <= sup + 1e-9


class TestBands:
    def test_band_membership(self):
        bs = band_system(np.diag([3.0, 1.0, 0.0]), 2)
        assert bs.labels(np.array([3.0, 1.0, 0.0])).tolist() == [1, 2, 0]

    def test_identity_in_second_band(self):
        bs = band_system(np.eye(3), 2)
        assert bs.labels(np.ones(3)).tolist() == [2, 2, 2]

    def test_depth_insufficient(self):
        with pytest.raises(BandDepthInsufficient):
            band_system(np.diag([0.3]), 2)
        bs = band_system(np.diag([0.3]), 3)
        assert bs.bands[2] == (0.25, 0.5)

    def test_dyadic_shape(self):
        bs = BandSystem(4)
        assert bs.bands == ((1.0, np.inf), (0.5, 1.0), (0.25, 0.5), (0.125, 0.25))
        assert bs.floor == 0.125

    def test_half_open_boundary(self):
        # 1/2 belongs to B3 = (1/4, 1/2], not B2 = (1/2, 1]
        assert BandSystem(3).labels(np.array([0.5])).tolist() == [3]

    def test_band_functions_diag(self):
        bf = band_functions(np.diag([4.0, 0.0]), BandSystem(1))
        np.testing.assert_allclose(bf.psi[0], np.diag([0.25, 0.0]))
        np.testing.assert_allclose(bf.C[0], np.diag([1.0, 0.0]))
        np.testing.assert_allclose(bf.psi0, np.diag([0.0, 1.0]))

    def test_identity_has_no_kernel(self):
        bf = band_functions(np.eye(3), BandSystem(2))
        np.testing.assert_allclose(sum(bf.C), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(bf.psi0, 0.0, atol=1e-12)

    def test_completeness_against_scalar_oracle(self, rng):
        S = random_psd(rng, 4, lo=0.26, hi=8.0)
        bs = BandSystem(3)
        bf = band_functions(S, bs)
        # oracle: evaluate the band indicators on each eigenvalue separately
        lam, q = np.linalg.eigh(S)
        for n, (lo, hi) in enumerate(bs.bands, start=1):
            w = np.array([1.0 if lo < x <= hi else 0.0 for x in lam])
            np.testing.assert_allclose(bf.C[n - 1], q @ np.diag(w) @ q.T, atol=1e-9)
        np.testing.assert_allclose(bf.psi0 + sum(bf.C), np.eye(4), atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6), kernel=st.integers(0, 2))
    def test_band_identities(self, seed, d, kernel):
        r = np.random.default_rng(seed)
        q, _ = np.linalg.qr(r.standard_normal((d, d)))
        lam = r.uniform(0.13, 8.0, d)
        lam[: min(kernel, d)] = 0.0
        S = SymmetricPSD((q * lam) @ q.T)
        bf = band_functions(S, BandSystem(4))
        I = np.eye(d)
        assert np.max(np.abs(bf.psi0 + sum(bf.C) - I)) <= 1e-9
        for p, c in zip(bf.psi, bf.C):
            assert np.max(np.abs(S.entries @ p - c)) <= 1e-9
            assert np.max(np.abs(c @ S.entries @ p - c)) <= 1e-9
            assert np.linalg.norm(c, 2) <= 1 + 1e-9
        assert np.linalg.norm(bf.psi0, 2) <= 1 + 1e-9


class TestGramSchmidt:
    def test_identity(self):
        P, L = gram_schmidt_left_inverse(np.eye(2), [[1.0, 0.0]])
        e = np.outer([1, 0], [1, 0])
        np.testing.assert_allclose(P, e)
        np.testing.assert_allclose(L, e)

    def test_rank_deficient_image(self):
        F = np.array([[1.0, 0.0], [0.0, 0.0]])
        P, L = gram_schmidt_left_inverse(F, np.eye(2))
        np.testing.assert_allclose(P, np.outer([1, 0], [1, 0]), atol=1e-12)
        np.testing.assert_allclose(F @ L, P, atol=1e-12)

    def test_dependent_basis_rejected(self):
        with pytest.raises(LinearlyDependentBasis):
            gram_schmidt_left_inverse(np.eye(2), [[1.0, 1.0], [2.0, 2.0]])

    def test_full_rank_against_pinv(self, rng):
        F = rng.standard_normal((4, 3))
        P, L = gram_schmidt_left_inverse(F, np.eye(3))
        np.testing.assert_allclose(F @ L, P, atol=1e-9)
        # oracle: SVD pseudoinverse; F pinv(F) is the projection onto ran F
        np.testing.assert_allclose(P, F @ np.linalg.pinv(F), atol=1e-9)
        np.testing.assert_allclose(L, np.linalg.pinv(F), atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_projection_properties(self, seed):
        r = np.random.default_rng(seed)
        m, p = r.integers(2, 7), r.integers(1, 6)
        rank = r.integers(1, min(m, p) + 1)
        F = r.standard_normal((m, rank)) @ r.standard_normal((rank, p))
        k = r.integers(1, p + 1)
        X0 = r.standard_normal((k, p))
        P, L = gram_schmidt_left_inverse(F, X0)
        assert np.max(np.abs(P @ P - P)) <= 1e-9
        assert np.max(np.abs(P - P.T)) <= 1e-9
        assert np.max(np.abs(F @ L - P)) <= 1e-9
        u, s, _ = np.linalg.svd(F @ X0.T, full_matrices=False)
        ur = u[:, s > 1e-10 * max(1.0, s[0])]
        assert np.max(np.abs(P - ur @ ur.T)) <= 1e-9
        # range of L inside span(X0)
        coef, *_ = np.linalg.lstsq(X0.T, L, rcond=None)
        assert np.max(np.abs(X0.T @ coef - L)) <= 1e-9


class TestResolvent:
    def test_zero(self):
        np.testing.assert_array_equal(resolvent_oracle(np.zeros((3, 3))), np.eye(3))

    def test_diag(self):
        np.testing.assert_allclose(resolvent_oracle(np.diag([1.0, 2.0])), np.diag([0.5, 0.2]))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6))
    def test_matches_spectral_route(self, seed, d):
        S = random_psd(np.random.default_rng(seed), d, hi=10.0)
        spectral = borel_calc(lambda t: 1.0 / (1.0 + t * t), S)
        assert np.linalg.norm(resolvent_oracle(S) - spectral) <= 1e-9

    def test_truncation_full_equals_resolvent(self, rng):
        A = rng.standard_normal((4, 4))
        full = np.linalg.inv(np.eye(4) + A.T @ A)
        np.testing.assert_allclose(resolvent_truncation_convergence(A, 4), full, atol=1e-12)

    def test_truncation_diag(self):
        out = resolvent_truncation_convergence(np.diag([1.0, 3.0]), 1)
        np.testing.assert_allclose(out, np.diag([0.5, 1.0]))

    def test_truncation_gap_shrinks(self, rng):
        A = rng.standard_normal((6, 6))
        full = resolvent_truncation_convergence(A, 6)
        gap5 = np.max(np.abs(resolvent_truncation_convergence(A, 5) - full))
        gap2 = np.max(np.abs(resolvent_truncation_convergence(A, 2) - full))
        assert gap5 < gap2

    def test_truncation_bad_k(self):
        with pytest.raises(ValueError):
            resolvent_truncation_convergence(np.eye(2), 3)


def test_matrix_csv_roundtrip(rng):
    A = rng.standard_normal((3, 2))
    text = matrix_to_csv(A)
    assert text.splitlines()[0] == "3,2"
    assert np.array_equal(matrix_from_csv(text), A)
