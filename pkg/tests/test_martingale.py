import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylmart.errors import DimensionMismatch
from cylmart.martingale import (
    CylModel,
    compose_martingale,
    covariation_identity_check,
    eval_M,
    inttheory_limit_check,
    integrate_vs_M,
    piecewise_constant,
)
from cylmart.paths import ElementaryProcess, TimeGrid, realized_qv
from cylmart.rng import RngSeed

GRID = TimeGrid(1.0, 10_000)


def models(G, n, seed=1, grid=GRID):
    return [CylModel.simulate(G, grid, RngSeed(seed).child(i)) for i in range(n)]


class TestEvalM:
    def test_zero_operator(self):
        m = CylModel.simulate(np.zeros((2, 2)), TimeGrid(1.0, 100), RngSeed(0))
        assert np.all(eval_M(m, [1.0, -2.0]).values == 0.0)

    def test_identity_is_first_coordinate(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 100), RngSeed(0))
        assert np.array_equal(eval_M(m, [1.0, 0.0]).values, m.W.values[:, 0])

    def test_scaled_coordinate_qv(self):
        ms = models(np.diag([2.0, 0.0]), 1000, seed=2)
        vals = []
        for m in ms:
            p = eval_M(m, [1.0, 0.0])
            np.testing.assert_array_equal(p.increments(), 2.0 * m.W.increments()[:, 0])
            vals.append(realized_qv(p).values[-1])
        assert np.mean(np.abs(np.array(vals) - 4.0) <= 0.2) >= 0.95

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
    def test_linearity(self, seed, a, b):
        r = np.random.default_rng(seed)
        m = CylModel.simulate(r.standard_normal((3, 2)), TimeGrid(1.0, 100), RngSeed(seed))
        x, y = r.standard_normal(3), r.standard_normal(3)
        lhs = eval_M(m, a * x + b * y).values
        rhs = a * eval_M(m, x).values + b * eval_M(m, y).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)))

    @pytest.mark.parametrize("k", [0, 17, 50, 100])
    def test_stopping_consistency(self, k):
        g = TimeGrid(1.0, 100)
        G = lambda t: np.array([[1 + t, 0.5], [0.0, np.cos(3 * t)]])
        m = CylModel.simulate(G, g, RngSeed(3))
        x = np.array([0.3, -1.2])
        np.testing.assert_array_equal(eval_M(m.stopped(k), x).values, eval_M(m, x).stopped(k).values)

    def test_shape_checked(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 10), RngSeed(0))
        with pytest.raises(DimensionMismatch):
            eval_M(m, [1.0, 0.0, 0.0])

    def test_per_cell_and_constant_agree(self):
        g = TimeGrid(1.0, 50)
        G = np.array([[1.0, 2.0], [0.0, -1.0], [0.5, 0.5]])
        a = CylModel.simulate(G, g, RngSeed(4))
        b = CylModel.simulate(np.repeat(G[None], g.K, axis=0), g, RngSeed(4))
        assert not b.constant
        np.testing.assert_allclose(eval_M(a, [1, 2, 3]).values, eval_M(b, [1, 2, 3]).values, atol=1e-12)

    def test_operator_norms(self):
        m = CylModel.simulate(np.diag([3.0, 1.0]), TimeGrid(1.0, 5), RngSeed(0))
        np.testing.assert_allclose(m.operator_norms(), 3.0)


class TestCovariationIdentity:
    def test_zero(self):
        m = CylModel.simulate(np.zeros((2, 2)), TimeGrid(1.0, 100), RngSeed(0))
        assert covariation_identity_check(m, [1, 0], [0, 1]).sup_gap == 0.0

    def test_orthogonal_functionals(self):
        # Gᵀe1 = (1, 0), Gᵀe2 = (0, 1): rhs vanishes and lhs has mean zero
        lhs = []
        for m in models(np.eye(2), 1000, seed=5, grid=TimeGrid(1.0, 1000)):
            chk = covariation_identity_check(m, [1.0, 0.0], [0.0, 1.0])
            assert np.all(chk.rhs.values == 0.0)
            lhs.append(chk.lhs.values[-1])
        lhs = np.array(lhs)
        assert abs(lhs.mean()) <= 4 * lhs.std(ddof=1) / np.sqrt(lhs.size)

    def test_polarization_consistency(self):
        m = CylModel.simulate(np.array([[1.0, 0.3], [0.2, 2.0]]), TimeGrid(1.0, 200), RngSeed(6))
        x, y = np.array([1.0, -1.0]), np.array([0.5, 2.0])
        chk = covariation_identity_check(m, x, y)
        direct = np.concatenate([[0.0], np.cumsum(eval_M(m, x).increments() * eval_M(m, y).increments())])
        np.testing.assert_array_equal(chk.lhs.values, direct)

    def test_gap_scales_like_root_dt(self):
        # oracle: Var(Σ ΔW² - T) = 2 T dt for xstar = ystar = e1, G = I
        rms = {}
        for K in (5000, 10_000):
            g = TimeGrid(1.0, K)
            gaps = [covariation_identity_check(m, [1, 0], [1, 0]).lhs.values[-1] - 1.0
                    for m in models(np.eye(2), 1000, seed=7, grid=g)]
            rms[K] = np.sqrt(np.mean(np.square(gaps)))
            assert rms[K] <= 2 * np.sqrt(2.0 / K)
        assert rms[5000] / rms[10_000] == pytest.approx(np.sqrt(2), rel=0.2)


class TestIntegration:
    def test_coordinate_integrand(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 100), RngSeed(0))
        np.testing.assert_array_equal(integrate_vs_M(m, [1.0, 0.0]).values, eval_M(m, [1.0, 0.0]).values)

    def test_zero_integrand(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 100), RngSeed(0))
        assert np.all(integrate_vs_M(m, np.zeros(2)).values == 0.0)

    def test_unit_norm_integrand_qv(self):
        f = lambda t: np.array([np.cos(t), np.sin(t)])
        vals = np.array([realized_qv(integrate_vs_M(m, f)).values[-1] for m in models(np.eye(2), 1000, seed=8)])
        assert np.mean(np.abs(vals - 1.0) <= 0.05) >= 0.95


class TestCompose:
    def test_identity(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 100), RngSeed(0))
        chk = compose_martingale(m, np.eye(2), [1.0, 2.0])
        assert chk.sup_gap == 0.0

    def test_zero(self):
        m = CylModel.simulate(np.eye(2), TimeGrid(1.0, 100), RngSeed(0))
        chk = compose_martingale(m, np.zeros((2, 2)), [1.0, 2.0])
        assert np.all(chk.lhs.values == 0.0) and np.all(chk.rhs.values == 0.0)

    @pytest.mark.parametrize("trial", range(10))
    def test_random_algebra(self, trial):
        r = np.random.default_rng(trial)
        g = TimeGrid(1.0, 500)
        Psi = r.standard_normal((g.K, 3, 3))
        phi = r.standard_normal((g.K, 3))
        m = CylModel.simulate(r.standard_normal((g.K, 3, 2)), g, RngSeed(trial))
        assert compose_martingale(m, Psi, phi).sup_gap <= 1e-9


class TestLimit:
    def test_exact_approximant(self):
        g = TimeGrid(1.0, 1000)
        f = ElementaryProcess.deterministic([0.0, 0.5, 1.0], [[1.0, 0.0], [0.0, 2.0]])
        arr = np.where(g.times[:-1, None] < 0.5, [1.0, 0.0], [0.0, 2.0])
        ms = models(np.eye(2), 20, grid=g)
        assert inttheory_limit_check(ms, [arr, arr], arr).distances == [0.0, 0.0]
        # telescoped step integral vs cumulative grid sum: same value, other summation order
        assert max(inttheory_limit_check(ms, [f, f], arr).distances) <= 1e-12

    def test_refinements_converge(self):
        g = TimeGrid(1.0, 1024)
        f = lambda t: np.array([np.cos(3 * t), np.sin(3 * t)])
        approx = [piecewise_constant(f, 1.0, p) for p in (2, 8, 32, 128)]
        rep = inttheory_limit_check(models(np.eye(2), 200, seed=9, grid=g), approx, f)
        assert rep.monotone
        assert rep.qv_gaps[-1] <= 0.05 * rep.qv_target

    def test_perturbation_rate(self):
        # f_n = f + e1/n: E[qv gap] = E|2⟨f,e1⟩/n + 1/n²| T-integrated, i.e. O(1/n)
        g = TimeGrid(1.0, 1000)
        f = lambda t: np.array([1.0, 0.0])
        approx = [lambda t, n=n: f(t) + np.array([1.0 / n, 0.0]) for n in (4, 8, 16, 32)]
        arrs = [np.array([a(t) for t in g.times[:-1]]) for a in approx]
        rep = inttheory_limit_check(models(np.eye(2), 300, seed=10, grid=g), arrs, f)
        scaled = [gap * n for gap, n in zip(rep.qv_gaps, (4, 8, 16, 32))]
        assert max(scaled) <= 3.0
        assert rep.monotone


def test_json_roundtrip():
    g = TimeGrid(1.0, 30)
    for G in (np.array([[1.0, 0.5], [0.0, 2.0]]), np.random.default_rng(0).standard_normal((30, 2, 3))):
        m = CylModel.simulate(G, g, RngSeed(12, 3))
        back = CylModel.from_json(m.to_json())
        assert np.array_equal(back.G, m.G)
        assert np.array_equal(back.W.values, m.W.values)
        assert back.to_json() == m.to_json()
