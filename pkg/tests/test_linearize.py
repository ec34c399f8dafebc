import numpy as np
import pytest

from fhdyn.errors import (
    NoConvergence,
    NotAttracting,
    SmallDivisorError,
)
from fhdyn.fourier import TrigPoly, grid_points
from fhdyn.linearize import (
    FormalConjugacy,
    conjugacy_residual,
    koenigs_linearize,
    modulus_rescale,
    siegel_formal_linearize,
)
from fhdyn.maps import FiberedMap

from conftest import GOLDEN


def map_from_grid(values_c1, extra=(), radius=0.2, alpha=GOLDEN):
    c1 = TrigPoly.fit_grid(values_c1, realflag=bool(np.isrealobj(values_c1)))
    coeffs = [c1, *(TrigPoly.constant(c) for c in extra)]
    return FiberedMap([alpha], coeffs, radius)


class TestModulusRescale:
    def test_constant_modulus_is_identity(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(0.5)], 0.5)
        G, data = modulus_rescale(F, 0.05)
        assert data.identity
        assert G is F

    def test_oscillating_attracting(self):
        t = np.arange(2048) / 2048
        F = map_from_grid(0.5 * np.exp(np.cos(2 * np.pi * t)), radius=0.1)
        G, data = modulus_rescale(F, 0.05)
        mods = np.abs(G.coeffs[0].values_on_grid(4096))
        kappa = data.kappa
        assert kappa == pytest.approx(0.5, abs=1e-9)
        # grid-sup oracle after conjugation
        assert np.max(np.abs(mods - 0.5)) < 0.05
        assert np.max(mods) < (kappa + np.sqrt(kappa)) / 2.0

    def test_indifferent_reduction(self):
        t = np.arange(2048) / 2048
        F = map_from_grid(np.exp(0.3 * np.cos(2 * np.pi * t)), radius=0.1)
        G, data = modulus_rescale(F, 0.01)
        mods = np.abs(G.coeffs[0].values_on_grid(4096))
        assert np.max(np.abs(mods - 1.0)) < 0.01

    def test_resonant_small_divisor(self):
        # kappa = 1 with log|c1| concentrated at a nearly resonant mode
        alpha = 1.0 / 3.0 + 1e-12
        t = np.arange(1024) / 1024
        F = map_from_grid(
            np.exp(0.2 * np.cos(2 * np.pi * 3 * t)), radius=0.1, alpha=alpha
        )
        with pytest.raises(SmallDivisorError):
            modulus_rescale(F, 0.01)


class TestKoenigs:
    def test_linear_map_gives_identity(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(0.5)], 0.5)
        conj = koenigs_linearize(F, 0.1, tol=1e-12, max_n=64)
        circle = 0.1 * np.exp(2j * np.pi * np.arange(conj.z_nodes) / conj.z_nodes)
        assert np.max(np.abs(conj.samples - circle[None, :])) < 1e-14
        assert conj.step_residual_max < 1e-14

    def test_quadratic_acceptance_pair(self):
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(0.5), TrigPoly.constant(1.0)], 0.2
        )
        conj = koenigs_linearize(F, 0.1, tol=1e-10, max_n=256)
        # normalization invariant at every node
        assert conj.sup_origin < 1e-9
        assert conj.sup_unit_deriv < 1e-9
        # per-step chain identity
        assert conj.step_residual_max < 1e-10
        # residual oracle computed independently of conjugacy_residual
        thetas = grid_points(256, 1)
        circle = 0.1 * np.exp(2j * np.pi * np.arange(64) / 64)
        TH = np.broadcast_to(thetas[:, None], (256, 64))
        ZZ = np.broadcast_to(circle, (256, 64))
        fz = F.fiber(thetas[:, None], ZZ)
        lhs = conj.evaluate(np.mod(TH + GOLDEN, 1.0).ravel(), fz.ravel())
        rhs = (
            conj.rho1.evaluate(thetas)[:, None]
            * conj.evaluate(TH.ravel(), ZZ.ravel()).reshape(256, 64)
        )
        oracle = float(np.max(np.abs(lhs.reshape(256, 64) - rhs)))
        assert oracle < 1e-8
        assert conjugacy_residual(F, conj) == pytest.approx(oracle, rel=1e-6)

    def test_indifferent_rejected(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(np.exp(0.4j))], 0.3)
        with pytest.raises(NotAttracting):
            koenigs_linearize(F, 0.1)

    def test_budget_exhaustion_reports_delta(self):
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(0.9), TrigPoly.constant(0.4)], 0.2
        )
        with pytest.raises(NoConvergence) as err:
            koenigs_linearize(F, 0.1, tol=1e-14, max_n=3)
        assert err.value.achieved is not None

    def test_monotone_contraction(self):
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(0.5), TrigPoly.constant(1.0)], 0.2
        )
        c = float(np.max(np.abs(F.coeffs[0].values_on_grid(512)))) + 0.1 * 1.0
        rng = np.random.default_rng(50)
        for _ in range(20):
            theta = float(rng.random())
            z = 0.1 * np.exp(2j * np.pi * rng.random())
            _, zs, escape = F.orbit_segment(theta, z, 12, tube_radius=0.2)
            assert escape is None
            bound = np.abs(z) * c ** np.arange(len(zs))
            assert np.all(np.abs(zs) <= bound + 1e-12)


def classical_coefficients(lam, order):
    h = {1: 1.0 + 0j}
    for k in range(2, order + 1):
        s = sum(h[i] * h[k - i] for i in range(1, k) if i in h and (k - i) in h)
        h[k] = s / (lam**k - lam)
    return h


class TestSiegelFormal:
    def test_linear_map_all_orders_vanish(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(np.exp(2j * np.pi * 0.3))], 0.3)
        conj = siegel_formal_linearize(F, 6)
        assert all(conj.coeffs[k].n_modes == 0 for k in range(2, 7))

    def test_matches_classical_recursion(self):
        lam = np.exp(2j * np.pi * GOLDEN)
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.3
        )
        conj = siegel_formal_linearize(F, 10)
        oracle = classical_coefficients(lam, 10)
        for k in range(2, 11):
            got = conj.coeffs[k].mean
            assert abs(got - oracle[k]) <= 1e-9 * abs(oracle[k])
            assert conj.order_residuals[k] < 1e-9 * max(conj.coeffs[k].mass(), 1.0)

    def test_rational_multiplier_resonates_at_q_plus_one(self):
        lam = np.exp(2j * np.pi / 3.0)
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.3
        )
        with pytest.raises(SmallDivisorError) as err:
            siegel_formal_linearize(F, 10)
        mode, j = err.value.witness
        assert mode == (0,)
        assert j == 3  # order q + 1 resonates through j = k - 1 = q

    def test_fibered_orders_certified(self):
        t = np.arange(1024) / 1024
        beta = np.sqrt(2) - 1
        vals = np.exp(2j * np.pi * (beta + 0.05 * np.cos(2 * np.pi * t)))
        c1 = TrigPoly.fit_grid(vals, realflag=False)
        F = FiberedMap([GOLDEN], [c1, TrigPoly.constant(0.3)], 0.25)
        conj = siegel_formal_linearize(F, 6)
        assert conj.reduction is not None
        assert conj.reduction.defect < 1e-9
        for k in range(2, 7):
            assert conj.order_residuals[k] < 1e-9 * max(conj.coeffs[k].mass(), 1e-30)

    def test_orders_independent_of_refit_grid(self):
        t = np.arange(1024) / 1024
        beta = np.sqrt(2) - 1
        vals = np.exp(2j * np.pi * (beta + 0.05 * np.cos(2 * np.pi * t)))
        c1 = TrigPoly.fit_grid(vals, realflag=False)
        F = FiberedMap([GOLDEN], [c1, TrigPoly.constant(0.3)], 0.25)
        a = siegel_formal_linearize(F, 5, degree_cutoff=256)
        b = siegel_formal_linearize(F, 5, degree_cutoff=512)
        for k in range(2, 6):
            for n, amp in a.coeffs[k].modes.items():
                assert abs(b.coeffs[k].modes.get(n, 0j) - amp) < 1e-10


class TestConjugacyResidual:
    def test_identity_on_linear(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(0.5)], 0.5)
        conj = koenigs_linearize(F, 0.1, tol=1e-12, max_n=64)
        assert conjugacy_residual(F, conj) < 1e-14

    def test_formal_truncation_radius(self):
        lam = np.exp(2j * np.pi * GOLDEN)
        F = FiberedMap(
            [GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.3
        )
        conj = siegel_formal_linearize(F, 10)
        # truncation-bound oracle: first dropped order at radius 0.05
        bound = conj.tail_mass * 0.05 ** 11
        res = conjugacy_residual(F, conj, radius=0.05)
        assert res < 1e-8
        assert res < 10 * bound + 1e-12

    def test_unsupported_type(self):
        F = FiberedMap([GOLDEN], [TrigPoly.constant(0.5)], 0.5)
        with pytest.raises(TypeError):
            conjugacy_residual(F, object())
