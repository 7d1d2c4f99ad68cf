"""Operator and state constructors against analytic oracles."""

import math

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from ionstrobe import (
    HBAR,
    ATOMIC_MASS,
    SPIN_DOWN,
    SPIN_UP,
    CoherentAmp,
    HilbertSpec,
    SpinMotionState,
    SqueezeParam,
    TruncationError,
    UnitScale,
    build_mode_operators,
    check_truncation,
    coupling_operator,
    displacement_operator,
    expect,
    expect_n,
    expect_sigma_z,
    make_initial_state,
    quadratures_si,
    quadrature_variances_si,
    squeeze_operator,
    thermal_ensemble,
    thermal_sample,
)
from ionstrobe.errors import DimensionMismatchError

MG25_MASS = 25.0 * ATOMIC_MASS
OMEGA_LF = 2.0 * math.pi * 1.3e6


def coupling_element_laguerre(m: int, n: int, eta: float) -> complex:
    """Independent oracle: <m| exp[i eta (a + a_dag)] |n> via Laguerre polynomials."""
    lo, hi = min(m, n), max(m, n)
    d = hi - lo
    log_ratio = 0.5 * (math.lgamma(lo + 1) - math.lgamma(hi + 1))
    return (
        math.exp(log_ratio - eta**2 / 2.0)
        * (1j * eta) ** d
        * eval_genlaguerre(lo, d, eta**2)
    )


class TestModeOperators:
    def test_minimal_lowering_matrix(self):
        a, a_dag, n = build_mode_operators(HilbertSpec(fock_dim=2))
        expected = np.array([[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(a, expected)
        np.testing.assert_allclose(a_dag, expected.T)

    def test_number_diagonal(self):
        _, _, n = build_mode_operators(HilbertSpec(fock_dim=5))
        np.testing.assert_allclose(np.diag(n).real, [0, 1, 2, 3, 4])

    def test_commutator_truncation_corner(self):
        dim = 12
        a, a_dag, _ = build_mode_operators(HilbertSpec(fock_dim=dim))
        comm = a @ a_dag - a_dag @ a
        expected = np.eye(dim, dtype=complex)
        expected[-1, -1] = -(dim - 1)
        np.testing.assert_allclose(comm, expected, atol=1e-12)

    def test_rejects_tiny_space(self):
        with pytest.raises(ValueError):
            HilbertSpec(fock_dim=1)


class TestCouplingOperator:
    def test_zero_eta_is_identity(self):
        c = coupling_operator(0.0, HilbertSpec(fock_dim=16))
        np.testing.assert_allclose(c, np.eye(16), atol=1e-14)

    def test_ground_state_element(self):
        # Debye-Waller factor exp(-eta^2/2) at eta = 0.4
        c = coupling_operator(0.4, HilbertSpec(fock_dim=40))
        assert c[0, 0] == pytest.approx(math.exp(-0.08), abs=1e-10)
        assert abs(c[0, 0] - 0.92312) < 1e-5

    def test_first_sideband_element(self):
        c = coupling_operator(0.4, HilbertSpec(fock_dim=40))
        assert c[1, 0] == pytest.approx(1j * 0.4 * math.exp(-0.08), abs=1e-10)
        assert abs(c[1, 0] - 0.36925j) < 1e-5

    @pytest.mark.parametrize("eta", [0.18, 0.23, 0.40])
    def test_matches_laguerre_formula(self, eta):
        # Dual-route check: matrix exponential vs analytic matrix elements,
        # on the lowest 80% of a 60-level space.
        dim, keep = 60, 48
        c = coupling_operator(eta, HilbertSpec(fock_dim=dim))
        oracle = np.array(
            [[coupling_element_laguerre(m, n, eta) for n in range(keep)] for m in range(keep)]
        )
        assert np.max(np.abs(c[:keep, :keep] - oracle)) < 1e-8

    def test_unitary_on_retained_levels(self):
        dim, keep = 40, 32
        c = coupling_operator(0.5, HilbertSpec(fock_dim=dim))
        dev = (c.conj().T @ c - np.eye(dim))[:keep, :keep]
        assert np.max(np.abs(dev)) < 1e-8


class TestDisplacement:
    def test_zero_alpha_identity(self):
        d = displacement_operator(CoherentAmp(0.0), HilbertSpec(fock_dim=32))
        np.testing.assert_allclose(d, np.eye(32), atol=1e-13)

    def test_poisson_populations(self):
        spec = HilbertSpec(fock_dim=80)
        d = displacement_operator(CoherentAmp(3.0), spec)
        psi = d[:, 0]
        pops = np.abs(psi) ** 2
        n_grid = np.arange(20)
        poisson = np.exp(-9.0) * 9.0**n_grid / np.array([math.factorial(k) for k in n_grid])
        np.testing.assert_allclose(pops[:20], poisson, atol=1e-9)
        # mean quanta <n> = |alpha|^2 = 9 (coherent excitation of the displaced vacuum)
        assert float(np.dot(pops, np.arange(80))) == pytest.approx(9.0, abs=1e-6)

    def test_inverse_displacement(self):
        spec = HilbertSpec(fock_dim=64)
        d_plus = displacement_operator(CoherentAmp(2.0, 0.7), spec)
        d_minus = displacement_operator(CoherentAmp(2.0, 0.7 + math.pi), spec)
        keep = int(0.8 * spec.fock_dim)
        dev = (d_plus @ d_minus - np.eye(spec.fock_dim))[:keep, :keep]
        assert np.max(np.abs(dev)) < 1e-8

    def test_truncation_guard(self):
        with pytest.raises(TruncationError):
            displacement_operator(CoherentAmp(3.0), HilbertSpec(fock_dim=40))

    def test_position_expectation(self):
        spec = HilbertSpec(fock_dim=32)
        units = UnitScale.for_mode(MG25_MASS, OMEGA_LF)
        d = displacement_operator(CoherentAmp(1.0), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = d[:, 0]
        state = SpinMotionState(amps, spec.fock_dim)
        x, p = quadratures_si(state, units)
        assert x == pytest.approx(2.0 * units.x_zpf, rel=1e-9)
        assert x == pytest.approx(24.9e-9, abs=0.1e-9)
        assert abs(p) < 1e-30


class TestSqueeze:
    def test_zero_zeta_identity(self):
        s = squeeze_operator(SqueezeParam(0.0), HilbertSpec(fock_dim=32))
        np.testing.assert_allclose(s, np.eye(32), atol=1e-13)

    def test_mean_quanta_and_parity(self):
        spec = HilbertSpec(fock_dim=160)
        s = squeeze_operator(SqueezeParam(1.0), spec)
        psi = s[:, 0]
        pops = np.abs(psi) ** 2
        mean_n = float(np.dot(pops, np.arange(spec.fock_dim)))
        assert mean_n == pytest.approx(math.sinh(1.0) ** 2, abs=1e-6)
        odd = pops[1::2]
        assert np.max(odd) < 1e-12

    def test_quadrature_squeezing(self):
        spec = HilbertSpec(fock_dim=160)
        units = UnitScale.for_mode(MG25_MASS, OMEGA_LF)
        s = squeeze_operator(SqueezeParam(1.0, 0.0), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = s[:, 0]
        state = SpinMotionState(amps, spec.fock_dim)
        var_x, var_p = quadrature_variances_si(state, units)
        # real positive zeta squeezes position by e^{-2|zeta|}
        assert var_x / units.x_zpf**2 == pytest.approx(math.exp(-2.0), rel=1e-6)
        # minimum-uncertainty product is preserved
        assert var_x * var_p == pytest.approx((units.hbar / 2.0) ** 2, rel=1e-6)

    def test_truncation_guard(self):
        with pytest.raises(TruncationError):
            squeeze_operator(SqueezeParam(1.0), HilbertSpec(fock_dim=64))


class TestStatesAndSampling:
    def test_basis_state(self):
        spec = HilbertSpec(fock_dim=8)
        st = make_initial_state(SPIN_DOWN, 0, spec)
        assert st.amplitudes[0] == 1.0
        assert np.count_nonzero(st.amplitudes) == 1
        st_up = make_initial_state(SPIN_UP, 3, spec)
        assert st_up.amplitudes[8 + 3] == 1.0

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            make_initial_state(SPIN_DOWN, 8, HilbertSpec(fock_dim=8))

    def test_zero_temperature_sampling(self):
        assert all(thermal_sample(0.0, seed) == 0 for seed in range(5))

    def test_thermal_mean(self):
        rng = np.random.default_rng(42)
        draws = [thermal_sample(0.15, rng) for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(0.15, abs=0.01)

    def test_ensemble_weights_sum(self):
        levels, weights = thermal_ensemble(0.15, 500, seed=7)
        assert weights.sum() == pytest.approx(1.0)
        assert levels[0] == 0
        assert weights[0] > 0.7


class TestExpectations:
    def test_sigma_z_down(self):
        spec = HilbertSpec(fock_dim=4)
        st = make_initial_state(SPIN_DOWN, 0, spec)
        assert expect_sigma_z(st) == pytest.approx(-1.0, abs=1e-14)

    def test_number_up_two(self):
        spec = HilbertSpec(fock_dim=4)
        st = make_initial_state(SPIN_UP, 2, spec)
        assert expect_n(st) == pytest.approx(2.0, abs=1e-14)

    def test_displaced_mean_quanta_full_matrix(self):
        spec = HilbertSpec(fock_dim=80)
        d = displacement_operator(CoherentAmp(3.0), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = d[:, 0]
        st = SpinMotionState(amps, spec.fock_dim)
        _, _, n = build_mode_operators(spec)
        full_n = np.kron(np.eye(2), n)
        assert expect(full_n, st) == pytest.approx(9.0, abs=1e-6)

    def test_dimension_mismatch(self):
        spec = HilbertSpec(fock_dim=4)
        st = make_initial_state(SPIN_DOWN, 0, spec)
        with pytest.raises(DimensionMismatchError):
            expect(np.eye(3), st)

    def test_momentum_quadrature_sign(self):
        spec = HilbertSpec(fock_dim=32)
        units = UnitScale.for_mode(MG25_MASS, OMEGA_LF)
        d = displacement_operator(CoherentAmp(1.0, math.pi / 2), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = d[:, 0]
        x, p = quadratures_si(SpinMotionState(amps, spec.fock_dim), units)
        assert abs(x) < 1e-20
        assert p == pytest.approx(2.0 * units.p_zpf, rel=1e-9)


class TestUnits:
    def test_zero_point_scales(self):
        units = UnitScale.for_mode(MG25_MASS, OMEGA_LF)
        assert units.x_zpf == pytest.approx(12.47e-9, abs=0.01e-9)
        # 1 zN us = 1e-27 kg m/s
        assert units.p_zpf / 1e-27 == pytest.approx(4.228, abs=0.005)

    def test_uncertainty_product_invariant(self):
        with pytest.raises(ValueError):
            UnitScale(hbar=HBAR, mass=MG25_MASS, x_zpf=1e-8, p_zpf=1e-26)

    def test_coherent_quadratures_at_headline_amplitude(self):
        spec = HilbertSpec(fock_dim=192)
        units = UnitScale.for_mode(MG25_MASS, OMEGA_LF)
        d = displacement_operator(CoherentAmp(6.5, 0.0), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = d[:, 0]
        x, _ = quadratures_si(SpinMotionState(amps, spec.fock_dim), units)
        assert x * 1e9 == pytest.approx(162.0, abs=1.0)
        d_mom = displacement_operator(CoherentAmp(6.5, math.pi / 2), spec)
        amps2 = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps2[: spec.fock_dim] = d_mom[:, 0]
        _, p = quadratures_si(SpinMotionState(amps2, spec.fock_dim), units)
        assert abs(p) / 1e-27 == pytest.approx(55.0, abs=0.3)


class TestTruncationCheck:
    def test_vacuum_passes(self):
        spec = HilbertSpec(fock_dim=12)
        st = make_initial_state(SPIN_DOWN, 0, spec)
        assert check_truncation(st, spec).passed

    def test_displaced_fails_small_space(self):
        spec = HilbertSpec(fock_dim=12, tail_tol=1e-4)
        # bypass the constructor guard to build an inadequate displaced state
        a, a_dag, _ = build_mode_operators(spec)
        gen = 3.0 * (a_dag - a)
        w, v = np.linalg.eigh(-1j * gen)
        d = (v * np.exp(1j * w)) @ v.conj().T
        psi = d[:, 0]
        psi = psi / np.linalg.norm(psi)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = psi
        report = check_truncation(SpinMotionState(amps, spec.fock_dim), spec)
        assert not report.passed

    def test_displaced_passes_large_space(self):
        spec = HilbertSpec(fock_dim=80, tail_tol=1e-4)
        d = displacement_operator(CoherentAmp(3.0), spec)
        amps = np.zeros(2 * spec.fock_dim, dtype=complex)
        amps[: spec.fock_dim] = d[:, 0]
        assert check_truncation(SpinMotionState(amps, spec.fock_dim), spec).passed


def test_norm_guard_rejects_unnormalized():
    with pytest.raises(ValueError):
        SpinMotionState(np.array([1.0, 1.0, 0.0, 0.0], dtype=complex), 2)


@pytest.mark.parametrize("mag,phase", [(0.5, 0.0), (1.5, 1.1), (2.5, -2.0)])
def test_unitaries_preserve_norm(mag, phase):
    spec = HilbertSpec(fock_dim=64)
    d = displacement_operator(CoherentAmp(mag, phase), spec)
    psi = d[:, 0]
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
    c = coupling_operator(0.4, spec)
    assert np.linalg.norm(c @ psi) == pytest.approx(1.0, abs=1e-10)
