import math
from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_physical_cm, tms
from pulsedopto.errors import NonPhysicalState
from pulsedopto.measures import (
    HomodyneAngles,
    angle_scan,
    angles_from_vector,
    apply_loss,
    compute_measures,
    gen_quad_variance,
    is_physical,
    log_negativity,
    optimize_angles,
    partial_transpose,
    quadrature_vector,
    rotate_modes,
    symplectic_eigenvalues,
    two_mode_squeezing_db,
)

LAM_TMS2 = 3 - 2 * math.sqrt(2)
seeds = st.integers(0, 2**32 - 1)


def random_cm(seed, n=2):
    return random_physical_cm(np.random.default_rng(seed), n)


class TestLoss:
    def test_unit_transmittance(self, rng):
        V = random_physical_cm(rng)
        np.testing.assert_allclose(apply_loss(V, 1.0), V)

    def test_full_loss_gives_vacuum_mode(self, rng):
        V = random_physical_cm(rng)
        W = apply_loss(V, [0.0, 1.0])
        np.testing.assert_allclose(W[:2, :2], np.eye(2))
        np.testing.assert_array_equal(W[:2, 2:], 0.0)
        np.testing.assert_allclose(W[2:, 2:], V[2:, 2:])

    def test_thermal_example(self):
        np.testing.assert_allclose(apply_loss(3 * np.eye(4), 0.5), 2 * np.eye(4))

    def test_bounds(self):
        with pytest.raises(ValueError):
            apply_loss(np.eye(4), [1.2, 1.0])

    @settings(max_examples=50)
    @given(seed=seeds, e1=st.floats(0, 1), e2=st.floats(0, 1))
    def test_loss_keeps_states_physical_and_reduces_entanglement(self, seed, e1, e2):
        V = random_cm(seed)
        W = apply_loss(V, [e1, e2])
        assert is_physical(W, tol=1e-9)
        assert log_negativity(W)[0] <= log_negativity(V)[0] + 1e-9


class TestSqueezing:
    def test_vacuum(self):
        assert two_mode_squeezing_db(np.eye(4)) == 0.0

    def test_half(self):
        assert two_mode_squeezing_db(np.diag([0.5, 2, 1, 1])) == pytest.approx(3.0103, abs=1e-4)

    def test_tms(self):
        assert two_mode_squeezing_db(tms(2.0)) == pytest.approx(7.655513706, abs=1e-6)
        assert np.linalg.eigvalsh(tms(2.0))[0] == pytest.approx(LAM_TMS2, abs=1e-12)


class TestLogNegativity:
    def test_vacuum_and_thermal(self):
        assert log_negativity(np.eye(4))[0] == 0.0
        assert log_negativity(3 * np.eye(4))[0] == 0.0

    def test_tms(self):
        e, nu = log_negativity(tms(2.0))
        assert nu == pytest.approx(LAM_TMS2, abs=1e-12)
        assert e == pytest.approx(1.762747, abs=1e-6)
        e2, _ = log_negativity(tms(2.0), base=2)
        assert e2 == pytest.approx(e / math.log(2))

    def test_matches_partial_transpose_spectrum(self, rng):
        for _ in range(30):
            V = random_physical_cm(rng)
            _, nu = log_negativity(V)
            ref = symplectic_eigenvalues(partial_transpose(V)).min()
            assert nu == pytest.approx(ref, rel=1e-8)

    def test_large_entries_stay_accurate(self):
        # strongly amplified thermal TMS: the textbook formula cancels to 0 here
        G, n0 = 300.0, 1e4
        m = 2 * n0 + 1
        a, b = G + (G - 1) * m, G * m + G - 1
        c = 2 * math.sqrt(G * (G - 1)) * (n0 + 1)
        V = np.zeros((4, 4))
        V[:2, :2], V[2:, 2:] = a * np.eye(2), b * np.eye(2)
        V[:2, 2:] = V[2:, :2] = c * np.diag([1, -1])
        _, nu = log_negativity(V)
        # exact value for the stored floating-point entries, in 60-digit arithmetic
        with localcontext() as ctx:
            ctx.prec = 60
            A, B, C = Decimal(a), Decimal(b), Decimal(c)
            s = A * A + B * B + 2 * C * C
            det = (A * B - C * C) ** 2
            exact = float((2 * det / (s + (s * s - 4 * det).sqrt())).sqrt())
        # the condition number is ~1e10, so 1e-6 is near the attainable limit
        assert nu == pytest.approx(exact, rel=1e-6)

    def test_unphysical_raises(self):
        V = np.array(
            [
                [0.25, -0.67, -0.06, -2.22],
                [-0.67, 0.72, 0.04, 0.73],
                [-0.06, 0.04, -1.25, -1.2],
                [-2.22, 0.73, -1.2, -1.46],
            ]
        )
        with pytest.raises(NonPhysicalState):
            log_negativity(V)

    def test_shape(self):
        with pytest.raises(ValueError):
            log_negativity(np.eye(6))

    @settings(max_examples=60)
    @given(seed=seeds)
    def test_entanglement_implies_squeezing(self, seed):
        m = compute_measures(random_cm(seed))
        assert m.e_n >= 0
        assert (m.e_n > 0) == (m.nu_minus < 1)
        if m.e_n > 0:
            assert m.s_db > 0


class TestSymplectic:
    def test_vacuum(self):
        np.testing.assert_allclose(symplectic_eigenvalues(np.eye(4)), [1, 1])

    def test_thermal(self):
        np.testing.assert_allclose(symplectic_eigenvalues(np.diag([3, 3, 21, 21.0])), [3, 21])

    @pytest.mark.parametrize("G", [1.0, 2.0, 50.0, 1e4])
    def test_pure_tms(self, G):
        np.testing.assert_allclose(symplectic_eigenvalues(tms(G)), [1, 1], atol=1e-9)

    def test_fallback_on_indefinite(self):
        # not positive definite: the eigenvalue route still returns moduli
        nu = symplectic_eigenvalues(partial_transpose(tms(2.0)))
        np.testing.assert_allclose(nu, [LAM_TMS2, 1 / LAM_TMS2], rtol=1e-9)
        nu = symplectic_eigenvalues(np.diag([-1.0, -1.0, 2.0, 2.0]))
        np.testing.assert_allclose(nu, [1, 2])

    @settings(max_examples=50)
    @given(seed=seeds, n=st.integers(1, 4))
    def test_invariant_under_symplectic_maps(self, seed, n):
        from conftest import random_symplectic

        rng = np.random.default_rng(seed)
        V = random_physical_cm(rng, n)
        S = random_symplectic(rng, n)
        np.testing.assert_allclose(
            symplectic_eigenvalues(S @ V @ S.T), symplectic_eigenvalues(V), rtol=1e-7
        )

    def test_odd_dimension(self):
        with pytest.raises(ValueError):
            symplectic_eigenvalues(np.eye(3))


class TestHomodyne:
    def test_phi_zero_is_single_mode(self, rng):
        V = random_physical_cm(rng)
        th = 0.7
        expected = math.cos(th) ** 2 * V[0, 0] + math.sin(th) ** 2 * V[1, 1] + math.sin(2 * th) * V[0, 1]
        assert gen_quad_variance(V, HomodyneAngles(0.0, th, 2.0)) == pytest.approx(expected)

    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), c=st.floats(-10, 10))
    def test_vacuum_any_angle(self, a, b, c):
        assert gen_quad_variance(np.eye(4), HomodyneAngles(a, b, c)) == pytest.approx(1.0)
        assert np.linalg.norm(quadrature_vector(a, b, c)) == pytest.approx(1.0)

    def test_tms_anticorrelated(self):
        V = tms(2.0)
        V[:2, 2:] *= -1
        V[2:, :2] *= -1
        var = gen_quad_variance(V, HomodyneAngles(math.pi / 4, 0.0, 0.0))
        assert var == pytest.approx(LAM_TMS2, abs=1e-12)

    def test_optimize_tms(self):
        a, v = optimize_angles(tms(2.0))
        assert v == pytest.approx(LAM_TMS2, abs=1e-12)
        assert a.phi == pytest.approx(math.pi / 4, abs=1e-9)
        assert gen_quad_variance(tms(2.0), a) == pytest.approx(LAM_TMS2, abs=1e-12)

    def test_vacuum_degenerate_minimum(self):
        a, v = optimize_angles(np.eye(4))
        assert v == pytest.approx(1.0)
        assert 0 <= a.phi <= math.pi / 2

    @settings(max_examples=100)
    @given(seed=seeds)
    def test_min_variance_is_smallest_eigenvalue(self, seed):
        V = random_cm(seed)
        a, v = optimize_angles(V)
        lam = np.linalg.eigvalsh(V)[0]
        assert v == pytest.approx(lam, abs=1e-8 * max(1.0, abs(lam)))
        assert gen_quad_variance(V, a) == pytest.approx(lam, abs=1e-8 * np.abs(V).max())
        assert 0 <= a.phi <= math.pi / 2
        assert 0 <= a.theta_B < 2 * math.pi and 0 <= a.theta_R < 2 * math.pi
        assert two_mode_squeezing_db(V) == pytest.approx(-10 * math.log10(v), abs=1e-9)

    @given(
        phi=st.floats(0.01, math.pi / 2 - 0.01),
        tb=st.floats(0, 2 * math.pi),
        tr=st.floats(0, 2 * math.pi),
        sign=st.sampled_from([-1.0, 1.0]),
    )
    def test_angle_roundtrip_up_to_sign(self, phi, tb, tr, sign):
        c = sign * quadrature_vector(phi, tb, tr)
        a = angles_from_vector(c)
        back = a.vector()
        assert min(np.linalg.norm(back - c), np.linalg.norm(back + c)) < 1e-9
        assert 0 <= a.theta_B < math.pi

    def test_sign_convention_is_deterministic(self):
        c = quadrature_vector(0.3, 1.0, 2.0)
        assert angles_from_vector(c) == angles_from_vector(-c)


class TestAngleScan:
    def test_fixed_scan_peaks_at_optimum(self):
        V = tms(2.0)
        th = np.linspace(0, 2 * np.pi, 3601)
        var = angle_scan(V, th, "fixed")
        assert var.min() == pytest.approx(LAM_TMS2, abs=1e-6)

    def test_reoptimize_is_lower_envelope(self, rng):
        V = random_physical_cm(rng)
        th = np.linspace(0, 2 * np.pi, 361)
        fixed = angle_scan(V, th, "fixed")
        re = angle_scan(V, th, "reoptimize")
        assert np.all(re <= fixed + 1e-9)
        assert re.min() == pytest.approx(np.linalg.eigvalsh(V)[0], abs=1e-4)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            angle_scan(np.eye(4), [0.0], "sideways")


def test_rotate_modes_preserves_spectrum(rng):
    V = random_physical_cm(rng)
    W = rotate_modes(V, [0.4, -1.1])
    np.testing.assert_allclose(symplectic_eigenvalues(W), symplectic_eigenvalues(V))
    np.testing.assert_allclose(rotate_modes(V, 0.0), V)
    R = rotate_modes(np.diag([2.0, 0.5]), math.pi / 2)
    np.testing.assert_allclose(R, np.diag([0.5, 2.0]), atol=1e-15)
