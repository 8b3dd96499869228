import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from slcone.calib_core import calibration_defect, flat_structure, gram_schmidt, to_real
from slcone.hl_cone import cone_ball_volume, cone_point
from slcone.local_models import (
    PERMUTATION,
    RAY_MODELS,
    UNIT_LABEL,
    FiberSurface,
    LModel,
    ModelId,
    as_model_id,
    chart_laplacian,
    classify_fiber,
    cyclic_shift,
    defining_residual,
    fiber_coords,
    fiber_label,
    fiber_point,
    fibration_F,
    fibration_jacobian,
    f_holo,
    in_Y,
    label_from_F,
    F_from_label,
    model_ball_mass,
    model_inverse,
    model_point,
    moment_mu,
    normalize_label,
    plane_radius_for_ball,
    sample_fiber,
    sample_model,
    scale_translate,
    shift_label,
    solve_phi,
)
from slcone.varifold import density_ratio, mass_in_ball

S3 = flat_structure(3)
THETA = cone_ball_volume()
labels_off_Y = st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 2)).map(np.array)


def random_params(rng, n, rho_max=5.0):
    return np.stack([rng.uniform(0, 2 * np.pi, n), rng.uniform(0, rho_max, n), rng.uniform(0, 2 * np.pi, n)], axis=1)


class TestFibration:
    def test_moments(self):
        z = np.array([2.0, 1.0, 1j])
        assert moment_mu(2, z) == 1.5 and moment_mu(3, z) == 1.5
        with pytest.raises(ValueError):
            moment_mu(1, z)

    def test_f_and_labels(self):
        z = np.array([1.0, 1j, 2.0])
        assert f_holo(z) == pytest.approx(2j)
        np.testing.assert_allclose(fiber_label(z), [-3, -3, 2])
        np.testing.assert_allclose(fiber_label(to_real(z)), [-3, -3, 2])

    def test_label_conversion(self, rng):
        F = rng.normal(size=(20, 3))
        np.testing.assert_allclose(F_from_label(label_from_F(F)), F, atol=1e-15)

    def test_cone_label_zero(self, rng):
        z = cone_point(rng.uniform(0.1, 3, 50), *rng.uniform(0, 6, (2, 50)))
        assert np.abs(fiber_label(z)).max() < 1e-14
        assert defining_residual("Cone", z).max() < 1e-14

    def test_jacobian(self, rng):
        x = rng.normal(size=(10, 6))
        J = fibration_jacobian(x)
        h = 1e-6
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            fd = (fibration_F(x + e) - fibration_F(x - e)) / (2 * h)
            np.testing.assert_allclose(J[:, :, k], fd, atol=1e-8)

    def test_model_ids(self):
        assert as_model_id("L2") is ModelId.L2
        with pytest.raises(ValueError, match="unknown model"):
            as_model_id("L4")


class TestModels:
    @pytest.mark.parametrize("model", RAY_MODELS)
    def test_defect_and_labels(self, model, rng):
        p = random_params(rng, 2000)
        x, D = LModel(model).chart(p)
        assert max(d.max() for d in calibration_defect(S3, gram_schmidt(D))) < 1e-10
        np.testing.assert_allclose(fiber_label(x), np.broadcast_to(UNIT_LABEL[model], (len(x), 3)), atol=1e-12 * 30)
        assert np.all(f_holo(x).real > 0)

    @pytest.mark.parametrize("model", RAY_MODELS)
    def test_tangent_is_kernel(self, model, rng):
        # F is constant on the model: its differential kills the tangent planes
        x, D = LModel(model).chart(random_params(rng, 200, 3.0))
        JD = np.einsum("nkj,naj->nka", fibration_jacobian(x), D)
        assert np.abs(JD).max() < 1e-10
        assert np.all(np.linalg.matrix_rank(fibration_jacobian(x), tol=1e-9) == 3)

    def test_model_point_examples(self):
        np.testing.assert_allclose(model_point("L1", 1.0, 0.0), [1, 0, 0])
        np.testing.assert_allclose(model_point("L1", 1j, 1.0), [np.sqrt(2) * 1j, 1, -1j])
        np.testing.assert_allclose(model_point("L2", 1.0, 0.0), [0, 1, 0])
        np.testing.assert_allclose(model_point("L3", 1.0, 0.0), [0, 0, 1])
        assert PERMUTATION[ModelId.L1] == (0, 1, 2)

    def test_model_point_validation(self):
        with pytest.raises(ValueError, match="Cone"):
            model_point("Cone", 1.0, 0.0)
        with pytest.raises(ValueError, match="unit circle"):
            model_point("L1", 2.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(RAY_MODELS), st.floats(0, 2 * np.pi), st.complex_numbers(max_magnitude=10))
    def test_inverse(self, model, ang, w):
        z = model_point(model, np.exp(1j * ang), w)
        a, w2 = model_inverse(model, z)
        assert a == pytest.approx(np.exp(1j * ang), abs=1e-12)
        assert w2 == pytest.approx(w, abs=1e-12)
        assert defining_residual(model, z) < 1e-12 * max(1.0, abs(w) ** 2)

    def test_ball_mass_closed_form(self):
        assert model_ball_mass("L1", 1.0) == 0.0
        assert model_ball_mass("L1", 2.0) == pytest.approx(THETA * 3 * np.sqrt(6))
        assert model_ball_mass("Cone", 2.0) == pytest.approx(8 * THETA)
        assert model_ball_mass("L2", 4.0, s=2.0) == pytest.approx(8 * model_ball_mass("L2", 2.0))
        with pytest.raises(ValueError):
            model_ball_mass("L1", 2.0, s=0)

    @pytest.mark.parametrize("model", RAY_MODELS)
    def test_ball_mass_quadrature(self, model):
        P = plane_radius_for_ball(6.0)
        V = sample_model(model, P, 300, 8)
        # radii whose plane preimage ends on a cell edge
        for k in (100, 200, 300):
            R = np.sqrt(3 * (k * P / 300) ** 2 + 1) * (1 + 1e-12)
            assert mass_in_ball(V, None, R) == pytest.approx(model_ball_mass(model, R), rel=2e-3)

    def test_asymptotic_density(self):
        V = sample_model("L1", plane_radius_for_ball(16.0), 300, 8)
        assert density_ratio(V, None, 16.0) == pytest.approx(THETA, rel=0.02)

    def test_plane_radius(self):
        assert plane_radius_for_ball(2.0) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            plane_radius_for_ball(1.0)

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            sample_model("L1", -1.0)
        with pytest.raises(ValueError):
            sample_model("L1", 1.0, n_rho=1)

    def test_scale_translate(self):
        b = np.array([0.1, 0, 0.2, 0, 0, 0.3])
        x0 = LModel("L1").point(np.array([0.3, 0.7, 1.1]))
        x1 = scale_translate("L1", 2.0, b).point(np.array([0.3, 0.7, 1.1]))
        np.testing.assert_allclose(x1, 2 * x0 + b, atol=1e-15)
        V, W = sample_model("L1", 1.0, 20, 6), sample_model("L1", 1.0, 20, 6, s=2.0)
        assert W.total_mass == pytest.approx(8 * V.total_mass)
        # labels are not translation invariant
        Wb = sample_model("L1", 1.0, 20, 6, b=b)
        assert np.ptp(fiber_label(Wb.points), axis=0).max() > 1e-2
        with pytest.raises(ValueError):
            scale_translate("L1", 1.0, np.zeros(3))

    def test_coordinates_harmonic(self):
        # the immersion is minimal: coordinate functions are harmonic on L1
        L = LModel("L1")
        errs = []
        for n in (32, 64):
            ax = (2 * np.pi * np.arange(16) / 16, np.linspace(0.5, 2.0, n), 2 * np.pi * np.arange(16) / 16)
            z = L.chart_complex(np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1))[0]
            lap = chart_laplacian(L, z[..., 0].real, ax)
            errs.append(np.abs(lap[:, 2:-2]).max())
            assert np.abs(chart_laplacian(L, moment_mu(2, z), ax)).max() < 1e-11
        assert errs[1] < 2e-4 and errs[0] / errs[1] > 2.5


class TestSolvePhi:
    def test_frozen_root(self):
        # real root of phi^3 + 2 phi^2 + phi - 1
        ref = brentq(lambda p: (p + 1) ** 2 * p - 1, 0, 1, xtol=1e-15)
        assert ref == pytest.approx(0.465571231876768, abs=1e-14)
        assert solve_phi(1, 1, 0, 1) == pytest.approx(ref, abs=1e-12)

    def test_zero(self):
        assert solve_phi(0.5, 0.2, 0.0, 0.0) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="normalize"):
            solve_phi(-0.1, 1, 0, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10), st.floats(-20, 20), st.floats(-5, 5))
    def test_against_brentq(self, c1, c2, t, c3):
        q = t**2 + c3**2
        assume(q > 1e-6)
        phi = solve_phi(c1, c2, t, c3)
        ref = brentq(lambda p: (p + c1) * (p + c2) * p - q, 0, 2 * max(1.0, np.cbrt(q)), xtol=1e-15, rtol=1e-15)
        assert phi == pytest.approx(ref, abs=1e-12 * max(1.0, ref))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5), st.floats(0.001, 1))
    def test_monotone_in_q(self, c1, c2, t, dt):
        assert solve_phi(c1, c2, t + dt, 0.5) >= solve_phi(c1, c2, t, 0.5)


class TestFibers:
    def test_round_trip(self):
        z = fiber_point([2.0, 1.0, 0.5], 0.3, np.exp(0.4j), np.exp(-1.2j))
        np.testing.assert_allclose(fiber_label(z), [2.0, 1.0, 0.5], atol=1e-13)
        t, u, v = fiber_coords([2.0, 1.0, 0.5], z)
        assert t == pytest.approx(0.3, abs=1e-13)
        assert u == pytest.approx(np.exp(0.4j)) and v == pytest.approx(np.exp(-1.2j))

    def test_reference_coordinates(self):
        c = np.array([1.0, 1.0, 1.0])
        z = fiber_point(c, 2.0, 1.0, 1j)
        assert fiber_coords(c, z)[0] == pytest.approx(2.0, abs=1e-13)
        assert fiber_coords(c, z)[2] == pytest.approx(1j, abs=1e-13)

    def test_singular_rejected(self):
        with pytest.raises(ValueError, match="singular fiber; use L_c"):
            FiberSurface([1.0, 0.0, 0.0])
        with pytest.raises(ValueError, match="unit circle"):
            fiber_point([1.0, 1.0, 1.0], 0.0, 2.0, 1.0)

    @settings(max_examples=30, deadline=None)
    @given(labels_off_Y, st.floats(-3, 3), st.floats(0, 6.3), st.floats(0, 6.3))
    def test_label_constant(self, c, t, a, b):
        z = fiber_point(c, t, np.exp(1j * a), np.exp(1j * b))
        scale = max(1.0, float(np.abs(z).max()) ** 3)
        np.testing.assert_allclose(fiber_label(z), c, atol=1e-12 * scale)
        assert fiber_coords(c, z)[0] == pytest.approx(t, abs=1e-12 * scale)

    @settings(max_examples=15, deadline=None)
    @given(labels_off_Y)
    def test_fibers_are_special(self, c):
        V = sample_fiber(c, 2.0, n_t=8, n_angle=4)
        assert max(d.max() for d in calibration_defect(S3, V.frames)) < 1e-9

    def test_asymptotic_to_cone_halves(self):
        V = sample_fiber([0.0, 0.0, 0.01], 8.0, n_t=256, n_angle=16)
        re = f_holo(V.points).real
        for half in (V.subset(re > 0), V.subset(re < 0)):
            assert density_ratio(half, None, 3.0) == pytest.approx(THETA, rel=5e-3)

    def test_cyclic_shift(self):
        z = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(cyclic_shift(z, 1), [2, 3, 1])
        c = fiber_label(z)
        np.testing.assert_allclose(fiber_label(cyclic_shift(z, 1)), shift_label(c, 1))
        k, cn = normalize_label([-1.0, -2.0, 0.3])
        assert min(cn[:2]) >= 0 and cn[2] == 0.3


class TestClassifyFiber:
    @pytest.mark.parametrize("model", RAY_MODELS)
    def test_rays(self, model):
        cl = classify_fiber(2.25 * UNIT_LABEL[model])
        assert cl.kind == "SingularRay" and cl.model is model
        assert cl.scale == pytest.approx(1.5) and not cl.near_discriminant

    def test_cone_and_smooth(self):
        assert classify_fiber(np.zeros(3)).model is ModelId.Cone
        assert classify_fiber([1.0, 1.0, 1.0]).kind == "SmoothCylinder"
        assert not in_Y([1.0, 1.0, 1.0]) and in_Y([0.0, 3.0, 0.0])
        with pytest.raises(ValueError):
            classify_fiber(np.zeros(3), tol=0)

    def test_near_discriminant_flag(self):
        cl = classify_fiber([1.0, 1e-10, 0.0])
        assert cl.kind == "SingularRay" and cl.near_discriminant


class TestAlignedSampling:
    def test_exact_ball_masses(self):
        from slcone.local_models import sample_model_aligned

        radii = [2.0, 3.0, 5.0]
        V = sample_model_aligned("L2", radii, 200, 8, s=1.3)
        for R in radii:
            assert mass_in_ball(V, None, R * (1 + 1e-12)) == pytest.approx(model_ball_mass("L2", R, 1.3), rel=1e-5)
        assert max(d.max() for d in calibration_defect(S3, V.frames)) < 1e-10

    def test_validation(self):
        from slcone.local_models import sample_model_aligned

        with pytest.raises(ValueError):
            sample_model_aligned("Cone", [1.0])
        with pytest.raises(ValueError):
            sample_model_aligned("L1", [0.5])
