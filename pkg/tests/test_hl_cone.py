import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_su
from slcone.calib_core import calibration_defect, flat_Omega, flat_structure
from slcone.hl_cone import (
    LINK_METRIC,
    ConeGrid,
    NormalField,
    chart_pullback_numeric,
    cone_ball_volume,
    cone_point,
    cone_point_real,
    cyl_norm,
    graph_cyl,
    link_area,
    link_area_quadrature,
    link_metric,
    link_metric_numeric,
    normal_frame,
    on_cone,
    rotate,
    sample_cone,
    tangent_frame,
)
from slcone.varifold import current_pair, energy, mass_in_ball, translate

S3 = flat_structure(3)


def bump_pairings(V, centers, width=0.3):
    return np.array([np.dot(V.weights, np.exp(-((V.points - c) ** 2).sum(1) / width**2)) for c in centers])


class TestChart:
    def test_base_point(self):
        np.testing.assert_allclose(cone_point(np.sqrt(3), 0, 0), [1, 1, 1], atol=1e-15)
        np.testing.assert_allclose(cone_point(np.sqrt(3), np.pi / 2, 0), [1j, 1, -1j], atol=1e-15)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            cone_point(0.0, 0.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 100), st.floats(-10, 10), st.floats(-10, 10))
    def test_defining_equations(self, r, t1, t2):
        z = cone_point(r, t1, t2)
        assert np.linalg.norm(z) == pytest.approx(r, rel=1e-14)
        assert on_cone(z)
        assert abs(np.prod(z) - r**3 / 3**1.5) < 1e-13 * r**3
        np.testing.assert_allclose(cone_point(2 * r, t1, t2), 2 * z, rtol=1e-14, atol=1e-300)

    def test_off_cone(self):
        assert not on_cone([1.0, 1.0, 2.0])
        assert not on_cone([1.0, 1.0, -1.0])


class TestLinkGeometry:
    def test_metric_closed_form(self):
        np.testing.assert_array_equal(link_metric(), LINK_METRIC)
        assert np.linalg.det(LINK_METRIC) == pytest.approx(1 / 3)

    def test_metric_numeric(self, rng):
        for t1, t2 in rng.uniform(0, 2 * np.pi, size=(100, 2)):
            np.testing.assert_allclose(link_metric_numeric(t1, t2), LINK_METRIC, atol=1e-12)

    def test_chart_pullback(self, rng):
        for r, t1, t2 in zip(rng.uniform(0.1, 5, 10), *rng.uniform(0, 6, (2, 10))):
            g = chart_pullback_numeric(r, t1, t2)
            np.testing.assert_allclose(g[0], [1, 0, 0], atol=1e-12)
            np.testing.assert_allclose(g[1:, 1:], r**2 * LINK_METRIC, atol=1e-10 * r**2)

    def test_area(self):
        assert link_area() == pytest.approx(4 * np.pi**2 / np.sqrt(3), rel=1e-15)
        assert link_area_quadrature(64) == pytest.approx(link_area(), rel=1e-12)
        assert cone_ball_volume() == pytest.approx(link_area() / 3, rel=1e-15)

    def test_frames_special_and_normal(self, rng):
        t1, t2 = rng.uniform(0, 6, (2, 200))
        T, N = tangent_frame(t1, t2), normal_frame(t1, t2)
        assert np.abs(np.einsum("nkj,nlj->nkl", T, N)).max() < 1e-13
        assert max(d.max() for d in calibration_defect(S3, T)) < 1e-12


class TestSampling:
    def test_cone_sample(self):
        V = sample_cone(0.0, 2.0, 200, 32)
        assert mass_in_ball(V, None, 2.0) == pytest.approx(8 * cone_ball_volume(), rel=5e-3)
        assert energy(V) < 1e-12
        assert max(d.max() for d in calibration_defect(S3, V.frames)) < 1e-10
        assert current_pair(V, flat_Omega(3).real) == pytest.approx(V.total_mass, rel=1e-12)

    def test_density_radius_independent(self):
        V = sample_cone(0.0, 4.0, 400, 16)
        d = [mass_in_ball(V, None, R) / R**3 for R in (1.0, 2.0, 4.0)]
        np.testing.assert_allclose(d, cone_ball_volume(), rtol=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_cone(2.0, 1.0, 10, 10)
        with pytest.raises(ValueError):
            sample_cone(0.0, 1.0, 1, 10)


class TestNormalGraphs:
    def grid(self):
        return ConeGrid(0.5, 3.0, 64, 32)

    def test_zero_field_is_cone(self):
        g = ConeGrid(1.0, 2.0, 16, 16)
        V, C = graph_cyl(NormalField.zeros(g)), sample_cone(1.0, 2.0, 16, 16)
        np.testing.assert_allclose(V.points, C.points, atol=1e-12)
        np.testing.assert_allclose(V.weights, C.weights, atol=1e-12)
        np.testing.assert_allclose(V.frames, C.frames, atol=1e-12)
        assert cyl_norm(NormalField.zeros(g), 1) == 0.0

    def test_cyl_norm_of_radial_field(self):
        g = ConeGrid(1.0, 2.0, 8, 8)
        c = np.zeros(g.shape + (3,))
        c[..., 1] = 0.3 * g.r[:, None, None]
        assert cyl_norm(NormalField(g, c), 0) == pytest.approx(0.3)
        assert cyl_norm(NormalField(g, c), 1) == pytest.approx(0.3, abs=1e-12)

    def test_cyl_norm_validation(self):
        g = ConeGrid(1.0, 2.0, 8, 8)
        with pytest.raises(ValueError):
            cyl_norm(np.zeros(g.shape + (3,)))
        with pytest.raises(ValueError):
            cyl_norm(NormalField.zeros(g), 2)

    def test_translation_mode(self):
        # the normal part of a translation reproduces the translate to O(|b|^2)
        g = self.grid()
        C = sample_cone(0.5, 3.0, 64, 32)
        centers = [cone_point_real(1.7, a, b) for a, b in [(0.3, 1.0), (2.0, 4.0), (5.0, 1.0)]]
        gaps, shifts = [], []
        for b in (1e-2, 1e-3):
            v = b * np.array([1, 0, 0, 0, 1, 0.0]) / np.sqrt(2)
            G, T = graph_cyl(NormalField.from_vectors(g, v)), translate(C, v)
            gaps.append(np.abs(bump_pairings(G, centers) - bump_pairings(T, centers)).max())
            shifts.append(np.abs(bump_pairings(C, centers) - bump_pairings(T, centers)).max())
        assert gaps[0] / gaps[1] > 20
        assert gaps[0] < 1e-2 * shifts[0]

    def test_generic_graph_not_special(self):
        g = ConeGrid(1.0, 2.0, 16, 16)
        R, T1, T2 = g.mesh()
        c = np.zeros(g.shape + (3,))
        c[..., 0] = 0.05 * R * np.cos(T1)
        c[..., 1] = 0.05 * R * np.sin(T2 - T1)
        u = NormalField(g, c)
        assert 0.05 < cyl_norm(u, 1) < 0.2
        V = graph_cyl(u)
        im = S3.Omega_on(V.frames).imag
        assert np.dot(V.weights, np.abs(im)) > 1e-2 * V.total_mass
        assert calibration_defect(S3, V.frames)[2].max() > 1e-3

    def test_chart_bound(self):
        g = ConeGrid(1.0, 2.0, 8, 8)
        c = np.zeros(g.shape + (3,))
        c[..., 0] = 0.5 * g.r[:, None, None]
        with pytest.raises(ValueError, match="tubular"):
            graph_cyl(NormalField(g, c))
        graph_cyl(NormalField(g, c), check=False)

    def test_shape_validation(self):
        g = ConeGrid(1.0, 2.0, 8, 8)
        with pytest.raises(ValueError):
            NormalField(g, np.zeros((8, 8, 8, 2)))


class TestRotation:
    def test_su3_preserves_special(self, rng):
        V = sample_cone(1.0, 2.0, 8, 8)
        W = rotate(V, random_su(rng))
        assert max(d.max() for d in calibration_defect(S3, W.frames)) < 1e-10
        np.testing.assert_allclose(W.weights, V.weights)

    def test_rejects_non_special(self):
        V = sample_cone(1.0, 2.0, 4, 4)
        with pytest.raises(ValueError, match="unitary"):
            rotate(V, 2 * np.eye(3))
        with pytest.raises(ValueError, match="determinant"):
            rotate(V, np.diag([1j, 1, 1]))
