import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slcone.asymptotics import (
    NormalGraphField,
    decay_report,
    displacement_exponent_grid,
    graph_over_cone,
    lambda1_block,
    recenter,
    translation_basis,
)
from slcone.hl_cone import ConeGrid, NormalField, graph_cyl
from slcone.local_models import ConeSurface, LModel, ScaledSurface, plane_radius_for_ball, sample_model
from slcone.spectral import RealMode, indicial_roots, link_spectrum

B = np.array([0.01, 0.0, 0.02, 0.0, 0.0, -0.01])


@pytest.fixture(scope="module")
def far_grid():
    return ConeGrid.shells(np.geomspace(4, 16, 9), 32)


def synthetic_field(grid, mode, x, comp=1, coef=0.7):
    R, T1, T2 = grid.mesh()
    c = np.zeros(grid.shape + (3,))
    c[..., comp] = coef * R**x * mode(T1, T2)
    return NormalGraphField(grid, c, np.zeros(grid.shape), "synthetic")


class TestGraph:
    def test_cone_is_zero(self, far_grid):
        f = graph_over_cone("Cone", far_grid)
        assert np.abs(f.components).max() < 1e-12
        assert f.method == "newton"

    def test_translated_cone(self, far_grid):
        f = graph_over_cone(ScaledSurface(ConeSurface(), 1.0, B), far_grid)
        expected = NormalField.from_vectors(far_grid, B).components
        r = far_grid.r[:, None, None, None]
        assert np.abs(f.components - expected).max() < 10 * np.linalg.norm(B) ** 2 / r.min()

    def test_translation_basis(self, far_grid):
        Bt = translation_basis(far_grid)
        assert Bt.shape == far_grid.shape + (3, 6)
        field = NormalGraphField(far_grid, np.einsum("...kj,j->...k", Bt, B), np.zeros(far_grid.shape))
        np.testing.assert_allclose(lambda1_block(field), B, atol=1e-14)

    def test_l1_decays(self, far_grid):
        prof = graph_over_cone("L1", far_grid).sup_profile()
        assert np.all(np.diff(prof) < 0)

    def test_raw_round_trip(self):
        g = ConeGrid(4.0, 8.0, 16, 32)
        R, T1, T2 = g.mesh()
        u = np.zeros(g.shape + (3,))
        u[..., 0] = 0.05 * R * RealMode(1, 1, "c")(T1, T2)
        u[..., 2] = 0.03 * R * RealMode(2, 1, "s")(T1, T2)
        f = graph_over_cone(graph_cyl(NormalField(g, u)), g)
        assert f.method == "projection"
        assert np.abs(f.components - u).max() < 1e-8

    def test_raw_matches_chart(self, far_grid):
        V = sample_model("L1", plane_radius_for_ball(20.0), 300, 64)
        f_raw, f_chart = graph_over_cone(V, far_grid), graph_over_cone("L1", far_grid)
        assert np.abs(f_raw.components - f_chart.components).max() < 1e-4

    def test_not_graphical(self):
        g = ConeGrid(1.0, 2.0, 4, 8)
        with pytest.raises(ValueError, match="not graphical"):
            graph_over_cone(ScaledSurface(ConeSurface(), 1.0, np.array([5.0, 0, 0, 0, 0, 0])), g)


class TestDecay:
    def test_exponent_grid(self):
        xs = displacement_exponent_grid()
        for v in (-1.0, 0.0, 1.0, -3.0, -2.0, 2.0):
            assert v in xs
        assert all(-6 <= v <= 4 for v in xs)

    def test_l1_rate(self, far_grid):
        rep = decay_report(graph_over_cone("L1", far_grid))
        assert rep.leading_exponent == pytest.approx(-1.0, abs=0.1)
        assert rep.leading_snapped == -1.0
        assert np.abs(rep.lambda1_block).max() < 1e-12
        assert rep.modes[0].n1 == rep.modes[0].n2 == 0

    def test_translated_cone_rate(self, far_grid):
        rep = decay_report(graph_over_cone(ScaledSurface(ConeSurface(), 1.0, B), far_grid))
        assert rep.leading_snapped == 0.0
        np.testing.assert_allclose(rep.lambda1_block, B, atol=1e-3)

    def test_synthetic_mode(self):
        g = ConeGrid.shells(np.geomspace(2, 8, 8), 32)
        rep = decay_report(synthetic_field(g, RealMode(2, 1, "c"), -3.0))
        assert len(rep.modes) == 1
        md = rep.modes[0]
        assert (md.n1, md.n2, md.kind, md.component) == (2, 1, "c", 1)
        assert md.snapped == -3.0 and md.coefficient == pytest.approx(0.7, abs=1e-12)
        assert rep.tail_norm < 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.sampled_from(link_spectrum(8).real_basis()), st.booleans(), st.integers(0, 2))
    def test_harmonic_rates_on_grid(self, mode, use_alpha, comp):
        # rates of harmonic potentials land on the admissible grid
        p = indicial_roots(mode.gamma)
        x = p.alpha if use_alpha else p.beta
        g = ConeGrid.shells(np.geomspace(2, 8, 6), 24)
        rep = decay_report(synthetic_field(g, mode, x, comp))
        assert rep.modes and rep.modes[0].snapped == pytest.approx(x, abs=1e-9)
        assert displacement_exponent_grid().count(round(x, 12)) == 1

    def test_validation(self):
        g = ConeGrid.shells([2.0, 3.0, 4.0], 8)
        with pytest.raises(ValueError, match="four"):
            decay_report(NormalGraphField(g, np.zeros(g.shape + (3,)), np.zeros(g.shape)))

    def test_csv(self, tmp_path, far_grid):
        rep = decay_report(graph_over_cone("L1", far_grid))
        rep.write_csv(tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[2] == "mode,exponent,coefficient,residual"
        assert len(lines) == 3 + len(rep.modes)


class TestRecenter:
    def test_cone(self, far_grid):
        rc = recenter(ScaledSurface(ConeSurface(), 1.0, B), far_grid)
        np.testing.assert_allclose(rc.b, B, atol=1e-3)
        assert not rc.already_centered

    def test_centered_cone(self, far_grid):
        rc = recenter("Cone", far_grid)
        assert rc.already_centered and np.all(rc.b == 0)

    def test_l1(self):
        g = ConeGrid.shells(np.geomspace(8, 16, 6), 32)
        rc = recenter(ScaledSurface(LModel("L1"), 1.0, B), g)
        np.testing.assert_allclose(rc.b, B, atol=5e-3)

    def test_equivariant_and_idempotent(self):
        g = ConeGrid.shells(np.geomspace(8, 16, 6), 24)
        b2 = np.array([0.0, 0.05, 0.0, 0.02, 0.0, 0.0])
        r1 = recenter(ScaledSurface(LModel("L1"), 1.0, B), g)
        r2 = recenter(ScaledSurface(LModel("L1"), 1.0, B + b2), g)
        np.testing.assert_allclose(r2.b - r1.b, b2, atol=1e-10)
        r3 = recenter(ScaledSurface(LModel("L1"), 1.0, B - r1.b), g)
        assert np.linalg.norm(r3.b) < 1e-10

    def test_raw_varifold(self, far_grid):
        V = sample_model("L1", plane_radius_for_ball(20.0), 300, 64, b=B)
        np.testing.assert_allclose(recenter(V, far_grid, max_iter=3).b, B, atol=5e-3)
