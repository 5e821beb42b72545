import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import cell_average_sin
from sefv.errors import DimensionMismatch, InvalidDim, TooFewCells
from sefv.mesh import (
    Mesh,
    build_mesh,
    central_diff,
    discrete_divergence,
    discrete_laplacian,
    face_jump,
    face_mean,
    jump,
    mean,
    project,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def mesh_and_field(draw, components=0):
    d = draw(st.integers(1, 3))
    n = draw(st.integers(2, 6 if d == 3 else 9))
    mesh = Mesh(d, n, draw(st.floats(0.1, 10.0)))
    shape = ((components,) if components else ()) + mesh.shape
    return mesh, draw(arrays(float, shape, elements=finite))


class TestBuild:
    def test_one_dimensional(self):
        m = build_mesh(1, 4, 1.0)
        assert m.h == 0.25 and m.n_cells == 4

    def test_three_dimensional(self):
        m = build_mesh(3, 2, 2.0)
        assert m.h == 1.0 and m.n_cells == 8

    def test_too_few_cells(self):
        with pytest.raises(TooFewCells):
            build_mesh(2, 1, 1.0)

    @pytest.mark.parametrize("d", [0, 4])
    def test_invalid_dim(self, d):
        with pytest.raises(InvalidDim):
            build_mesh(d, 4)

    def test_bad_edge_length(self):
        with pytest.raises(ValueError):
            build_mesh(1, 4, 0.0)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_cell_geometry_and_regularity(self, d):
        m = Mesh(d, 5, 2.0)
        assert m.cell_volume == pytest.approx(m.h**d)
        assert m.cell_surface == pytest.approx(2 * d * m.h ** (d - 1))
        alpha = m.regularity_alpha
        assert alpha * m.h**d <= m.cell_volume
        assert m.cell_surface <= m.h ** (d - 1) / alpha + 1e-15

    def test_periodic_neighbours_and_row_major_order(self):
        m = Mesh(2, 3)
        assert m.ravel((0, 1)) == 1 and m.ravel((1, 0)) == 3
        assert m.neighbor(m.ravel((2, 1)), 0, 1) == m.ravel((0, 1))
        assert m.neighbor(m.ravel((0, 0)), 1, -1) == m.ravel((0, 2))
        assert all(m.ravel(m.unravel(i)) == i for i in range(m.n_cells))

    def test_centres(self):
        m = Mesh(2, 4, 2.0)
        assert m.centers.shape == (2, 4, 4)
        np.testing.assert_allclose(m.centers[0][:, 0], [0.25, 0.75, 1.25, 1.75])
        np.testing.assert_allclose(m.centers[1][0], [0.25, 0.75, 1.25, 1.75])


class TestStencils:
    def test_central_diff_hand_case(self):
        m = Mesh(1, 4, 1.0)
        w = np.array([0.0, 1.0, 0.0, 0.0])
        # (w_1 - w_3) / (2 h) at cell 0
        assert central_diff(w, m, 0)[0] == pytest.approx(2.0)

    def test_central_diff_sawtooth_interior_slope(self):
        m = Mesh(1, 10, 1.0)
        w = np.arange(10.0) * m.h * 3.0
        cd = central_diff(w, m, 0)
        np.testing.assert_allclose(cd[1:-1], 3.0)

    def test_laplacian_hand_case(self):
        m = Mesh(1, 4, 1.0)
        w = np.array([0.0, 1.0, 0.0, 0.0])
        assert discrete_laplacian(w, m)[1] == pytest.approx(-32.0)

    def test_divergence_of_cross_dependent_field_is_zero(self):
        m = Mesh(2, 8)
        x = m.centers
        field = np.stack([np.sin(2 * np.pi * x[1]), np.cos(2 * np.pi * x[0])])
        np.testing.assert_allclose(discrete_divergence(field, m), 0.0, atol=1e-13)

    def test_divergence_dimension_mismatch(self):
        m = Mesh(2, 4)
        with pytest.raises(DimensionMismatch):
            discrete_divergence(np.zeros((3, 4, 4)), m)

    def test_jump_and_mean(self):
        m = Mesh(1, 4)
        w = np.array([1.0, 3.0, 3.0, 3.0])
        assert jump(w, m, 0)[0] == 2.0 and mean(w, m, 0)[0] == 2.0
        assert face_jump(w, m, 0, 0) == 2.0
        assert face_jump(w, m, 0, 0, seen_from="L") == -2.0
        assert face_mean(w, m, 0, 0) == 2.0
        assert jump(w, m, 0)[1] == 0.0 and mean(w, m, 0)[1] == 3.0

    @given(mesh_and_field())
    def test_constants_are_annihilated(self, mf):
        mesh, w = mf
        c = np.full(mesh.shape, float(w.flat[0]))
        assert np.all(discrete_laplacian(c, mesh) == 0)
        assert np.all(central_diff(c, mesh, 0) == 0)
        vec = np.full((mesh.dim,) + mesh.shape, float(w.flat[0]))
        assert np.all(discrete_divergence(vec, mesh) == 0)

    @given(mesh_and_field(), mesh_and_field())
    def test_laplacian_self_adjoint(self, a, b):
        mesh, w = a
        v = np.resize(b[1], mesh.shape)
        lhs = np.sum(v * discrete_laplacian(w, mesh))
        rhs = np.sum(w * discrete_laplacian(v, mesh))
        scale = np.sum(np.abs(v) * np.abs(w)) / mesh.h**2 + 1e-300
        assert abs(lhs - rhs) <= 1e-12 * scale

    @given(mesh_and_field())
    def test_laplacian_telescopes(self, mf):
        mesh, w = mf
        total = np.sum(discrete_laplacian(w, mesh))
        assert abs(total) <= 1e-12 * np.sum(np.abs(w)) / mesh.h**2 + 1e-300

    @given(st.data())
    def test_divergence_telescopes(self, data):
        mesh, w = data.draw(mesh_and_field())
        m = data.draw(arrays(float, (mesh.dim,) + mesh.shape, elements=finite))
        total = np.sum(discrete_divergence(m, mesh))
        assert abs(total) <= 1e-12 * np.sum(np.abs(m)) / mesh.h + 1e-300

    def test_central_diff_order_on_projected_trig(self):
        errs = []
        hs = []
        for n in (16, 32, 64, 128):
            m = Mesh(1, n)
            avg = project(lambda x: np.sin(2 * np.pi * x[0]), m)
            exact = project(lambda x: 2 * np.pi * np.cos(2 * np.pi * x[0]), m)
            errs.append(np.max(np.abs(central_diff(avg, m, 0) - exact)))
            hs.append(m.h)
        order = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2)
        assert np.all(order >= 2 - 0.05)


class TestProjection:
    def test_constant(self):
        m = Mesh(2, 3)
        np.testing.assert_array_equal(project(lambda x: 2.5, m), 2.5)

    def test_sin_first_cell(self):
        m = Mesh(1, 4, 1.0)
        val = project(lambda x: np.sin(2 * np.pi * x[0]), m)[0]
        expected = (math.cos(0) - math.cos(math.pi / 2)) / (2 * math.pi * 0.25)
        assert val == pytest.approx(expected, rel=1e-3)
        assert expected == pytest.approx(0.63662, abs=1e-5)

    def test_matches_exact_averages(self):
        m = Mesh(1, 64)
        np.testing.assert_allclose(project(lambda x: np.sin(2 * np.pi * x[0]), m), cell_average_sin(64), atol=1e-12)

    def test_polynomials_of_degree_five_are_exact(self):
        m = Mesh(2, 3, 1.5)
        f = lambda x: x[0] ** 5 - 2 * x[1] ** 3 * x[0] ** 2 + x[1]
        total = m.integrate(project(f, m))
        L = 1.5
        exact = L**6 / 6 * L - 2 * (L**4 / 4) * (L**3 / 3) + L * L**2 / 2
        assert total == pytest.approx(exact, rel=1e-13)

    def test_vector_valued(self):
        m = Mesh(2, 4)
        v = project(lambda x: np.stack([x[0], 2 * x[1]]), m)
        assert v.shape == (2, 4, 4)
        np.testing.assert_allclose(v[0], m.centers[0], atol=1e-14)
        np.testing.assert_allclose(v[1], 2 * m.centers[1], atol=1e-14)
