import numpy as np
import pytest

from cifeedback import FemFunction, MeshPartition, project_initial, uniform_partition
from cifeedback.mesh import (
    CompatibilityWarning,
    dump_snapshot,
    free_node_count,
    reference_gauss_rule,
)


class TestMeshPartition:
    def test_uniform(self):
        mesh = uniform_partition(10)
        assert mesh.n_elements == 10
        assert mesh.h == pytest.approx(0.1)
        assert mesh.is_uniform

    def test_too_coarse(self):
        with pytest.raises(ValueError):
            uniform_partition(1)

    def test_must_increase(self):
        with pytest.raises(ValueError):
            MeshPartition([0.0, 0.5, 0.4, 1.0])

    def test_must_cover_unit_interval(self):
        with pytest.raises(ValueError):
            MeshPartition([0.0, 0.5, 0.9])

    def test_nonuniform_h(self):
        mesh = MeshPartition([0.0, 0.1, 0.5, 1.0])
        assert mesh.h == pytest.approx(0.5)
        assert not mesh.is_uniform

    def test_node_index(self):
        mesh = uniform_partition(10)
        assert mesh.node_index(0.3) == 3
        assert mesh.node_index(0.35) is None
        assert mesh.contains_nodes([0.0, 0.5, 1.0])

    def test_free_node_counts(self):
        mesh = uniform_partition(10)
        assert free_node_count(mesh, "mixed") == 10
        assert free_node_count(mesh, "dirichlet") == 9
        assert free_node_count(mesh, "neumann") == 11


class TestGaussRule:
    def test_exact_for_quintics(self):
        s, w = reference_gauss_rule()
        assert np.sum(w * s ** 5) == pytest.approx(1.0 / 6.0, abs=1e-15)
        assert np.sum(w) == pytest.approx(1.0)


class TestFemFunction:
    def test_coeff_length(self):
        with pytest.raises(ValueError):
            FemFunction(uniform_partition(4), "mixed", np.zeros(5))

    def test_constrained_nodes_are_zero(self):
        f = FemFunction(uniform_partition(4), "dirichlet", [1.0, 2.0, 3.0])
        assert list(f.nodal_values()) == [0.0, 1.0, 2.0, 3.0, 0.0]

    def test_eval_interpolates(self):
        f = FemFunction(uniform_partition(4), "dirichlet", [1.0, 2.0, 3.0])
        assert f.eval(0.375) == pytest.approx(1.5)

    def test_eval_outside(self):
        f = FemFunction.zeros(uniform_partition(4), "neumann")
        with pytest.raises(ValueError):
            f.eval(1.5)

    def test_arithmetic(self):
        mesh = uniform_partition(4)
        f = FemFunction(mesh, "neumann", np.arange(5.0))
        g = 2 * f - f
        assert np.array_equal(g.coeffs, f.coeffs)

    def test_incompatible_spaces(self):
        f = FemFunction.zeros(uniform_partition(4), "neumann")
        g = FemFunction.zeros(uniform_partition(4), "mixed")
        with pytest.raises(ValueError):
            f + g


class TestProjection:
    def test_reproduces_linear_functions(self):
        mesh = uniform_partition(10)
        for bc in ("neumann", "mixed"):
            y0h = project_initial(lambda x: x, mesh, bc)
            assert np.allclose(y0h.nodal_values(), mesh.nodes, atol=1e-12)

    def test_idempotent_on_fem_space(self):
        mesh = uniform_partition(12)
        rng = np.random.default_rng(3)
        for bc in ("mixed", "neumann", "dirichlet"):
            f = FemFunction(mesh, bc, rng.normal(size=free_node_count(mesh, bc)))
            again = project_initial(f, mesh, bc)
            assert np.allclose(again.coeffs, f.coeffs, rtol=0.0, atol=1e-11)

    def test_matches_least_squares(self):
        mesh = uniform_partition(8)
        xq, wq, _ = mesh.gauss_points(5)
        xq, sqrt_w = xq.ravel(), np.sqrt(wq.ravel())
        size = free_node_count(mesh, "dirichlet")
        basis = np.column_stack([FemFunction(mesh, "dirichlet", np.eye(size)[i]).eval(xq) for i in range(size)])
        expected, *_ = np.linalg.lstsq(basis * sqrt_w[:, None], xq * (1 - xq) * sqrt_w, rcond=None)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "dirichlet")
        assert np.allclose(y0h.coeffs, expected, rtol=1e-10, atol=1e-14)

    def test_second_order_in_l2(self):
        errors = []
        for N in (10, 20, 40):
            mesh = uniform_partition(N)
            y0h = project_initial(lambda x: np.sin(np.pi * x / 2), mesh, "mixed")
            xq, wq, _ = mesh.gauss_points(5)
            errors.append(np.sqrt(np.sum(wq * (np.sin(np.pi * xq / 2) - y0h.eval(xq.ravel()).reshape(xq.shape)) ** 2)))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 1.9)

    def test_incompatible_data_warns(self):
        with pytest.warns(CompatibilityWarning):
            project_initial(lambda x: 1.0, uniform_partition(10), "dirichlet")

    def test_compatible_data_is_silent(self, recwarn):
        project_initial(lambda x: x * (1 - x), uniform_partition(10), "dirichlet")
        assert not [w for w in recwarn if issubclass(w.category, CompatibilityWarning)]


class TestSnapshot:
    def test_dump_snapshot(self, tmp_path):
        f = project_initial(lambda x: x, uniform_partition(10), "neumann")
        filepath = tmp_path / "snapshot.tsv"
        dump_snapshot(f, str(filepath))
        lines = filepath.read_text().splitlines()
        assert len(lines) == 11
        x, y = (float(value) for value in lines[-1].split("\t"))
        assert x == 1.0
        assert y == pytest.approx(1.0)
