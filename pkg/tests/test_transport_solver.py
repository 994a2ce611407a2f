import math

import numpy as np
import pytest
from django.test import SimpleTestCase

from carleman.domain.errors import SourceFactorViolation, DivergenceError, GridError, InvalidArgument
from carleman.domain.field import ConstantField, RotationField, ScalarCoefficient, SourceFactor
from carleman.domain.geometry import Annulus, Disk, Rectangle
from transport.domain.mesh import TimeGrid, assemble_upwind, build_mesh
from transport.domain.solver import (
    check_energy_estimate,
    energy_report,
    norms,
    solve_differentiated,
    solve_forward,
    stencil_residual,
)

ALL_LEVELS = 100_000


def _bump(center, width):
    def values(points):
        d = points - np.asarray(center)
        return np.exp(-np.einsum("ij,ij->i", d, d) / (2.0 * width**2))

    return values


def _ones(points, t):
    return np.ones(points.shape[0])


class MeshTests(SimpleTestCase):
    def test_rectangle_mesh(self):
        mesh = build_mesh(Rectangle(), 8)
        self.assertEqual(mesh.shape, (8, 8))
        self.assertEqual(mesh.n_cells, 64)
        self.assertEqual(mesh.n_boundary, 32)
        self.assertAlmostEqual(mesh.volumes.sum(), 1.0)
        self.assertAlmostEqual(mesh.bnd_length.sum(), 4.0)

    def test_annulus_mesh(self):
        mesh = build_mesh(Annulus(1.0, 2.0), 4)
        self.assertEqual(mesh.shape, (4, math.ceil(4 * 3 * math.pi)))
        self.assertAlmostEqual(mesh.volumes.sum(), 3.0 * math.pi, places=10)
        self.assertEqual(mesh.n_boundary, 2 * mesh.shape[1])
        self.assertAlmostEqual(mesh.bnd_length.sum(), 6.0 * math.pi, places=10)

    def test_disk_mesh_has_single_boundary_ring(self):
        mesh = build_mesh(Disk(1.0), 4)
        self.assertEqual(mesh.n_boundary, mesh.shape[1])
        self.assertAlmostEqual(mesh.volumes.sum(), math.pi, places=10)

    def test_invalid_resolution(self):
        with self.assertRaises(InvalidArgument):
            build_mesh(Rectangle(), 0)

    def test_upwind_rates(self):
        op = assemble_upwind(build_mesh(Rectangle(), 16), ConstantField(1.0, 0.0))
        self.assertAlmostEqual(op.max_rate, 16.0)
        self.assertEqual(int(op.inflow.sum()), 16)
        np.testing.assert_allclose(op.D @ np.ones(op.mesh.n_cells) - op.B_in @ np.ones(op.mesh.n_boundary), 0.0, atol=1e-12)

    def test_tangential_boundary_flux_is_zero(self):
        op = assemble_upwind(build_mesh(Annulus(1.0, 2.0), 4), RotationField())
        self.assertTrue(np.all(op.bnd_flux == 0.0))
        self.assertFalse(op.inflow.any())


class TimeGridTests(SimpleTestCase):
    def test_fixed_step_ends_at_horizon(self):
        grid = TimeGrid.fixed_step(1.0, 0.3)
        np.testing.assert_allclose(grid.times, [0.0, 0.3, 0.6, 0.9, 1.0])
        self.assertEqual(grid.n_steps, 4)

    def test_cfl_violation(self):
        op = assemble_upwind(build_mesh(Rectangle(), 16), ConstantField(1.0, 0.0))
        with self.assertRaises(GridError):
            TimeGrid.for_operator(op, 1.0, 0.9, tau=0.1)
        grid = TimeGrid.for_operator(op, 1.0, 0.9)
        self.assertLessEqual(op.courant(float(grid.steps.max())), 0.9 + 1e-12)

    def test_record_indices_keep_endpoints(self):
        grid = TimeGrid.uniform(1.0, 0.01)
        idx = grid.record_indices(10)
        self.assertEqual(idx[0], 0)
        self.assertEqual(idx[-1], grid.times.size - 1)
        self.assertLessEqual(idx.size, 10)

    def test_trapezoid_weights_sum_to_horizon(self):
        grid = TimeGrid(np.array([0.0, 0.1, 0.3, 0.35, 0.8, 1.0]))
        self.assertAlmostEqual(grid.trapezoid_weights().sum(), 1.0)

    def test_derivative_matrix_is_exact_for_quadratics_inside(self):
        t = np.array([0.0, 0.1, 0.3, 0.35, 0.8, 1.0])
        Dt = TimeGrid(t).derivative_matrix()
        np.testing.assert_allclose((Dt @ t**2)[1:-1], 2.0 * t[1:-1])
        np.testing.assert_allclose(Dt @ np.ones(t.size), 0.0, atol=1e-12)


class ForwardSolverTests(SimpleTestCase):
    def setUp(self):
        self.mesh = build_mesh(Rectangle(), 16)
        self.field = ConstantField(1.0, 0.0)
        self.op = assemble_upwind(self.mesh, self.field)

    def _solve(self, T, u0, inflow=None, p=None, F=None):
        grid = TimeGrid.for_operator(self.op, T, 0.9)
        return solve_forward(
            self.field, p, F, u0, inflow, self.mesh, grid, operator=self.op, max_recorded=ALL_LEVELS
        )

    def test_zero_data_gives_zero_solution(self):
        solution = self._solve(1.0, None)
        self.assertEqual(np.abs(solution.u).max(), 0.0)
        self.assertEqual(norms(solution).as_dict(), dict.fromkeys(norms(solution).as_dict(), 0.0))

    def test_constant_state_is_steady(self):
        solution = self._solve(1.0, np.ones(self.mesh.n_cells), inflow=_ones)
        np.testing.assert_allclose(solution.u, 1.0, atol=1e-10)

    def test_inflow_front_fills_the_square(self):
        solution = self._solve(3.0, None, inflow=_ones)
        np.testing.assert_allclose(solution.final, 1.0, atol=1e-8)
        np.testing.assert_allclose(solution.trace_minus(), 1.0)

    def test_maximum_principle(self):
        solution = self._solve(1.0, _bump((0.3, 0.5), 0.1))
        self.assertGreaterEqual(solution.u.min(), -1e-14)
        self.assertLessEqual(solution.u.max(), 1.0 + 1e-14)

    def test_stencil_residual_vanishes_on_the_solution(self):
        solution = self._solve(1.0, _bump((0.3, 0.5), 0.1), inflow=_ones)
        residual = stencil_residual(solution, solution.u, solution.traces[solution.recorded])
        np.testing.assert_allclose(residual, 0.0, atol=1e-9)
        np.testing.assert_allclose(solution.residual, 0.0, atol=1e-9)

    def test_divergence_is_reported(self):
        with self.assertRaises(DivergenceError) as ctx:
            self._solve(1.0, np.ones(self.mesh.n_cells), p=ScalarCoefficient(1e300))
        self.assertEqual(ctx.exception.step, 2)


def _characteristic_error(n, velocity=(1.0, 0.5), T=0.5):
    """Erro L²(Q) contra u(x,t) = g(x − Ht), g = sin(πx₁)cos(πx₂)."""
    shift = np.asarray(velocity)

    def exact(points, t):
        moved = points - t * shift
        return np.sin(np.pi * moved[:, 0]) * np.cos(np.pi * moved[:, 1])

    field = ConstantField(*velocity)
    mesh = build_mesh(Rectangle(), n)
    op = assemble_upwind(mesh, field)
    grid = TimeGrid.for_operator(op, T, 0.9)
    solution = solve_forward(
        field, None, None, exact(mesh.centroids, 0.0), exact, mesh, grid, operator=op, max_recorded=ALL_LEVELS
    )
    weights = grid.trapezoid_weights(solution.recorded)
    sq = [mesh.integrate((u - exact(mesh.centroids, t)) ** 2) for u, t in zip(solution.u, solution.recorded_times)]
    return math.sqrt(float(np.dot(weights, sq)))


def test_upwind_converges_to_characteristic_solution():
    errors = [_characteristic_error(n) for n in (16, 32, 64)]
    orders = [math.log2(coarse / fine) for coarse, fine in zip(errors, errors[1:])]
    assert errors[-1] < errors[0]
    assert min(orders) >= 0.8, orders


def test_energy_estimate_for_rotation_on_annulus():
    mesh = build_mesh(Annulus(1.0, 2.0), 8)
    op = assemble_upwind(mesh, RotationField())
    grid = TimeGrid.for_operator(op, 1.0, 0.9)
    solution = solve_forward(RotationField(), None, None, _bump((1.5, 0.0), 0.1), None, mesh, grid, operator=op)
    ok, c_emp, cap = check_energy_estimate(energy_report(solution), M=0.0)
    assert ok
    # upwind em anel com fluxo discreto sem divergência não cria energia
    assert c_emp <= 1.0 + 1e-6
    assert cap == pytest.approx(4.0 * math.e)


class DifferentiatedSystemTests(SimpleTestCase):
    def setUp(self):
        self.mesh = build_mesh(Rectangle(), 8)
        self.field = ConstantField(1.0, 0.0)
        self.op = assemble_upwind(self.mesh, self.field)
        self.grid = TimeGrid.for_operator(self.op, 1.0, 0.9)
        self.R = SourceFactor(c0=1.0, d1=1.0)
        self.f = _bump((0.4, 0.5), 0.15)(self.mesh.centroids)

    def test_matches_direct_solve(self):
        f = self.f
        R = self.R
        direct = solve_forward(
            self.field,
            None,
            lambda pts, t: R(pts, t) * f,
            None,
            None,
            self.mesh,
            self.grid,
            operator=self.op,
            max_recorded=ALL_LEVELS,
        )
        diff = solve_differentiated(
            self.field, None, R, f, self.mesh, self.grid, operator=self.op, max_recorded=ALL_LEVELS
        )
        forward_differences = np.diff(direct.u, axis=0) / self.grid.steps[:, None]
        np.testing.assert_allclose(diff.y.u[:-1], forward_differences, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(diff.u, direct.u, atol=1e-10)
        self.assertAlmostEqual(diff.rho_min, 1.0)

    def test_vanishing_initial_factor(self):
        with self.assertRaises(SourceFactorViolation) as ctx:
            solve_differentiated(self.field, None, SourceFactor(c0=0.0, d0=1.0), self.f, self.mesh, self.grid)
        self.assertIsNotNone(ctx.exception.point)

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidArgument):
            solve_differentiated(self.field, None, self.R, np.ones(3), self.mesh, self.grid)
