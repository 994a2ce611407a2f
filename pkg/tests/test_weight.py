import math

import numpy as np
import pytest
from django.test import SimpleTestCase

from carleman.domain.errors import (
    CertificationError,
    ConditionAViolation,
    InvalidArgument,
    InvalidState,
)
from carleman.domain.field import (
    ConstantField,
    RadialPotentialField,
    RotationField,
    find_direction_cone,
    sup_norm,
)
from carleman.domain.geometry import Annulus, Rectangle, build_rectangle_strip_partition, trivial_partition
from carleman.domain.stream_graph import assign_radii, build_graph
from carleman.domain.weight import (
    build_condition_A_weight,
    build_general_weight,
    build_piecewise_weight,
    build_potential_weight,
    compute_s1,
    horizon_constants,
    interface_gaps,
    make_potential,
    verify_interface_positivity,
)

SQRT2 = math.sqrt(2.0)


def _piecewise(partition, field, density=32.0, beta=None):
    cones = {sid: find_direction_cone(field, partition.subdomain(sid), density) for sid in partition.ids}
    graph = build_graph(partition, field, density)
    delta = min(cone.delta1 for cone in cones.values())
    radii = assign_radii(
        graph,
        R=partition.domain.radius_bound,
        H_norm=sup_norm(field, partition.domain, density),
        delta=delta,
    )
    return build_piecewise_weight(partition, field, cones, radii, graph, beta, density=density)


class ConditionAWeightTests(SimpleTestCase):
    def setUp(self):
        self.square = Rectangle()
        self.field = ConstantField(1.0, 0.0)
        self.cone = find_direction_cone(self.field, self.square, 16)
        self.weight = build_condition_A_weight(self.square, self.field, self.cone, 0.5)
        self.r = (2.0 * SQRT2 * 1.0 + 0.5) / 2.0 * 1.1

    def test_shift_radius(self):
        self.assertAlmostEqual(self.weight.potential.r, self.r)
        self.assertEqual(tuple(self.weight.potential.v), (1.0, 0.0))
        self.assertTrue(self.weight.certified)

    def test_drift_lower_bound(self):
        # B = 2(x₁ + r) − β, mínimo na face de entrada x₁ = 0
        self.assertAlmostEqual(self.weight.delta3, 2.0 * self.r - 0.5)
        np.testing.assert_allclose(self.weight.drift(np.array([[0.5, 0.3]])), [2.0 * (0.5 + self.r) - 0.5])

    def test_horizon(self):
        horizon = horizon_constants(self.weight, 12.0)
        self.assertAlmostEqual(horizon.d_min, self.r**2)
        self.assertAlmostEqual(horizon.d_max, (1.0 + self.r) ** 2 + 1.0)
        self.assertAlmostEqual(horizon.T0, 4.0 * self.r + 4.0)
        self.assertTrue(horizon.applicable)
        self.assertFalse(horizon_constants(self.weight, 10.0).applicable)
        with self.assertRaises(InvalidArgument):
            horizon_constants(self.weight, 0.0)

    def test_missing_cone(self):
        with self.assertRaises(ConditionAViolation):
            build_condition_A_weight(Annulus(1.0, 2.0), RotationField(), None, 0.5)

    def test_invalid_beta(self):
        with self.assertRaises(InvalidArgument):
            build_condition_A_weight(self.square, self.field, self.cone, -1.0)


class GeneralWeightTests(SimpleTestCase):
    def setUp(self):
        self.annulus = Annulus(1.0, 2.0)

    def test_potential_flow_weight(self):
        weight = build_potential_weight(self.annulus, RadialPotentialField(), make_potential("squared_norm"), 1.0)
        # |∇ρ|² − β = 4|x|² − 1, mínimo no círculo interno
        self.assertAlmostEqual(weight.delta3, 3.0)
        self.assertTrue(weight.certified)
        self.assertEqual(weight.s1, 0.0)

    def test_potential_weight_rejects_large_beta(self):
        with self.assertRaises(InvalidArgument):
            build_potential_weight(self.annulus, RadialPotentialField(), make_potential("squared_norm"), 5.0)

    def test_potential_weight_rejects_mismatch(self):
        with self.assertRaises(InvalidArgument):
            build_potential_weight(self.annulus, RotationField(), make_potential("squared_norm"), 1.0)

    def test_rotation_cannot_be_certified(self):
        potential = make_potential("squared_norm")
        with self.assertRaises(CertificationError) as ctx:
            build_general_weight(self.annulus, RotationField(), potential, 1.0)
        self.assertIsNotNone(ctx.exception.witness)

        forced = build_general_weight(self.annulus, RotationField(), potential, 1.0, force=True)
        self.assertFalse(forced.certified)
        self.assertTrue(forced.forced)
        self.assertAlmostEqual(forced.delta3, -1.0)

    def test_unknown_potential(self):
        with self.assertRaises(InvalidArgument):
            make_potential("cubic")


class PiecewiseWeightTests(SimpleTestCase):
    def setUp(self):
        self.partition = build_rectangle_strip_partition(Rectangle(), [0.5])
        self.weight = _piecewise(self.partition, ConstantField(1.0, 0.0))

    def test_constants(self):
        weight = self.weight
        self.assertAlmostEqual(weight.delta, 1.0)
        self.assertAlmostEqual(weight.beta, 0.5)
        self.assertGreater(weight.delta2, 0.0)
        self.assertGreater(weight.radii.radii[2], 2.0 * weight.radii.radii[1])
        for sid, value in weight.min_B.items():
            self.assertGreaterEqual(value, weight.delta, sid)
        self.assertEqual(weight.r_star, weight.radii.radii[2])

    def test_s1_formula(self):
        weight = self.weight
        ratio = (2.0 * (weight.r_star + weight.R) * weight.H_norm + weight.beta) / weight.delta
        self.assertAlmostEqual(weight.s1, math.log(ratio) / weight.delta2 * 1.1)
        self.assertEqual(compute_s1(weight, s_floor=100.0), 100.0)

    def test_interface_jump(self):
        gaps = interface_gaps(self.weight)
        self.assertEqual(list(gaps), [(1, 2)])
        self.assertGreaterEqual(gaps[(1, 2)], 0.5 * self.weight.delta2)

    def test_interface_positivity(self):
        for factor in (1.0, 5.0):
            ok, worst = verify_interface_positivity(self.weight, factor * self.weight.s1, T=2.0)
            self.assertTrue(ok, worst)
        with self.assertRaises(InvalidArgument):
            verify_interface_positivity(self.weight, 0.5 * self.weight.s1)

    def test_evaluation_by_piece(self):
        pts = np.array([[0.25, 0.5], [0.75, 0.5]])
        r1, r2 = self.weight.radii.radii[1], self.weight.radii.radii[2]
        np.testing.assert_allclose(self.weight.spatial(pts), [(0.25 + r1) ** 2 + 0.25, (0.75 + r2) ** 2 + 0.25])
        np.testing.assert_allclose(self.weight.phi(pts, 2.0), self.weight.spatial(pts) - 1.0)

    def test_beta_must_stay_below_delta(self):
        with self.assertRaises(InvalidArgument):
            _piecewise(self.partition, ConstantField(1.0, 0.0), beta=1.0)


def test_trivial_partition_has_no_interface_condition():
    weight = _piecewise(trivial_partition(Rectangle()), ConstantField(1.0, 0.0))
    assert math.isinf(weight.delta2)
    assert weight.s1 == 0.0
    assert interface_gaps(weight) == {}


def test_s1_requires_positive_gap():
    from dataclasses import replace

    weight = _piecewise(build_rectangle_strip_partition(Rectangle(), [0.5]), ConstantField(1.0, 0.0))
    with pytest.raises(InvalidState):
        compute_s1(replace(weight, delta2=0.0))
