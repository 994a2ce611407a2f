import math

import numpy as np
import pytest
from django.test import SimpleTestCase

from carleman.domain.errors import ConditionBViolation, InvalidArgument, VanishingFieldError
from carleman.domain.field import (
    ConstantField,
    DirectionCone,
    PolarAngleField,
    RadialPotentialField,
    RotationField,
    ScalarCoefficient,
    ScaledField,
    SourceFactor,
    TabulatedField,
    VectorField,
    check_nonvanishing,
    divergence_sup,
    find_direction_cone,
    sample_points,
    sup_norm,
    uniform_cone_margin,
    winding_diagnosis,
)
from carleman.domain.geometry import Annulus, Disk, Rectangle, build_annulus_angular_partition

POINTS = np.array([[1.0, 0.0], [0.0, 2.0], [-1.5, 0.5]])


class VectorFieldTests(SimpleTestCase):
    def test_affine_families(self):
        np.testing.assert_allclose(ConstantField(1.0, 2.0)(POINTS), [[1.0, 2.0]] * 3)
        np.testing.assert_allclose(RotationField()(POINTS), [[0.0, 1.0], [-2.0, 0.0], [-0.5, -1.5]])
        np.testing.assert_allclose(RadialPotentialField()(POINTS), 2.0 * POINTS)
        np.testing.assert_allclose(RotationField().divergence(POINTS), 0.0)
        np.testing.assert_allclose(RadialPotentialField().divergence(POINTS), 4.0)

    def test_negated_field(self):
        field = ConstantField(1.0, -1.0).negated()
        self.assertIsInstance(field, ScaledField)
        np.testing.assert_allclose(field(POINTS[:1]), [[-1.0, 1.0]])

    def test_polar_angle_field_is_unit(self):
        field = PolarAngleField(2, amplitude=0.3, mode=2)
        pts = Annulus(1.0, 2.0).sample(8).points
        np.testing.assert_allclose(np.hypot(*field(pts).T), 1.0)

    def test_polar_angle_rotation_direction(self):
        # m = 1 sem perturbação: H(x) = x^⊥/|x|
        field = PolarAngleField(1)
        np.testing.assert_allclose(field(np.array([[2.0, 0.0]])), [[0.0, 1.0]], atol=1e-12)

    def test_polar_angle_validation(self):
        with self.assertRaises(InvalidArgument):
            PolarAngleField(1.5)
        with self.assertRaises(InvalidArgument):
            PolarAngleField(1, p=lambda t: 0.5 * t, dp=lambda t: 0.5 + 0.0 * t)
        with self.assertRaises(InvalidArgument):
            PolarAngleField(1, p=lambda t: t)

    def test_tabulated_field_from_csv(self):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "field.csv"
            lines = ["x,y,H1,H2"]
            for x in (0.0, 0.5, 1.0):
                for y in (0.0, 1.0):
                    lines.append(f"{x},{y},{1.0 + x},{y}")
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            field = TabulatedField.from_csv(path)
        np.testing.assert_allclose(field(np.array([[0.25, 0.5]])), [[1.25, 0.5]])
        np.testing.assert_allclose(field.divergence(np.array([[0.25, 0.5]])), [2.0])

    def test_tabulated_field_requires_columns(self):
        import tempfile
        from pathlib import Path

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.csv"
            path.write_text("x,y,U\n0,0,1\n", encoding="utf-8")
            with self.assertRaises(InvalidArgument):
                TabulatedField.from_csv(path)


class NonvanishingTests(SimpleTestCase):
    def test_delta0_on_annulus(self):
        delta0 = check_nonvanishing(RotationField(), Annulus(1.0, 2.0), 16)
        self.assertAlmostEqual(delta0, 1.0, places=12)

    def test_rotation_vanishes_at_disk_center(self):
        with self.assertRaises(VanishingFieldError) as ctx:
            check_nonvanishing(RotationField(), Disk(1.0), 8)
        np.testing.assert_allclose(ctx.exception.point, [0.0, 0.0], atol=1e-12)

    def test_norms(self):
        self.assertAlmostEqual(sup_norm(RotationField(), Annulus(1.0, 2.0), 16), 2.0)
        self.assertAlmostEqual(divergence_sup(RadialPotentialField(), Annulus(1.0, 2.0), 16), 4.0)


class DirectionConeTests(SimpleTestCase):
    def test_constant_field_cone(self):
        cone = find_direction_cone(ConstantField(1.0, 0.0), Rectangle(), 16)
        self.assertIsNotNone(cone)
        np.testing.assert_allclose(cone.vector, [1.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(cone.delta1, 1.0)
        self.assertAlmostEqual(cone.width, 0.0)

    def test_rotation_has_no_cone_on_annulus(self):
        self.assertIsNone(find_direction_cone(RotationField(), Annulus(1.0, 2.0), 16))

    def test_rotation_has_cone_on_quarter_sectors(self):
        partition = build_annulus_angular_partition(
            1.0, 2.0, [0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi]
        )
        for sid in partition.ids:
            cone = find_direction_cone(PolarAngleField(1), partition.subdomain(sid), 16)
            self.assertIsNotNone(cone)
            self.assertEqual(cone.subdomain, sid)
            self.assertGreater(cone.delta1, 0.7)

    def test_uniform_margin_reports_missing_subdomain(self):
        cone = DirectionCone((1.0, 0.0), 0.5, 0.1)
        self.assertAlmostEqual(uniform_cone_margin([cone, DirectionCone((0.0, 1.0), 0.25, 0.2)]), 0.25)
        with self.assertRaises(ConditionBViolation) as ctx:
            uniform_cone_margin([cone, None], [3, 7])
        self.assertEqual(ctx.exception.subdomain, 7)


class CoefficientTests(SimpleTestCase):
    def test_scalar_coefficient_bound(self):
        p = ScalarCoefficient(1.0, 1.0, 0.0)
        self.assertAlmostEqual(p.measured_bound(Rectangle(), 8), 2.0)
        self.assertAlmostEqual(ScalarCoefficient(1.0, 1.0, 0.0, bound=3.0).certified_bound(Rectangle(), 8), 3.0)
        with self.assertRaises(InvalidArgument):
            ScalarCoefficient(1.0, 1.0, 0.0, bound=1.5).certified_bound(Rectangle(), 8)
        self.assertTrue(ScalarCoefficient().is_zero)

    def test_source_factor(self):
        R = SourceFactor(c0=1.0, d1=1.0)
        pts = np.array([[0.5, 0.0]])
        np.testing.assert_allclose(R(pts, 2.0), [2.0])
        np.testing.assert_allclose(R.dt(pts), [0.5])
        rho, point = SourceFactor(c0=0.0, c1=1.0).rho_min(Rectangle(), 8)
        self.assertEqual(rho, 0.0)
        self.assertAlmostEqual(point[0], 0.0)


@pytest.mark.parametrize(
    "m, amplitude, expected",
    [(1, 0.0, False), (1, 2.0, True), (0, 0.0, True), (2, 0.0, True)],
)
def test_winding_diagnosis(m, amplitude, expected):
    diagnosis = winding_diagnosis(PolarAngleField(m, amplitude=amplitude))
    assert diagnosis.loop_free_expected is expected
    if m == 1 and amplitude:
        assert diagnosis.crossing is not None
        assert diagnosis.q_min < diagnosis.crossing < diagnosis.q_max


# =============================================================================
# Cones de direção: oráculo de força bruta e equivariância por rotação
# =============================================================================

ANNULUS = Annulus(1.0, 2.0)


def _sector(n_sectors, sid=1):
    angles = np.linspace(0.0, 2 * math.pi, n_sectors + 1)
    return build_annulus_angular_partition(1.0, 2.0, angles.tolist()).subdomain(sid)


def _rotation(alpha):
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, -s], [s, c]])


class _RotatedField(VectorField):
    """x ↦ Q H(Qᵀx)."""

    name = "rotated"

    def __init__(self, base, alpha):
        self.base = base
        self.matrix = _rotation(alpha)

    def __call__(self, points):
        return self.base(np.asarray(points) @ self.matrix) @ self.matrix.T

    def divergence(self, points):
        return self.base.divergence(np.asarray(points) @ self.matrix)


class _RotatedRegion:
    def __init__(self, region, alpha):
        self.region = region
        self.id = getattr(region, "id", None)
        self.matrix = _rotation(alpha)

    def closure_points(self, density):
        return sample_points(self.region, density) @ self.matrix.T


def _best_margin(field, region, density, directions=3600):
    """max_v min_x (H·v) sobre uma grade de direções."""
    angles = np.linspace(0.0, 2 * math.pi, directions, endpoint=False)
    grid = np.column_stack([np.cos(angles), np.sin(angles)])
    margins = (field(sample_points(region, density)) @ grid.T).min(axis=0)
    return float(margins.max())


CONE_CASES = [
    pytest.param(ConstantField(1.0, 0.5), Rectangle(), id="constant-square"),
    pytest.param(RotationField(), ANNULUS, id="rotation-annulus"),
    pytest.param(RadialPotentialField(), ANNULUS, id="radial-annulus"),
    pytest.param(RotationField(), _sector(4), id="rotation-quarter"),
    pytest.param(RotationField(), _sector(3, 2), id="rotation-third"),
    pytest.param(PolarAngleField(0), ANNULUS, id="polar-m0-annulus"),
    pytest.param(PolarAngleField(1), ANNULUS, id="polar-m1-annulus"),
    pytest.param(PolarAngleField(1), _sector(4, 3), id="polar-m1-quarter"),
    pytest.param(PolarAngleField(2), _sector(8, 5), id="polar-m2-eighth"),
]


@pytest.mark.parametrize("field, region", CONE_CASES)
def test_cone_absent_iff_no_direction_has_positive_margin(field, region):
    cone = find_direction_cone(field, region, 12)
    best = _best_margin(field, region, 12)
    assert (cone is None) == (best <= 0.0)
    if cone is not None:
        # o bissetor nunca supera o melhor v (erro da grade ~ π/3600·max|H|)
        assert cone.delta1 <= best + 2e-3
        dense = field(sample_points(region, 40)) @ cone.vector
        assert dense.min() >= cone.delta1 - 1e-2


def test_quarter_sector_margin_matches_brute_force():
    cone = find_direction_cone(RotationField(), _sector(4), 16)
    assert cone.delta1 == pytest.approx(_best_margin(RotationField(), _sector(4), 16), abs=1e-3)
    assert cone.delta1 == pytest.approx(math.sqrt(0.5), abs=1e-9)
    np.testing.assert_allclose(cone.vector, [-math.sqrt(0.5), math.sqrt(0.5)], atol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("field, region", CONE_CASES)
def test_cone_is_rotation_equivariant(field, region, alpha):
    cone = find_direction_cone(field, region, 12)
    turned = find_direction_cone(_RotatedField(field, alpha), _RotatedRegion(region, alpha), 12)
    assert (cone is None) == (turned is None)
    if cone is None:
        return
    np.testing.assert_allclose(turned.vector, _rotation(alpha) @ cone.vector, atol=1e-8)
    assert turned.delta1 == pytest.approx(cone.delta1, abs=1e-8)
    assert turned.width == pytest.approx(cone.width, abs=1e-8)
