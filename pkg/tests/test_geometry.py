import math

import numpy as np
import pytest
from django.test import SimpleTestCase

from carleman.domain.errors import InvalidArgument
from carleman.domain.field import ConstantField, PolarAngleField
from carleman.domain.geometry import (
    Annulus,
    Disk,
    Rectangle,
    build_annulus_angular_partition,
    build_rectangle_strip_partition,
    classify_boundary,
    propose_angular_partition,
    sample_surface,
    sample_volume,
    trivial_partition,
)

QUARTERS = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi]


class DomainTests(SimpleTestCase):
    def test_rectangle_measures(self):
        square = Rectangle(0.0, 1.0, 0.0, 1.0)
        self.assertAlmostEqual(square.area, 1.0)
        self.assertAlmostEqual(square.diameter, math.sqrt(2.0))
        self.assertAlmostEqual(square.radius_bound, math.sqrt(2.0))

    def test_degenerate_domains_are_rejected(self):
        with self.assertRaises(InvalidArgument):
            Rectangle(1.0, 0.0, 0.0, 1.0)
        with self.assertRaises(InvalidArgument):
            Annulus(2.0, 1.0)
        with self.assertRaises(InvalidArgument):
            Disk(0.0)

    def test_polar_quadrature_is_exact_for_area(self):
        annulus = Annulus(1.0, 2.0)
        self.assertAlmostEqual(annulus.sample(16).total, 3.0 * math.pi, places=10)
        disk = Disk(1.5)
        self.assertAlmostEqual(disk.sample(8).total, math.pi * 1.5**2, places=10)

    def test_boundary_length(self):
        annulus = Annulus(1.0, 2.0)
        self.assertAlmostEqual(annulus.boundary_samples(16).total, 6.0 * math.pi, places=10)
        square = Rectangle()
        self.assertAlmostEqual(sample_surface(square, 16).total, 4.0, places=12)

    def test_inner_circle_normal_points_into_the_hole(self):
        samples = Annulus(1.0, 2.0).boundary_samples(8)
        inner = np.hypot(*samples.points.T) < 1.5
        radial = samples.points[inner] / np.hypot(*samples.points[inner].T)[:, None]
        np.testing.assert_allclose(samples.normals[inner], -radial, atol=1e-12)


class PartitionTests(SimpleTestCase):
    def test_trivial_partition(self):
        partition = trivial_partition(Rectangle())
        self.assertEqual(partition.ids, [1])
        self.assertEqual(partition.interfaces, ())
        self.assertGreater(partition.tol_geom, 0.0)

    def test_angular_partition_interfaces(self):
        partition = build_annulus_angular_partition(1.0, 2.0, QUARTERS)
        self.assertEqual(len(partition), 4)
        self.assertEqual(len(partition.interfaces), 4)
        last = partition.interface(4)
        self.assertEqual((last.i, last.j), (4, 1))
        np.testing.assert_allclose(partition.interface(1).normal, [-1.0, 0.0], atol=1e-12)
        total = sum(partition.subdomain(sid).area for sid in partition.ids)
        self.assertAlmostEqual(total, 3.0 * math.pi)

    def test_angular_partition_validation(self):
        with self.assertRaises(InvalidArgument):
            build_annulus_angular_partition(1.0, 2.0, [0.0, 2 * math.pi])
        with self.assertRaises(InvalidArgument):
            build_annulus_angular_partition(1.0, 2.0, [0.1, math.pi, 2 * math.pi])
        with self.assertRaises(InvalidArgument):
            build_annulus_angular_partition(1.0, 2.0, [0.0, math.pi, math.pi, 2 * math.pi])

    def test_strip_partition(self):
        partition = build_rectangle_strip_partition(Rectangle(), [0.5])
        self.assertEqual(partition.ids, [1, 2])
        iface = partition.interface(1)
        np.testing.assert_allclose(iface.normal, [1.0, 0.0])
        self.assertAlmostEqual(iface.area, 1.0)
        with self.assertRaises(InvalidArgument):
            build_rectangle_strip_partition(Rectangle(), [1.5])

    def test_locate_breaks_ties_towards_smaller_id(self):
        partition = build_rectangle_strip_partition(Rectangle(), [0.5])
        ids = partition.locate(np.array([[0.5, 0.3], [0.75, 0.5], [2.0, 2.0]]))
        self.assertEqual(ids.tolist(), [1, 2, -1])

    def test_sample_volume_covers_every_subdomain(self):
        partition = build_annulus_angular_partition(1.0, 2.0, QUARTERS)
        samples = sample_volume(partition, 8)
        self.assertEqual(sorted(samples), [1, 2, 3, 4])
        self.assertAlmostEqual(sum(s.total for s in samples.values()), 3.0 * math.pi, places=10)

    def test_reversed_interface_flips_normal(self):
        iface = build_rectangle_strip_partition(Rectangle(), [0.5]).interface(1)
        back = iface.reversed()
        self.assertEqual((back.i, back.j), (2, 1))
        np.testing.assert_allclose(back.normal, -iface.normal)


class BoundarySplitTests(SimpleTestCase):
    def test_tangential_flux_counts_as_outflow(self):
        split = classify_boundary(Rectangle(), ConstantField(1.0, 0.0), 16)
        self.assertAlmostEqual(split.plus_length, 3.0)
        self.assertAlmostEqual(split.minus_length, 1.0)
        self.assertTrue(np.all(split.flux_minus < 0))


@pytest.mark.parametrize("m", [0, 2])
def test_proposal_is_loop_free_for_even_winding(m):
    proposal = propose_angular_partition(PolarAngleField(m), Annulus(1.0, 2.0), refine_limit=32)
    assert proposal.loop_free
    assert proposal.cones_found
    assert not proposal.flagged
    assert proposal.graph is not None


def test_proposal_flags_unavoidable_loop():
    proposal = propose_angular_partition(PolarAngleField(1), Annulus(1.0, 2.0), refine_limit=16)
    assert proposal.flagged
    assert not proposal.loop_free
    assert [n for n, _, _ in proposal.history] == [4, 8, 16]


def test_proposal_requires_polar_angle_field():
    with pytest.raises(InvalidArgument):
        propose_angular_partition(ConstantField(), Annulus(1.0, 2.0))


def _angular_distance(theta, cuts):
    diff = np.abs(np.mod(theta[:, None] - np.asarray(cuts)[None, :] + math.pi, 2 * math.pi) - math.pi)
    return diff.min(axis=1)


@pytest.mark.parametrize("tol_geom_factor", [1e-9, 1e-3])
def test_angular_partition_claims_each_point_once(tol_geom_factor):
    angles = [0.0, 0.7, 2.0, 3.5, 5.1, 2 * math.pi]
    partition = build_annulus_angular_partition(1.0, 2.0, angles, tol_geom_factor=tol_geom_factor)
    rng = np.random.default_rng(11)
    r = np.sqrt(rng.uniform(1.0, 4.0, 10_000))
    theta = rng.uniform(0.0, 2 * math.pi, 10_000)
    # faixa de tol_geom em torno dos cortes radiais (em ângulo, medida no raio interno)
    keep = _angular_distance(theta, angles[:-1]) > 2.0 * partition.tol_geom
    points = np.column_stack([r * np.cos(theta), r * np.sin(theta)])[keep]

    assert keep.sum() > 9_000
    claims = partition.claims(points)
    np.testing.assert_array_equal(claims.sum(axis=1), 1)
    np.testing.assert_array_equal(partition.locate(points), np.asarray(partition.ids)[claims.argmax(axis=1)])


@pytest.mark.parametrize("tol_geom_factor", [1e-9, 1e-3])
def test_strip_partition_claims_each_point_once(tol_geom_factor):
    cuts = [0.2, 0.45, 0.8]
    partition = build_rectangle_strip_partition(Rectangle(), cuts, tol_geom_factor=tol_geom_factor)
    rng = np.random.default_rng(12)
    points = rng.uniform(0.0, 1.0, size=(10_000, 2))
    keep = np.abs(points[:, :1] - np.asarray(cuts)[None, :]).min(axis=1) > 2.0 * partition.tol_geom
    points = points[keep]

    assert len(partition) == 4
    claims = partition.claims(points)
    np.testing.assert_array_equal(claims.sum(axis=1), 1)
    assert (partition.locate(points) > 0).all()
