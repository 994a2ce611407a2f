import math

import numpy as np
import pytest
from django.test import SimpleTestCase

from carleman.domain.errors import SourceFactorViolation, InvalidArgument
from carleman.domain.field import ConstantField, RotationField, SourceFactor, find_direction_cone
from carleman.domain.geometry import Annulus, Rectangle
from carleman.domain.weight import build_condition_A_weight, build_general_weight, make_potential
from transport.runners import InlineRunner
from transport.usecases.ensembles import (
    FAIL,
    NOT_APPLICABLE,
    PASS,
    EnsembleStudy,
    LevelSummary,
    MemberResult,
    level_sizes,
    member_bump,
    safe_ratio,
)
from transport.usecases.inverse_source import SourceProblem, differentiated_consistency, source_member, source_study
from transport.usecases.observability import (
    ObservabilityProblem,
    minimal_time_report,
    observability_member,
    observability_study,
    profile_boundary_norms,
)
from transport.usecases.reconstruction import (
    SourceToTraceMap,
    gradient_check,
    reconstruct_f_least_squares,
    select_lambda_discrepancy,
    synthesize_observation,
)

FIELD = ConstantField(1.0, 0.0)


def _source_problem(R=None, T=1.5):
    return SourceProblem(Rectangle(), FIELD, None, R or SourceFactor(c0=1.0), T, seed=7)


def _level(n, ratios):
    return LevelSummary(n, 1.0 / n, [MemberResult(k, n, 1.0, 1.0 / r, r) for k, r in enumerate(ratios)])


class EnsembleHelpersTests(SimpleTestCase):
    def test_safe_ratio(self):
        self.assertEqual(safe_ratio(0.0, 0.0), 0.0)
        self.assertEqual(safe_ratio(1.0, 0.0), math.inf)
        self.assertAlmostEqual(safe_ratio(1.0, 4.0), 0.25)

    def test_level_sizes_double(self):
        self.assertEqual(level_sizes(8, 3), [8, 16, 32])
        self.assertEqual(level_sizes(8, 0), [8])

    def test_member_bump_depends_only_on_seed_and_index(self):
        square = Rectangle()
        self.assertEqual(member_bump(square, 7, 3), member_bump(square, 7, 3))
        self.assertNotEqual(member_bump(square, 7, 3), member_bump(square, 7, 4))

    def test_member_result_round_trip(self):
        member = MemberResult(2, 16, 1.0, 0.5, 2.0, "m2", {"boundary": 0.4})
        self.assertEqual(MemberResult.from_dict(member.as_dict()), member)

    def test_study_verdicts(self):
        stable = EnsembleStudy("observability", [_level(8, [2.0, 1.0]), _level(16, [2.2, 1.0])])
        self.assertAlmostEqual(stable.drift, 0.1)
        self.assertEqual(stable.verdict, PASS)

        drifting = EnsembleStudy("observability", [_level(8, [2.0]), _level(16, [4.0]), _level(32, [8.0])])
        self.assertEqual(drifting.verdict, FAIL)
        self.assertTrue(drifting.failure_detected)
        self.assertEqual(drifting.growth, [2.0, 2.0])

        short = EnsembleStudy("observability", [_level(8, [2.0])], applicable=False)
        self.assertEqual(short.verdict, NOT_APPLICABLE)

        degenerate = EnsembleStudy("inverse_source", [_level(8, [math.inf])], applicable=False)
        self.assertEqual(degenerate.verdict, FAIL)
        self.assertIsNotNone(degenerate.witness)


class ObservabilityTests(SimpleTestCase):
    def test_zero_initial_data_gives_zero_ratio(self):
        problem = ObservabilityProblem(Rectangle(), FIELD, None, 2.0, seed=1)
        member = observability_member(problem, {"index": 0, "n": 4, "scale": 0.0})
        self.assertEqual(member["ratio"], 0.0)
        self.assertEqual(member["numerator"], 0.0)

    def test_unit_initial_norm(self):
        problem = ObservabilityProblem(Rectangle(), FIELD, None, 2.0, seed=1)
        member = observability_member(problem, {"index": 0, "n": 8})
        self.assertAlmostEqual(member["numerator"], 1.0)
        self.assertGreater(member["denominator"], 0.0)
        self.assertEqual(member["label"], "m0")

    def test_minimal_time_closed_form(self):
        square = Rectangle()
        cone = find_direction_cone(FIELD, square, 16)
        weight = build_condition_A_weight(square, FIELD, cone, 0.5)
        report = minimal_time_report(weight, 12.0, cone=cone, domain=square, field=FIELD)
        self.assertAlmostEqual(report.closed_form, 4.0 * math.sqrt(2.0))
        self.assertTrue(report.applicable)
        self.assertIsNone(minimal_time_report(weight, 12.0).closed_form)

    def test_ratio_is_invariant_under_scaling(self):
        problem = ObservabilityProblem(Rectangle(), FIELD, None, 2.0, seed=1)
        members = [observability_member(problem, {"index": 2, "n": 8, "scale": k}) for k in (0.5, 1.0, 7.0)]
        for k, member in zip((0.5, 1.0, 7.0), members):
            self.assertAlmostEqual(member["numerator"], k)
            self.assertAlmostEqual(member["ratio"], members[1]["ratio"], delta=1e-10 * members[1]["ratio"])

    def test_unknown_profile(self):
        problem = ObservabilityProblem(Rectangle(), FIELD, None, 1.0, initial_profile="annulus_bubble")
        with self.assertRaises(InvalidArgument):
            problem.initial_data({"index": 0, "profile": "annulus_bubble"})
        with self.assertRaises(InvalidArgument):
            problem.initial_data({"index": 0, "profile": "ring"})


def test_rotation_bubble_loses_observability_under_refinement():
    annulus = Annulus(1.0, 2.0)
    field = RotationField()
    weight = build_general_weight(annulus, field, make_potential("squared_norm"), 1.0, force=True)
    problem = ObservabilityProblem(annulus, field, None, 1.0, initial_profile="annulus_bubble")
    study, report = observability_study(problem, weight, n=8, n_ensemble=0, runner=InlineRunner(), levels=3)

    assert [level.n for level in study.levels] == [8, 16, 32]
    # o perfil é estacionário e o traço no bordo cai como h
    assert study.notes["final_drift"] < 1e-10
    assert study.failure_detected
    norms = profile_boundary_norms(study)
    assert norms[0] > norms[1] > norms[2] > 0
    assert not report.applicable
    assert study.verdict == FAIL


class SourceStudyTests(SimpleTestCase):
    def test_zero_source_has_zero_sigma(self):
        member = source_member(_source_problem(), {"index": 0, "n": 4, "scale": 0.0})
        self.assertEqual(member["ratio"], 0.0)

    def test_unit_source_norm(self):
        member = source_member(_source_problem(), {"index": 1, "n": 8})
        self.assertAlmostEqual(member["numerator"], 1.0)
        self.assertGreater(member["denominator"], 0.0)
        self.assertTrue(math.isfinite(member["ratio"]))

    def test_sigma_is_invariant_under_scaling(self):
        problem = _source_problem()
        members = [source_member(problem, {"index": 1, "n": 8, "scale": k}) for k in (0.5, 1.0, 7.0)]
        for k, member in zip((0.5, 1.0, 7.0), members):
            self.assertAlmostEqual(member["numerator"], k)
            self.assertAlmostEqual(member["ratio"], members[1]["ratio"], delta=1e-10 * members[1]["ratio"])

    def test_vanishing_factor_is_rejected(self):
        problem = _source_problem(R=SourceFactor(c0=0.0, d0=1.0))
        with self.assertRaises(SourceFactorViolation):
            source_study(problem, None, n=4, n_ensemble=2, runner=InlineRunner())
        with self.assertRaises(SourceFactorViolation):
            SourceToTraceMap(problem, 4)

    def test_inline_study(self):
        study = source_study(_source_problem(), None, n=4, n_ensemble=2, runner=InlineRunner(), levels=2)
        self.assertEqual([level.n for level in study.levels], [4, 8])
        self.assertTrue(all(len(level.members) == 2 for level in study.levels))
        self.assertTrue(all(math.isfinite(c) and c > 0 for c in study.constants))
        self.assertEqual(study.notes["rho_min"], 1.0)
        self.assertIn(study.verdict, (PASS, FAIL))

    def test_empty_ensemble(self):
        with self.assertRaises(InvalidArgument):
            source_study(_source_problem(), None, n=4, n_ensemble=0, runner=InlineRunner())

    def test_differentiated_consistency_is_finite(self):
        problem = _source_problem(R=SourceFactor(c0=1.0, d1=1.0))
        mesh, _, _ = problem.discretize(8)
        gap = differentiated_consistency(problem, problem.source_cells({"index": 0}, mesh), 8)
        self.assertTrue(math.isfinite(gap))
        self.assertGreaterEqual(gap, 0.0)


class ReconstructionTests(SimpleTestCase):
    def setUp(self):
        self.problem = _source_problem(R=SourceFactor(c0=1.0, d1=1.0))
        self.A = SourceToTraceMap(self.problem, 4)
        self.f_true = self.problem.source_cells({"index": 0}, self.A.mesh)

    def test_map_is_linear(self):
        rng = np.random.default_rng(0)
        f, g = rng.normal(size=(2, self.A.mesh.n_cells))
        np.testing.assert_allclose(self.A.apply(2.0 * f - g), 2.0 * self.A.apply(f) - self.A.apply(g), atol=1e-10)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(1)
        f = rng.normal(size=self.A.mesh.n_cells)
        data = rng.normal(size=(self.A.grid.times.size, self.A.mesh.n_boundary))
        lhs = float(np.sum(self.A.apply(f) * data))
        rhs = float(np.dot(f, self.A.adjoint(data)))
        self.assertAlmostEqual(lhs, rhs, delta=1e-9 * max(1.0, abs(lhs)))

    def test_gradient_check(self):
        observed, _ = synthesize_observation(self.A, self.f_true)
        check = gradient_check(self.A, observed, lam=1e-3, directions=5)
        self.assertTrue(check.passed(), check.errors)
        self.assertEqual(check.directions, 5)

    def test_least_squares_reduces_residual(self):
        observed, noise = synthesize_observation(self.A, self.f_true)
        self.assertEqual(noise, 0.0)
        result = reconstruct_f_least_squares(
            self.problem, observed, n=4, f_true=self.f_true, max_iters=50, operator=self.A
        )
        self.assertLess(result.residual_norm, self.A.data_norm(observed))
        self.assertTrue(result.history)
        self.assertIsNotNone(result.relative_error)

    def test_noise_level_is_relative(self):
        clean, _ = synthesize_observation(self.A, self.f_true)
        noisy, noise = synthesize_observation(self.A, self.f_true, noise=0.05, seed=3)
        self.assertAlmostEqual(noise, 0.05 * self.A.data_norm(clean))
        self.assertAlmostEqual(self.A.data_norm(noisy - clean), noise)

    def test_discrepancy_picks_from_grid(self):
        observed, noise = synthesize_observation(self.A, self.f_true, noise=0.05, seed=3)
        result = select_lambda_discrepancy(
            self.problem, observed, noise, n=4, lambdas=[1e-2, 1e-4], max_iters=50
        )
        self.assertIn(result.lam, (1e-2, 1e-4))

    def test_invalid_inputs(self):
        observed, _ = synthesize_observation(self.A, self.f_true)
        with self.assertRaises(InvalidArgument):
            reconstruct_f_least_squares(self.problem, observed, n=4, lam=-1.0, operator=self.A)
        with self.assertRaises(InvalidArgument):
            reconstruct_f_least_squares(self.problem, observed[:-1], n=4, operator=self.A)


@pytest.mark.slow
def test_noiseless_reconstruction_recovers_source():
    problem = _source_problem(R=SourceFactor(c0=1.0, d1=1.0), T=2.0)
    A = SourceToTraceMap(problem, 6)
    f_true = problem.source_cells({"index": 0}, A.mesh)
    observed, _ = synthesize_observation(A, f_true)
    result = reconstruct_f_least_squares(problem, observed, n=6, f_true=f_true, max_iters=2000, operator=A)
    assert result.relative_error < 0.1
