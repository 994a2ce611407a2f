"""
Estudo de observabilidade: ‖u(·,0)‖_{L²(Ω)} ≤ C‖u‖_{L²(∂Ω×(0,T))} para soluções
com fonte e entrada nulas, medido sobre um ensemble de dados iniciais e
comparado entre refinamentos de malha.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Any

from carleman.domain.errors import InvalidArgument
from carleman.domain.field import DirectionCone, ScalarCoefficient, VectorField, sup_norm
from carleman.domain.geometry import Annulus, Domain
from carleman.domain.weight import CarlemanWeight, GeneralWeight, horizon_constants

from ..domain.mesh import Mesh, TimeGrid, UpwindOperator, assemble_upwind, build_mesh
from ..domain.solver import norms, solve_forward
from .carleman_verify import AnnulusProfile, AnalyticTestFunction
from .ensembles import EnsembleStudy, finish, level_sizes, member_bump, run_levels, safe_ratio

logger = logging.getLogger(__name__)

__all__ = [
    "INITIAL_PROFILES",
    "ObservabilityProblem",
    "MinimalTimeReport",
    "observability_member",
    "observability_study",
    "minimal_time_report",
    "profile_boundary_norms",
]


def _annulus_bubble(domain: Domain) -> AnalyticTestFunction:
    if not isinstance(domain, Annulus):
        raise InvalidArgument("Perfil annulus_bubble exige domínio anular")
    return AnnulusProfile(domain.r_in, domain.r_out)


INITIAL_PROFILES = {"annulus_bubble": _annulus_bubble}


@dataclass
class ObservabilityProblem:
    domain: Domain
    field: VectorField
    p: ScalarCoefficient | None
    T: float
    seed: int = 0
    cfl_max: float = 0.9
    max_recorded: int = 256
    initial_profile: str | None = None
    _cache: dict[int, tuple[Mesh, UpwindOperator, TimeGrid]] = dc_field(default_factory=dict, repr=False)

    def discretize(self, n: int) -> tuple[Mesh, UpwindOperator, TimeGrid]:
        if n not in self._cache:
            mesh = build_mesh(self.domain, n)
            op = assemble_upwind(mesh, self.field)
            self._cache[n] = (mesh, op, TimeGrid.for_operator(op, self.T, self.cfl_max))
        return self._cache[n]

    def initial_data(self, job: dict[str, Any]) -> AnalyticTestFunction:
        profile = job.get("profile")
        if profile:
            try:
                return INITIAL_PROFILES[profile](self.domain)
            except KeyError as exc:
                raise InvalidArgument(f"Perfil inicial desconhecido: {profile!r}") from exc
        return member_bump(self.domain, self.seed, int(job["index"]))


def observability_member(problem: ObservabilityProblem, job: dict[str, Any]) -> dict[str, Any]:
    """Um membro: u0 com norma L² unitária (vezes `scale`), F = 0, g = 0."""
    n = int(job["n"])
    mesh, op, grid = problem.discretize(n)
    shape = problem.initial_data(job)
    u0 = shape.value(mesh.centroids, 0.0)
    norm0 = mesh.l2_norm(u0)
    if norm0 > 0:
        u0 = u0 / norm0
    u0 = float(job.get("scale", 1.0)) * u0

    solution = solve_forward(
        problem.field, problem.p, None, u0, None, mesh, grid,
        cfl_max=problem.cfl_max, max_recorded=problem.max_recorded, operator=op,
    )
    measured = norms(solution)
    drift = mesh.l2_norm(solution.final - u0)
    extra = {
        "boundary_plus": measured.boundary_plus,
        "boundary_minus": measured.boundary_minus,
        "final_drift": safe_ratio(drift, measured.initial) if measured.initial > 0 else 0.0,
    }
    return {
        "index": int(job["index"]),
        "n": n,
        "numerator": measured.initial,
        "denominator": measured.boundary,
        "ratio": safe_ratio(measured.initial, measured.boundary),
        "label": shape.describe(),
        "extra": extra,
    }


@dataclass(frozen=True)
class MinimalTimeReport:
    T: float
    T0: float
    mu: float
    closed_form: float | None = None

    @property
    def applicable(self) -> bool:
        return self.mu > 0

    def as_dict(self) -> dict[str, float | None]:
        return {"T": self.T, "T0": self.T0, "mu": self.mu, "closed_form": self.closed_form}


def minimal_time_report(
    weight: CarlemanWeight | GeneralWeight,
    T: float,
    *,
    cone: DirectionCone | None = None,
    domain: Domain | None = None,
    field: VectorField | None = None,
    density: float = 32.0,
) -> MinimalTimeReport:
    """
    T₀ = (max d − min d)/β do peso e, com dados da condição A, o limiar fechado
    2R(δ₁ + ‖H‖)/δ₁².
    """
    horizon = horizon_constants(weight, T, density=density)
    closed = None
    if cone is not None and domain is not None and field is not None:
        R = domain.radius_bound
        H_norm = sup_norm(field, domain, density)
        closed = 2.0 * R * (cone.delta1 + H_norm) / cone.delta1**2
    return MinimalTimeReport(horizon.T, horizon.T0, horizon.mu, closed)


def observability_study(
    problem: ObservabilityProblem,
    weight: CarlemanWeight | GeneralWeight,
    *,
    n: int,
    n_ensemble: int,
    runner,
    levels: int = 2,
    drift_tol: float = 0.25,
    failure_growth: float = 1.8,
    density: float = 32.0,
) -> tuple[EnsembleStudy, MinimalTimeReport]:
    if n_ensemble < 0:
        raise InvalidArgument("Tamanho do ensemble deve ser >= 0")
    report = minimal_time_report(weight, problem.T, density=density)
    if not report.applicable:
        logger.warning(
            "T=%.4g não excede T₀=%.4g: veredito limitado a NOT-APPLICABLE", problem.T, report.T0
        )

    extra_jobs = []
    if problem.initial_profile:
        extra_jobs.append({"index": 0, "profile": problem.initial_profile})

    sizes = level_sizes(n, levels)
    summaries = run_levels(
        "observability",
        runner,
        sizes,
        n_ensemble,
        lambda job: observability_member(problem, job),
        h_of=lambda k: problem.discretize(k)[0].h,
        extra_jobs=extra_jobs,
    )
    study = EnsembleStudy(
        "observability",
        summaries,
        drift_tol=drift_tol,
        failure_growth=failure_growth,
        applicable=report.applicable,
    )
    if problem.initial_profile:
        study.notes["final_drift"] = float(
            max(level.members[0].extra.get("final_drift", 0.0) for level in summaries)
        )
    study.notes["T0"] = report.T0
    study.notes["mu"] = report.mu
    return finish(study), report


def profile_boundary_norms(study: EnsembleStudy) -> list[float]:
    """Norma de bordo do perfil inicial (membro 0) em cada nível."""
    return [level.members[0].denominator for level in study.levels if level.members]

