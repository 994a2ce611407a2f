"""
Estabilidade do problema inverso de fonte: para F(x,t) = R(x,t) f(x), u(·,0) = 0
e entrada nula, mede σ = ‖f‖_{L²(Ω)} / ‖∂_t u‖_{L²(∂Ω×(0,T))} sobre um ensemble.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Any

import numpy as np

from carleman.domain.errors import SourceFactorViolation, InvalidArgument
from carleman.domain.field import ScalarCoefficient, SourceFactor, SpaceTimeSource, VectorField
from carleman.domain.geometry import Domain
from carleman.domain.weight import CarlemanWeight, GeneralWeight

from ..domain.mesh import Mesh, TimeGrid, UpwindOperator, assemble_upwind, build_mesh
from ..domain.solver import GridSolution, norms, solve_differentiated, solve_forward
from .ensembles import EnsembleStudy, finish, level_sizes, member_bump, run_levels, safe_ratio
from .observability import minimal_time_report

logger = logging.getLogger(__name__)

__all__ = [
    "SourceProblem",
    "source_member",
    "source_study",
    "solve_source_problem",
    "differentiated_consistency",
]


@dataclass
class SourceProblem:
    domain: Domain
    field: VectorField
    p: ScalarCoefficient | None
    R: SourceFactor
    T: float
    seed: int = 0
    cfl_max: float = 0.9
    max_recorded: int = 256
    density: float = 32.0
    tol_rho: float = 1e-12
    _cache: dict[int, tuple[Mesh, UpwindOperator, TimeGrid]] = dc_field(default_factory=dict, repr=False)

    def discretize(self, n: int) -> tuple[Mesh, UpwindOperator, TimeGrid]:
        if n not in self._cache:
            mesh = build_mesh(self.domain, n)
            op = assemble_upwind(mesh, self.field)
            self._cache[n] = (mesh, op, TimeGrid.for_operator(op, self.T, self.cfl_max))
        return self._cache[n]

    def check_rho(self) -> float:
        rho, point = self.R.rho_min(self.domain, self.density)
        if rho <= self.tol_rho:
            raise SourceFactorViolation(
                f"|R(x,0)| = {rho:.3e} em ({point[0]:.6g}, {point[1]:.6g})", point=point
            )
        return rho

    def source_cells(self, job: dict[str, Any], mesh: Mesh) -> np.ndarray:
        """f com norma L² unitária na malha, multiplicado por `scale`."""
        f = member_bump(self.domain, self.seed, int(job["index"])).value(mesh.centroids, 0.0)
        norm = mesh.l2_norm(f)
        if norm > 0:
            f = f / norm
        return float(job.get("scale", 1.0)) * f


def solve_source_problem(problem: SourceProblem, f_cells: np.ndarray, n: int) -> GridSolution:
    mesh, op, grid = problem.discretize(n)
    R = problem.R
    F = SpaceTimeSource(lambda pts, t: R(pts, t) * f_cells, name="R·f")
    return solve_forward(
        problem.field, problem.p, F, None, None, mesh, grid,
        cfl_max=problem.cfl_max, max_recorded=problem.max_recorded, operator=op,
    )


def source_member(problem: SourceProblem, job: dict[str, Any]) -> dict[str, Any]:
    n = int(job["n"])
    problem.check_rho()
    mesh, _, _ = problem.discretize(n)
    f = problem.source_cells(job, mesh)
    measured = norms(solve_source_problem(problem, f, n))
    f_norm = mesh.l2_norm(f)
    return {
        "index": int(job["index"]),
        "n": n,
        "numerator": f_norm,
        "denominator": measured.dt_boundary,
        "ratio": safe_ratio(f_norm, measured.dt_boundary),
        "label": f"f{int(job['index'])}",
        "extra": {"boundary": measured.boundary},
    }


def source_study(
    problem: SourceProblem,
    weight: CarlemanWeight | GeneralWeight | None,
    *,
    n: int,
    n_ensemble: int,
    runner,
    levels: int = 2,
    drift_tol: float = 0.25,
) -> EnsembleStudy:
    if n_ensemble < 1:
        raise InvalidArgument("Tamanho do ensemble deve ser >= 1")
    rho = problem.check_rho()
    applicable = True
    notes: dict[str, float] = {"rho_min": rho}
    if weight is not None:
        report = minimal_time_report(weight, problem.T, density=problem.density)
        applicable = report.applicable
        notes.update(T0=report.T0, mu=report.mu)

    summaries = run_levels(
        "inverse_source",
        runner,
        level_sizes(n, levels),
        n_ensemble,
        lambda job: source_member(problem, job),
        h_of=lambda k: problem.discretize(k)[0].h,
    )
    study = EnsembleStudy("inverse_source", summaries, drift_tol=drift_tol, applicable=applicable, notes=notes)
    return finish(study)


def differentiated_consistency(problem: SourceProblem, f_cells: np.ndarray, n: int) -> float:
    """
    Distância L²(Q) relativa entre ∂_t u (diferenças de u do problema direto) e
    y = ∂_t u do sistema diferenciado, nos níveis guardados.
    """
    mesh, op, grid = problem.discretize(n)
    direct = solve_source_problem(problem, f_cells, n)
    diff = solve_differentiated(
        problem.field, problem.p, problem.R, f_cells, mesh, grid,
        domain=problem.domain, density=problem.density, tol_rho=problem.tol_rho,
        cfl_max=problem.cfl_max, max_recorded=problem.max_recorded, operator=op,
    )
    times = direct.recorded_times
    dudt = np.gradient(direct.u, times, axis=0, edge_order=1)
    y = diff.y.u
    w = grid.trapezoid_weights(direct.recorded)
    err = float(np.dot(w, ((dudt - y) ** 2) @ mesh.volumes))
    ref = float(np.dot(w, (y**2) @ mesh.volumes))
    return math.sqrt(err / ref) if ref > 0 else math.sqrt(err)
