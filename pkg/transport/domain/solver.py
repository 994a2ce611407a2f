"""
Solver upwind explícito de primeira ordem para

    ∂_t u + (H·∇u) + p u = F   em Ω × (0, T),   u = g em ∂Ω₋,

o sistema diferenciado y = ∂_t u do problema de fonte, relatórios de energia
e normas discretas das soluções.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from carleman.domain.errors import SourceFactorViolation, DivergenceError, InvalidArgument
from carleman.domain.field import ScalarCoefficient, SourceFactor, SpaceTimeSource, VectorField
from carleman.domain.geometry import Domain
from core.metrics import observe_solve

from .mesh import Mesh, TimeGrid, UpwindOperator, assemble_upwind

logger = logging.getLogger(__name__)

__all__ = [
    "GridSolution",
    "DifferentiatedSolution",
    "EnergyReport",
    "SolutionNorms",
    "solve_forward",
    "solve_differentiated",
    "energy_report",
    "check_energy_estimate",
    "energy_cap",
    "norms",
    "stencil_residual",
]

CellSource = Callable[[int, float], np.ndarray]


@dataclass(frozen=True)
class GridSolution:
    """
    Solução discreta: `u` nos níveis guardados (`recorded`), traços de bordo em
    todos os níveis e o resíduo do estêncil nos níveis guardados (exceto o último).
    """

    operator: UpwindOperator
    grid: TimeGrid
    p_cells: np.ndarray
    recorded: np.ndarray
    u: np.ndarray
    traces: np.ndarray
    residual: np.ndarray
    source_sq: np.ndarray
    div_sup: float
    integral: np.ndarray | None = None

    @property
    def mesh(self) -> Mesh:
        return self.operator.mesh

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def recorded_times(self) -> np.ndarray:
        return self.grid.times[self.recorded]

    @property
    def initial(self) -> np.ndarray:
        return self.u[0]

    @property
    def final(self) -> np.ndarray:
        return self.u[-1]

    @property
    def plus(self) -> np.ndarray:
        return self.operator.outflow

    @property
    def minus(self) -> np.ndarray:
        return self.operator.inflow

    def trace_plus(self) -> np.ndarray:
        return self.traces[:, self.plus]

    def trace_minus(self) -> np.ndarray:
        return self.traces[:, self.minus]


@dataclass(frozen=True)
class DifferentiatedSolution:
    y: GridSolution
    u: np.ndarray  # u reconstruído (integral de y) nos níveis guardados
    rho_min: float


@dataclass(frozen=True)
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    boundary_plus: np.ndarray
    boundary_minus_total: float
    source_energy: float
    initial_energy: float
    T: float
    div_sup: float


@dataclass(frozen=True)
class SolutionNorms:
    initial: float
    boundary: float
    boundary_plus: float
    boundary_minus: float
    dt_boundary: float

    def as_dict(self) -> dict[str, float]:
        return {
            "initial": self.initial,
            "boundary": self.boundary,
            "boundary_plus": self.boundary_plus,
            "boundary_minus": self.boundary_minus,
            "dt_boundary": self.dt_boundary,
        }


def _cell_values(values, mesh: Mesh) -> np.ndarray:
    if values is None:
        return np.zeros(mesh.n_cells)
    if callable(values):
        return np.asarray(values(mesh.centroids), dtype=float)
    arr = np.asarray(values, dtype=float)
    if arr.shape != (mesh.n_cells,):
        raise InvalidArgument(f"Dado com forma {arr.shape}, esperado ({mesh.n_cells},)")
    return arr


def _march(
    op: UpwindOperator,
    grid: TimeGrid,
    p_cells: np.ndarray,
    u0: np.ndarray,
    source: CellSource | None,
    inflow: Callable[[np.ndarray, float], np.ndarray] | None,
    *,
    cfl_max: float,
    max_recorded: int,
    integrate: bool = False,
) -> GridSolution:
    grid.check_cfl(op, cfl_max)
    mesh = op.mesh
    times = grid.times
    recorded = grid.record_indices(max_recorded)
    is_recorded = np.zeros(times.size, dtype=bool)
    is_recorded[recorded] = True
    slot = {int(n): k for k, n in enumerate(recorded)}

    inflow_mask = op.inflow
    u_rec = np.zeros((recorded.size, mesh.n_cells))
    residual = np.zeros((max(recorded.size - 1, 0), mesh.n_cells))
    traces = np.zeros((times.size, mesh.n_boundary))
    source_sq = np.zeros(times.size)
    integral = np.zeros((recorded.size, mesh.n_cells)) if integrate else None

    def boundary_data(t: float) -> np.ndarray:
        g = np.zeros(mesh.n_boundary)
        if inflow is not None and inflow_mask.any():
            g[inflow_mask] = inflow(mesh.bnd_point[inflow_mask], t)
        return g

    def source_at(n: int, t: float) -> np.ndarray:
        return np.zeros(mesh.n_cells) if source is None else source(n, t)

    u = u0.copy()
    running = np.zeros(mesh.n_cells) if integrate else None
    started = time.perf_counter()
    for n, t in enumerate(times):
        g = boundary_data(t)
        f = source_at(n, t)
        traces[n] = np.where(inflow_mask, g, u[mesh.bnd_cell])
        source_sq[n] = mesh.integrate(f**2)
        if is_recorded[n]:
            u_rec[slot[n]] = u
            if integrate:
                integral[slot[n]] = running
        if n == times.size - 1:
            break
        tau = times[n + 1] - t
        rate = op.D @ u - op.B_in @ g + p_cells * u
        u_next = u - tau * rate + tau * f
        if not np.all(np.isfinite(u_next)):
            raise DivergenceError(f"Solução não finita no passo {n + 1}", step=n + 1)
        if is_recorded[n] and slot[n] < residual.shape[0]:
            residual[slot[n]] = (u_next - u) / tau + rate
        if integrate:
            running = running + tau * u
        u = u_next

    elapsed = time.perf_counter() - started
    observe_solve(elapsed, grid.n_steps)
    logger.debug(
        "Solve: %d células, %d passos, %.3fs", mesh.n_cells, grid.n_steps, elapsed
    )
    return GridSolution(
        operator=op,
        grid=grid,
        p_cells=p_cells,
        recorded=recorded,
        u=u_rec,
        traces=traces,
        residual=residual,
        source_sq=source_sq,
        div_sup=0.0,
        integral=integral,
    )


def solve_forward(
    field: VectorField,
    p: ScalarCoefficient | None,
    F: SpaceTimeSource | None,
    u0,
    inflow: Callable[[np.ndarray, float], np.ndarray] | None,
    mesh: Mesh,
    grid: TimeGrid,
    *,
    cfl_max: float = 0.9,
    max_recorded: int = 256,
    operator: UpwindOperator | None = None,
) -> GridSolution:
    """Esquema upwind monótono de primeira ordem; traços extraídos em todo passo."""
    op = operator or assemble_upwind(mesh, field)
    p_cells = np.zeros(mesh.n_cells) if p is None else p(mesh.centroids)
    source = None
    if F is not None:
        source = lambda n, t: F(mesh.centroids, t)  # noqa: E731
    solution = _march(
        op,
        grid,
        p_cells,
        _cell_values(u0, mesh),
        source,
        inflow,
        cfl_max=cfl_max,
        max_recorded=max_recorded,
    )
    div = float(np.abs(field.divergence(mesh.centroids)).max())
    return _with_div(solution, div)


def _with_div(solution: GridSolution, div: float) -> GridSolution:
    from dataclasses import replace

    return replace(solution, div_sup=div)


def solve_differentiated(
    field: VectorField,
    p: ScalarCoefficient | None,
    R: SourceFactor,
    f,
    mesh: Mesh,
    grid: TimeGrid,
    *,
    domain: Domain | None = None,
    density: float = 32.0,
    tol_rho: float = 1e-12,
    cfl_max: float = 0.9,
    max_recorded: int = 256,
    operator: UpwindOperator | None = None,
) -> DifferentiatedSolution:
    """
    y = ∂_t u com y(·,0) = R(·,0) f, fonte (∂_t R) f e entrada nula; devolve também
    u reconstruído por integração de y no tempo.
    """
    points = mesh.centroids if domain is None else np.vstack([mesh.centroids, domain.closure_with_boundary(density)])
    values = np.abs(R.initial(points))
    k = int(np.argmin(values))
    rho_min = float(values[k])
    if rho_min <= tol_rho:
        raise SourceFactorViolation(
            f"|R(x,0)| = {rho_min:.3e} em ({points[k, 0]:.6g}, {points[k, 1]:.6g})", point=points[k]
        )

    op = operator or assemble_upwind(mesh, field)
    f_cells = _cell_values(f, mesh)
    dR = R.dt(mesh.centroids)
    p_cells = np.zeros(mesh.n_cells) if p is None else p(mesh.centroids)
    y = _march(
        op,
        grid,
        p_cells,
        R.initial(mesh.centroids) * f_cells,
        lambda n, t: dR * f_cells,
        None,
        cfl_max=cfl_max,
        max_recorded=max_recorded,
        integrate=True,
    )
    y = _with_div(y, float(np.abs(field.divergence(mesh.centroids)).max()))
    return DifferentiatedSolution(y, y.integral, rho_min)


def stencil_residual(solution: GridSolution, values: np.ndarray, inflow_data: np.ndarray | None = None) -> np.ndarray:
    """
    Resíduo do estêncil para uma função de grade qualquer nos níveis guardados:
    (u^{k+1} − u^k)/Δt_k + D u^k − B_in g^k + p u^k.
    """
    op = solution.operator
    times = solution.recorded_times
    out = np.zeros((values.shape[0] - 1, values.shape[1]))
    for k in range(values.shape[0] - 1):
        g = np.zeros(op.mesh.n_boundary) if inflow_data is None else inflow_data[k]
        rate = op.D @ values[k] - op.B_in @ g + solution.p_cells * values[k]
        out[k] = (values[k + 1] - values[k]) / (times[k + 1] - times[k]) + rate
    return out


# ---------------------------------------------------------------------
# Energia e normas
# ---------------------------------------------------------------------


def _boundary_sq(solution: GridSolution, mask: np.ndarray | None = None) -> np.ndarray:
    lengths = solution.mesh.bnd_length if mask is None else np.where(mask, solution.mesh.bnd_length, 0.0)
    return (solution.traces**2) @ lengths


def energy_report(solution: GridSolution, F: SpaceTimeSource | None = None) -> EnergyReport:
    grid = solution.grid
    w = grid.trapezoid_weights()
    if F is not None:
        mesh = solution.mesh
        source_sq = np.array([mesh.integrate(F(mesh.centroids, t) ** 2) for t in grid.times])
    else:
        source_sq = solution.source_sq

    plus_sq = _boundary_sq(solution, solution.plus)
    minus_sq = _boundary_sq(solution, solution.minus)
    # integral cumulativa por trapézio até cada nível
    cum_plus = np.concatenate([[0.0], np.cumsum(0.5 * (plus_sq[1:] + plus_sq[:-1]) * grid.steps)])
    energy = np.array([solution.mesh.integrate(u**2) for u in solution.u])
    return EnergyReport(
        times=solution.recorded_times,
        energy=energy,
        boundary_plus=cum_plus[solution.recorded],
        boundary_minus_total=float(np.dot(w, minus_sq)),
        source_energy=float(np.dot(w, source_sq)),
        initial_energy=float(energy[0]),
        T=grid.T,
        div_sup=solution.div_sup,
    )


def energy_cap(M: float, div_sup: float, T: float, factor: float = 4.0) -> float:
    return factor * math.exp((1.0 + 2.0 * M + div_sup) * T)


def check_energy_estimate(report: EnergyReport, M: float, *, cap_factor: float = 4.0) -> tuple[bool, float, float]:
    """
    Menor C com E(t) + ‖u‖²_{∂Ω₊×(0,t)} <= C(‖F‖² + ‖u‖²_{∂Ω₋×(0,T)} + E(0)) em todo t amostrado.
    Devolve (passou, C_emp, teto).
    """
    lhs = report.energy + report.boundary_plus
    rhs = report.source_energy + report.boundary_minus_total + report.initial_energy
    cap = energy_cap(M, report.div_sup, report.T, cap_factor)
    if rhs <= 0.0:
        c_emp = 0.0 if np.all(lhs <= 0.0) else math.inf
    else:
        c_emp = float(lhs.max() / rhs)
    return c_emp <= cap, c_emp, cap


def norms(solution: GridSolution) -> SolutionNorms:
    grid = solution.grid
    w = grid.trapezoid_weights()
    lengths = solution.mesh.bnd_length
    dtraces = grid.derivative_matrix() @ solution.traces

    def bnorm(values: np.ndarray, mask: np.ndarray | None = None) -> float:
        ln = lengths if mask is None else np.where(mask, lengths, 0.0)
        return math.sqrt(max(float(np.dot(w, (values**2) @ ln)), 0.0))

    return SolutionNorms(
        initial=solution.mesh.l2_norm(solution.initial),
        boundary=bnorm(solution.traces),
        boundary_plus=bnorm(solution.traces, solution.plus),
        boundary_minus=bnorm(solution.traces, solution.minus),
        dt_boundary=bnorm(dtraces),
    )
