"""
Avaliação numérica das estimativas de Carleman para funções discretas.

Os seis termos (três de cada lado) são integrais de u² e^{2sφ} e de |Pu|² e^{2sφ}
com Pu = ∂_t u + (H·∇u) + pu. As somas são feitas em forma logarítmica
(`scipy.special.logsumexp`), de modo que razões lhs/rhs não dependem do
deslocamento c usado para reportar os termos.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field as dc_field, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from carleman.domain.errors import InvalidArgument, InvalidState
from carleman.domain.field import ScalarCoefficient, VectorField
from carleman.domain.weight import CarlemanWeight, GeneralWeight
from core.metrics import observe_member, observe_verdict

from ..domain.mesh import Mesh, TimeGrid, UpwindOperator
from ..domain.solver import GridSolution, solve_forward, stencil_residual

logger = logging.getLogger(__name__)

__all__ = [
    "TERM_NAMES",
    "LHS_TERMS",
    "RHS_TERMS",
    "SpaceTimeSampling",
    "SampledFunction",
    "TestFunction",
    "AnalyticTestFunction",
    "GaussianBump",
    "SpaceTimePolynomial",
    "ConstantFunction",
    "AnnulusProfile",
    "GridTestFunction",
    "WeightSamples",
    "CarlemanTerms",
    "SweepRow",
    "SweepResult",
    "sample_weight",
    "evaluate_terms",
    "sweep_constant",
    "carleman_sweep",
    "make_s_grid",
    "s_floor_for",
    "s_cap_for",
    "test_suite_random",
]

LHS_TERMS = ("init", "bulk", "outflow_minus")
RHS_TERMS = ("residual", "boundary_plus", "final")
TERM_NAMES = LHS_TERMS + RHS_TERMS

DEFAULT_TREND_TOL = 0.1

Weight = CarlemanWeight | GeneralWeight


# ---------------------------------------------------------------------
# Amostragem espaço-tempo
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeSampling:
    """Centroides/faces de bordo da malha nos níveis de tempo guardados."""

    operator: UpwindOperator
    grid: TimeGrid
    recorded: np.ndarray

    @classmethod
    def build(cls, operator: UpwindOperator, grid: TimeGrid, max_recorded: int = 256) -> "SpaceTimeSampling":
        return cls(operator, grid, grid.record_indices(max_recorded))

    @property
    def mesh(self) -> Mesh:
        return self.operator.mesh

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[self.recorded]

    @property
    def T(self) -> float:
        return self.grid.T

    @property
    def time_weights(self) -> np.ndarray:
        return self.grid.trapezoid_weights(self.recorded)

    @property
    def minus(self) -> np.ndarray:
        return self.operator.inflow

    @property
    def plus(self) -> np.ndarray:
        return self.operator.outflow

    @property
    def normal_flux(self) -> np.ndarray:
        """(H·ν) por unidade de comprimento em cada face de bordo."""
        return self.operator.bnd_flux / self.mesh.bnd_length


@dataclass(frozen=True)
class SampledFunction:
    values: np.ndarray  # (níveis, células)
    traces: np.ndarray  # (níveis, faces de bordo)
    residual: np.ndarray  # (amostras de resíduo, células)
    residual_weights: np.ndarray  # pesos temporais do resíduo


# ---------------------------------------------------------------------
# Funções de teste
# ---------------------------------------------------------------------


class TestFunction(ABC):
    __test__ = False
    name: str = "u"

    @abstractmethod
    def sample(
        self, sampling: SpaceTimeSampling, field: VectorField, p: ScalarCoefficient | None
    ) -> SampledFunction: ...

    def describe(self) -> str:
        return self.name


class AnalyticTestFunction(TestFunction):
    """Função fechada u(x,t); resíduo avaliado com derivadas analíticas."""

    @abstractmethod
    def value(self, points: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def dt(self, points: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def gradient(self, points: np.ndarray, t: float) -> np.ndarray: ...

    def residual(self, points: np.ndarray, t: float, field: VectorField, p: ScalarCoefficient | None) -> np.ndarray:
        out = self.dt(points, t) + np.einsum("ij,ij->i", field(points), self.gradient(points, t))
        if p is not None:
            out = out + p(points) * self.value(points, t)
        return out

    def sample(self, sampling, field, p) -> SampledFunction:
        mesh = sampling.mesh
        times = sampling.times
        values = np.array([self.value(mesh.centroids, t) for t in times])
        traces = np.array([self.value(mesh.bnd_point, t) for t in times])
        residual = np.array([self.residual(mesh.centroids, t, field, p) for t in times])
        return SampledFunction(values, traces, residual, sampling.time_weights)


@dataclass
class GaussianBump(AnalyticTestFunction):
    """exp(−|x − c|²/(2w²)) · (a0 + a1·x₁ + a2·x₂ + a3·t)."""

    center: tuple[float, float]
    width: float
    coeffs: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    name: str = "bump"

    def _gauss(self, points: np.ndarray) -> np.ndarray:
        d = points - np.asarray(self.center)
        return np.exp(-np.einsum("ij,ij->i", d, d) / (2.0 * self.width**2))

    def _poly(self, points: np.ndarray, t: float) -> np.ndarray:
        a0, a1, a2, a3 = self.coeffs
        return a0 + a1 * points[:, 0] + a2 * points[:, 1] + a3 * t

    def value(self, points, t):
        return self._gauss(points) * self._poly(points, t)

    def dt(self, points, t):
        return self._gauss(points) * self.coeffs[3]

    def gradient(self, points, t):
        g = self._gauss(points)
        poly = self._poly(points, t)
        d = points - np.asarray(self.center)
        grad_g = -d / self.width**2 * g[:, None]
        grad_p = np.tile([self.coeffs[1], self.coeffs[2]], (points.shape[0], 1))
        return grad_g * poly[:, None] + g[:, None] * grad_p


@dataclass
class SpaceTimePolynomial(AnalyticTestFunction):
    """Σ c_{ijk} x₁^i x₂^j t^k; não satisfaz a equação em geral."""

    terms: dict[tuple[int, int, int], float]
    name: str = "poly"

    def value(self, points, t):
        x, y = points[:, 0], points[:, 1]
        out = np.zeros(points.shape[0])
        for (i, j, k), c in self.terms.items():
            out += c * x**i * y**j * t**k
        return out

    def dt(self, points, t):
        x, y = points[:, 0], points[:, 1]
        out = np.zeros(points.shape[0])
        for (i, j, k), c in self.terms.items():
            if k:
                out += c * k * x**i * y**j * t ** (k - 1)
        return out

    def gradient(self, points, t):
        x, y = points[:, 0], points[:, 1]
        gx = np.zeros(points.shape[0])
        gy = np.zeros(points.shape[0])
        for (i, j, k), c in self.terms.items():
            if i:
                gx += c * i * x ** (i - 1) * y**j * t**k
            if j:
                gy += c * j * x**i * y ** (j - 1) * t**k
        return np.column_stack([gx, gy])


@dataclass
class ConstantFunction(AnalyticTestFunction):
    c: float = 1.0
    name: str = "constant"

    def value(self, points, t):
        return np.full(points.shape[0], self.c)

    def dt(self, points, t):
        return np.zeros(points.shape[0])

    def gradient(self, points, t):
        return np.zeros_like(points, dtype=float)


@dataclass
class AnnulusProfile(AnalyticTestFunction):
    """u₀(x) = (|x|² − a²)(|x|² − b²), estacionária para a rotação no anel a < |x| < b."""

    r_in: float = 1.0
    r_out: float = 2.0
    name: str = "annulus_bubble"

    def value(self, points, t):
        rr = np.einsum("ij,ij->i", points, points)
        return (rr - self.r_in**2) * (rr - self.r_out**2)

    def dt(self, points, t):
        return np.zeros(points.shape[0])

    def gradient(self, points, t):
        rr = np.einsum("ij,ij->i", points, points)
        return (2.0 * rr - self.r_in**2 - self.r_out**2)[:, None] * 2.0 * points


class GridTestFunction(TestFunction):
    """
    Função de grade nos níveis guardados. O resíduo vem do estêncil do solver
    (com p = 0) e o termo pu é somado por linearidade.
    """

    def __init__(
        self,
        values: np.ndarray,
        traces: np.ndarray,
        base_residual: np.ndarray,
        times: np.ndarray,
        name: str = "grid",
    ):
        self.values = values
        self.traces = traces
        self.base_residual = base_residual
        self.times = times
        self.name = name

    @classmethod
    def from_solution(cls, solution: GridSolution, name: str = "solution") -> "GridTestFunction":
        base = solution.residual - solution.p_cells[None, :] * solution.u[: solution.residual.shape[0]]
        return cls(solution.u, solution.traces[solution.recorded], base, solution.recorded_times, name)

    @classmethod
    def from_values(cls, solution: GridSolution, values: np.ndarray, name: str = "grid") -> "GridTestFunction":
        """Valores arbitrários na grade de `solution`; traço = valor da célula de bordo."""
        traces = values[:, solution.mesh.bnd_cell]
        zero_p = replace(solution, p_cells=np.zeros(solution.mesh.n_cells))
        return cls(values, traces, stencil_residual(zero_p, values, traces), solution.recorded_times, name)

    def sample(self, sampling, field, p) -> SampledFunction:
        if self.times.shape != sampling.times.shape or not np.allclose(self.times, sampling.times):
            raise InvalidArgument(f"Função {self.name} amostrada em níveis de tempo diferentes")
        residual = self.base_residual
        if p is not None:
            residual = residual + p(sampling.mesh.centroids)[None, :] * self.values[: residual.shape[0]]
        steps = np.diff(self.times)[: residual.shape[0]]
        return SampledFunction(self.values, self.traces, residual, steps)


# ---------------------------------------------------------------------
# Termos
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSamples:
    beta: float
    d_cells: np.ndarray
    d_bnd: np.ndarray
    B_cells: np.ndarray
    B_bnd: np.ndarray
    certified: bool

    @property
    def d_max(self) -> float:
        return float(max(self.d_cells.max(), self.d_bnd.max()))

    @property
    def d_min(self) -> float:
        return float(min(self.d_cells.min(), self.d_bnd.min()))


def sample_weight(weight: Weight, sampling: SpaceTimeSampling) -> WeightSamples:
    mesh = sampling.mesh
    return WeightSamples(
        beta=weight.beta,
        d_cells=weight.spatial(mesh.centroids),
        d_bnd=weight.spatial(mesh.bnd_point),
        B_cells=weight.drift(mesh.centroids),
        B_bnd=weight.drift(mesh.bnd_point),
        certified=weight.certified,
    )


@dataclass(frozen=True)
class CarlemanTerms:
    s: float
    shift: float
    logs: dict[str, float]

    def term(self, name: str) -> float:
        value = self.logs[name] - 2.0 * self.s * self.shift
        return 0.0 if value == -math.inf else float(math.exp(min(value, 700.0)))

    @property
    def values(self) -> dict[str, float]:
        return {name: self.term(name) for name in TERM_NAMES}

    @property
    def lhs_log(self) -> float:
        return float(logsumexp([self.logs[n] for n in LHS_TERMS]))

    @property
    def rhs_log(self) -> float:
        return float(logsumexp([self.logs[n] for n in RHS_TERMS]))

    @property
    def ratio(self) -> float:
        """lhs/rhs com 0/0 → 0 e x/0 → inf."""
        lhs, rhs = self.lhs_log, self.rhs_log
        if lhs == -math.inf:
            return 0.0
        if rhs == -math.inf:
            return math.inf
        return float(math.exp(min(lhs - rhs, 700.0)))


def _log_integral(coef: np.ndarray, exponent: np.ndarray, scale: float) -> float:
    coef = coef.ravel()
    exponent = exponent.ravel()
    mask = coef > 0.0
    if not mask.any():
        return -math.inf
    return float(math.log(scale) + logsumexp(exponent[mask], b=coef[mask]))


def _require_certified(ws: WeightSamples, allow_uncertified: bool) -> None:
    if not ws.certified and not allow_uncertified:
        raise InvalidState("Peso sem certificação; use allow_uncertified para avaliação forçada")


def evaluate_terms(
    u: TestFunction | SampledFunction,
    weight: Weight | WeightSamples,
    field: VectorField,
    p: ScalarCoefficient | None,
    s: float,
    *,
    sampling: SpaceTimeSampling,
    shift: float | None = None,
    drift_weighted: bool = False,
    allow_uncertified: bool = False,
) -> CarlemanTerms:
    if not s > 0:
        raise InvalidArgument("s deve ser positivo")
    ws = weight if isinstance(weight, WeightSamples) else sample_weight(weight, sampling)
    _require_certified(ws, allow_uncertified)
    if drift_weighted and (ws.B_cells.min() <= 0 or ws.B_bnd.min() <= 0):
        raise InvalidState("Forma ponderada por B exige B > 0 em Q")
    sf = u if isinstance(u, SampledFunction) else u.sample(sampling, field, p)

    mesh = sampling.mesh
    times = sampling.times
    wt = sampling.time_weights
    vol = mesh.volumes
    blen = mesh.bnd_length
    beta = ws.beta
    c = ws.d_max if shift is None else float(shift)

    phi_cells = ws.d_cells[None, :] - beta * times[:, None]
    phi_bnd = ws.d_bnd[None, :] - beta * times[:, None]

    init_w = vol * (ws.B_cells if drift_weighted else 1.0)
    bnd_w = blen * (np.abs(sampling.normal_flux) * ws.B_bnd if drift_weighted else 1.0)
    minus = sampling.minus
    plus = sampling.plus

    n_res = sf.residual.shape[0]
    logs = {
        "init": _log_integral(init_w * sf.values[0] ** 2, 2.0 * s * phi_cells[0], s),
        "bulk": _log_integral(wt[:, None] * vol[None, :] * sf.values**2, 2.0 * s * phi_cells, s * s),
        "outflow_minus": _log_integral(
            wt[:, None] * np.where(minus, bnd_w, 0.0)[None, :] * sf.traces**2, 2.0 * s * phi_bnd, s
        ),
        "residual": _log_integral(
            sf.residual_weights[:, None] * vol[None, :] * sf.residual**2, 2.0 * s * phi_cells[:n_res], 1.0
        ),
        "boundary_plus": _log_integral(
            wt[:, None] * np.where(plus, bnd_w, 0.0)[None, :] * sf.traces**2, 2.0 * s * phi_bnd, s
        ),
        "final": _log_integral(init_w * sf.values[-1] ** 2, 2.0 * s * phi_cells[-1], s),
    }
    return CarlemanTerms(float(s), c, logs)


# ---------------------------------------------------------------------
# Varredura em s
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    s: float
    function: str
    terms: CarlemanTerms

    @property
    def ratio(self) -> float:
        return self.terms.ratio


@dataclass
class SweepResult:
    s_grid: list[float]
    rows: list[SweepRow]
    c_emp: list[float]
    c_cap: float
    trend_ok: bool
    witness: tuple[str, float] | None = None
    s_floor: float = 0.0
    s_cap: float = math.inf
    certified: bool = True
    notes: list[str] = dc_field(default_factory=list)

    @property
    def c_emp_max(self) -> float:
        return max(self.c_emp) if self.c_emp else 0.0

    @property
    def verdict(self) -> str:
        # peso forçado nunca sustenta a estimativa
        if self.witness is not None or not self.certified or not math.isfinite(self.c_emp_max):
            return "FAIL"
        return "PASS" if self.c_emp_max <= self.c_cap and self.trend_ok else "FAIL"


def _trend_ok(c_emp: Sequence[float], tol: float) -> bool:
    top = list(c_emp[len(c_emp) // 2 :])
    return all(b <= a * (1.0 + tol) + 1e-300 for a, b in zip(top, top[1:]))


def sweep_constant(
    suite: Sequence[TestFunction],
    weight: Weight,
    field: VectorField,
    p: ScalarCoefficient | None,
    s_grid: Sequence[float],
    *,
    sampling: SpaceTimeSampling,
    c_cap: float = 1e3,
    trend_tol: float = DEFAULT_TREND_TOL,
    drift_weighted: bool = False,
    allow_uncertified: bool = False,
) -> SweepResult:
    if not suite:
        raise InvalidArgument("Conjunto de funções de teste vazio")
    if not s_grid:
        raise InvalidArgument("Grade de s vazia")
    ws = sample_weight(weight, sampling)
    _require_certified(ws, allow_uncertified)
    sampled = [(fn.describe(), fn.sample(sampling, field, p)) for fn in suite]
    observe_member("carleman", len(sampled))

    rows: list[SweepRow] = []
    c_emp: list[float] = []
    witness: tuple[str, float] | None = None
    for s in s_grid:
        worst = 0.0
        for name, sf in sampled:
            terms = evaluate_terms(
                sf, ws, field, p, s, sampling=sampling, drift_weighted=drift_weighted, allow_uncertified=True
            )
            rows.append(SweepRow(float(s), name, terms))
            ratio = terms.ratio
            if math.isinf(ratio) and witness is None:
                witness = (name, float(s))
            worst = max(worst, ratio)
        c_emp.append(worst)
        logger.info("Varredura s=%.4g: C_emp=%.6g", s, worst)

    result = SweepResult(
        s_grid=[float(s) for s in s_grid],
        rows=rows,
        c_emp=c_emp,
        c_cap=float(c_cap),
        trend_ok=_trend_ok(c_emp, trend_tol),
        witness=witness,
        certified=bool(ws.certified),
    )
    observe_verdict("carleman", result.verdict)
    if result.verdict == "FAIL":
        logger.warning(
            "Varredura FAIL: C_emp_max=%.6g (cap %.3g), tendência=%s, testemunha=%s",
            result.c_emp_max,
            c_cap,
            result.trend_ok,
            witness,
        )
    return result


def s_cap_for(weight: Weight, T: float, *, density: float = 32.0, budget: float = 600.0) -> float:
    """Maior s com 2s·(max φ − min φ) <= budget em Q."""
    d_min, d_max = weight.spatial_bounds(density)
    spread = (d_max - d_min) + weight.beta * T
    return math.inf if spread <= 0 else budget / (2.0 * spread)


def s_floor_for(
    weight: Weight,
    p: ScalarCoefficient | None,
    *,
    p_bound: float = 0.0,
    c_res: float = 0.0,
    s_base: float = 1.0,
) -> float:
    """max(s₁, 2·√(2·C_res)·‖p‖∞, s_base)."""
    absorption = 0.0 if p is None or p.is_zero else math.sqrt(2.0 * max(c_res, 0.0)) * p_bound
    return max(float(weight.s1), 2.0 * absorption, float(s_base))


def make_s_grid(s_floor: float, s_cap: float, n: int = 10, factor: float = 5.0) -> list[float]:
    """Log-espaçada em [s_floor, min(factor·s_floor, s_cap)]."""
    if not s_floor > 0:
        raise InvalidArgument("s_floor deve ser positivo")
    upper = min(factor * s_floor, s_cap)
    if upper <= s_floor:
        logger.warning("s_cap=%.4g abaixo de s_floor=%.4g; grade reduzida a um ponto", s_cap, s_floor)
        return [float(s_floor)]
    return [float(s) for s in np.geomspace(s_floor, upper, max(n, 2))]


def carleman_sweep(
    suite: Sequence[TestFunction],
    weight: Weight,
    field: VectorField,
    p: ScalarCoefficient | None,
    *,
    sampling: SpaceTimeSampling,
    p_bound: float = 0.0,
    density: float = 32.0,
    s_points: int = 10,
    budget: float = 600.0,
    c_cap: float = 1e3,
    drift_weighted: bool = False,
    allow_uncertified: bool = False,
) -> SweepResult:
    """
    Varredura completa: mede C_res com p = 0 quando p não é nulo, fixa
    s_floor/s_cap e avalia o conjunto na grade [s_floor, 5·s_floor].
    """
    s_cap = s_cap_for(weight, sampling.T, density=density, budget=budget)
    c_res = 0.0
    if p is not None and not p.is_zero:
        base = max(float(weight.s1), 1.0)
        probe = sweep_constant(
            suite,
            weight,
            field,
            None,
            make_s_grid(base, s_cap, n=3),
            sampling=sampling,
            c_cap=c_cap,
            drift_weighted=drift_weighted,
            allow_uncertified=allow_uncertified,
        )
        c_res = probe.c_emp_max if math.isfinite(probe.c_emp_max) else 0.0
        logger.info("C_res (p = 0) = %.6g", c_res)
    s_floor = s_floor_for(weight, p, p_bound=p_bound, c_res=c_res)
    result = sweep_constant(
        suite,
        weight,
        field,
        p,
        make_s_grid(s_floor, s_cap, n=s_points),
        sampling=sampling,
        c_cap=c_cap,
        drift_weighted=drift_weighted,
        allow_uncertified=allow_uncertified,
    )
    result.s_floor = s_floor
    result.s_cap = s_cap
    if s_cap < s_floor:
        result.notes.append(f"s_cap={s_cap:.4g} < s_floor={s_floor:.4g}")
    if c_res:
        result.notes.append(f"C_res={c_res:.6g}")
    return result


# ---------------------------------------------------------------------
# Conjunto aleatório de funções de teste
# ---------------------------------------------------------------------


def _random_bump(rng: np.random.Generator, mesh: Mesh, diameter: float, name: str, with_time: bool) -> GaussianBump:
    center = mesh.centroids[int(rng.integers(mesh.n_cells))]
    width = float(rng.uniform(0.1, 0.3) * diameter)
    coeffs = rng.normal(size=4)
    coeffs[0] = 1.0 + abs(coeffs[0])
    if not with_time:
        coeffs[3] = 0.0
    return GaussianBump((float(center[0]), float(center[1])), width, tuple(float(c) for c in coeffs), name)


def _random_polynomial(rng: np.random.Generator, name: str) -> SpaceTimePolynomial:
    terms = {}
    for i in range(3):
        for j in range(3 - i):
            for k in range(2):
                terms[(i, j, k)] = float(rng.normal())
    return SpaceTimePolynomial(terms, name)


def test_suite_random(
    sampling: SpaceTimeSampling,
    field: VectorField,
    n: int,
    seed: int,
    *,
    p: ScalarCoefficient | None = None,
    diameter: float | None = None,
    cfl_max: float = 0.9,
) -> list[TestFunction]:
    """
    Mistura determinística por semente: (a) bumps suaves, (b) soluções do
    transporte a partir de dados iniciais aleatórios, (c) polinômios em (x, t).
    """
    if n < 1:
        raise InvalidArgument("n deve ser >= 1")
    rng = np.random.default_rng(seed)
    mesh = sampling.mesh
    if diameter is None:
        span = mesh.centroids.max(axis=0) - mesh.centroids.min(axis=0)
        diameter = float(np.hypot(*span))
    suite: list[TestFunction] = []
    for k in range(n):
        kind = "abc"[k % 3]
        name = f"{kind}{k}"
        if kind == "a":
            suite.append(_random_bump(rng, mesh, diameter, name, with_time=True))
        elif kind == "b":
            bump = _random_bump(rng, mesh, diameter, name, with_time=False)
            solution = solve_forward(
                field,
                p,
                None,
                bump.value(mesh.centroids, 0.0),
                None,
                mesh,
                sampling.grid,
                cfl_max=cfl_max,
                max_recorded=len(sampling.recorded),
                operator=sampling.operator,
            )
            suite.append(GridTestFunction.from_solution(solution, name))
        else:
            suite.append(_random_polynomial(rng, name))
    return suite


test_suite_random.__test__ = False  # type: ignore[attr-defined]
