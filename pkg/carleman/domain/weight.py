"""
Pesos de Carleman.

- `CarlemanWeight`: peso por partes φ_i(x,t) = |x + r_i v_i|² − βt, com drift
  B_i = ∂_tφ_i + (H·∇φ_i) e as constantes δ, δ₂, s₁ certificadas por amostragem.
- `GeneralWeight`: peso único φ(x,t) = d(x) − βt para um potencial d(x)
  (condição A, fluxo potencial ou d fornecido pelo usuário).
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping

import numpy as np

from .errors import (
    CertificationError,
    ConditionAViolation,
    InvalidArgument,
    InvalidState,
)
from .field import DirectionCone, VectorField, sup_norm, uniform_cone_margin
from .geometry import Domain, Partition
from .stream_graph import RadiusAssignment, StreamGraph, check_radii

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_TOL_NUM",
    "Potential",
    "ShiftedQuadratic",
    "LinearPotential",
    "POTENTIALS",
    "make_potential",
    "CarlemanWeight",
    "GeneralWeight",
    "Horizon",
    "build_piecewise_weight",
    "build_general_weight",
    "build_condition_A_weight",
    "build_potential_weight",
    "compute_s1",
    "verify_interface_positivity",
    "interface_gaps",
    "horizon_constants",
]

DEFAULT_TOL_NUM = 1e-9


# ---------------------------------------------------------------------
# Potenciais d(x)
# ---------------------------------------------------------------------


class Potential(ABC):
    name: str = "potential"

    @abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray: ...

    def describe(self) -> dict[str, Any]:
        return {"name": self.name}


@dataclass(frozen=True)
class ShiftedQuadratic(Potential):
    """d(x) = |x + r v|²."""

    r: float = 0.0
    v: tuple[float, float] = (0.0, 0.0)
    name = "shifted_quadratic"

    def _center(self) -> np.ndarray:
        return self.r * np.asarray(self.v, dtype=float)

    def value(self, points: np.ndarray) -> np.ndarray:
        shifted = points + self._center()
        return np.einsum("ij,ij->i", shifted, shifted)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        return 2.0 * (points + self._center())

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "r": self.r, "v": list(self.v)}


@dataclass(frozen=True)
class LinearPotential(Potential):
    """d(x) = c0 + c1·x₁ + c2·x₂."""

    c1: float = 1.0
    c2: float = 0.0
    c0: float = 0.0
    name = "linear"

    def value(self, points: np.ndarray) -> np.ndarray:
        return self.c0 + self.c1 * points[:, 0] + self.c2 * points[:, 1]

    def gradient(self, points: np.ndarray) -> np.ndarray:
        return np.tile([self.c1, self.c2], (points.shape[0], 1)).astype(float)

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "c0": self.c0, "c1": self.c1, "c2": self.c2}


def _squared_norm(**_: Any) -> Potential:
    return ShiftedQuadratic(0.0, (0.0, 0.0))


def _shifted_quadratic(r: float = 0.0, v: Any = (1.0, 0.0), **_: Any) -> Potential:
    return ShiftedQuadratic(float(r), (float(v[0]), float(v[1])))


def _linear(c1: float = 1.0, c2: float = 0.0, c0: float = 0.0, **_: Any) -> Potential:
    return LinearPotential(float(c1), float(c2), float(c0))


POTENTIALS: Mapping[str, Callable[..., Potential]] = {
    "squared_norm": _squared_norm,
    "shifted_quadratic": _shifted_quadratic,
    "linear": _linear,
}


def make_potential(name: str, **params: Any) -> Potential:
    try:
        factory = POTENTIALS[name]
    except KeyError as exc:
        raise InvalidArgument(f"Potencial desconhecido: {name!r} (opções: {sorted(POTENTIALS)})") from exc
    return factory(**params)


# ---------------------------------------------------------------------
# Pesos
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class Horizon:
    T: float
    T0: float
    mu: float
    d_min: float
    d_max: float

    @property
    def applicable(self) -> bool:
        return self.mu > 0


@dataclass(frozen=True)
class CarlemanWeight:
    partition: Partition
    field: VectorField
    graph: StreamGraph
    cones: dict[int, DirectionCone]
    radii: RadiusAssignment
    beta: float
    delta: float
    delta2: float
    R: float
    H_norm: float
    min_B: dict[int, float]
    s1: float = 0.0
    certified: bool = True
    kind = "piecewise"

    @property
    def r_star(self) -> float:
        return self.radii.r_star

    def _center(self, sid: int) -> np.ndarray:
        return self.radii.radii[sid] * self.cones[sid].vector

    def spatial_piece(self, sid: int, points: np.ndarray) -> np.ndarray:
        shifted = points + self._center(sid)
        return np.einsum("ij,ij->i", shifted, shifted)

    def phi_piece(self, sid: int, points: np.ndarray, t: float) -> np.ndarray:
        return self.spatial_piece(sid, points) - self.beta * t

    def drift_piece(self, sid: int, points: np.ndarray) -> np.ndarray:
        grad = 2.0 * (points + self._center(sid))
        return np.einsum("ij,ij->i", grad, self.field(points)) - self.beta

    def _by_piece(self, points: np.ndarray, func) -> np.ndarray:
        points = np.atleast_2d(points)
        ids = self.partition.locate(points)
        out = np.full(points.shape[0], np.nan)
        for sid in self.partition.ids:
            mask = ids == sid
            if mask.any():
                out[mask] = func(sid, points[mask])
        return out

    def spatial(self, points: np.ndarray) -> np.ndarray:
        return self._by_piece(points, self.spatial_piece)

    def phi(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.spatial(points) - self.beta * t

    def drift(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self._by_piece(points, self.drift_piece)

    def spatial_bounds(self, density: float) -> tuple[float, float]:
        lo, hi = math.inf, -math.inf
        for sid in self.partition.ids:
            values = self.spatial_piece(sid, self.partition.subdomain(sid).closure_points(density))
            lo, hi = min(lo, float(values.min())), max(hi, float(values.max()))
        return lo, hi


@dataclass(frozen=True)
class GeneralWeight:
    domain: Domain
    field: VectorField
    potential: Potential
    beta: float
    delta3: float
    certified: bool = True
    forced: bool = False
    kind = "general"

    @property
    def s1(self) -> float:
        return 0.0

    def spatial(self, points: np.ndarray) -> np.ndarray:
        return self.potential.value(np.atleast_2d(points))

    def phi(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.spatial(points) - self.beta * t

    def drift(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        grad = self.potential.gradient(points)
        return np.einsum("ij,ij->i", grad, self.field(points)) - self.beta

    def spatial_bounds(self, density: float) -> tuple[float, float]:
        values = self.spatial(self.domain.closure_with_boundary(density))
        return float(values.min()), float(values.max())


Weight = CarlemanWeight | GeneralWeight


# ---------------------------------------------------------------------
# Construção e certificação
# ---------------------------------------------------------------------


def _check_beta(beta: float, upper: float | None = None) -> float:
    beta = float(beta)
    if not beta > 0:
        raise InvalidArgument(f"β deve ser positivo (recebido {beta})")
    if upper is not None and not beta < upper:
        raise InvalidArgument(f"β={beta:.6g} deve ser menor que {upper:.6g}")
    return beta


def build_piecewise_weight(
    partition: Partition,
    field: VectorField,
    cones: Mapping[int, DirectionCone | None],
    radii: RadiusAssignment,
    graph: StreamGraph,
    beta: float | None = None,
    *,
    density: float = 32.0,
    tol_num: float = DEFAULT_TOL_NUM,
    s_floor: float = 0.0,
    s1_safety: float = 0.1,
) -> CarlemanWeight:
    ok, violations = check_radii(radii, graph)
    if not ok:
        raise CertificationError("Raios não satisfazem as desigualdades de atribuição", witness=violations)

    ids = partition.ids
    delta = uniform_cone_margin([cones.get(sid) for sid in ids], ids)
    beta = _check_beta(delta / 2.0 if beta is None else beta, delta)
    H_norm = sup_norm(field, partition.domain, density)
    R = partition.domain.radius_bound

    draft = CarlemanWeight(
        partition=partition,
        field=field,
        graph=graph,
        cones={sid: cones[sid] for sid in ids},
        radii=radii,
        beta=beta,
        delta=delta,
        delta2=math.inf,
        R=R,
        H_norm=H_norm,
        min_B={},
    )

    min_B: dict[int, float] = {}
    for sid in ids:
        pts = partition.subdomain(sid).closure_points(density)
        drift = draft.drift_piece(sid, pts)
        k = int(np.argmin(drift))
        min_B[sid] = float(drift[k])
        if drift[k] < delta - tol_num:
            raise CertificationError(
                f"min B_{sid} = {drift[k]:.6g} < δ = {delta:.6g}", witness=tuple(pts[k])
            )

    delta2 = math.inf
    for tail, head in graph.edges:
        gap = radii.radii[head] ** 2 - 4.0 * radii.radii[tail] ** 2 - 6.0 * R**2
        delta2 = min(delta2, gap)
    if not delta2 > 0:
        raise CertificationError(f"δ₂ = {delta2:.6g} não é positivo")

    weight = replace(draft, min_B=min_B, delta2=delta2)
    return replace(weight, s1=compute_s1(weight, s_floor=s_floor, safety=s1_safety))


def build_general_weight(
    domain: Domain,
    field: VectorField,
    potential: Potential,
    beta: float,
    *,
    density: float = 32.0,
    force: bool = False,
) -> GeneralWeight:
    beta = _check_beta(beta)
    draft = GeneralWeight(domain, field, potential, beta, delta3=math.nan)
    pts = domain.closure_with_boundary(density)
    drift = draft.drift(pts)
    k = int(np.argmin(drift))
    delta3 = float(drift[k])
    if delta3 > 0:
        return replace(draft, delta3=delta3)
    if not force:
        raise CertificationError(
            f"δ₃ = min B = {delta3:.6g} <= 0 para o potencial {potential.name}", witness=tuple(pts[k])
        )
    logger.warning("Peso forçado sem certificação: δ₃ = %.6g em %s", delta3, tuple(pts[k]))
    return replace(draft, delta3=delta3, certified=False, forced=True)


def build_condition_A_weight(
    domain: Domain,
    field: VectorField,
    cone: DirectionCone | None,
    beta: float,
    *,
    margin: float = 0.1,
    density: float = 32.0,
) -> GeneralWeight:
    """d(x) = |x + r v|² com r = (2R‖H‖ + β)/(2δ₁)·(1 + margin)."""
    if cone is None:
        raise ConditionAViolation("Não existe direção v com (H·v) > 0 em todo o domínio")
    beta = _check_beta(beta)
    R = domain.radius_bound
    H_norm = sup_norm(field, domain, density)
    r = (2.0 * R * H_norm + beta) / (2.0 * cone.delta1) * (1.0 + margin)
    return build_general_weight(domain, field, ShiftedQuadratic(r, cone.v), beta, density=density)


def build_potential_weight(
    domain: Domain,
    field: VectorField,
    potential: Potential,
    beta: float,
    *,
    density: float = 32.0,
    tol_num: float = DEFAULT_TOL_NUM,
) -> GeneralWeight:
    """Fluxo potencial H = ∇ρ: d = ρ e B = |∇ρ|² − β."""
    beta = _check_beta(beta)
    pts = domain.closure_with_boundary(density)
    grad = potential.gradient(pts)
    values = field(pts)
    mismatch = float(np.hypot(*(values - grad).T).max())
    scale = max(1.0, float(np.hypot(*values.T).max()))
    if mismatch > tol_num * scale:
        raise InvalidArgument(f"Potencial inconsistente com H: max |H − ∇ρ| = {mismatch:.3e}")
    grad_sq_min = float(np.einsum("ij,ij->i", grad, grad).min())
    if not grad_sq_min > beta:
        raise InvalidArgument(f"β={beta:.6g} não é menor que min |∇ρ|² = {grad_sq_min:.6g}")
    return build_general_weight(domain, field, potential, beta, density=density)


def compute_s1(weight: CarlemanWeight, *, s_floor: float = 0.0, safety: float = 0.1) -> float:
    """s₁ com e^{s₁δ₂} > (2(r* + R)‖H‖ + β)/δ, multiplicado por (1 + safety)."""
    if not weight.delta2 > 0:
        raise InvalidState(f"δ₂ = {weight.delta2} não permite calcular s₁")
    if math.isinf(weight.delta2):
        return float(s_floor)
    ratio = (2.0 * (weight.r_star + weight.R) * weight.H_norm + weight.beta) / weight.delta
    s1 = max(math.log(ratio), 0.0) / weight.delta2 * (1.0 + safety)
    return max(s1, float(s_floor))


def verify_interface_positivity(
    weight: CarlemanWeight,
    s: float,
    *,
    T: float = 1.0,
    density: float = 32.0,
    n_times: int = 11,
) -> tuple[bool, float]:
    """
    Sinal de B_i e^{2sφ_i} − B_j e^{2sφ_j} em cada aresta j → i, na forma
    log B_i + 2sφ_i − (log B_j + 2sφ_j). Devolve (ok, pior margem).
    """
    if s < weight.s1 * (1.0 - 1e-12):
        raise InvalidArgument(f"s={s:.6g} abaixo de s₁={weight.s1:.6g}")
    worst = math.inf
    times = np.linspace(0.0, T, n_times)
    for tail, head in weight.graph.edges:
        for iid in weight.graph.interfaces_of(tail, head):
            pts = weight.partition.interface(iid).samples(density).points
            b_down = weight.drift_piece(head, pts)
            b_up = weight.drift_piece(tail, pts)
            if np.any(b_down <= 0):
                return False, -math.inf
            active = b_up > 0
            if not active.any():
                continue
            for t in times:
                lhs = np.log(b_down[active]) + 2.0 * s * weight.phi_piece(head, pts[active], t)
                rhs = np.log(b_up[active]) + 2.0 * s * weight.phi_piece(tail, pts[active], t)
                worst = min(worst, float((lhs - rhs).min()))
    return worst >= 0.0, worst


def interface_gaps(
    weight: CarlemanWeight, *, density: float = 32.0, tol: float = DEFAULT_TOL_NUM
) -> dict[tuple[int, int], float]:
    """min φ_i − φ_j em γ_ij para cada aresta j → i; exige >= δ₂/2."""
    gaps: dict[tuple[int, int], float] = {}
    for tail, head in weight.graph.edges:
        lo = math.inf
        for iid in weight.graph.interfaces_of(tail, head):
            pts = weight.partition.interface(iid).samples(density).points
            diff = weight.spatial_piece(head, pts) - weight.spatial_piece(tail, pts)
            lo = min(lo, float(diff.min()))
        gaps[(tail, head)] = lo
        if lo < 0.5 * weight.delta2 - tol * max(1.0, abs(lo)):
            raise CertificationError(
                f"Salto φ_{head} − φ_{tail} = {lo:.6g} abaixo de δ₂/2 = {0.5 * weight.delta2:.6g}",
                witness=(tail, head),
            )
    return gaps


def horizon_constants(weight: Weight, T: float, *, density: float = 32.0) -> Horizon:
    """T₀ = (max d − min d)/β e μ = min d + βT − max d."""
    if not T > 0:
        raise InvalidArgument("Horizonte T deve ser positivo")
    d_min, d_max = weight.spatial_bounds(density)
    T0 = (d_max - d_min) / weight.beta
    mu = d_min + weight.beta * T - d_max
    return Horizon(float(T), float(T0), float(mu), d_min, d_max)
