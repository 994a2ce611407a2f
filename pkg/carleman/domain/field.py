"""
Campos do problema de transporte: H(x), p(x), R(x,t), F(x,t) e o fator
espacial f(x), mais as verificações estruturais sobre H (não anulamento,
cones de direção por subdomínio, norma do sup).
"""

from __future__ import annotations

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConditionBViolation, InvalidArgument, VanishingFieldError
from .geometry import Domain, Subdomain

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_TOL_FIELD",
    "VectorField",
    "AffineField",
    "ConstantField",
    "RotationField",
    "RadialPotentialField",
    "PolarAngleField",
    "TabulatedField",
    "ScaledField",
    "ScalarCoefficient",
    "SourceFactor",
    "SpaceTimeSource",
    "DirectionCone",
    "WindingDiagnosis",
    "sample_points",
    "check_nonvanishing",
    "find_direction_cone",
    "uniform_cone_margin",
    "sup_norm",
    "divergence_sup",
    "winding_diagnosis",
]

DEFAULT_TOL_FIELD = 1e-10
TWO_PI = 2.0 * math.pi


def _as_points(points) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))


# ---------------------------------------------------------------------
# Campo vetorial H
# ---------------------------------------------------------------------


class VectorField(ABC):
    """Avaliador x ↦ H(x) ∈ ℝ² (vetorizado em arrays n×2)."""

    name: str = "field"

    @abstractmethod
    def __call__(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def divergence(self, points: np.ndarray) -> np.ndarray: ...

    def describe(self) -> dict:
        return {"kind": self.name}

    def negated(self) -> "VectorField":
        return ScaledField(self, -1.0)


@dataclass(frozen=True)
class AffineField(VectorField):
    """H(x) = A x + b."""

    matrix: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))
    offset: tuple[float, float] = (0.0, 0.0)
    name = "affine"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        return pts @ np.asarray(self.matrix, dtype=float).T + np.asarray(self.offset, dtype=float)

    def divergence(self, points: np.ndarray) -> np.ndarray:
        a = np.asarray(self.matrix, dtype=float)
        return np.full(_as_points(points).shape[0], a[0, 0] + a[1, 1])

    def describe(self) -> dict:
        return {"kind": self.name, "matrix": self.matrix, "offset": self.offset}


class ConstantField(AffineField):
    name = "constant"

    def __init__(self, a: float = 1.0, b: float = 0.0):
        super().__init__(((0.0, 0.0), (0.0, 0.0)), (float(a), float(b)))

    def describe(self) -> dict:
        return {"kind": self.name, "a": self.offset[0], "b": self.offset[1]}


class RotationField(AffineField):
    """H(x) = (−x₂, x₁)."""

    name = "rotation"

    def __init__(self):
        super().__init__(((0.0, -1.0), (1.0, 0.0)), (0.0, 0.0))

    def describe(self) -> dict:
        return {"kind": self.name}


class RadialPotentialField(AffineField):
    """H(x) = (2x₁, 2x₂) = ∇|x|²."""

    name = "radial_potential"

    def __init__(self):
        super().__init__(((2.0, 0.0), (0.0, 2.0)), (0.0, 0.0))

    def describe(self) -> dict:
        return {"kind": self.name}


class PolarAngleField(VectorField):
    """
    H(x) = (−sin p(θ), cos p(θ)) com p(θ) = mθ + a·sin(kθ).

    A família satisfaz p(0) = 0, p(2π) = 2πm e p′(0) = p′(2π), logo H é C¹ no anel.
    Também aceita um par (p, p′) arbitrário, validado na construção.
    """

    name = "polar_angle"

    def __init__(
        self,
        m: int,
        amplitude: float = 0.0,
        mode: int = 1,
        *,
        p: Callable[[np.ndarray], np.ndarray] | None = None,
        dp: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        if int(m) != m:
            raise InvalidArgument("Número de voltas m deve ser inteiro")
        if int(mode) != mode or mode < 1:
            raise InvalidArgument("Modo k da perturbação deve ser inteiro >= 1")
        self.m = int(m)
        self.amplitude = float(amplitude)
        self.mode = int(mode)
        if (p is None) != (dp is None):
            raise InvalidArgument("Informe p e p′ juntos")
        self._p = p
        self._dp = dp
        self._validate()

    def p(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self._p is not None:
            return np.asarray(self._p(theta), dtype=float)
        return self.m * theta + self.amplitude * np.sin(self.mode * theta)

    def dp(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self._dp is not None:
            return np.asarray(self._dp(theta), dtype=float)
        return self.m + self.amplitude * self.mode * np.cos(self.mode * theta)

    def q(self, theta) -> np.ndarray:
        """q(θ) = p(θ) − θ; em cortes radiais, (H·ν_{i→i+1})(θ_i) = cos q(θ_i)."""
        return self.p(theta) - np.asarray(theta, dtype=float)

    def _validate(self) -> None:
        ends = self.p(np.array([0.0, TWO_PI]))
        slopes = self.dp(np.array([0.0, TWO_PI]))
        if abs(ends[0]) > 1e-8 or abs(ends[1] - TWO_PI * self.m) > 1e-8:
            raise InvalidArgument("p deve satisfazer p(0)=0 e p(2π)=2πm")
        if abs(slopes[0] - slopes[1]) > 1e-8:
            raise InvalidArgument("p′(0) deve coincidir com p′(2π)")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        angle = self.p(np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI))
        return np.column_stack([-np.sin(angle), np.cos(angle)])

    def divergence(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return -self.dp(theta) * np.sin(self.q(theta)) / r

    def direction_range(self, theta_lo: float, theta_hi: float, samples: int = 257) -> float:
        """Largura da faixa de direções de H no setor (θ_lo, θ_hi)."""
        values = self.p(np.linspace(theta_lo, theta_hi, samples))
        return float(values.max() - values.min())

    def describe(self) -> dict:
        return {"kind": self.name, "m": self.m, "amplitude": self.amplitude, "mode": self.mode}


class TabulatedField(VectorField):
    """Campo tabelado em grade regular, interpolado bilinearmente."""

    name = "tabulated"

    def __init__(self, xs: np.ndarray, ys: np.ndarray, h1: np.ndarray, h2: np.ndarray, source: str = ""):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        h1 = np.asarray(h1, dtype=float)
        h2 = np.asarray(h2, dtype=float)
        if h1.shape != (self.xs.size, self.ys.size) or h2.shape != h1.shape:
            raise InvalidArgument("Grade tabelada com dimensões inconsistentes")
        self.source = source
        opts = {"method": "linear", "bounds_error": False, "fill_value": None}
        self._h1 = RegularGridInterpolator((self.xs, self.ys), h1, **opts)
        self._h2 = RegularGridInterpolator((self.xs, self.ys), h2, **opts)
        div = np.gradient(h1, self.xs, axis=0) + np.gradient(h2, self.ys, axis=1)
        self._div = RegularGridInterpolator((self.xs, self.ys), div, **opts)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedField":
        path = Path(path)
        if not path.exists():
            raise InvalidArgument(f"Arquivo de campo não encontrado: {path}")
        rows: list[tuple[float, float, float, float]] = []
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            missing = {"x", "y", "H1", "H2"} - set(reader.fieldnames or [])
            if missing:
                raise InvalidArgument(f"CSV sem colunas {sorted(missing)}: {path}")
            for row in reader:
                rows.append((float(row["x"]), float(row["y"]), float(row["H1"]), float(row["H2"])))
        data = np.asarray(rows)
        xs = np.unique(data[:, 0])
        ys = np.unique(data[:, 1])
        if xs.size * ys.size != data.shape[0]:
            raise InvalidArgument(f"CSV não forma grade regular completa: {path}")
        ix = np.searchsorted(xs, data[:, 0])
        iy = np.searchsorted(ys, data[:, 1])
        h1 = np.zeros((xs.size, ys.size))
        h2 = np.zeros_like(h1)
        h1[ix, iy] = data[:, 2]
        h2[ix, iy] = data[:, 3]
        return cls(xs, ys, h1, h2, source=str(path))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        return np.column_stack([self._h1(pts), self._h2(pts)])

    def divergence(self, points: np.ndarray) -> np.ndarray:
        return self._div(_as_points(points))

    def describe(self) -> dict:
        return {"kind": self.name, "path": self.source}


@dataclass(frozen=True)
class ScaledField(VectorField):
    base: VectorField
    factor: float
    name = "scaled"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.base(points)

    def divergence(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.base.divergence(points)

    def describe(self) -> dict:
        return {"kind": self.name, "factor": self.factor, "base": self.base.describe()}


# ---------------------------------------------------------------------
# Coeficientes escalares
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarCoefficient:
    """p(x) = c0 + c1·x₁ + c2·x₂ com cota M >= sup |p|."""

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    bound: float | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        return self.c0 + self.c1 * pts[:, 0] + self.c2 * pts[:, 1]

    @property
    def is_zero(self) -> bool:
        return self.c0 == 0.0 and self.c1 == 0.0 and self.c2 == 0.0

    def measured_bound(self, domain: Domain, density: float) -> float:
        return float(np.abs(self(domain.closure_with_boundary(density))).max())

    def certified_bound(self, domain: Domain, density: float) -> float:
        measured = self.measured_bound(domain, density)
        if self.bound is None:
            return measured
        if measured > self.bound * (1.0 + 1e-12):
            raise InvalidArgument(f"|p| amostrado {measured:.6g} excede a cota M={self.bound:.6g}")
        return float(self.bound)


@dataclass(frozen=True)
class SourceFactor:
    """R(x,t) = (c0 + c1·x₁ + c2·x₂) + (d0 + d1·x₁ + d2·x₂)·t."""

    c0: float = 1.0
    c1: float = 0.0
    c2: float = 0.0
    d0: float = 0.0
    d1: float = 0.0
    d2: float = 0.0

    def initial(self, points: np.ndarray) -> np.ndarray:
        pts = _as_points(points)
        return self.c0 + self.c1 * pts[:, 0] + self.c2 * pts[:, 1]

    def dt(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        pts = _as_points(points)
        return self.d0 + self.d1 * pts[:, 0] + self.d2 * pts[:, 1]

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.initial(points) + t * self.dt(points)

    def rho_min(self, domain: Domain, density: float) -> tuple[float, np.ndarray]:
        pts = domain.closure_with_boundary(density)
        values = np.abs(self.initial(pts))
        k = int(np.argmin(values))
        return float(values[k]), pts[k]


class SpaceTimeSource:
    """F(x,t) dado por um avaliador vetorizado."""

    def __init__(self, func: Callable[[np.ndarray, float], np.ndarray], name: str = "source"):
        self._func = func
        self.name = name

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        values = np.asarray(self._func(_as_points(points), float(t)), dtype=float)
        if not np.all(np.isfinite(values)):
            raise InvalidArgument(f"Fonte {self.name} não finita em t={t}")
        return values

    @classmethod
    def zero(cls) -> "SpaceTimeSource":
        return cls(lambda pts, t: np.zeros(pts.shape[0]), name="zero")


# ---------------------------------------------------------------------
# Cones de direção
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionCone:
    v: tuple[float, float]
    delta1: float
    width: float
    subdomain: int | None = None

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.v, dtype=float)

    @property
    def angle(self) -> float:
        return math.atan2(self.v[1], self.v[0])


def sample_points(region: Domain | Subdomain, density: float) -> np.ndarray:
    if isinstance(region, Domain):
        return region.closure_with_boundary(density)
    return region.closure_points(density)


def check_nonvanishing(
    field: VectorField,
    region: Domain | Subdomain,
    density: float,
    tol_field: float = DEFAULT_TOL_FIELD,
) -> float:
    """δ₀ estimado = min |H| amostrado; erro se <= tol_field."""
    pts = sample_points(region, density)
    norms = np.hypot(*field(pts).T)
    k = int(np.argmin(norms))
    if norms[k] <= tol_field:
        raise VanishingFieldError(
            f"|H| = {norms[k]:.3e} no ponto ({pts[k, 0]:.6g}, {pts[k, 1]:.6g})", point=pts[k]
        )
    return float(norms[k])


def find_direction_cone(
    field: VectorField,
    region: Domain | Subdomain,
    density: float,
    tol_field: float = DEFAULT_TOL_FIELD,
) -> DirectionCone | None:
    """
    Menor arco que contém todas as direções amostradas de H; se a largura W < π,
    devolve o bissetor v e delta1 = min (H·v) medido. Caso contrário, None.
    """
    pts = sample_points(region, density)
    values = field(pts)
    angles = np.sort(np.mod(np.arctan2(values[:, 1], values[:, 0]), TWO_PI))
    gaps = np.diff(np.concatenate([angles, [angles[0] + TWO_PI]]))
    k = int(np.argmax(gaps))
    width = TWO_PI - float(gaps[k])
    sid = getattr(region, "id", None)
    if width >= math.pi:
        logger.debug("Sem cone de direção (largura %.4f) no subdomínio %s", width, sid)
        return None
    start = float(angles[(k + 1) % angles.size])
    bisector = start + 0.5 * width
    v = np.array([math.cos(bisector), math.sin(bisector)])
    delta1 = float((values @ v).min())
    if delta1 <= tol_field:
        return None
    return DirectionCone((float(v[0]), float(v[1])), delta1, width, sid)


def uniform_cone_margin(cones: Sequence[DirectionCone | None], ids: Iterable[int] | None = None) -> float:
    ids = list(ids) if ids is not None else list(range(1, len(cones) + 1))
    for sid, cone in zip(ids, cones):
        if cone is None:
            raise ConditionBViolation(
                f"Subdomínio {sid} sem cone de direção (condição B(ii))", subdomain=sid
            )
    if not cones:
        raise InvalidArgument("Lista de cones vazia")
    return float(min(cone.delta1 for cone in cones if cone is not None))


def sup_norm(field: VectorField, domain: Domain, density: float) -> float:
    return float(np.hypot(*field(domain.closure_with_boundary(density)).T).max())


def divergence_sup(field: VectorField, domain: Domain, density: float) -> float:
    return float(np.abs(field.divergence(domain.closure_with_boundary(density))).max())


# ---------------------------------------------------------------------
# Diagnóstico de voltas (m = 1) para campos PolarAngle
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class WindingDiagnosis:
    m: int
    q_min: float
    q_max: float
    crossing: float | None

    @property
    def loop_free_expected(self) -> bool:
        return self.m != 1 or self.crossing is not None


def winding_diagnosis(field: PolarAngleField, samples: int = 4097) -> WindingDiagnosis:
    """
    Para m = 1, existe partição sem laços quando algum π/2 + ℓπ cai no interior
    da faixa de q(θ) = p(θ) − θ; `crossing` traz o primeiro desses valores.
    """
    q = field.q(np.linspace(0.0, TWO_PI, samples))
    q_min, q_max = float(q.min()), float(q.max())
    lo = math.floor((q_min - math.pi / 2) / math.pi)
    crossing = None
    for ell in range(lo, lo + int((q_max - q_min) / math.pi) + 3):
        level = math.pi / 2 + ell * math.pi
        if q_min < level < q_max:
            crossing = level
            break
    return WindingDiagnosis(field.m, q_min, q_max, crossing)
