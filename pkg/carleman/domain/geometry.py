"""
Geometria 2-D: domínios, partições em subdomínios, interfaces orientadas e
quadraturas de ponto médio (volume e superfície).

Todas as estruturas são imutáveis; as amostragens são funções puras da
geometria e da densidade pedida (amostras por unidade de comprimento).
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field as dc_field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

if TYPE_CHECKING:  # pragma: no cover
    from .field import VectorField
    from .stream_graph import StreamGraph

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_TOL_GEOM_FACTOR",
    "SurfaceSamples",
    "VolumeSamples",
    "Segment",
    "CircleArc",
    "Domain",
    "Rectangle",
    "Annulus",
    "Disk",
    "Subdomain",
    "WholeDomain",
    "AngularSector",
    "VerticalStrip",
    "Interface",
    "Partition",
    "BoundarySplit",
    "PartitionProposal",
    "tensor_rule",
    "polar_rule",
    "trivial_partition",
    "build_annulus_angular_partition",
    "build_rectangle_strip_partition",
    "classify_boundary",
    "sample_volume",
    "sample_surface",
    "propose_angular_partition",
]

DEFAULT_TOL_GEOM_FACTOR = 1e-9
MIN_CURVE_SAMPLES = 16
TWO_PI = 2.0 * math.pi


def _count(density: float, length: float, minimum: int = 1) -> int:
    if not density or density <= 0:
        raise InvalidArgument(f"Densidade de amostragem deve ser positiva (recebido {density!r})")
    return max(int(minimum), int(math.ceil(density * length - 1e-9)))


# ---------------------------------------------------------------------
# Conjuntos de amostras
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeSamples:
    points: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class SurfaceSamples:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    arclength: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def flipped(self) -> "SurfaceSamples":
        return SurfaceSamples(self.points, -self.normals, self.weights, self.arclength)

    def subset(self, mask: np.ndarray) -> "SurfaceSamples":
        return SurfaceSamples(
            self.points[mask], self.normals[mask], self.weights[mask], self.arclength[mask]
        )

    @staticmethod
    def concat(parts: Sequence["SurfaceSamples"]) -> "SurfaceSamples":
        if not parts:
            empty = np.zeros((0, 2))
            return SurfaceSamples(empty, empty.copy(), np.zeros(0), np.zeros(0))
        offset = 0.0
        arcs = []
        for part in parts:
            arcs.append(part.arclength + offset)
            offset += part.total
        return SurfaceSamples(
            np.vstack([p.points for p in parts]),
            np.vstack([p.normals for p in parts]),
            np.concatenate([p.weights for p in parts]),
            np.concatenate(arcs),
        )


# ---------------------------------------------------------------------
# Curvas de bordo / interface
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Segmento reto com normal unitária constante."""

    start: tuple[float, float]
    end: tuple[float, float]
    normal: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    def sample(self, density: float, minimum: int = MIN_CURVE_SAMPLES) -> SurfaceSamples:
        n = _count(density, self.length, minimum)
        frac = (np.arange(n) + 0.5) / n
        a = np.asarray(self.start, dtype=float)
        b = np.asarray(self.end, dtype=float)
        points = a[None, :] + frac[:, None] * (b - a)[None, :]
        normals = np.tile(np.asarray(self.normal, dtype=float), (n, 1))
        weights = np.full(n, self.length / n)
        return SurfaceSamples(points, normals, weights, frac * self.length)

    def nodes(self, density: float) -> np.ndarray:
        n = _count(density, self.length, MIN_CURVE_SAMPLES)
        frac = np.linspace(0.0, 1.0, n + 1)
        a = np.asarray(self.start, dtype=float)
        b = np.asarray(self.end, dtype=float)
        return a[None, :] + frac[:, None] * (b - a)[None, :]


@dataclass(frozen=True)
class CircleArc:
    """Arco de círculo centrado na origem; normal radial (para fora ou para dentro)."""

    radius: float
    theta_lo: float = 0.0
    theta_hi: float = TWO_PI
    outward: bool = True

    @property
    def length(self) -> float:
        return self.radius * (self.theta_hi - self.theta_lo)

    def sample(self, density: float, minimum: int = MIN_CURVE_SAMPLES) -> SurfaceSamples:
        n = _count(density, self.length, minimum)
        dtheta = (self.theta_hi - self.theta_lo) / n
        theta = self.theta_lo + (np.arange(n) + 0.5) * dtheta
        radial = np.column_stack([np.cos(theta), np.sin(theta)])
        sign = 1.0 if self.outward else -1.0
        weights = np.full(n, self.radius * dtheta)
        return SurfaceSamples(
            self.radius * radial, sign * radial, weights, (theta - self.theta_lo) * self.radius
        )

    def nodes(self, density: float) -> np.ndarray:
        n = _count(density, self.length, MIN_CURVE_SAMPLES)
        theta = np.linspace(self.theta_lo, self.theta_hi, n + 1)
        return self.radius * np.column_stack([np.cos(theta), np.sin(theta)])


Curve = Segment | CircleArc


# ---------------------------------------------------------------------
# Regras de quadratura de ponto médio
# ---------------------------------------------------------------------


def tensor_rule(
    x_lo: float, x_hi: float, y_lo: float, y_hi: float, nx: int, ny: int
) -> VolumeSamples:
    """Ponto médio tensorial em coordenadas cartesianas (ordem C, x mais lento)."""
    dx = (x_hi - x_lo) / nx
    dy = (y_hi - y_lo) / ny
    xs = x_lo + (np.arange(nx) + 0.5) * dx
    ys = y_lo + (np.arange(ny) + 0.5) * dy
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return VolumeSamples(points, np.full(nx * ny, dx * dy))


def polar_rule(
    r_lo: float, r_hi: float, theta_lo: float, theta_hi: float, n_r: int, n_theta: int
) -> VolumeSamples:
    """
    Ponto médio em coordenadas polares. O peso r_mid·dr·dθ coincide com a área
    exata da célula anelar, então a soma dos pesos é exata.
    """
    dr = (r_hi - r_lo) / n_r
    dtheta = (theta_hi - theta_lo) / n_theta
    r_mid = r_lo + (np.arange(n_r) + 0.5) * dr
    theta = theta_lo + (np.arange(n_theta) + 0.5) * dtheta
    gr, gt = np.meshgrid(r_mid, theta, indexing="ij")
    points = np.column_stack([(gr * np.cos(gt)).ravel(), (gr * np.sin(gt)).ravel()])
    weights = (gr * dr * dtheta).ravel()
    return VolumeSamples(points, weights)


def _polar_nodes(r_lo: float, r_hi: float, theta_lo: float, theta_hi: float, density: float):
    n_r = _count(density, r_hi - r_lo, 4)
    n_t = _count(density, (theta_hi - theta_lo) * max(r_hi, 1.0), 8)
    rr, tt = np.meshgrid(
        np.linspace(r_lo, r_hi, n_r + 1), np.linspace(theta_lo, theta_hi, n_t + 1), indexing="ij"
    )
    return np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])


def _polar_angle(points: np.ndarray) -> np.ndarray:
    return np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)


# ---------------------------------------------------------------------
# Domínios
# ---------------------------------------------------------------------


class Domain(ABC):
    """Domínio limitado do plano com bordo parametrizado."""

    kind: str = "domain"

    @property
    @abstractmethod
    def area(self) -> float: ...

    @property
    @abstractmethod
    def diameter(self) -> float: ...

    @property
    @abstractmethod
    def radius_bound(self) -> float:
        """R = max |x| sobre o fecho do domínio."""

    @abstractmethod
    def boundary_curves(self) -> list[Curve]: ...

    @abstractmethod
    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray: ...

    @abstractmethod
    def sample(self, density: float) -> VolumeSamples: ...

    @abstractmethod
    def closure_points(self, density: float) -> np.ndarray: ...

    def boundary_samples(self, density: float) -> SurfaceSamples:
        return SurfaceSamples.concat([c.sample(density) for c in self.boundary_curves()])

    def closure_with_boundary(self, density: float) -> np.ndarray:
        extra = [c.nodes(density) for c in self.boundary_curves()]
        return np.vstack([self.closure_points(density), *extra])


@dataclass(frozen=True)
class Rectangle(Domain):
    x_lo: float = 0.0
    x_hi: float = 1.0
    y_lo: float = 0.0
    y_hi: float = 1.0
    kind = "rectangle"

    def __post_init__(self):
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise InvalidArgument("Retângulo vazio ou degenerado")

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    @property
    def diameter(self) -> float:
        return math.hypot(self.x_hi - self.x_lo, self.y_hi - self.y_lo)

    @property
    def radius_bound(self) -> float:
        xs = (abs(self.x_lo), abs(self.x_hi))
        ys = (abs(self.y_lo), abs(self.y_hi))
        return math.hypot(max(xs), max(ys))

    def boundary_curves(self) -> list[Curve]:
        a, b, c, d = self.x_lo, self.x_hi, self.y_lo, self.y_hi
        return [
            Segment((a, c), (b, c), (0.0, -1.0)),
            Segment((b, c), (b, d), (1.0, 0.0)),
            Segment((b, d), (a, d), (0.0, 1.0)),
            Segment((a, d), (a, c), (-1.0, 0.0)),
        ]

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        return (
            (x >= self.x_lo - tol) & (x <= self.x_hi + tol)
            & (y >= self.y_lo - tol) & (y <= self.y_hi + tol)
        )

    def sample(self, density: float) -> VolumeSamples:
        nx = _count(density, self.x_hi - self.x_lo, 4)
        ny = _count(density, self.y_hi - self.y_lo, 4)
        return tensor_rule(self.x_lo, self.x_hi, self.y_lo, self.y_hi, nx, ny)

    def closure_points(self, density: float) -> np.ndarray:
        nx = _count(density, self.x_hi - self.x_lo, 4)
        ny = _count(density, self.y_hi - self.y_lo, 4)
        gx, gy = np.meshgrid(
            np.linspace(self.x_lo, self.x_hi, nx + 1),
            np.linspace(self.y_lo, self.y_hi, ny + 1),
            indexing="ij",
        )
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class Annulus(Domain):
    r_in: float = 1.0
    r_out: float = 2.0
    kind = "annulus"

    def __post_init__(self):
        if not (0.0 < self.r_in < self.r_out):
            raise InvalidArgument(f"Anel exige 0 < r_in < r_out (recebido {self.r_in}, {self.r_out})")

    @property
    def area(self) -> float:
        return math.pi * (self.r_out**2 - self.r_in**2)

    @property
    def diameter(self) -> float:
        return 2.0 * self.r_out

    @property
    def radius_bound(self) -> float:
        return self.r_out

    def boundary_curves(self) -> list[Curve]:
        return [CircleArc(self.r_in, outward=False), CircleArc(self.r_out, outward=True)]

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        r = np.hypot(points[:, 0], points[:, 1])
        return (r >= self.r_in - tol) & (r <= self.r_out + tol)

    def sample(self, density: float) -> VolumeSamples:
        n_r = _count(density, self.r_out - self.r_in, 4)
        n_t = _count(density, math.pi * (self.r_in + self.r_out), 8)
        return polar_rule(self.r_in, self.r_out, 0.0, TWO_PI, n_r, n_t)

    def closure_points(self, density: float) -> np.ndarray:
        return _polar_nodes(self.r_in, self.r_out, 0.0, TWO_PI, density)


@dataclass(frozen=True)
class Disk(Domain):
    radius: float = 1.0
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0.0:
            raise InvalidArgument("Disco exige raio positivo")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def radius_bound(self) -> float:
        return self.radius

    def boundary_curves(self) -> list[Curve]:
        return [CircleArc(self.radius, outward=True)]

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return np.hypot(points[:, 0], points[:, 1]) <= self.radius + tol

    def sample(self, density: float) -> VolumeSamples:
        n_r = _count(density, self.radius, 4)
        n_t = _count(density, math.pi * self.radius, 8)
        return polar_rule(0.0, self.radius, 0.0, TWO_PI, n_r, n_t)

    def closure_points(self, density: float) -> np.ndarray:
        return _polar_nodes(0.0, self.radius, 0.0, TWO_PI, density)


# ---------------------------------------------------------------------
# Subdomínios
# ---------------------------------------------------------------------


class Subdomain(ABC):
    id: int

    @property
    @abstractmethod
    def area(self) -> float: ...

    @abstractmethod
    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray: ...

    @abstractmethod
    def sample(self, density: float) -> VolumeSamples: ...

    @abstractmethod
    def closure_points(self, density: float) -> np.ndarray: ...


@dataclass(frozen=True)
class WholeDomain(Subdomain):
    id: int
    domain: Domain

    @property
    def area(self) -> float:
        return self.domain.area

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.domain.contains(points, tol)

    def sample(self, density: float) -> VolumeSamples:
        return self.domain.sample(density)

    def closure_points(self, density: float) -> np.ndarray:
        return self.domain.closure_with_boundary(density)


@dataclass(frozen=True)
class AngularSector(Subdomain):
    id: int
    annulus: Annulus
    theta_lo: float
    theta_hi: float

    @property
    def width(self) -> float:
        return self.theta_hi - self.theta_lo

    @property
    def area(self) -> float:
        return 0.5 * self.width * (self.annulus.r_out**2 - self.annulus.r_in**2)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        r = np.hypot(points[:, 0], points[:, 1])
        tol_angle = tol / max(self.annulus.r_in, 1e-300)
        offset = np.mod(np.arctan2(points[:, 1], points[:, 0]) - self.theta_lo, TWO_PI)
        in_angle = (offset <= self.width + tol_angle) | (offset >= TWO_PI - tol_angle)
        return in_angle & self.annulus.contains(points, tol) & (r > 0)

    def sample(self, density: float) -> VolumeSamples:
        a = self.annulus
        n_r = _count(density, a.r_out - a.r_in, 4)
        n_t = _count(density, self.width * 0.5 * (a.r_in + a.r_out), 4)
        return polar_rule(a.r_in, a.r_out, self.theta_lo, self.theta_hi, n_r, n_t)

    def closure_points(self, density: float) -> np.ndarray:
        return _polar_nodes(self.annulus.r_in, self.annulus.r_out, self.theta_lo, self.theta_hi, density)


@dataclass(frozen=True)
class VerticalStrip(Subdomain):
    id: int
    rectangle: Rectangle
    x_lo: float
    x_hi: float

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.rectangle.y_hi - self.rectangle.y_lo)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = points[:, 0]
        return (x >= self.x_lo - tol) & (x <= self.x_hi + tol) & self.rectangle.contains(points, tol)

    def _box(self) -> Rectangle:
        return Rectangle(self.x_lo, self.x_hi, self.rectangle.y_lo, self.rectangle.y_hi)

    def sample(self, density: float) -> VolumeSamples:
        return self._box().sample(density)

    def closure_points(self, density: float) -> np.ndarray:
        return self._box().closure_points(density)


# ---------------------------------------------------------------------
# Interfaces e partição
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class Interface:
    """γ_ij com normal ν_{i→j} (apontando de Ω_i para Ω_j)."""

    id: int
    i: int
    j: int
    curve: Segment

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidArgument("Interface precisa ligar dois subdomínios distintos")

    @property
    def area(self) -> float:
        return self.curve.length

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.curve.normal, dtype=float)

    def samples(self, density: float) -> SurfaceSamples:
        return self.curve.sample(density)

    def reversed(self) -> "Interface":
        c = self.curve
        flipped = Segment(c.start, c.end, (-c.normal[0], -c.normal[1]))
        return Interface(self.id, self.j, self.i, flipped)


@dataclass(frozen=True)
class Partition:
    domain: Domain
    subdomains: tuple[Subdomain, ...]
    interfaces: tuple[Interface, ...] = ()
    tol_geom: float = 0.0

    def __post_init__(self):
        ids = [s.id for s in self.subdomains]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("Identificadores de subdomínio repetidos")
        known = set(ids)
        for iface in self.interfaces:
            if iface.i not in known or iface.j not in known:
                raise InvalidArgument(f"Interface {iface.id} referencia subdomínio inexistente")

    @property
    def ids(self) -> list[int]:
        return sorted(s.id for s in self.subdomains)

    def __len__(self) -> int:
        return len(self.subdomains)

    def subdomain(self, sid: int) -> Subdomain:
        for sub in self.subdomains:
            if sub.id == sid:
                return sub
        raise InvalidArgument(f"Subdomínio {sid} não existe")

    def interface(self, iid: int) -> Interface:
        for iface in self.interfaces:
            if iface.id == iid:
                return iface
        raise InvalidArgument(f"Interface {iid} não existe")

    def claims(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        """Matriz booleana (n_pontos × N) de pertinência, colunas na ordem de `ids`."""
        tol = self.tol_geom if tol is None else tol
        return np.column_stack([self.subdomain(i).contains(points, tol) for i in self.ids])

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Id do subdomínio de cada ponto; empates vão para o menor id, -1 fora do domínio."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(points.shape[0], -1, dtype=int)
        for sid in self.ids:
            free = out < 0
            if not free.any():
                break
            hit = self.subdomain(sid).contains(points[free], self.tol_geom)
            idx = np.flatnonzero(free)[hit]
            out[idx] = sid
        return out


@dataclass(frozen=True)
class BoundarySplit:
    plus: SurfaceSamples
    minus: SurfaceSamples
    flux_plus: np.ndarray
    flux_minus: np.ndarray

    @property
    def plus_length(self) -> float:
        return self.plus.total

    @property
    def minus_length(self) -> float:
        return self.minus.total


@dataclass
class PartitionProposal:
    partition: Partition
    loop_free: bool
    cones_found: bool
    history: list[tuple[int, bool, bool]] = dc_field(default_factory=list)
    graph: "StreamGraph | None" = None

    @property
    def flagged(self) -> bool:
        return not (self.loop_free and self.cones_found)


# ---------------------------------------------------------------------
# Operações
# ---------------------------------------------------------------------


def trivial_partition(domain: Domain, tol_geom_factor: float = DEFAULT_TOL_GEOM_FACTOR) -> Partition:
    return Partition(domain, (WholeDomain(1, domain),), (), tol_geom_factor * domain.diameter)


def build_annulus_angular_partition(
    r_in: float,
    r_out: float,
    angles: Sequence[float],
    *,
    tol_geom_factor: float = DEFAULT_TOL_GEOM_FACTOR,
) -> Partition:
    """Setores Ω_i = {θ_{i-1} < θ < θ_i}; γ_{i,i+1} é o corte radial em θ_i."""
    annulus = Annulus(r_in, r_out)
    theta = [float(a) for a in angles]
    n = len(theta) - 1
    if n < 2:
        raise InvalidArgument("Partição angular exige N >= 2 setores")
    if abs(theta[0]) > 1e-12 or abs(theta[-1] - TWO_PI) > 1e-9:
        raise InvalidArgument("Ângulos devem começar em 0 e terminar em 2π")
    if any(b <= a for a, b in zip(theta, theta[1:])):
        raise InvalidArgument("Ângulos da partição devem ser estritamente crescentes")
    theta[-1] = TWO_PI

    sectors = tuple(
        AngularSector(i + 1, annulus, theta[i], theta[i + 1]) for i in range(n)
    )
    interfaces = []
    for i in range(1, n + 1):
        t = theta[i]
        c, s = math.cos(t), math.sin(t)
        curve = Segment((r_in * c, r_in * s), (r_out * c, r_out * s), (-s, c))
        interfaces.append(Interface(i, i, i % n + 1, curve))
    return Partition(annulus, sectors, tuple(interfaces), tol_geom_factor * annulus.diameter)


def build_rectangle_strip_partition(
    domain: Rectangle,
    cuts: Iterable[float],
    *,
    tol_geom_factor: float = DEFAULT_TOL_GEOM_FACTOR,
) -> Partition:
    cuts = [float(c) for c in cuts]
    for c in cuts:
        if not (domain.x_lo < c < domain.x_hi):
            raise InvalidArgument(f"Corte x={c} fora do interior do retângulo")
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise InvalidArgument("Cortes devem ser estritamente crescentes")

    edges = [domain.x_lo, *cuts, domain.x_hi]
    strips = tuple(
        VerticalStrip(k + 1, domain, edges[k], edges[k + 1]) for k in range(len(edges) - 1)
    )
    interfaces = tuple(
        Interface(k + 1, k + 1, k + 2, Segment((c, domain.y_lo), (c, domain.y_hi), (1.0, 0.0)))
        for k, c in enumerate(cuts)
    )
    return Partition(domain, strips, interfaces, tol_geom_factor * domain.diameter)


def classify_boundary(domain: Domain, field: "VectorField", density: float) -> BoundarySplit:
    """∂Ω₊ onde (H·ν) >= 0, ∂Ω₋ onde (H·ν) < 0."""
    samples = domain.boundary_samples(density)
    flux = np.einsum("ij,ij->i", field(samples.points), samples.normals)
    plus = flux >= 0.0
    return BoundarySplit(samples.subset(plus), samples.subset(~plus), flux[plus], flux[~plus])


def sample_volume(partition: Partition, density: float) -> dict[int, VolumeSamples]:
    return {sid: partition.subdomain(sid).sample(density) for sid in partition.ids}


def sample_surface(target: Interface | Segment | CircleArc | Domain, density: float) -> SurfaceSamples:
    if isinstance(target, Domain):
        return target.boundary_samples(density)
    if isinstance(target, Interface):
        return target.samples(density)
    return target.sample(density)


def propose_angular_partition(
    field: "VectorField",
    annulus: Annulus,
    *,
    max_width: float = math.pi,
    refine_limit: int = 64,
    initial_sectors: int = 4,
    density: float = 32.0,
    tol_sign_factor: float = 1e-8,
    tol_geom_factor: float = DEFAULT_TOL_GEOM_FACTOR,
) -> PartitionProposal:
    """
    Partição angular uniforme, dobrada até cada setor ter faixa de direções de H
    menor que `max_width` e o grafo induzido ficar sem laços (ou até `refine_limit`).
    """
    from .field import PolarAngleField
    from .stream_graph import build_graph, has_closed_loop

    if not isinstance(field, PolarAngleField):
        raise InvalidArgument("propose_angular_partition exige um campo PolarAngle")

    n = max(2, int(initial_sectors))
    history: list[tuple[int, bool, bool]] = []
    proposal: PartitionProposal | None = None
    while n <= refine_limit:
        angles = np.linspace(0.0, TWO_PI, n + 1)
        partition = build_annulus_angular_partition(
            annulus.r_in, annulus.r_out, angles, tol_geom_factor=tol_geom_factor
        )
        cones_ok = all(
            field.direction_range(angles[k], angles[k + 1]) < max_width for k in range(n)
        )
        graph = None
        loop_free = False
        if cones_ok:
            graph = build_graph(partition, field, density, tol_sign_factor=tol_sign_factor)
            loop_free = not has_closed_loop(graph)
        history.append((n, cones_ok, loop_free))
        proposal = PartitionProposal(partition, loop_free, cones_ok, list(history), graph)
        logger.debug("Partição com %d setores: cones=%s sem_laço=%s", n, cones_ok, loop_free)
        if cones_ok and loop_free:
            return proposal
        n *= 2

    if proposal is None:
        raise InvalidArgument(f"refine_limit={refine_limit} menor que o número inicial de setores")
    logger.warning(
        "Refinamento esgotado em %d setores sem grafo livre de laços", len(proposal.partition)
    )
    return proposal
