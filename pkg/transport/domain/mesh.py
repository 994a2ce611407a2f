"""
Malha de volumes finitos ajustada ao domínio (cartesiana para retângulos,
polar para anel e disco), operador upwind não conservativo e grade temporal.

Convenções:
- faces internas guardam a_f = (H·n)·|f| no ponto médio, com n de owner → neighbor;
- faces de bordo guardam a_b = (H·ν)·|b| com ν normal externa;
- (D u)_K = Σ_{faces de entrada} |a_f|/|K| (u_K − u_viz) e B_in leva o dado de
  entrada g_b para a célula, de modo que ∂_t u + H·∇u ≈ −(D u − B_in g).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from carleman.domain.errors import GridError, InvalidArgument
from carleman.domain.field import VectorField
from carleman.domain.geometry import Annulus, Disk, Domain, Rectangle, polar_rule, tensor_rule

logger = logging.getLogger(__name__)

FLUX_ROUNDOFF = 1e-12

__all__ = ["Mesh", "UpwindOperator", "TimeGrid", "build_mesh", "assemble_upwind"]


@dataclass(frozen=True)
class Mesh:
    kind: str
    shape: tuple[int, int]
    h: float
    centroids: np.ndarray
    volumes: np.ndarray
    face_owner: np.ndarray
    face_neighbor: np.ndarray
    face_point: np.ndarray
    face_normal: np.ndarray
    face_length: np.ndarray
    bnd_cell: np.ndarray
    bnd_point: np.ndarray
    bnd_normal: np.ndarray
    bnd_length: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.volumes.shape[0])

    @property
    def n_boundary(self) -> int:
        return int(self.bnd_length.shape[0])

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.volumes, values))

    def l2_norm(self, values: np.ndarray) -> float:
        return math.sqrt(max(self.integrate(np.asarray(values) ** 2), 0.0))


def _cells_per_length(n: int, length: float, minimum: int) -> int:
    return max(minimum, int(math.ceil(n * length - 1e-9)))


def _rectangle_mesh(domain: Rectangle, n: int) -> Mesh:
    nx = _cells_per_length(n, domain.x_hi - domain.x_lo, 2)
    ny = _cells_per_length(n, domain.y_hi - domain.y_lo, 2)
    dx = (domain.x_hi - domain.x_lo) / nx
    dy = (domain.y_hi - domain.y_lo) / ny
    rule = tensor_rule(domain.x_lo, domain.x_hi, domain.y_lo, domain.y_hi, nx, ny)
    idx = np.arange(nx * ny).reshape(nx, ny)
    xs = domain.x_lo + (np.arange(nx) + 0.5) * dx
    ys = domain.y_lo + (np.arange(ny) + 0.5) * dy

    # faces verticais (x constante) e horizontais (y constante)
    gx, gy = np.meshgrid(domain.x_lo + np.arange(1, nx) * dx, ys, indexing="ij")
    v_owner, v_nb = idx[:-1, :].ravel(), idx[1:, :].ravel()
    v_point = np.column_stack([gx.ravel(), gy.ravel()])
    hx, hy = np.meshgrid(xs, domain.y_lo + np.arange(1, ny) * dy, indexing="ij")
    h_owner, h_nb = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    h_point = np.column_stack([hx.ravel(), hy.ravel()])

    owner = np.concatenate([v_owner, h_owner])
    neighbor = np.concatenate([v_nb, h_nb])
    point = np.vstack([v_point, h_point])
    normal = np.vstack([np.tile([1.0, 0.0], (v_owner.size, 1)), np.tile([0.0, 1.0], (h_owner.size, 1))])
    length = np.concatenate([np.full(v_owner.size, dy), np.full(h_owner.size, dx)])

    b_cell, b_point, b_normal, b_len = [], [], [], []
    for cells, pts, nrm, ln in (
        (idx[:, 0], np.column_stack([xs, np.full(nx, domain.y_lo)]), (0.0, -1.0), dx),
        (idx[-1, :], np.column_stack([np.full(ny, domain.x_hi), ys]), (1.0, 0.0), dy),
        (idx[::-1, -1], np.column_stack([xs[::-1], np.full(nx, domain.y_hi)]), (0.0, 1.0), dx),
        (idx[0, ::-1], np.column_stack([np.full(ny, domain.x_lo), ys[::-1]]), (-1.0, 0.0), dy),
    ):
        b_cell.append(cells)
        b_point.append(pts)
        b_normal.append(np.tile(nrm, (cells.size, 1)))
        b_len.append(np.full(cells.size, ln))

    return Mesh(
        kind="rectangle",
        shape=(nx, ny),
        h=max(dx, dy),
        centroids=rule.points,
        volumes=rule.weights,
        face_owner=owner,
        face_neighbor=neighbor,
        face_point=point,
        face_normal=normal.astype(float),
        face_length=length,
        bnd_cell=np.concatenate(b_cell),
        bnd_point=np.vstack(b_point),
        bnd_normal=np.vstack(b_normal).astype(float),
        bnd_length=np.concatenate(b_len),
    )


def _polar_mesh(r_lo: float, r_hi: float, n: int, kind: str) -> Mesh:
    n_r = _cells_per_length(n, r_hi - r_lo, 2)
    n_t = _cells_per_length(n, math.pi * (r_lo + r_hi), 8)
    dr = (r_hi - r_lo) / n_r
    dt = 2.0 * math.pi / n_t
    rule = polar_rule(r_lo, r_hi, 0.0, 2.0 * math.pi, n_r, n_t)
    idx = np.arange(n_r * n_t).reshape(n_r, n_t)
    r_edges = r_lo + np.arange(n_r + 1) * dr
    r_mid = r_lo + (np.arange(n_r) + 0.5) * dr
    theta_mid = (np.arange(n_t) + 0.5) * dt
    theta_edge = np.arange(1, n_t + 1) * dt  # face entre b e b+1 (mod n_t)

    # faces radiais (θ constante): owner (a, b) → neighbor (a, b+1)
    gr, gt = np.meshgrid(r_mid, theta_edge, indexing="ij")
    a_owner = idx.ravel()
    a_nb = np.roll(idx, -1, axis=1).ravel()
    a_point = np.column_stack([(gr * np.cos(gt)).ravel(), (gr * np.sin(gt)).ravel()])
    a_normal = np.column_stack([-np.sin(gt).ravel(), np.cos(gt).ravel()])
    a_len = np.full(a_owner.size, dr)

    # faces circulares (r constante): owner (a, b) → neighbor (a+1, b)
    er, et = np.meshgrid(r_edges[1:-1], theta_mid, indexing="ij")
    c_owner = idx[:-1, :].ravel()
    c_nb = idx[1:, :].ravel()
    c_point = np.column_stack([(er * np.cos(et)).ravel(), (er * np.sin(et)).ravel()])
    c_normal = np.column_stack([np.cos(et).ravel(), np.sin(et).ravel()])
    c_len = (er * dt).ravel()

    radial = np.column_stack([np.cos(theta_mid), np.sin(theta_mid)])
    b_cell = [idx[-1, :]]
    b_point = [r_hi * radial]
    b_normal = [radial]
    b_len = [np.full(n_t, r_hi * dt)]
    if r_lo > 0:
        b_cell.insert(0, idx[0, :])
        b_point.insert(0, r_lo * radial)
        b_normal.insert(0, -radial)
        b_len.insert(0, np.full(n_t, r_lo * dt))

    return Mesh(
        kind=kind,
        shape=(n_r, n_t),
        h=max(dr, r_hi * dt),
        centroids=rule.points,
        volumes=rule.weights,
        face_owner=np.concatenate([a_owner, c_owner]),
        face_neighbor=np.concatenate([a_nb, c_nb]),
        face_point=np.vstack([a_point, c_point]),
        face_normal=np.vstack([a_normal, c_normal]),
        face_length=np.concatenate([a_len, c_len]),
        bnd_cell=np.concatenate(b_cell),
        bnd_point=np.vstack(b_point),
        bnd_normal=np.vstack(b_normal),
        bnd_length=np.concatenate(b_len),
    )


def build_mesh(domain: Domain, n: int) -> Mesh:
    """`n` células por unidade de comprimento em cada direção."""
    if n < 1:
        raise InvalidArgument("Resolução da malha deve ser >= 1")
    if isinstance(domain, Rectangle):
        return _rectangle_mesh(domain, n)
    if isinstance(domain, Annulus):
        return _polar_mesh(domain.r_in, domain.r_out, n, "annulus")
    if isinstance(domain, Disk):
        return _polar_mesh(0.0, domain.radius, n, "disk")
    raise InvalidArgument(f"Domínio sem malha disponível: {type(domain).__name__}")


@dataclass(frozen=True)
class UpwindOperator:
    mesh: Mesh
    D: sp.csr_matrix
    B_in: sp.csr_matrix
    bnd_flux: np.ndarray
    max_rate: float

    @property
    def inflow(self) -> np.ndarray:
        return self.bnd_flux < 0.0

    @property
    def outflow(self) -> np.ndarray:
        return ~self.inflow

    def max_stable_step(self, cfl_max: float) -> float:
        return math.inf if self.max_rate <= 0 else cfl_max / self.max_rate

    def courant(self, tau: float) -> float:
        return tau * self.max_rate


def assemble_upwind(mesh: Mesh, field: VectorField) -> UpwindOperator:
    a = np.einsum("ij,ij->i", field(mesh.face_point), mesh.face_normal) * mesh.face_length
    b_flux = np.einsum("ij,ij->i", field(mesh.bnd_point), mesh.bnd_normal) * mesh.bnd_length
    # fluxos tangenciais (ruído de arredondamento) contam como zero
    scale = max(np.abs(a).max(initial=0.0), np.abs(b_flux).max(initial=0.0))
    a = np.where(np.abs(a) <= FLUX_ROUNDOFF * scale, 0.0, a)
    b_flux = np.where(np.abs(b_flux) <= FLUX_ROUNDOFF * scale, 0.0, b_flux)
    # a > 0: owner é montante e o neighbor recebe; a < 0: o contrário
    down = np.where(a > 0, mesh.face_neighbor, mesh.face_owner)
    up = np.where(a > 0, mesh.face_owner, mesh.face_neighbor)
    rate = np.abs(a) / mesh.volumes[down]
    nc = mesh.n_cells
    diag = np.bincount(down, weights=rate, minlength=nc)

    inflow = b_flux < 0.0
    b_rate = np.where(inflow, -b_flux / mesh.volumes[mesh.bnd_cell], 0.0)
    diag += np.bincount(mesh.bnd_cell, weights=b_rate, minlength=nc)

    D = sp.csr_matrix(
        (np.concatenate([diag, -rate]), (np.concatenate([np.arange(nc), down]), np.concatenate([np.arange(nc), up]))),
        shape=(nc, nc),
    )
    B_in = sp.csr_matrix(
        (b_rate[inflow], (mesh.bnd_cell[inflow], np.flatnonzero(inflow))), shape=(nc, mesh.n_boundary)
    )
    return UpwindOperator(mesh, D, B_in, b_flux, float(diag.max()) if nc else 0.0)


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_steps(self) -> int:
        return int(self.times.size - 1)

    @classmethod
    def uniform(cls, T: float, max_step: float) -> "TimeGrid":
        if not T > 0:
            raise InvalidArgument("Horizonte T deve ser positivo")
        m = max(1, int(math.ceil(T / max_step - 1e-12))) if math.isfinite(max_step) else 1
        return cls(np.linspace(0.0, T, m + 1))

    @classmethod
    def fixed_step(cls, T: float, tau: float) -> "TimeGrid":
        """Passo constante τ; o último passo é encurtado para terminar exatamente em T."""
        if not (T > 0 and tau > 0):
            raise InvalidArgument("T e τ devem ser positivos")
        times = np.arange(0.0, T, tau)
        if T - times[-1] < 1e-12 * T:
            times = times[:-1]
        return cls(np.append(times, T))

    @classmethod
    def for_operator(cls, op: UpwindOperator, T: float, cfl: float, tau: float | None = None) -> "TimeGrid":
        if tau is None:
            return cls.uniform(T, op.max_stable_step(cfl))
        grid = cls.fixed_step(T, tau)
        grid.check_cfl(op, cfl)
        return grid

    def check_cfl(self, op: UpwindOperator, cfl_max: float) -> None:
        worst = op.courant(float(self.steps.max()))
        if worst > cfl_max * (1.0 + 1e-12):
            raise GridError(f"Número de Courant {worst:.4f} excede cfl_max={cfl_max}")

    def record_indices(self, max_recorded: int) -> np.ndarray:
        """Níveis guardados (sempre incluem 0 e o último)."""
        total = self.times.size
        if max_recorded <= 1 or total <= max_recorded:
            return np.arange(total)
        return np.unique(np.round(np.linspace(0, total - 1, max_recorded)).astype(int))

    def trapezoid_weights(self, indices: np.ndarray | None = None) -> np.ndarray:
        t = self.times if indices is None else self.times[indices]
        w = np.zeros(t.size)
        if t.size > 1:
            dt = np.diff(t)
            w[:-1] += 0.5 * dt
            w[1:] += 0.5 * dt
        return w

    def derivative_matrix(self) -> sp.csr_matrix:
        """Diferenças centradas no interior (espaçamento variável) e laterais nas pontas."""
        t = self.times
        m = t.size
        if m < 2:
            return sp.csr_matrix((m, m))
        rows, cols, vals = [], [], []
        h0 = t[1] - t[0]
        rows += [0, 0]
        cols += [0, 1]
        vals += [-1.0 / h0, 1.0 / h0]
        for n in range(1, m - 1):
            hs, hd = t[n] - t[n - 1], t[n + 1] - t[n]
            rows += [n, n, n]
            cols += [n - 1, n, n + 1]
            vals += [-hd / (hs * (hs + hd)), (hd - hs) / (hs * hd), hs / (hd * (hs + hd))]
        hl = t[-1] - t[-2]
        rows += [m - 1, m - 1]
        cols += [m - 2, m - 1]
        vals += [-1.0 / hl, 1.0 / hl]
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
