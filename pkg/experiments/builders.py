"""
Montagem dos objetos numéricos a partir de uma ExperimentConfig.

`StudySetup` guarda em cache partição, grafo, cones, raios e peso; o mesmo
setup é reconstruído nos workers Celery a partir do payload JSON.
"""

from __future__ import annotations

import logging
from functools import cached_property
from typing import Any, Mapping

from django.conf import settings

from carleman.domain.errors import ConditionBViolation
from carleman.domain.field import (
    ConstantField,
    DirectionCone,
    PolarAngleField,
    RadialPotentialField,
    RotationField,
    ScalarCoefficient,
    ScaledField,
    SourceFactor,
    TabulatedField,
    VectorField,
    find_direction_cone,
    sup_norm,
)
from carleman.domain.geometry import (
    Annulus,
    Disk,
    Domain,
    Partition,
    PartitionProposal,
    Rectangle,
    build_annulus_angular_partition,
    build_rectangle_strip_partition,
    propose_angular_partition,
    trivial_partition,
)
from carleman.domain.stream_graph import RadiusAssignment, StreamGraph, assign_radii, build_graph
from carleman.domain.weight import (
    CarlemanWeight,
    GeneralWeight,
    Horizon,
    build_condition_A_weight,
    build_general_weight,
    build_piecewise_weight,
    build_potential_weight,
    horizon_constants,
    make_potential,
)
from transport.domain.mesh import Mesh, TimeGrid, UpwindOperator, assemble_upwind, build_mesh
from transport.runners import EnsembleRunner, get_runner
from transport.usecases.carleman_verify import SpaceTimeSampling
from transport.usecases.inverse_source import SourceProblem
from transport.usecases.observability import ObservabilityProblem

from .config import ConfigError, DomainSpec, ExperimentConfig, FieldSpec, parse_config
from .services.runtime_settings import NumericsConfig, get_numerics_config

logger = logging.getLogger(__name__)

__all__ = ["StudySetup", "build_setup", "build_domain", "build_field"]


def build_domain(spec: DomainSpec) -> Domain:
    if spec.kind == "rectangle":
        return Rectangle(**spec.params)
    if spec.kind == "annulus":
        return Annulus(**spec.params)
    return Disk(**spec.params)


def build_field(spec: FieldSpec) -> VectorField:
    kind = spec.kind
    if kind == "constant":
        field: VectorField = ConstantField(spec.params["a"], spec.params["b"])
    elif kind == "rotation":
        field = RotationField()
    elif kind == "radial_potential":
        field = RadialPotentialField()
    elif kind == "polar_angle":
        field = PolarAngleField(**spec.params)
    else:
        field = TabulatedField.from_csv(spec.params["path"])
    return field if spec.scale == 1.0 else ScaledField(field, spec.scale)


class StudySetup:
    def __init__(self, config: ExperimentConfig, numerics: NumericsConfig | None = None):
        self.config = config
        self.numerics = numerics or get_numerics_config()
        self._discretizations: dict[int, tuple[Mesh, UpwindOperator, TimeGrid]] = {}

    # -----------------------------------------------------------------
    # Dados do problema
    # -----------------------------------------------------------------
    @property
    def density(self) -> float:
        return self.config.grid.density

    @cached_property
    def domain(self) -> Domain:
        return build_domain(self.config.domain)

    @cached_property
    def field(self) -> VectorField:
        return build_field(self.config.field)

    @cached_property
    def p(self) -> ScalarCoefficient:
        return ScalarCoefficient(**self.config.p)

    @cached_property
    def R(self) -> SourceFactor:
        return SourceFactor(**self.config.R)

    @cached_property
    def H_norm(self) -> float:
        return sup_norm(self.field, self.domain, self.density)

    # -----------------------------------------------------------------
    # Partição e grafo
    # -----------------------------------------------------------------
    @cached_property
    def proposal(self) -> PartitionProposal | None:
        spec = self.config.partition
        if spec.kind != "auto":
            return None
        assert isinstance(self.domain, Annulus)
        return propose_angular_partition(
            self.field,
            self.domain,
            max_width=spec.max_width,
            refine_limit=spec.refine_limit,
            initial_sectors=spec.initial_sectors,
            density=self.density,
            tol_sign_factor=self.numerics.tol_sign_factor,
            tol_geom_factor=self.numerics.tol_geom_factor,
        )

    @cached_property
    def partition(self) -> Partition:
        spec = self.config.partition
        tol = self.numerics.tol_geom_factor
        if spec.kind == "angular":
            assert isinstance(self.domain, Annulus)
            return build_annulus_angular_partition(
                self.domain.r_in, self.domain.r_out, spec.angles, tol_geom_factor=tol
            )
        if spec.kind == "strips":
            assert isinstance(self.domain, Rectangle)
            return build_rectangle_strip_partition(self.domain, spec.cuts, tol_geom_factor=tol)
        if spec.kind == "auto":
            assert self.proposal is not None
            return self.proposal.partition
        return trivial_partition(self.domain, tol)

    @cached_property
    def graph(self) -> StreamGraph:
        if self.proposal is not None and self.proposal.graph is not None:
            return self.proposal.graph
        return build_graph(
            self.partition, self.field, self.density, tol_sign_factor=self.numerics.tol_sign_factor
        )

    @cached_property
    def cones(self) -> dict[int, DirectionCone | None]:
        return {
            sid: find_direction_cone(
                self.field, self.partition.subdomain(sid), self.density, self.numerics.tol_field
            )
            for sid in self.partition.ids
        }

    @cached_property
    def condition_a_cone(self) -> DirectionCone | None:
        return find_direction_cone(self.field, self.domain, self.density, self.numerics.tol_field)

    def _delta(self) -> float:
        missing = [sid for sid, cone in self.cones.items() if cone is None]
        if missing:
            raise ConditionBViolation(
                f"Subdomínio {missing[0]} sem cone de direção (condição B(ii))", subdomain=missing[0]
            )
        return min(cone.delta1 for cone in self.cones.values() if cone is not None)

    @cached_property
    def radii(self) -> RadiusAssignment:
        return assign_radii(
            self.graph,
            self.domain.radius_bound,
            self.H_norm,
            self._delta(),
            self.config.weight.margin or self.numerics.radius_margin,
            max_depth=self.numerics.max_path_depth,
        )

    # -----------------------------------------------------------------
    # Peso
    # -----------------------------------------------------------------
    @cached_property
    def weight(self) -> CarlemanWeight | GeneralWeight:
        spec = self.config.weight
        if spec.kind == "piecewise":
            return build_piecewise_weight(
                self.partition,
                self.field,
                self.cones,
                self.radii,
                self.graph,
                spec.beta,
                density=self.density,
                tol_num=self.numerics.tol_num,
                s1_safety=self.numerics.s1_safety,
            )
        if spec.kind == "condition_a":
            cone = self.condition_a_cone
            beta = spec.beta if spec.beta is not None else (cone.delta1 / 2.0 if cone else 1.0)
            return build_condition_A_weight(
                self.domain,
                self.field,
                cone,
                beta,
                margin=spec.margin or self.numerics.radius_margin,
                density=self.density,
            )
        if spec.potential is None or spec.beta is None:
            raise ConfigError(f"Peso {spec.kind} sem potencial ou β")
        potential = make_potential(spec.potential, **(spec.potential_params or {}))
        if spec.kind == "potential":
            return build_potential_weight(
                self.domain,
                self.field,
                potential,
                spec.beta,
                density=self.density,
                tol_num=self.numerics.tol_num,
            )
        return build_general_weight(
            self.domain, self.field, potential, spec.beta, density=self.density, force=spec.force
        )

    def horizon(self) -> Horizon:
        return horizon_constants(self.weight, self.config.T, density=self.density)

    # -----------------------------------------------------------------
    # Discretização e problemas
    # -----------------------------------------------------------------
    def discretize(self, n: int | None = None) -> tuple[Mesh, UpwindOperator, TimeGrid]:
        n = n or self.config.grid.n
        if n not in self._discretizations:
            mesh = build_mesh(self.domain, n)
            op = assemble_upwind(mesh, self.field)
            grid = TimeGrid.for_operator(op, self.config.T, self.config.grid.cfl)
            logger.debug("Malha n=%d: %d células, %d passos", n, mesh.n_cells, grid.n_steps)
            self._discretizations[n] = (mesh, op, grid)
        return self._discretizations[n]

    def sampling(self, n: int | None = None) -> SpaceTimeSampling:
        _, op, grid = self.discretize(n)
        return SpaceTimeSampling.build(op, grid, self.config.grid.max_recorded)

    @cached_property
    def _observability(self) -> ObservabilityProblem:
        study = self.config.studies.get("observability")
        return ObservabilityProblem(
            self.domain,
            self.field,
            self.p,
            self.config.T,
            seed=self.config.seed,
            cfl_max=self.config.grid.cfl,
            max_recorded=self.config.grid.max_recorded,
            initial_profile=study.initial_profile if study is not None else None,
        )

    def observability_problem(self) -> ObservabilityProblem:
        return self._observability

    @cached_property
    def _source(self) -> SourceProblem:
        return SourceProblem(
            self.domain,
            self.field,
            self.p,
            self.R,
            self.config.T,
            seed=self.config.seed,
            cfl_max=self.config.grid.cfl,
            max_recorded=self.config.grid.max_recorded,
            density=self.density,
            tol_rho=self.numerics.tol_num,
        )

    def source_problem(self) -> SourceProblem:
        return self._source

    def runner(self) -> EnsembleRunner:
        return get_runner(
            self.numerics.ensemble_backend,
            self.config.payload,
            timeout=getattr(settings, "CELERY_RESULT_TIMEOUT", None),
        )


def build_setup(config: ExperimentConfig | Mapping[str, Any]) -> StudySetup:
    if not isinstance(config, ExperimentConfig):
        config = parse_config(config)
    return StudySetup(config)
