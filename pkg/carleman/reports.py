from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .domain.field import (
    DirectionCone,
    PolarAngleField,
    VectorField,
    WindingDiagnosis,
    check_nonvanishing,
    divergence_sup,
    find_direction_cone,
    sup_norm,
    winding_diagnosis,
)
from .domain.geometry import Domain, Partition, classify_boundary
from .domain.stream_graph import RadiusAssignment, StreamGraph
from .domain.weight import CarlemanWeight, GeneralWeight, Horizon

__all__ = [
    "graph_to_dot",
    "weight_rows",
    "weight_table",
    "cone_rows",
    "FieldReport",
    "field_report",
    "format_field_report",
    "format_winding",
]


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def graph_to_dot(graph: StreamGraph, radii: RadiusAssignment | None = None, name: str = "stream") -> str:
    """Exporta Λ em DOT: uma aresta por linha ("i -> j") e anotações por nó."""
    lines = [f"digraph {name} {{"]
    for node in graph.nodes:
        label = f"O{node}"
        if radii is not None and node in radii.radii:
            label += f"\\nr={_fmt(radii.radii[node])}"
        lines.append(f'  {node} [label="{label}"];')
    for tail, head in graph.edges:
        ifaces = ",".join(str(i) for i in graph.interfaces_of(tail, head))
        lines.append(f'  {tail} -> {head} [label="γ{ifaces}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cone_rows(cones: Iterable[tuple[int, DirectionCone | None]]) -> list[list[str]]:
    rows = []
    for sid, cone in cones:
        if cone is None:
            rows.append([str(sid), "", "", "", "absent"])
        else:
            rows.append([str(sid), _fmt(cone.v[0]), _fmt(cone.v[1]), _fmt(cone.delta1), _fmt(cone.width)])
    return rows


def weight_rows(weight: CarlemanWeight | GeneralWeight) -> list[list[str]]:
    if isinstance(weight, CarlemanWeight):
        return [
            [
                str(sid),
                _fmt(weight.cones[sid].v[0]),
                _fmt(weight.cones[sid].v[1]),
                _fmt(weight.radii.radii[sid]),
                _fmt(weight.min_B[sid]),
            ]
            for sid in weight.partition.ids
        ]
    desc = weight.potential.describe()
    return [["1", desc.get("name", ""), "", _fmt(desc.get("r", 0.0)), _fmt(weight.delta3)]]


def weight_table(weight: CarlemanWeight | GeneralWeight, horizon: Horizon | None = None) -> str:
    """Tabela texto: (v_i, r_i, min B_i) por subdomínio e as constantes derivadas."""
    header = f"{'Ω':>4} {'v1':>12} {'v2':>12} {'r':>14} {'min B':>12}"
    lines = [header, "-" * len(header)]
    for row in weight_rows(weight):
        lines.append(f"{row[0]:>4} {row[1]:>12} {row[2]:>12} {row[3]:>14} {row[4]:>12}")
    lines.append("")
    if isinstance(weight, CarlemanWeight):
        lines.append(f"δ  = {_fmt(weight.delta)}")
        lines.append(f"β  = {_fmt(weight.beta)}")
        lines.append(f"δ₂ = {_fmt(weight.delta2)}")
        lines.append(f"s₁ = {_fmt(weight.s1)}")
        lines.append(f"r* = {_fmt(weight.r_star)}  R = {_fmt(weight.R)}  ‖H‖ = {_fmt(weight.H_norm)}")
    else:
        lines.append(f"β  = {_fmt(weight.beta)}")
        lines.append(f"δ₃ = {_fmt(weight.delta3)}" + ("  (forçado, sem certificação)" if weight.forced else ""))
    if horizon is not None:
        lines.append(f"T₀ = {_fmt(horizon.T0)}  (T = {_fmt(horizon.T)})")
        lines.append(f"μ  = {_fmt(horizon.mu)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------
# Relatório do campo (comando analyze)
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class FieldReport:
    delta0: float
    H_norm: float
    div_sup: float
    condition_a: DirectionCone | None
    cones: list[tuple[int, DirectionCone | None]]
    plus_length: float
    minus_length: float
    winding: WindingDiagnosis | None = None

    @property
    def condition_a_holds(self) -> bool:
        return self.condition_a is not None

    @property
    def cones_found(self) -> bool:
        return all(cone is not None for _, cone in self.cones)


def field_report(
    domain: Domain,
    field: VectorField,
    partition: Partition,
    *,
    density: float = 32.0,
    tol_field: float = 1e-10,
) -> FieldReport:
    """δ₀, ‖H‖, condição A e cones por subdomínio; VanishingFieldError se H se anula."""
    delta0 = check_nonvanishing(field, domain, density, tol_field)
    cones = [
        (sid, find_direction_cone(field, partition.subdomain(sid), density, tol_field))
        for sid in partition.ids
    ]
    split = classify_boundary(domain, field, density)
    return FieldReport(
        delta0=delta0,
        H_norm=sup_norm(field, domain, density),
        div_sup=divergence_sup(field, domain, density),
        condition_a=find_direction_cone(field, domain, density, tol_field),
        cones=cones,
        plus_length=split.plus_length,
        minus_length=split.minus_length,
        winding=winding_diagnosis(field) if isinstance(field, PolarAngleField) else None,
    )


def format_field_report(report: FieldReport) -> str:
    lines = [
        f"δ₀ = min |H| = {_fmt(report.delta0)}",
        f"‖H‖ = {_fmt(report.H_norm)}",
        f"sup |div H| = {_fmt(report.div_sup)}",
        f"|∂Ω₊| = {_fmt(report.plus_length)}  |∂Ω₋| = {_fmt(report.minus_length)}",
    ]
    cone = report.condition_a
    if cone is None:
        lines.append("Condição A: violada (nenhuma direção v com H·v > 0 em todo Ω)")
    else:
        lines.append(f"Condição A: satisfeita, v = ({_fmt(cone.v[0])}, {_fmt(cone.v[1])}), δ₁ = {_fmt(cone.delta1)}")
    lines.append("")
    header = f"{'Ω':>4} {'v1':>12} {'v2':>12} {'δ₁':>12} {'largura':>12}"
    lines += [header, "-" * len(header)]
    for row in cone_rows(report.cones):
        lines.append(f"{row[0]:>4} {row[1]:>12} {row[2]:>12} {row[3]:>12} {row[4]:>12}")
    if report.winding is not None:
        lines += ["", format_winding(report.winding)]
    return "\n".join(lines) + "\n"


def format_winding(diagnosis: WindingDiagnosis) -> str:
    crossing = "nenhum" if diagnosis.crossing is None else _fmt(diagnosis.crossing)
    verdict = "partição sem laços possível" if diagnosis.loop_free_expected else "laço inevitável"
    return (
        f"m = {diagnosis.m}: q(θ) ∈ [{_fmt(diagnosis.q_min)}, {_fmt(diagnosis.q_max)}], "
        f"π/2 + ℓπ interior: {crossing} ({verdict})"
    )
