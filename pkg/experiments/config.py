"""
Configuração de experimentos (JSON, `schema_version` 1).

Toda a validação acontece em `parse_config`, antes de qualquer cálculo. O dict
normalizado (`ExperimentConfig.payload`) é o que viaja para os workers Celery;
caminhos de arquivos já saem resolvidos em absoluto.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping

from carleman.domain.errors import CarlemanError

logger = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "DomainSpec",
    "FieldSpec",
    "PartitionSpec",
    "WeightSpec",
    "GridSpec",
    "VerifySpec",
    "ObservabilitySpec",
    "InverseSourceSpec",
    "ReconstructSpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]

SCHEMA_VERSION = 1

DOMAIN_KINDS = {"rectangle", "annulus", "disk"}
FIELD_KINDS = {"constant", "rotation", "radial_potential", "polar_angle", "tabulated"}
PARTITION_KINDS = {"trivial", "angular", "strips", "auto"}
WEIGHT_KINDS = {"piecewise", "condition_a", "potential", "custom"}
POTENTIAL_NAMES = {"squared_norm", "shifted_quadratic", "linear"}
STUDY_NAMES = {"verify", "observability", "inverse_source", "reconstruct"}


class ConfigError(CarlemanError):
    """Arquivo de experimento ilegível ou com valores fora do domínio."""


# ---------------------------------------------------------------------
# Helpers de validação
# ---------------------------------------------------------------------


def _section(data: Mapping[str, Any], key: str, *, required: bool = True) -> dict[str, Any]:
    value = data.get(key)
    if value is None:
        if required:
            raise ConfigError(f"Seção obrigatória ausente: {key!r}")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"Seção {key!r} deve ser um objeto JSON")
    return value


def _number(data: Mapping[str, Any], key: str, default: Any = None, *, where: str = "") -> float:
    value = data.get(key, default)
    label = f"{where}.{key}" if where else key
    if value is None:
        raise ConfigError(f"Campo obrigatório ausente: {label}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label} deve ser numérico (recebido {value!r})")
    if not math.isfinite(value):
        raise ConfigError(f"{label} deve ser finito")
    return float(value)


def _positive(data: Mapping[str, Any], key: str, default: Any = None, *, where: str = "") -> float:
    value = _number(data, key, default, where=where)
    if not value > 0:
        raise ConfigError(f"{where}.{key} deve ser positivo (recebido {value})")
    return value


def _integer(data: Mapping[str, Any], key: str, default: Any = None, *, where: str = "", minimum: int | None = 0) -> int:
    value = data.get(key, default)
    label = f"{where}.{key}" if where else key
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{label} deve ser inteiro (recebido {value!r})")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{label} deve ser >= {minimum}")
    return int(value)


def _flag(data: Mapping[str, Any], key: str, default: bool = False, *, where: str = "") -> bool:
    value = data.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} deve ser booleano")
    return value


def _choice(data: Mapping[str, Any], key: str, options: set[str], *, where: str, default: str | None = None) -> str:
    value = data.get(key, default)
    if value not in options:
        raise ConfigError(f"{where}.{key} inválido: {value!r} (opções: {', '.join(sorted(options))})")
    return str(value)


def _numbers(data: Mapping[str, Any], key: str, *, where: str) -> tuple[float, ...]:
    values = data.get(key)
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}.{key} deve ser uma lista não vazia de números")
    return tuple(_number({"v": v}, "v", where=f"{where}.{key}") for v in values)


# ---------------------------------------------------------------------
# Seções
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    params: dict[str, float]


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    params: dict[str, Any]
    scale: float = 1.0


@dataclass(frozen=True)
class PartitionSpec:
    kind: str
    angles: tuple[float, ...] = ()
    cuts: tuple[float, ...] = ()
    initial_sectors: int = 4
    refine_limit: int = 64
    max_width: float = math.pi


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    beta: float | None = None
    margin: float | None = None
    potential: str | None = None
    potential_params: dict[str, Any] | None = None
    force: bool = False


@dataclass(frozen=True)
class GridSpec:
    n: int
    cfl: float
    density: float
    max_recorded: int


@dataclass(frozen=True)
class VerifySpec:
    suite_size: int = 50
    s_points: int = 10
    drift_weighted: bool = False
    profile: str | None = None
    allow_uncertified: bool = False


@dataclass(frozen=True)
class ObservabilitySpec:
    ensemble: int | None = None
    levels: int = 2
    initial_profile: str | None = None


@dataclass(frozen=True)
class InverseSourceSpec:
    ensemble: int | None = None
    levels: int = 2


@dataclass(frozen=True)
class ReconstructSpec:
    lam: float = 0.0
    noise: float = 0.0
    max_iters: int = 500
    discrepancy: bool = False


def _parse_domain(data: dict[str, Any]) -> DomainSpec:
    where = "domain"
    kind = _choice(data, "kind", DOMAIN_KINDS, where=where)
    if kind == "rectangle":
        params = {k: _number(data, k, d, where=where) for k, d in (("x_lo", 0.0), ("x_hi", 1.0), ("y_lo", 0.0), ("y_hi", 1.0))}
        if not (params["x_hi"] > params["x_lo"] and params["y_hi"] > params["y_lo"]):
            raise ConfigError("domain: retângulo vazio ou degenerado")
    elif kind == "annulus":
        params = {"r_in": _positive(data, "r_in", where=where), "r_out": _positive(data, "r_out", where=where)}
        if not params["r_in"] < params["r_out"]:
            raise ConfigError("domain: anel exige r_in < r_out")
    else:
        params = {"radius": _positive(data, "radius", where=where)}
    return DomainSpec(kind, params)


def _parse_field(data: dict[str, Any], base_dir: Path | None) -> tuple[FieldSpec, dict[str, Any]]:
    where = "field"
    kind = _choice(data, "kind", FIELD_KINDS, where=where)
    normalized = dict(data)
    params: dict[str, Any] = {}
    if kind == "constant":
        params = {"a": _number(data, "a", 1.0, where=where), "b": _number(data, "b", 0.0, where=where)}
        if params["a"] == 0.0 and params["b"] == 0.0:
            raise ConfigError("field: campo constante nulo")
    elif kind == "polar_angle":
        params = {
            "m": _integer(data, "m", where=where, minimum=None),
            "amplitude": _number(data, "amplitude", 0.0, where=where),
            "mode": _integer(data, "mode", 1, where=where, minimum=1),
        }
    elif kind == "tabulated":
        raw = data.get("path")
        if not isinstance(raw, str) or not raw:
            raise ConfigError("field.path obrigatório para campo tabelado")
        path = Path(raw)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"Arquivo de campo não encontrado: {path}")
        params = {"path": str(path.resolve())}
        normalized["path"] = params["path"]
    scale = _number(data, "scale", 1.0, where=where)
    if scale == 0.0:
        raise ConfigError("field.scale não pode ser zero")
    return FieldSpec(kind, params, scale), normalized


def _parse_partition(data: dict[str, Any], domain: DomainSpec, field: FieldSpec) -> PartitionSpec:
    where = "partition"
    kind = _choice(data, "kind", PARTITION_KINDS, where=where, default="trivial")
    if kind == "angular":
        if domain.kind != "annulus":
            raise ConfigError("partition.angular exige domínio anular")
        return PartitionSpec(kind, angles=_numbers(data, "angles", where=where))
    if kind == "strips":
        if domain.kind != "rectangle":
            raise ConfigError("partition.strips exige domínio retangular")
        return PartitionSpec(kind, cuts=_numbers(data, "cuts", where=where))
    if kind == "auto":
        if domain.kind != "annulus" or field.kind != "polar_angle":
            raise ConfigError("partition.auto exige anel e campo polar_angle")
        initial = _integer(data, "initial_sectors", 4, where=where, minimum=2)
        limit = _integer(data, "refine_limit", 64, where=where, minimum=2)
        if limit < initial:
            raise ConfigError("partition.refine_limit menor que initial_sectors")
        return PartitionSpec(
            kind,
            initial_sectors=initial,
            refine_limit=limit,
            max_width=_positive(data, "max_width", math.pi, where=where),
        )
    return PartitionSpec(kind)


def _parse_weight(data: dict[str, Any], partition: PartitionSpec) -> WeightSpec:
    where = "weight"
    kind = _choice(data, "kind", WEIGHT_KINDS, where=where, default="piecewise")
    beta = _positive(data, "beta", where=where) if data.get("beta") is not None else None
    margin = _positive(data, "margin", where=where) if data.get("margin") is not None else None
    potential = None
    potential_params = None
    if kind in {"potential", "custom"}:
        if beta is None:
            raise ConfigError(f"weight.beta obrigatório para peso {kind}")
        spec = _section(data, "potential")
        potential = _choice(spec, "name", POTENTIAL_NAMES, where="weight.potential")
        potential_params = {k: v for k, v in spec.items() if k != "name"}
    if kind == "condition_a" and partition.kind != "trivial":
        raise ConfigError("weight.condition_a usa a partição trivial")
    return WeightSpec(
        kind,
        beta=beta,
        margin=margin,
        potential=potential,
        potential_params=potential_params,
        force=_flag(data, "force", where=where),
    )


def _parse_grid(data: dict[str, Any], cfl_default: float) -> GridSpec:
    where = "grid"
    cfl = _positive(data, "cfl", cfl_default, where=where)
    if cfl > 1.0:
        raise ConfigError("grid.cfl deve ser <= 1 (esquema upwind explícito)")
    return GridSpec(
        n=_integer(data, "n", 32, where=where, minimum=2),
        cfl=cfl,
        density=_positive(data, "density", 32.0, where=where),
        max_recorded=_integer(data, "max_recorded", 256, where=where, minimum=2),
    )


def _optional_str(data: Mapping[str, Any], key: str, where: str) -> str | None:
    value = data.get(key)
    if value is not None and not isinstance(value, str):
        raise ConfigError(f"{where}.{key} deve ser texto")
    return value


def _parse_studies(data: dict[str, Any]) -> dict[str, Any]:
    unknown = set(data) - STUDY_NAMES
    if unknown:
        raise ConfigError(f"Estudos desconhecidos: {sorted(unknown)}")
    studies: dict[str, Any] = {}
    if "verify" in data:
        spec = _section(data, "verify")
        where = "studies.verify"
        studies["verify"] = VerifySpec(
            suite_size=_integer(spec, "suite_size", 50, where=where, minimum=1),
            s_points=_integer(spec, "s_points", 10, where=where, minimum=1),
            drift_weighted=_flag(spec, "drift_weighted", where=where),
            profile=_optional_str(spec, "profile", where),
            allow_uncertified=_flag(spec, "allow_uncertified", where=where),
        )
    if "observability" in data:
        spec = _section(data, "observability")
        where = "studies.observability"
        studies["observability"] = ObservabilitySpec(
            ensemble=_integer(spec, "ensemble", where=where) if "ensemble" in spec else None,
            levels=_integer(spec, "levels", 2, where=where, minimum=1),
            initial_profile=_optional_str(spec, "initial_profile", where),
        )
    if "inverse_source" in data:
        spec = _section(data, "inverse_source")
        where = "studies.inverse_source"
        studies["inverse_source"] = InverseSourceSpec(
            ensemble=_integer(spec, "ensemble", where=where, minimum=1) if "ensemble" in spec else None,
            levels=_integer(spec, "levels", 2, where=where, minimum=1),
        )
    if "reconstruct" in data:
        spec = _section(data, "reconstruct")
        where = "studies.reconstruct"
        lam = _number(spec, "lambda", 0.0, where=where)
        noise = _number(spec, "noise", 0.0, where=where)
        if lam < 0 or noise < 0:
            raise ConfigError("studies.reconstruct: lambda e noise devem ser >= 0")
        studies["reconstruct"] = ReconstructSpec(
            lam=lam,
            noise=noise,
            max_iters=_integer(spec, "max_iters", 500, where=where, minimum=1),
            discrepancy=_flag(spec, "discrepancy", where=where),
        )
    return studies


# ---------------------------------------------------------------------
# Config completa
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    domain: DomainSpec
    field: FieldSpec
    p: dict[str, float]
    R: dict[str, float]
    partition: PartitionSpec
    weight: WeightSpec
    grid: GridSpec
    T: float
    studies: dict[str, Any]
    seed: int
    output_dir: str | None
    payload: dict[str, Any]

    def study(self, name: str):
        if name not in self.studies:
            raise ConfigError(f"Config {self.name!r} não define o estudo {name!r}")
        return self.studies[name]

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        grid_scale: float | None = None,
        output_dir: str | None = None,
    ) -> "ExperimentConfig":
        """Nova config com --seed/--grid-scale/--out aplicados ao payload."""
        payload = copy.deepcopy(self.payload)
        if seed is not None:
            payload["seed"] = int(seed)
        if grid_scale is not None:
            if not grid_scale > 0:
                raise ConfigError("--grid-scale deve ser positivo")
            payload.setdefault("grid", {})["n"] = max(2, int(math.ceil(self.grid.n * grid_scale)))
        if output_dir is not None:
            payload["output_dir"] = str(output_dir)
        return parse_config(payload)


def parse_config(data: Mapping[str, Any], *, base_dir: Path | None = None, cfl_default: float = 0.9) -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("Config deve ser um objeto JSON")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version!r} não suportada (esperado {SCHEMA_VERSION})")

    payload = copy.deepcopy(dict(data))
    domain = _parse_domain(_section(data, "domain"))
    field, payload["field"] = _parse_field(_section(data, "field"), base_dir)
    p_raw = _section(data, "p", required=False)
    p = {k: _number(p_raw, k, 0.0, where="p") for k in ("c0", "c1", "c2")}
    if p_raw.get("bound") is not None:
        p["bound"] = _positive(p_raw, "bound", where="p")
    R_raw = _section(data, "R", required=False)
    R = {k: _number(R_raw, k, 1.0 if k == "c0" else 0.0, where="R") for k in ("c0", "c1", "c2", "d0", "d1", "d2")}
    partition = _parse_partition(_section(data, "partition", required=False), domain, field)
    weight = _parse_weight(_section(data, "weight", required=False), partition)
    grid = _parse_grid(_section(data, "grid", required=False), cfl_default)
    # grid sempre com os defaults aplicados
    payload["grid"] = asdict(grid)
    T = _positive(data, "T")
    studies = _parse_studies(_section(data, "studies", required=False))
    seed = _integer(data, "seed", 0)
    output_dir = _optional_str(data, "output_dir", "config")
    name = data.get("name", "experiment")
    if not isinstance(name, str) or not name:
        raise ConfigError("name deve ser texto não vazio")

    return ExperimentConfig(
        name=name,
        domain=domain,
        field=field,
        p=p,
        R=R,
        partition=partition,
        weight=weight,
        grid=grid,
        T=T,
        studies=studies,
        seed=seed,
        output_dir=output_dir,
        payload=payload,
    )


def load_config(path: str | Path, *, cfl_default: float = 0.9) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Arquivo de config não encontrado: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON inválido em {path}: {exc}") from exc
    config = parse_config(data, base_dir=path.resolve().parent, cfl_default=cfl_default)
    logger.info("Config %s carregada de %s", config.name, path)
    return config
