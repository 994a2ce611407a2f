from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from django.conf import settings

_DEFAULTS = {
    "TOL_GEOM_FACTOR": 1e-9,
    "TOL_FIELD": 1e-10,
    "TOL_SIGN_FACTOR": 1e-8,
    "TOL_NUM": 1e-9,
    "RADIUS_MARGIN": 0.1,
    "S1_SAFETY": 0.1,
    "C_CAP": 1e3,
    "CFL_MAX": 0.9,
    "ENSEMBLE_SIZE": 32,
    "MESH_DRIFT_TOL": 0.25,
    "EXPONENT_BUDGET": 600.0,
    "MAX_PATH_DEPTH": 50,
    "FAILURE_GROWTH": 1.8,
    "ENSEMBLE_BACKEND": "inline",
    "OUTPUT_DIR": "out",
    "METRICS_TEXTFILE": "",
}


@dataclass(frozen=True)
class NumericsConfig:
    tol_geom_factor: float
    tol_field: float
    tol_sign_factor: float
    tol_num: float
    radius_margin: float
    s1_safety: float
    c_cap: float
    cfl_max: float
    ensemble_size: int
    mesh_drift_tol: float
    exponent_budget: float
    max_path_depth: int
    failure_growth: float
    ensemble_backend: str
    output_dir: str
    metrics_textfile: str


@lru_cache(maxsize=1)
def get_numerics_config() -> NumericsConfig:
    values = {**_DEFAULTS, **getattr(settings, "CARLEMAN", {})}
    return NumericsConfig(
        tol_geom_factor=float(values["TOL_GEOM_FACTOR"]),
        tol_field=float(values["TOL_FIELD"]),
        tol_sign_factor=float(values["TOL_SIGN_FACTOR"]),
        tol_num=float(values["TOL_NUM"]),
        radius_margin=float(values["RADIUS_MARGIN"]),
        s1_safety=float(values["S1_SAFETY"]),
        c_cap=float(values["C_CAP"]),
        cfl_max=float(values["CFL_MAX"]),
        ensemble_size=int(values["ENSEMBLE_SIZE"]),
        mesh_drift_tol=float(values["MESH_DRIFT_TOL"]),
        exponent_budget=float(values["EXPONENT_BUDGET"]),
        max_path_depth=int(values["MAX_PATH_DEPTH"]),
        failure_growth=float(values["FAILURE_GROWTH"]),
        ensemble_backend=str(values["ENSEMBLE_BACKEND"]),
        output_dir=str(values["OUTPUT_DIR"]),
        metrics_textfile=str(values["METRICS_TEXTFILE"] or ""),
    )


def reload_config() -> None:
    get_numerics_config.cache_clear()
