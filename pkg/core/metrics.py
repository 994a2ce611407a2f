"""
Métricas Prometheus do pipeline numérico.

Registry privado (sem poluir o REGISTRY global do processo); `flush_textfile`
grava o snapshot para o node_exporter quando METRICS_TEXTFILE está configurado.
"""

from __future__ import annotations

import logging

from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest, write_to_textfile

logger = logging.getLogger(__name__)

REGISTRY = CollectorRegistry(auto_describe=True)

SOLVER_RUNS = Counter(
    "carleman_solver_runs_total",
    "Execuções do solver upwind",
    registry=REGISTRY,
)
SOLVER_STEPS = Counter(
    "carleman_solver_steps_total",
    "Passos de tempo executados pelo solver",
    registry=REGISTRY,
)
SOLVER_SECONDS = Histogram(
    "carleman_solver_seconds",
    "Tempo de parede por solve",
    buckets=(0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0),
    registry=REGISTRY,
)
STUDY_MEMBERS = Counter(
    "carleman_study_members_total",
    "Membros de ensemble avaliados",
    ["study"],
    registry=REGISTRY,
)
VERDICTS = Counter(
    "carleman_verdicts_total",
    "Vereditos emitidos pelos estudos",
    ["study", "outcome"],
    registry=REGISTRY,
)


def observe_solve(seconds: float, steps: int) -> None:
    SOLVER_RUNS.inc()
    SOLVER_STEPS.inc(steps)
    SOLVER_SECONDS.observe(seconds)


def observe_member(study: str, count: int = 1) -> None:
    STUDY_MEMBERS.labels(study=study).inc(count)


def observe_verdict(study: str, outcome: str) -> None:
    VERDICTS.labels(study=study, outcome=outcome).inc()


def snapshot() -> str:
    return generate_latest(REGISTRY).decode("utf-8")


def flush_textfile(path: str | None) -> bool:
    if not path:
        return False
    try:
        write_to_textfile(path, REGISTRY)
    except OSError as exc:
        logger.warning("Falha ao gravar métricas em %s: %s", path, exc)
        return False
    return True
