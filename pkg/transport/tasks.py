"""
Celery tasks do app transport.

Cada task recebe o payload JSON do experimento e um job (índice do membro e
resolução), reconstrói o problema e devolve o dict do membro.
"""

from __future__ import annotations

import logging
from typing import Any, Dict

from celery import shared_task

logger = logging.getLogger(__name__)


def _member(kind: str, payload: Dict[str, Any], job: Dict[str, Any]) -> Dict[str, Any]:
    from experiments.builders import build_setup
    from transport.usecases.inverse_source import source_member
    from transport.usecases.observability import observability_member

    setup = build_setup(payload)
    if kind == "observability":
        return observability_member(setup.observability_problem(), job)
    if kind == "inverse_source":
        return source_member(setup.source_problem(), job)
    raise ValueError(f"Tipo de membro desconhecido: {kind!r}")


@shared_task(bind=True, name="transport.tasks.run_member")
def run_member(self, kind: str, payload: Dict[str, Any], job: Dict[str, Any]):
    """
    Executa um membro de ensemble.

    Args:
        kind: "observability" ou "inverse_source"
        payload: config do experimento já validada (dict JSON)
        job: {"index": k, "n": resolução, ...}
    """
    logger.info("Task run_member %s index=%s n=%s", kind, job.get("index"), job.get("n"))
    return _member(kind, payload, job)


@shared_task(bind=True, name="transport.tasks.health_check")
def health_check_transport(self):
    """Sanity-check do worker da fila carleman."""
    return {"status": "ok", "message": "Transport worker is healthy"}
