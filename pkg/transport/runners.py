"""
Execução dos membros de ensemble: em linha (ordem fixa) ou como `group` Celery.

Os dois caminhos trocam apenas dicts JSON, e o resultado é sempre agregado na
ordem dos jobs.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Any, Callable

logger = logging.getLogger(__name__)

__all__ = ["EnsembleRunner", "InlineRunner", "CeleryRunner", "get_runner"]

Job = dict[str, Any]


class EnsembleRunner(ABC):
    @abstractmethod
    def map(self, kind: str, jobs: list[Job], local: Callable[[Job], Job]) -> list[Job]: ...


class InlineRunner(EnsembleRunner):
    def map(self, kind, jobs, local):
        return [local(job) for job in jobs]


class CeleryRunner(EnsembleRunner):
    """Despacha cada membro como `transport.tasks.run_member` na fila carleman."""

    def __init__(self, payload: dict[str, Any], *, timeout: float | None = None):
        self.payload = payload
        self.timeout = timeout

    def map(self, kind, jobs, local):
        from celery import group

        from .tasks import run_member

        logger.info("Despachando %d membros (%s) via Celery", len(jobs), kind)
        signature = group(run_member.s(kind, self.payload, job) for job in jobs)
        result = signature.apply_async(queue="carleman")
        return list(result.get(timeout=self.timeout))


def get_runner(
    backend: str, payload: dict[str, Any] | None = None, *, timeout: float | None = None
) -> EnsembleRunner:
    if backend == "inline":
        return InlineRunner()
    if backend == "celery":
        return CeleryRunner(payload or {}, timeout=timeout)
    raise ValueError(f"ENSEMBLE_BACKEND inválido: {backend!r} (use inline|celery)")
