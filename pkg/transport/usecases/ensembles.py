"""
Peças comuns aos estudos por ensemble (observabilidade e fonte): membros
serializáveis, dados aleatórios por membro e resumo por nível de malha.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Any, Callable

import numpy as np

from carleman.domain.geometry import Domain
from core.metrics import observe_member, observe_verdict

from .carleman_verify import GaussianBump

logger = logging.getLogger(__name__)

__all__ = [
    "PASS",
    "FAIL",
    "NOT_APPLICABLE",
    "MemberResult",
    "LevelSummary",
    "EnsembleStudy",
    "safe_ratio",
    "member_bump",
    "level_sizes",
    "run_levels",
    "finish",
]

PASS = "PASS"
FAIL = "FAIL"
NOT_APPLICABLE = "NOT-APPLICABLE"

DEGENERATE_TOL = 1e-14


def safe_ratio(numerator: float, denominator: float, tol: float = DEGENERATE_TOL) -> float:
    """0/0 → 0; x/0 com x > 0 → inf."""
    if numerator == 0.0:
        return 0.0
    if denominator <= tol * numerator:
        return math.inf
    return numerator / denominator


@dataclass(frozen=True)
class MemberResult:
    index: int
    n: int
    numerator: float
    denominator: float
    ratio: float
    label: str = ""
    extra: dict[str, float] = dc_field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MemberResult":
        return cls(
            index=int(data["index"]),
            n=int(data["n"]),
            numerator=float(data["numerator"]),
            denominator=float(data["denominator"]),
            ratio=float(data["ratio"]),
            label=str(data.get("label", "")),
            extra={k: float(v) for k, v in data.get("extra", {}).items()},
        )


@dataclass
class LevelSummary:
    n: int
    h: float
    members: list[MemberResult]

    @property
    def c_max(self) -> float:
        return max((m.ratio for m in self.members), default=0.0)


@dataclass
class EnsembleStudy:
    study: str
    levels: list[LevelSummary]
    drift_tol: float = 0.25
    failure_growth: float = 1.8
    applicable: bool = True
    notes: dict[str, float] = dc_field(default_factory=dict)

    @property
    def constants(self) -> list[float]:
        return [level.c_max for level in self.levels]

    @property
    def c_max(self) -> float:
        return self.constants[0] if self.levels else 0.0

    @property
    def growth(self) -> list[float]:
        c = self.constants
        return [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(c, c[1:])]

    @property
    def drift(self) -> float:
        c = self.constants
        worst = 0.0
        for a, b in zip(c, c[1:]):
            if not (math.isfinite(a) and math.isfinite(b)):
                return math.inf
            if a > 0:
                worst = max(worst, abs(b - a) / a)
            elif b > 0:
                return math.inf
        return worst

    @property
    def failure_detected(self) -> bool:
        """Razão cresce ao menos `failure_growth` vezes a cada refinamento."""
        g = self.growth
        return bool(g) and all(x >= self.failure_growth for x in g)

    @property
    def witness(self) -> MemberResult | None:
        for level in self.levels:
            for member in level.members:
                if math.isinf(member.ratio):
                    return member
        return None

    @property
    def verdict(self) -> str:
        if self.witness is not None or self.failure_detected:
            return FAIL
        if not self.applicable:
            return NOT_APPLICABLE
        return PASS if self.drift <= self.drift_tol else FAIL


def member_bump(domain: Domain, seed: int, index: int, *, density: float = 8.0) -> GaussianBump:
    """Bump aleatório determinado por (seed, índice), independente da malha."""
    rng = np.random.default_rng([int(seed), int(index)])
    candidates = domain.sample(density).points
    center = candidates[int(rng.integers(candidates.shape[0]))]
    width = float(rng.uniform(0.1, 0.25) * domain.diameter)
    a1, a2 = rng.normal(scale=0.5, size=2)
    return GaussianBump(
        (float(center[0]), float(center[1])), width, (1.0, float(a1), float(a2), 0.0), name=f"m{index}"
    )


def level_sizes(n: int, levels: int) -> list[int]:
    return [int(n) * 2**k for k in range(max(1, int(levels)))]


def run_levels(
    study: str,
    runner,
    sizes: list[int],
    n_ensemble: int,
    local: Callable[[dict[str, Any]], dict[str, Any]],
    *,
    h_of: Callable[[int], float],
    extra_jobs: list[dict[str, Any]] | None = None,
) -> list[LevelSummary]:
    levels: list[LevelSummary] = []
    for n in sizes:
        jobs = [dict(job, n=n) for job in (extra_jobs or [])]
        offset = len(jobs)
        jobs += [{"index": offset + k, "n": n} for k in range(n_ensemble)]
        results = [MemberResult.from_dict(r) for r in runner.map(study, jobs, local)]
        observe_member(study, len(results))
        levels.append(LevelSummary(n, h_of(n), results))
        logger.info("Estudo %s, n=%d: C=%.6g (%d membros)", study, n, levels[-1].c_max, len(results))
    return levels


def finish(study: EnsembleStudy) -> EnsembleStudy:
    observe_verdict(study.study, study.verdict)
    if study.verdict == FAIL:
        witness = study.witness
        logger.warning(
            "Estudo %s FAIL: constantes=%s deriva=%.3g testemunha=%s",
            study.study,
            [f"{c:.4g}" for c in study.constants],
            study.drift,
            None if witness is None else (witness.label or witness.index, witness.n),
        )
    return study
