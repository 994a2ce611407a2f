from __future__ import annotations

from typing import Any, Sequence

__all__ = [
    "CarlemanError",
    "InvalidArgument",
    "InvalidState",
    "CertificationError",
    "ConditionViolation",
    "VanishingFieldError",
    "ConditionAViolation",
    "ConditionBViolation",
    "NoAssignmentExists",
    "SourceFactorViolation",
    "GridError",
    "DivergenceError",
]


class CarlemanError(Exception):
    """Erro genérico do pipeline de pesos de Carleman."""


class InvalidArgument(CarlemanError, ValueError):
    """Argumento fora do domínio aceito pela operação."""


class InvalidState(CarlemanError):
    """Objeto em estado que não permite a operação pedida."""


class CertificationError(CarlemanError):
    """Uma desigualdade certificada por amostragem falhou."""

    def __init__(self, message: str, *, witness: Any = None):
        super().__init__(message)
        self.witness = witness


class ConditionViolation(CarlemanError):
    """Hipótese estrutural do problema violada (sai com código 2 na CLI)."""


class VanishingFieldError(ConditionViolation):
    def __init__(self, message: str, *, point: Sequence[float]):
        super().__init__(message)
        self.point = tuple(float(c) for c in point)


class ConditionAViolation(ConditionViolation):
    """Não existe direção única v com (H·v) > 0 no domínio inteiro."""


class ConditionBViolation(ConditionViolation):
    def __init__(
        self,
        message: str,
        *,
        subdomain: int | None = None,
        interface: int | None = None,
        witness: Any = None,
    ):
        super().__init__(message)
        self.subdomain = subdomain
        self.interface = interface
        self.witness = witness


class NoAssignmentExists(ConditionViolation):
    """O grafo possui laço fechado; não há atribuição de raios."""

    def __init__(self, message: str, *, cycle: Sequence[int] = ()):
        super().__init__(message)
        self.cycle = list(cycle)


class SourceFactorViolation(ConditionViolation):
    """|R(x,0)| se anula em algum ponto amostrado."""

    def __init__(self, message: str, *, point: Sequence[float] | None = None):
        super().__init__(message)
        self.point = tuple(point) if point is not None else None


class GridError(InvalidArgument):
    """Passo de tempo incompatível com a condição CFL."""


class DivergenceError(CarlemanError):
    def __init__(self, message: str, *, step: int):
        super().__init__(message)
        self.step = step
