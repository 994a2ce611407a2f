"""
Escrita determinística dos CSVs de saída.

Floats em `.12e`, linhas terminadas em "\\n" e ordem de colunas fixa: a mesma
config com a mesma semente produz arquivos idênticos byte a byte.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

logger = logging.getLogger(__name__)

__all__ = ["format_value", "write_csv", "sweep_rows", "study_rows", "study_summary_rows"]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12e}"
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info("CSV %s: %d linhas", path, count)
    return path


def sweep_rows(result) -> tuple[list[str], list[list[Any]]]:
    """Uma linha por (s, função): os seis termos no deslocamento reportado e a razão."""
    from transport.usecases.carleman_verify import TERM_NAMES

    header = ["s", "function", "log_shift", *TERM_NAMES, "ratio"]
    rows = []
    for row in result.rows:
        values = row.terms.values
        rows.append([row.s, row.function, row.terms.shift, *(values[name] for name in TERM_NAMES), row.ratio])
    return header, rows


def study_rows(study) -> tuple[list[str], list[list[Any]]]:
    """Membros de um EnsembleStudy, nível a nível; colunas extras em ordem alfabética."""
    extra_keys = sorted({key for level in study.levels for m in level.members for key in m.extra})
    header = ["n", "h", "index", "label", "numerator", "denominator", "ratio", *extra_keys]
    rows = []
    for level in study.levels:
        for member in level.members:
            rows.append(
                [
                    level.n,
                    level.h,
                    member.index,
                    member.label,
                    member.numerator,
                    member.denominator,
                    member.ratio,
                    *(member.extra.get(key) for key in extra_keys),
                ]
            )
    return header, rows


def study_summary_rows(study) -> tuple[list[str], list[list[Any]]]:
    header = ["n", "h", "members", "c_max", "growth"]
    growth = [None, *study.growth]
    rows = [
        [level.n, level.h, len(level.members), level.c_max, growth[k]]
        for k, level in enumerate(study.levels)
    ]
    return header, rows
