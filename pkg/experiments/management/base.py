"""
Base comum dos comandos de experimento.

Todos aceitam --config/--out/--seed/--grid-scale. Códigos de saída:
0 = vereditos PASS (ou NOT-APPLICABLE), 1 = uso/config, 2 = condição
matemática violada ou veredito FAIL.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from django.core.management.base import BaseCommand, CommandError

from carleman.domain.errors import CarlemanError, ConditionViolation, InvalidArgument
from core.metrics import flush_textfile

from ..builders import StudySetup, build_setup
from ..config import ConfigError, load_config
from ..services.runtime_settings import get_numerics_config
from ..utils.csv_output import write_csv

logger = logging.getLogger(__name__)

FAIL = "FAIL"


class ExperimentCommand(BaseCommand):
    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Arquivo JSON do experimento.")
        parser.add_argument("--out", default=None, help="Diretório de saída (sobrepõe output_dir).")
        parser.add_argument("--seed", type=int, default=None, help="Semente (sobrepõe a da config).")
        parser.add_argument(
            "--grid-scale",
            dest="grid_scale",
            type=float,
            default=None,
            help="Multiplica grid.n da config.",
        )

    # -----------------------------------------------------------------
    # Hooks
    # -----------------------------------------------------------------
    def run(self, setup: StudySetup, out_dir: Path) -> Iterable[str]:
        """Executa o comando e devolve os vereditos emitidos."""
        raise NotImplementedError

    # -----------------------------------------------------------------
    # Helpers de saída
    # -----------------------------------------------------------------
    def emit(self, message: str = "") -> None:
        self.stdout.write(message)

    def write_table(self, path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        written = write_csv(path, header, rows)
        self.stdout.write(f"  -> {written}")
        return written

    def write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        self.stdout.write(f"  -> {path}")
        return path

    def verdict_line(self, label: str, verdict: str, detail: str = "") -> None:
        style = self.style.ERROR if verdict == FAIL else self.style.SUCCESS
        self.stdout.write(style(f"{label}: {verdict}" + (f" ({detail})" if detail else "")))

    def _output_dir(self, options: dict[str, Any], setup: StudySetup) -> Path:
        if options.get("out"):
            return Path(options["out"])
        if setup.config.output_dir:
            return Path(setup.config.output_dir)
        return Path(setup.numerics.output_dir) / setup.config.name

    # -----------------------------------------------------------------
    # Execução
    # -----------------------------------------------------------------
    def handle(self, *args, **options):
        numerics = get_numerics_config()
        try:
            config = load_config(options["config"], cfl_default=numerics.cfl_max)
            config = config.with_overrides(
                seed=options.get("seed"),
                grid_scale=options.get("grid_scale"),
                output_dir=options.get("out"),
            )
            setup = build_setup(config)
            out_dir = self._output_dir(options, setup)
            out_dir.mkdir(parents=True, exist_ok=True)
            self.stdout.write(f"Experimento {config.name} (seed={config.seed}, n={config.grid.n})")
            verdicts = list(self.run(setup, out_dir) or [])
        except ConfigError as exc:
            raise CommandError(f"Config inválida: {exc}", returncode=1) from exc
        except ConditionViolation as exc:
            self._diagnose(exc)
            raise CommandError(f"Condição violada: {exc}", returncode=2) from exc
        except InvalidArgument as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except CarlemanError as exc:
            self._diagnose(exc)
            raise CommandError(str(exc), returncode=2) from exc
        finally:
            if flush_textfile(numerics.metrics_textfile):
                logger.debug("Métricas gravadas em %s", numerics.metrics_textfile)

        if FAIL in verdicts:
            raise CommandError("Veredito FAIL", returncode=2)

    def _diagnose(self, exc: Exception) -> None:
        for attr in ("point", "witness", "cycle", "interface", "subdomain", "step"):
            value = getattr(exc, attr, None)
            if value not in (None, [], ()):
                self.stderr.write(f"  {attr}: {value}")
