#!/usr/bin/env python
"""Ponto de entrada dos comandos carlemanflow (analyze, graph, weights, verify, ...)."""
import sys


def main():
    # define DJANGO_SETTINGS_MODULE (settings.dev por padrão)
    import settings  # noqa: F401

    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django não encontrado. Ative o ambiente virtual e instale requirements.txt."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
