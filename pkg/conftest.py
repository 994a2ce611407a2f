"""
Configuração do pytest para o projeto carlemanflow.
Inclui fixtures comuns (configs de experimento, diretório de saída, Celery eager).
"""

import json
import os
from pathlib import Path

import pytest
from django.conf import settings
from django.test import override_settings

FIXTURES_DIR = Path(__file__).resolve().parent / "experiments" / "fixtures"


def pytest_configure():
    """Configurações específicas para pytest."""
    settings.TESTING = True

    if not os.getenv("CI"):
        print(f"🧪 pytest configured for carlemanflow")
        print(f"📁 Settings module: {os.getenv('DJANGO_SETTINGS_MODULE')}")


def pytest_addoption(parser):
    """Adiciona opções customizadas ao pytest."""
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Executar testes marcados como lentos",
    )
    parser.addoption(
        "--integration",
        action="store_true",
        default=False,
        help="Executar testes de integração",
    )


def pytest_collection_modifyitems(config, items):
    """Modifica a coleção de testes baseado em opções."""
    if not config.getoption("--slow"):
        skip_slow = pytest.mark.skip(reason="Teste lento - use --slow para executar")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)

    if not config.getoption("--integration"):
        skip_integration = pytest.mark.skip(
            reason="Teste de integração - use --integration para executar"
        )
        for item in items:
            if "integration" in item.keywords:
                item.add_marker(skip_integration)


# =============================================================================
# FIXTURES DE CONFIGURAÇÃO
# =============================================================================

@pytest.fixture(autouse=True)
def reset_numerics_config():
    """Limpa o cache de NumericsConfig antes e depois de cada teste."""
    from experiments.services.runtime_settings import reload_config

    reload_config()
    try:
        yield
    finally:
        reload_config()


@pytest.fixture
def numerics_settings():
    """Sobrepõe chaves de settings.CARLEMAN: `with numerics_settings(C_CAP=10): ...`."""
    from contextlib import contextmanager

    from experiments.services.runtime_settings import reload_config

    @contextmanager
    def _override(**values):
        with override_settings(CARLEMAN={**settings.CARLEMAN, **values}):
            reload_config()
            try:
                yield
            finally:
                reload_config()

    return _override


@pytest.fixture
def tmp_output_dir(tmp_path):
    """Diretório de saída isolado para os comandos."""
    out = tmp_path / "out"
    out.mkdir()
    return out


@pytest.fixture
def fixture_path():
    """Caminho de uma config empacotada em experiments/fixtures."""

    def _path(name: str) -> Path:
        return FIXTURES_DIR / f"{name}.json"

    return _path


@pytest.fixture
def write_config(tmp_path):
    """Grava um dict de config em JSON e devolve o caminho."""

    def _write(data: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def square_config():
    """Quadrado unitário com campo constante (1, 0): condição A válida."""
    return {
        "schema_version": 1,
        "name": "square",
        "domain": {"kind": "rectangle", "x_lo": 0.0, "x_hi": 1.0, "y_lo": 0.0, "y_hi": 1.0},
        "field": {"kind": "constant", "a": 1.0, "b": 0.0},
        "partition": {"kind": "trivial"},
        "weight": {"kind": "condition_a", "beta": 0.5},
        "grid": {"n": 8, "cfl": 0.9, "density": 16, "max_recorded": 64},
        "T": 12.0,
        "studies": {
            "verify": {"suite_size": 6, "s_points": 3},
            "observability": {"ensemble": 3, "levels": 2},
            "inverse_source": {"ensemble": 3, "levels": 2},
            "reconstruct": {"lambda": 0.0, "noise": 0.0, "max_iters": 200},
        },
        "seed": 7,
    }


# =============================================================================
# FIXTURES PARA CELERY
# =============================================================================

@pytest.fixture
def celery_app():
    """Fixture para testes com Celery (modo síncrono)."""
    try:
        from core.celery import app as celery_app_instance
    except Exception:
        pytest.skip("Celery não está configurado (core.celery ausente)")
    celery_app_instance.conf.update(
        task_always_eager=True,
        task_eager_propagates=True,
    )
    return celery_app_instance
