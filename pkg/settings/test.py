"""
Settings para TESTES do carlemanflow.
Isola o broker e deixa a saída do pytest limpa.
"""

from .base import *  # noqa

# -----------------------------------------------------
# Configurações de Teste
# -----------------------------------------------------
DEBUG = False
TESTING = True

# Celery executa em processo (sem broker)
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_BROKER_URL = "memory://"
CELERY_RESULT_BACKEND = "cache+memory://"

CARLEMAN = {**CARLEMAN, "ENSEMBLE_BACKEND": "inline", "METRICS_TEXTFILE": ""}

# Logging silencioso (não polui saída de pytest)
LOGGING = {
    "version": 1,
    "disable_existing_loggers": True,
    "handlers": {"null": {"class": "logging.NullHandler"}},
    "root": {"handlers": ["null"], "level": "CRITICAL"},
}
