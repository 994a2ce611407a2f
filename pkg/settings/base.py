"""
Settings base do carlemanflow.
- Não específica de ambiente; overrides vão em settings.dev / settings.test.
- Sem banco de dados: o projeto usa Django para settings, apps e comandos.
"""

from pathlib import Path

import environ

# -----------------------------------------------------
# Paths / núcleo
# -----------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    DEBUG=(bool, False),
)

# .env é opcional (CI e workers podem usar variáveis reais)
ENV_FILE = BASE_DIR / ".env"
if ENV_FILE.exists():
    environ.Env.read_env(ENV_FILE)

DEBUG = env("DEBUG")
SECRET_KEY = env("SECRET_KEY", default="carlemanflow-local-key")
ALLOWED_HOSTS: list[str] = []

# -----------------------------------------------------
# Apps
# -----------------------------------------------------
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "carleman",
    "transport",
    "experiments",
]

# Nenhum model persistente
DATABASES: dict = {}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
USE_TZ = True
TIME_ZONE = env("TIME_ZONE", default="UTC")
LANGUAGE_CODE = "pt-br"

# -----------------------------------------------------
# Numérica (defaults de tolerâncias e estudos)
# -----------------------------------------------------
CARLEMAN = {
    "TOL_GEOM_FACTOR": env.float("CARLEMAN_TOL_GEOM_FACTOR", default=1e-9),
    "TOL_FIELD": env.float("CARLEMAN_TOL_FIELD", default=1e-10),
    "TOL_SIGN_FACTOR": env.float("CARLEMAN_TOL_SIGN_FACTOR", default=1e-8),
    "TOL_NUM": env.float("CARLEMAN_TOL_NUM", default=1e-9),
    "RADIUS_MARGIN": env.float("CARLEMAN_RADIUS_MARGIN", default=0.1),
    "S1_SAFETY": env.float("CARLEMAN_S1_SAFETY", default=0.1),
    "C_CAP": env.float("CARLEMAN_C_CAP", default=1e3),
    "CFL_MAX": env.float("CARLEMAN_CFL_MAX", default=0.9),
    "ENSEMBLE_SIZE": env.int("CARLEMAN_ENSEMBLE_SIZE", default=32),
    "MESH_DRIFT_TOL": env.float("CARLEMAN_MESH_DRIFT_TOL", default=0.25),
    "EXPONENT_BUDGET": env.float("CARLEMAN_EXPONENT_BUDGET", default=600.0),
    "MAX_PATH_DEPTH": env.int("CARLEMAN_MAX_PATH_DEPTH", default=50),
    "FAILURE_GROWTH": env.float("CARLEMAN_FAILURE_GROWTH", default=1.8),
    # inline | celery
    "ENSEMBLE_BACKEND": env("CARLEMAN_ENSEMBLE_BACKEND", default="inline"),
    "OUTPUT_DIR": env("CARLEMAN_OUTPUT_DIR", default=str(BASE_DIR / "out")),
    "METRICS_TEXTFILE": env("CARLEMAN_METRICS_TEXTFILE", default=""),
}

# -----------------------------------------------------
# Celery
# -----------------------------------------------------
CELERY_BROKER_URL = env("CELERY_BROKER_URL", default="redis://localhost:6379/1")
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default=CELERY_BROKER_URL)
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=False)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_TASK_TIME_LIMIT = env.int("CELERY_TASK_TIME_LIMIT", default=3600)
CELERY_RESULT_TIMEOUT = env.float("CELERY_RESULT_TIMEOUT", default=7200.0)

# -----------------------------------------------------
# Logging
# -----------------------------------------------------
LOG_LEVEL = env("LOG_LEVEL", default="INFO")
LOG_FORMAT = env("LOG_FORMAT", default="simple")  # "simple" ou "verbose"

FORMATTERS = {
    "verbose": {
        "format": "{levelname} {asctime} {name} {process:d} {message}",
        "style": "{",
    },
    "simple": {
        "format": "{levelname} {name}: {message}",
        "style": "{",
    },
}

HANDLERS = {
    "console": {
        "class": "logging.StreamHandler",
        "formatter": LOG_FORMAT,
    },
}

if env.bool("ENABLE_FILE_LOGGING", default=False):
    HANDLERS["file"] = {
        "class": "logging.handlers.RotatingFileHandler",
        "filename": env("LOG_FILE", default=str(BASE_DIR / "logs" / "carlemanflow.log")),
        "maxBytes": env.int("LOG_MAX_BYTES", default=10485760),  # 10MB
        "backupCount": env.int("LOG_BACKUP_COUNT", default=5),
        "formatter": "verbose",
    }


def _app_logger(level: str) -> dict:
    return {"handlers": list(HANDLERS.keys()), "level": level, "propagate": False}


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": FORMATTERS,
    "handlers": HANDLERS,
    "root": {
        "handlers": list(HANDLERS.keys()),
        "level": "WARNING",
    },
    "loggers": {
        "carleman": _app_logger(LOG_LEVEL),
        "transport": _app_logger(LOG_LEVEL),
        "experiments": _app_logger(LOG_LEVEL),
        "celery": _app_logger(env("CELERY_LOG_LEVEL", default="INFO")),
    },
}
