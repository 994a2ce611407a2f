"""
Settings de DESENVOLVIMENTO do carlemanflow.
Herdam de settings.base e só aumentam a verbosidade.
"""

from .base import *  # noqa

DEBUG = True

# -----------------------------------------------------
# Logging (Dev-friendly)
# -----------------------------------------------------
LOG_LEVEL = "DEBUG"

LOGGING["formatters"]["verbose"] = {
    "format": "{levelname} {asctime} {name} {message}",
    "style": "{",
}
for _name in ("carleman", "transport", "experiments"):
    LOGGING["loggers"][_name]["level"] = LOG_LEVEL

# solver loga cada passo em DEBUG; manter em INFO salvo pedido explícito
LOGGING["loggers"]["transport.domain.solver"] = {
    "handlers": ["console"],
    "level": env("SOLVER_LOG_LEVEL", default="INFO"),
    "propagate": False,
}
