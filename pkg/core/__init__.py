# Importa a instância do Celery para que @shared_task use a app do projeto
from .celery import app as celery_app

__all__ = ("celery_app",)
