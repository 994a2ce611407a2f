"""
Pacote de configuração do carlemanflow.
Permite importar `settings.dev` ou `settings.test` conforme o ambiente.
"""

import os
import sys

# -----------------------------------------------------
# Configuração de Ambiente
# -----------------------------------------------------


def setup_environment():
    """
    Define DJANGO_SETTINGS_MODULE quando ausente.
    Retorna o nome do módulo de settings a ser usado.
    """
    env_settings = os.getenv("DJANGO_SETTINGS_MODULE", "").strip()

    if not env_settings:
        argv = " ".join(sys.argv)
        env_settings = "settings.test" if "pytest" in argv else "settings.dev"

    # Normaliza o formato
    if not env_settings.startswith("settings."):
        env_settings = f"settings.{env_settings}"

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", env_settings)
    return env_settings


current_settings = setup_environment()
