from django.apps import AppConfig


class CarlemanConfig(AppConfig):
    name = "carleman"
    verbose_name = "Pesos de Carleman e grafo de corrente"
