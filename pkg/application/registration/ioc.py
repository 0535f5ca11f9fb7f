from typing_extensions import Self

from dishka import Provider, Scope, provide

from application.registration.services import Registrar
from core.workers import WorkerPool


class RegistrationDepsProvider(Provider):
    @provide(scope=Scope.APP)
    def get_registrar(self: Self, pool: WorkerPool) -> Registrar:
        return Registrar(pool=pool)
