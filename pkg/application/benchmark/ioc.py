from typing_extensions import Self

from dishka import Provider, Scope, provide

from application.benchmark.services import SweepRunner
from application.registration.services import Registrar


class BenchmarkDepsProvider(Provider):
    @provide(scope=Scope.APP)
    def get_sweep_runner(self: Self, registrar: Registrar) -> SweepRunner:
        return SweepRunner(registrar=registrar)
