from typing import Iterator, List

from typing_extensions import Self

from dishka import Container, Provider, Scope, make_container, provide

from application.benchmark.ioc import BenchmarkDepsProvider
from application.point_clouds.ioc import PointCloudsDepsProvider
from application.registration.ioc import RegistrationDepsProvider
from config import Config, get_config
from core.workers import WorkerPool


class CoreDepsProvider(Provider):
    def __init__(self, config: Config):
        super().__init__()
        self._config = config

    @provide(scope=Scope.APP)
    def get_config(self: Self) -> Config:
        return self._config

    @provide(scope=Scope.APP)
    def get_worker_pool(self: Self, config: Config) -> Iterator[WorkerPool]:
        pool = WorkerPool(
            threads=config.resolved_threads(), chunk_size=config.WORKER_CHUNK_SIZE
        )
        yield pool
        pool.shutdown()


def make_ioc(config: Config | None = None) -> Container:
    providers: List[Provider] = [
        CoreDepsProvider(config or get_config()),
        PointCloudsDepsProvider(),
        RegistrationDepsProvider(),
        BenchmarkDepsProvider(),
    ]
    return make_container(*providers)
