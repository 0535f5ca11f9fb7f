import os
from functools import lru_cache
from typing import final

from pydantic_settings import BaseSettings, SettingsConfigDict

ENV_FILE_NAME = ".env"


@final
class Config(BaseSettings):
    model_config = SettingsConfigDict(env_file=ENV_FILE_NAME, extra="ignore")

    DEBUG: bool = False

    # ============================================================
    # Logging Configuration
    # ============================================================
    SERVICE_NAME: str = "unknown"  # Переопределяется в точке входа
    LOG_LEVEL: str | None = (
        None  # Опционально: переопределение уровня логирования (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    )

    # Уровни логирования для внешних библиотек
    LOG_LEVEL_NOISY_LIBS: str = "WARNING"  # concurrent.futures
    LOG_LEVEL_DEBUG_LIBS: str = "WARNING"  # dishka

    # ============================================================
    # Workers
    # ============================================================
    THREADS: int = 1  # 0 - по числу ядер
    WORKER_CHUNK_SIZE: int = 1024

    def resolved_threads(self) -> int:
        if self.THREADS <= 0:
            return os.cpu_count() or 1
        return self.THREADS


@lru_cache
def get_config() -> Config:
    return Config()
