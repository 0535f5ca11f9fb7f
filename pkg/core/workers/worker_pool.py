import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")


class WorkerPool:
    """
    Пул потоков для data-parallel обработки по диапазонам индексов.

    Тяжелые ядра numpy отпускают GIL, поэтому потоков достаточно.
    Результаты всегда возвращаются в порядке чанков, а суммирование
    идет фиксированным попарным деревом - итог не зависит от числа потоков.
    """

    def __init__(self, threads: int = 1, chunk_size: int = 1024):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        self.threads = threads
        self.chunk_size = chunk_size
        self._executor: Optional[ThreadPoolExecutor] = None

    def _get_executor(self) -> ThreadPoolExecutor:
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self.threads, thread_name_prefix="lsgcpd-worker"
            )
        return self._executor

    def chunks(self, total: int) -> List[tuple[int, int]]:
        return [
            (start, min(start + self.chunk_size, total))
            for start in range(0, total, self.chunk_size)
        ]

    def map_chunks(self, fn: Callable[[int, int], T], total: int) -> List[T]:
        """Вызывает fn(start, stop) для каждого чанка, порядок результатов стабилен"""
        ranges = self.chunks(total)
        if self.threads == 1 or len(ranges) <= 1:
            return [fn(start, stop) for start, stop in ranges]

        executor = self._get_executor()
        futures = [executor.submit(fn, start, stop) for start, stop in ranges]
        return [future.result() for future in futures]

    @staticmethod
    def reduce_pairwise(values: Sequence[np.ndarray]) -> np.ndarray:
        """Попарная свертка суммой: ((v0+v1)+(v2+v3))+..."""
        if not values:
            raise ValueError("Nothing to reduce")
        level = list(values)
        while len(level) > 1:
            paired = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                paired.append(level[-1])
            level = paired
        return level[0]

    def shutdown(self) -> None:
        if self._executor is not None:
            logger.debug("Shutting down worker pool", extra={"threads": self.threads})
            self._executor.shutdown(wait=True)
            self._executor = None


SERIAL_POOL = WorkerPool(threads=1)
