from core.workers.worker_pool import WorkerPool, SERIAL_POOL

__all__ = ["WorkerPool", "SERIAL_POOL"]
