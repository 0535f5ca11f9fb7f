from core.errors import BaseError


class BenchmarkError(BaseError):
    code = "benchmark_error"
    message = "Benchmark error"


class SweepIOError(BenchmarkError):
    code = "sweep_io_error"
    message = "Cannot write sweep results"
