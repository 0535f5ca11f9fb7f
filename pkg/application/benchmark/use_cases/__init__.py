from application.benchmark.use_cases.corrupt_cloud_file import corrupt_cloud_file
from application.benchmark.use_cases.evaluate_transform import evaluate_transform
from application.benchmark.use_cases.run_sweep_files import run_sweep_files

__all__ = ["corrupt_cloud_file", "evaluate_transform", "run_sweep_files"]
