import logging
from itertools import product
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from application.benchmark.exceptions import SweepIOError
from application.benchmark.models import (
    CSV_COLUMNS,
    TRUNCATION_COLUMN,
    CorruptionSpec,
    MetricRow,
    SweepConfig,
)
from application.benchmark.services.corruption import corrupt, random_perturbation
from application.benchmark.services.metrics import (
    error_metric,
    rotation_error,
    translation_error,
)
from application.point_clouds.models import PointCloud, SurfaceConfig
from application.registration.models import EmConfig, ModelConfig, RigidTransform
from application.registration.services import Registrar

logger = logging.getLogger(__name__)

# Правило остановки по ошибке относительно истины
EARLY_STOP_ROTATION_DEG = 8.0
EARLY_STOP_TRANSLATION_M = 0.01


def sweep_specs(config: SweepConfig) -> List[CorruptionSpec]:
    """Декартово произведение долей выбросов и уровней шума"""
    return [
        CorruptionSpec(
            outlier_ratio=ratio, noise_std=std, seed=config.seed, outlier_scale=config.outlier_scale
        )
        for ratio, std in product(config.outlier_ratios, config.noise_stds)
    ]


def _row_seeds(master: int, spec_index: int, repeat: int) -> tuple[int, int, np.random.Generator]:
    """Независимые seed для искажения source, target и возмущения"""
    sequence = np.random.SeedSequence([master, spec_index, repeat])
    source_seq, target_seq, perturbation_seq = sequence.spawn(3)
    return (
        int(source_seq.generate_state(1)[0]),
        int(target_seq.generate_state(1)[0]),
        np.random.default_rng(perturbation_seq),
    )


def csv_columns(config: SweepConfig) -> tuple[str, ...]:
    if config.truncation_thresholds:
        return CSV_COLUMNS + (TRUNCATION_COLUMN,)
    return CSV_COLUMNS


def _truncation_configs(model_cfg: ModelConfig, config: SweepConfig) -> List[ModelConfig]:
    """Конфигурация модели на каждый порог усечения; без порогов - исходная"""
    if not config.truncation_thresholds:
        return [model_cfg]
    return [
        model_cfg.model_copy(update={"use_cf": True, "confidence_truncation_threshold": threshold})
        for threshold in config.truncation_thresholds
    ]


def early_stop_rule(g_gt: RigidTransform):
    def rule(g: RigidTransform) -> bool:
        return (
            rotation_error(g, g_gt) < EARLY_STOP_ROTATION_DEG
            and translation_error(g, g_gt) < EARLY_STOP_TRANSLATION_M
        )

    return rule


class SweepRunner:
    """Серия регистраций с известной истиной; строки CSV пишутся по мере готовности"""

    def __init__(self, registrar: Registrar):
        self.registrar = registrar

    def run_row(
        self,
        run_id: int,
        source: PointCloud,
        target: PointCloud,
        spec: CorruptionSpec,
        spec_index: int,
        repeat: int,
        model_cfg: ModelConfig,
        em_cfg: EmConfig,
        sweep_cfg: SweepConfig,
        surface_cfg: SurfaceConfig,
    ) -> MetricRow:
        source_seed, target_seed, rng = _row_seeds(sweep_cfg.seed, spec_index, repeat)
        corrupted_source = corrupt(source, spec.model_copy(update={"seed": source_seed}))
        corrupted_target = corrupt(target, spec.model_copy(update={"seed": target_seed}))

        perturbation = random_perturbation(sweep_cfg.perturbation, rng, sweep_cfg.angle_deg)
        moved = PointCloud(points=perturbation.apply(corrupted_source.points))
        g_gt = perturbation.inverse()

        if sweep_cfg.match_outlier_ratio:
            model_cfg = model_cfg.model_copy(
                update={"outlier_ratio": spec.outlier_ratio / (1.0 + spec.outlier_ratio)}
            )
        if sweep_cfg.early_stop:
            em_cfg = em_cfg.model_copy(update={"stop_rule": early_stop_rule(g_gt)})

        report = self.registrar.register(
            moved,
            corrupted_target,
            model_cfg=model_cfg,
            em_cfg=em_cfg,
            surface_cfg=surface_cfg,
            run_id=str(run_id),
        )
        # Метрика только по исходным точкам, без добавленных выбросов
        inliers = PointCloud(points=moved.points[: len(source)])
        row = MetricRow(
            run_id=run_id,
            outlier_ratio=spec.outlier_ratio,
            noise_std=spec.noise_std,
            error_m=error_metric(inliers, report.transform, g_gt),
            rot_err_deg=rotation_error(report.transform, g_gt),
            trans_err_m=translation_error(report.transform, g_gt),
            iters=report.iterations,
            wall_s=report.wall_time,
            truncation_threshold=(
                model_cfg.confidence_truncation_threshold
                if sweep_cfg.truncation_thresholds
                else None
            ),
        )
        logger.info(
            "Sweep row done",
            extra={
                "run_id": run_id,
                **row.model_dump(exclude={"run_id"}, exclude_none=True),
                "mean_alpha": report.mean_alpha,
            },
        )
        return row

    def run_sweep(
        self,
        source: PointCloud,
        target: PointCloud,
        specs: Sequence[CorruptionSpec],
        repeats: int,
        model_cfg: ModelConfig,
        em_cfg: EmConfig,
        out: Optional[Path] = None,
        sweep_cfg: Optional[SweepConfig] = None,
        surface_cfg: SurfaceConfig = SurfaceConfig(),
    ) -> List[MetricRow]:
        sweep_cfg = sweep_cfg or SweepConfig(repeats=repeats)
        if not target.is_annotated:
            target = self.registrar.annotate(target, surface_cfg)
        rows: List[MetricRow] = []
        columns = csv_columns(sweep_cfg)

        stream: Optional[TextIO] = None
        try:
            if out is not None:
                stream = Path(out).open("w", encoding="utf-8", newline="")
                stream.write(",".join(columns) + "\n")

            for spec_index, spec in enumerate(specs):
                for row_model_cfg in _truncation_configs(model_cfg, sweep_cfg):
                    for repeat in range(repeats):
                        row = self.run_row(
                            len(rows),
                            source,
                            target,
                            spec,
                            spec_index,
                            repeat,
                            row_model_cfg,
                            em_cfg,
                            sweep_cfg,
                            surface_cfg,
                        )
                        rows.append(row)
                        if stream is not None:
                            _append_row(stream, row, columns)
        except OSError as e:
            raise SweepIOError(message=f"Cannot write {out}: {e}") from e
        finally:
            if stream is not None:
                stream.close()

        if rows:
            keys = ["outlier_ratio", "noise_std"]
            if sweep_cfg.truncation_thresholds:
                keys.append(TRUNCATION_COLUMN)
            summary = (
                pd.DataFrame([row.model_dump() for row in rows])
                .groupby(keys)[["error_m", "rot_err_deg", "iters", "wall_s"]]
                .mean()
            )
            logger.info(
                "Sweep finished",
                extra={"rows": len(rows), "summary": summary.reset_index().to_dict("records")},
            )
        return rows


def _append_row(stream: TextIO, row: MetricRow, columns: Sequence[str]) -> None:
    frame = pd.DataFrame([row.model_dump()], columns=list(columns))
    frame.to_csv(stream, header=False, index=False, float_format="%.17g")
    stream.flush()
