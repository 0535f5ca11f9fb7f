import enum
import json
import re

import numpy as np
import pandas as pd
import pytest

from application.benchmark.models import CorruptionSpec
from application.benchmark.services import corrupt
from application.point_clouds.models import PointCloud
from application.point_clouds.services import load_cloud, save_cloud
from application.registration.services import load_transform, save_transform
from cli.main import COMMAND_MODELS, main
from cli.parser import config_key, flag_name
from core.errors import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE
from tests.factories import rotation_about


@pytest.fixture(autouse=True)
def wide_help(monkeypatch):
    monkeypatch.setenv("COLUMNS", "1000")


@pytest.fixture
def clouds(tmp_path, scene):
    truth = rotation_about([1.0, 0.0, 1.0], np.radians(12.0))
    save_cloud(PointCloud(points=truth.inverse().apply(scene.points)), tmp_path / "source.ply")
    save_cloud(scene, tmp_path / "target.ply")
    return tmp_path / "source.ply", tmp_path / "target.ply", truth


def expected_default(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(item) for item in value)
    return str(value)


def option_help(text: str, flag: str) -> str:
    normalized = " ".join(text.split())
    match = re.search(rf" {re.escape(flag)}[ ,]", normalized)
    assert match is not None, flag
    rest = normalized[match.end():]
    stop = re.search(r" --(?!no-)", rest)
    return rest[: stop.start()] if stop else rest


class TestHelp:
    @pytest.mark.parametrize("command", sorted(COMMAND_MODELS))
    def test_lists_flags_with_defaults(self, command, capsys):
        assert main([command, "--help"]) == EXIT_OK
        text = capsys.readouterr().out
        for model in COMMAND_MODELS[command]:
            for name, field in model.model_fields.items():
                if field.exclude:
                    continue
                help_text = option_help(text, flag_name(config_key(name, field)))
                assert f"(default: {expected_default(field.default)})" in help_text

    def test_known_flag_spellings(self, capsys):
        main(["register", "--help"])
        text = capsys.readouterr().out
        assert "(default: 50.0)" in option_help(text, "--alpha-max")
        assert "(default: 0.5)" in option_help(text, "--lambda")
        assert "(default: 1e-07)" in option_help(text, "--tol-nll")
        assert "(default: 0.0012,0.0019)" in option_help(text, "--error-model")
        assert "--no-use-cf" in text


class TestUsageErrors:
    def test_missing_command(self, capsys):
        assert main([]) == EXIT_USAGE
        assert capsys.readouterr().err.startswith("error[usage_error]")

    def test_unknown_flag(self):
        assert main(["annotate", "--input", "a.ply", "--out", "b.ply", "--bogus"]) == EXIT_USAGE

    def test_missing_required_argument(self):
        assert main(["register", "--source", "a.ply"]) == EXIT_USAGE

    def test_invalid_parameter_value(self, clouds, tmp_path, capsys):
        source, target, _ = clouds
        code = main(
            ["register", "--source", str(source), "--target", str(target), "--out", str(tmp_path / "g.txt"), "--alpha-max", "-1"]
        )
        assert code == EXIT_USAGE
        assert "alpha_max" in capsys.readouterr().err

    def test_negative_threads(self, clouds, tmp_path):
        source, _, _ = clouds
        code = main(["--threads", "-2", "annotate", "--input", str(source), "--out", str(tmp_path / "a.ply")])
        assert code == EXIT_USAGE

    def test_missing_config_file(self, clouds, tmp_path):
        source, _, _ = clouds
        code = main(
            ["--config", str(tmp_path / "none.env"), "corrupt", "--input", str(source), "--out", str(tmp_path / "c.ply")]
        )
        assert code == EXIT_USAGE

    def test_unknown_config_key(self, clouds, tmp_path, capsys):
        source, _, _ = clouds
        (tmp_path / "run.env").write_text("alpha_max=10\n", encoding="utf-8")
        code = main(["--config", str(tmp_path / "run.env"), "corrupt", "--input", str(source), "--out", str(tmp_path / "c.ply")])
        assert code == EXIT_USAGE
        assert "alpha_max" in capsys.readouterr().err


class TestDataErrors:
    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["annotate", "--input", str(tmp_path / "none.ply"), "--out", str(tmp_path / "a.ply")])
        assert code == EXIT_DATA
        assert capsys.readouterr().err.startswith("error[cloud_io_error]")

    def test_malformed_transform(self, clouds, tmp_path):
        source, _, _ = clouds
        (tmp_path / "bad.txt").write_text("1 2 3", encoding="utf-8")
        code = main(["eval", "--source", str(source), "--est", str(tmp_path / "bad.txt"), "--gt", str(tmp_path / "bad.txt")])
        assert code == EXIT_DATA


class TestCommands:
    def test_register(self, clouds, tmp_path):
        source, target, truth = clouds
        out = tmp_path / "g.txt"
        code = main(["register", "--source", str(source), "--target", str(target), "--out", str(out)])

        assert code == EXIT_OK
        np.testing.assert_allclose(load_transform(out).matrix(), truth.matrix(), atol=1e-4)
        assert (tmp_path / "g.txt.report.json").exists()

    def test_register_with_threads_and_dump(self, clouds, tmp_path):
        source, target, _ = clouds
        code = main(
            [
                "--threads", "2",
                "register", "--source", str(source), "--target", str(target),
                "--out", str(tmp_path / "g.txt"), "--report", str(tmp_path / "r.txt"),
                "--dump-p", str(tmp_path / "p.csv"),
            ]
        )
        assert code == EXIT_OK
        assert (tmp_path / "r.txt").exists()
        assert (tmp_path / "p.csv").exists()

    def test_non_convergence_exit_code(self, clouds, tmp_path, capsys):
        source, target, _ = clouds
        code = main(
            ["register", "--source", str(source), "--target", str(target), "--out", str(tmp_path / "g.txt"), "--max-iterations", "1"]
        )
        assert code == EXIT_CONVERGENCE
        assert (tmp_path / "g.txt").exists()
        assert "error[not_converged]" in capsys.readouterr().err

    def test_eval_prints_metrics(self, clouds, tmp_path, capsys):
        source, _, truth = clouds
        save_transform(truth, tmp_path / "gt.txt")
        save_transform(truth, tmp_path / "est.txt")
        code = main(["eval", "--source", str(source), "--est", str(tmp_path / "est.txt"), "--gt", str(tmp_path / "gt.txt")])

        assert code == EXIT_OK
        metrics = json.loads(capsys.readouterr().out)
        assert set(metrics) == {"error_m", "rot_err_deg", "trans_err_m"}
        assert metrics["error_m"] == pytest.approx(0.0, abs=1e-12)

    def test_annotate(self, clouds, tmp_path):
        _, target, _ = clouds
        code = main(["annotate", "--input", str(target), "--out", str(tmp_path / "a.ply"), "--k-neighbors", "12"])
        assert code == EXIT_OK
        assert load_cloud(tmp_path / "a.ply").is_annotated

    def test_config_file_and_flag_precedence(self, clouds, tmp_path):
        source, _, _ = clouds
        (tmp_path / "run.env").write_text("outlier_ratio=1.0\nseed=3\n", encoding="utf-8")
        code = main(
            [
                "--config", str(tmp_path / "run.env"),
                "corrupt", "--input", str(source), "--out", str(tmp_path / "c.xyz"), "--seed", "4",
            ]
        )
        assert code == EXIT_OK
        expected = corrupt(load_cloud(source), CorruptionSpec(outlier_ratio=1.0, seed=4))
        np.testing.assert_array_equal(load_cloud(tmp_path / "c.xyz").points, expected.points)

    def test_sweep(self, clouds, tmp_path):
        _, target, _ = clouds
        out = tmp_path / "sweep.csv"
        code = main(
            [
                "sweep", "--source", str(target), "--out", str(out),
                "--outlier-ratios", "0,0.1", "--repeats", "1", "--perturbation", "small",
                "--max-iterations", "3",
            ]
        )
        assert code == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["outlier_ratio"].tolist() == [0.0, 0.1]
