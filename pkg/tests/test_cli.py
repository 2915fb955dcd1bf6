"""Tests for the CLI module."""

import json
import sys
from unittest.mock import patch

import pytest

from adaptkernel import __version__
from adaptkernel.cli import RunProgressBar, _config_from_args, build_parser, main
from adaptkernel.graphs import write_tudataset
from adaptkernel.network import GradientCheckReport

TRAINING_FLAGS = ["--epochs", "5", "--folds", "2", "--repeats", "1", "--att-hid", "2"]


@pytest.fixture
def triangle_dir(tmp_path, triangle_dataset):
    directory = tmp_path / "TRIANGLES"
    write_tudataset(triangle_dataset, directory)
    return directory


def test_version_flag(capsys):
    """Test that --version and -V flags show the version."""
    for flag in ("--version", "-V"):
        with pytest.raises(SystemExit) as exc_info:
            main([flag])
        assert exc_info.value.code == 0
        captured = capsys.readouterr()
        assert f"adaptkernel {__version__}" in captured.out


def test_subcommand_required():
    """Test that a bare invocation is an argparse error."""
    with patch.object(sys, "argv", ["adaptkernel"]):
        with pytest.raises(SystemExit) as exc_info:
            main()
        assert exc_info.value.code == 2


def test_unknown_kernel_rejected():
    """Test that --kernel only accepts wl and sp."""
    with pytest.raises(SystemExit) as exc_info:
        main(["run", "--kernel", "rw"])
    assert exc_info.value.code == 2


def test_flags_default_to_none():
    """Test that unset flags leave the configuration layers alone."""
    args = build_parser().parse_args(["run"])

    assert args.lr is None
    assert args.adaptive is None
    assert args.degree_labels is None
    assert args.record_attention is None


def test_baseline_flag():
    """Test that --baseline turns attention off."""
    args = build_parser().parse_args(["run", "--baseline"])

    assert args.adaptive is False


def test_missing_dataset_reports_path(tmp_path, capsys):
    """Test a clean error for a dataset that is not on disk."""
    code = main(["run", "--dataset", "MISSING", "--data-root", str(tmp_path)])

    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "MISSING_A.txt" in err


def test_run_writes_reports(triangle_dir, tmp_path, capsys):
    """Test a small end-to-end run."""
    output_dir = tmp_path / "out"

    code = main(
        ["run", "--dataset", str(triangle_dir), *TRAINING_FLAGS, "--output-dir", str(output_dir)]
    )

    assert code == 0
    out = capsys.readouterr().out
    assert "TRIANGLES wl (i=1):" in out
    assert "over 2 runs" in out
    report = json.loads((output_dir / "report.json").read_text())
    assert report["config"]["epochs"] == 5
    assert len(report["fold_accuracies"]) == 1
    assert (output_dir / "loss_curves.csv").is_file()
    assert (output_dir / "attention.csv").is_file()


def test_run_reads_config_file(triangle_dir, tmp_path):
    """Test that a TOML file is applied and flags win over it."""
    config = tmp_path / "run.toml"
    config.write_text('kernel = "sp"\nepochs = 50\nfolds = 2\nrepeats = 1\n')
    output_dir = tmp_path / "out"

    code = main(
        [
            "run",
            "--config",
            str(config),
            "--dataset",
            str(triangle_dir),
            "--epochs",
            "3",
            "--baseline",
            "--output-dir",
            str(output_dir),
        ]
    )

    assert code == 0
    report = json.loads((output_dir / "report.json").read_text())
    assert report["config"]["kernel"] == "sp"
    assert report["config"]["epochs"] == 3
    assert report["attention_scores"] is None
    assert not (output_dir / "attention.csv").exists()


def test_sweep_with_heatmap(triangle_dir, tmp_path, capsys):
    """Test per-iteration reports, the sweep table and the heatmap export."""
    output_dir = tmp_path / "sweep"

    code = main(
        [
            "--verbose",
            "sweep",
            "--dataset",
            str(triangle_dir),
            *TRAINING_FLAGS,
            "--min-iteration",
            "1",
            "--max-iteration",
            "2",
            "--heatmap-iterations",
            "2",
            "--heatmap-features",
            "3",
            "--output-dir",
            str(output_dir),
        ]
    )

    assert code == 0
    assert (output_dir / "wl1" / "report.json").is_file()
    assert (output_dir / "wl2" / "report.json").is_file()
    assert (output_dir / "sweep.csv").read_text().splitlines()[0] == "wl_iterations,mean,stderr"
    heatmap = (output_dir / "attention_heatmap.csv").read_text().splitlines()
    assert heatmap[0] == "wl_iterations,feature_index,score"
    assert len(heatmap) == 1 + 2 * 3
    assert "i=2:" in capsys.readouterr().out


def test_sweep_heatmap_needs_attention(triangle_dir, tmp_path, caplog):
    """Test that a baseline sweep skips the heatmap with a warning."""
    output_dir = tmp_path / "sweep"

    code = main(
        [
            "sweep",
            "--dataset",
            str(triangle_dir),
            *TRAINING_FLAGS,
            "--baseline",
            "--max-iteration",
            "1",
            "--heatmap-iterations",
            "1",
            "--output-dir",
            str(output_dir),
        ]
    )

    assert code == 0
    assert not (output_dir / "attention_heatmap.csv").exists()
    assert "skipping heatmap" in caplog.text


def test_features_and_gram_exports(triangle_dir, tmp_path, capsys):
    """Test the matrix export subcommands."""
    features_path = tmp_path / "features.txt"
    gram_path = tmp_path / "gram.txt"

    assert main(["features", "--dataset", str(triangle_dir), "-o", str(features_path)]) == 0
    assert main(["gram", "--dataset", str(triangle_dir), "--kernel", "sp", "-o", str(gram_path)]) == 0

    assert features_path.read_text().startswith("20 ")
    assert gram_path.read_text().splitlines()[0] == "20"
    out = capsys.readouterr().out
    assert "20 x 20 kernel matrix" in out


def test_summary(triangle_dir, capsys):
    """Test the dataset statistics printout."""
    assert main(["summary", "--dataset", str(triangle_dir)]) == 0

    out = capsys.readouterr().out
    assert "graphs:        20" in out
    assert "class counts:  10, 10" in out
    assert "max vertices:  3" in out


def test_gradcheck_passes(capsys):
    """Test the composite gradient check subcommand."""
    assert main(["gradcheck"]) == 0

    assert "max relative error" in capsys.readouterr().out


def test_gradcheck_failure_exit_code(capsys):
    """Test that a failed check names the worst coordinate and exits 1."""
    report = GradientCheckReport(0.5, 0.1, 10, 1e-4, "mlp.weight.0", 3)

    with patch("adaptkernel.cli.composite_gradient_check", return_value=report):
        code = main(["gradcheck", "--seed", "4"])

    assert code == 1
    assert "mlp.weight.0[3]" in capsys.readouterr().err


def test_progress_bar_renders(capsys):
    """Test the progress bar output."""
    bar = RunProgressBar(total=0, desc="MUTAG")
    bar.update(1, 4)
    bar.finish()

    out = capsys.readouterr().out
    assert "MUTAG:" in out
    assert "4/4 runs (100%)" in out
    assert out.endswith("\n")


def test_config_file_type_error_is_reported(tmp_path, capsys):
    """Test that a wrongly typed config value exits 1 with a message naming it."""
    config = tmp_path / "run.toml"
    config.write_text('epochs = "5"\n')

    code = main(["run", "--config", str(config)])

    assert code == 1
    assert "epochs" in capsys.readouterr().err


def test_dataset_flag_wins_over_config_file(tmp_path):
    """Test that --dataset overrides the file and selects its preset."""
    config = tmp_path / "run.toml"
    config.write_text('dataset = "PROTEINS"\n')
    args = build_parser().parse_args(["run", "--config", str(config), "--dataset", "MUTAG"])

    resolved = _config_from_args(args)

    assert resolved.dataset == "MUTAG"
    assert resolved.lr == 0.006


def test_sweep_rejects_heatmap_outside_range(capsys):
    """Test that heatmap iterations must be swept before any training starts."""
    with patch("adaptkernel.cli.sweep_wl_iterations") as sweep:
        code = main(
            [
                "sweep",
                "--dataset",
                "MUTAG",
                "--min-iteration",
                "2",
                "--max-iteration",
                "3",
                "--heatmap-iterations",
                "2",
            ]
        )

    assert code == 1
    sweep.assert_not_called()
    assert "heatmap" in capsys.readouterr().err


def _run_twice(dataset_dir, output_dir, extra_flags):
    argv = [
        "run",
        "--dataset",
        str(dataset_dir),
        "--seed",
        "7",
        "--repeats",
        "1",
        "--folds",
        "2",
        *extra_flags,
        "--output-dir",
        str(output_dir),
    ]
    report_path = output_dir / "report.json"
    assert main(argv) == 0
    first = report_path.read_bytes()
    report_path.unlink()
    assert main(argv) == 0
    return first, report_path.read_bytes()


def test_repeated_run_report_is_byte_identical(triangle_dir, tmp_path):
    """Test that two runs with the same seed write the same report.json."""
    first, second = _run_twice(triangle_dir, tmp_path / "out", ["--epochs", "5"])

    assert first == second


@pytest.mark.slow
def test_repeated_mutag_report_is_byte_identical(mutag_dir, tmp_path):
    """Test byte-identical MUTAG reports for a fixed seed."""
    first, second = _run_twice(mutag_dir, tmp_path / "out", [])

    assert first == second
