import json
from pathlib import Path

import jsonschema
import pytest
from click.testing import CliRunner

from shapefill.cli import main
from shapefill.report import EVALUATION_SCHEMA

TINY_CFG = """\
# tiny end-to-end settings
train_per_category = 2
test_per_category = 1
cloud_points = 64
ratios = 30,70
ae_points = 64
ae_epochs = 4
ae_batch = 4
gan_iterations = 6
gan_batch = 8
agent_steps = 14
agent_start_steps = 4
agent_batch = 6
agent_eval_frequency = 7
agent_eval_clouds = 2
classifier_epochs = 3
classifier_batch = 4
"""


def run(args, **kw):
    return CliRunner().invoke(main, args, catch_exceptions=False, **kw)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny pipeline trained end to end through the CLI."""
    root = tmp_path_factory.mktemp("ws")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY_CFG)
    base = ["--config", str(cfg), "--seed", "3", "--out", str(root / "run")]
    for cmd in ("gen-data", "train-ae", "train-gan", "train-agent", "train-classifier"):
        result = run([cmd, *base])
        assert result.exit_code == 0, f"{cmd} failed:\n{result.output}"
    return root


class TestPipelineCommands:
    def test_artifacts_exist(self, workspace):
        run_dir = workspace / "run"
        for rel in (
            "dataset/manifest.json",
            "dataset/train/complete/table_000.xyz",
            "dataset/test/partial/r70/car_000.xyz",
            "checkpoints/ae.ckpt",
            "checkpoints/gan.ckpt",
            "checkpoints/agent.ckpt",
            "checkpoints/classifier.ckpt",
            "logs/ae_loss.csv",
            "logs/ae_loss.png",
            "logs/gan_log.csv",
            "logs/agent_log.csv",
            "logs/agent_evals.csv",
            "logs/agent_reward.png",
        ):
            assert (run_dir / rel).exists(), rel

    def test_agent_log_columns(self, workspace):
        header = (workspace / "run/logs/agent_log.csv").read_text().splitlines()[0]
        assert header == "step,reward,L_CH,L_GFV,D_score"

    def test_gan_log_columns(self, workspace):
        header = (workspace / "run/logs/gan_log.csv").read_text().splitlines()[0]
        assert header == "iter,d_real,d_fake,gp"

    def test_ae_log_columns(self, workspace):
        header = (workspace / "run/logs/ae_loss.csv").read_text().splitlines()[0]
        assert header == "epoch,mean_chamfer"

    def test_evaluate_writes_schema_valid_report(self, workspace):
        cfg = workspace / "tiny.cfg"
        base = ["--config", str(cfg), "--seed", "3", "--out", str(workspace / "run")]
        result = run(["evaluate", *base, "--ratios", "30,70"])
        assert result.exit_code == 0, result.output
        reports = workspace / "run/reports"
        payload = json.loads((reports / "evaluation.json").read_text())
        jsonschema.validate(payload, EVALUATION_SCHEMA)
        # rows = ratios x modes + baseline per ratio
        assert len(payload["rows"]) == 2 * 3 + 2
        assert (reports / "evaluation.csv").exists()
        assert (reports / "evaluation.png").exists()
        assert (reports / "accuracy.png").exists()

    def test_evaluate_with_jitter(self, workspace):
        cfg = workspace / "tiny.cfg"
        base = ["--config", str(cfg), "--seed", "3", "--out", str(workspace / "run")]
        result = run(["evaluate", *base, "--ratios", "70", "--modes", "ae", "--jitter", "0.01"])
        assert result.exit_code == 0, result.output

    def test_bench(self, workspace):
        cfg = workspace / "tiny.cfg"
        base = ["--config", str(cfg), "--seed", "3", "--out", str(workspace / "run")]
        result = run(["bench", *base, "--count", "8"])
        assert result.exit_code == 0, result.output
        payload = json.loads((workspace / "run/reports/bench.json").read_text())
        assert payload["count"] == 8
        assert payload["mean_ms"] > 0
        assert (workspace / "run/reports/bench.png").exists()

    def test_complete_all_modes(self, workspace):
        cfg = workspace / "tiny.cfg"
        base = ["--config", str(cfg), "--seed", "3", "--out", str(workspace / "run")]
        partial = workspace / "run/dataset/test/partial/r70/chair_000.xyz"
        for mode in ("ae", "vanilla", "hybrid"):
            result = run(["complete", *base, "--input", str(partial), "--mode", mode])
            assert result.exit_code == 0, result.output
            dest = workspace / f"run/completions/chair_000_{mode}.xyz"
            assert dest.exists()
            assert len(dest.read_text().splitlines()) == 64
        result = run(["complete", *base, "--input", str(partial), "--mode", "hybrid", "--figure"])
        assert result.exit_code == 0
        assert (workspace / "run/completions/chair_000_hybrid.png").exists()


class TestCliContracts:
    def test_gen_data_byte_identical(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = run(["gen-data", "--seed", "7", "--out", str(out),
                          "--train-per-category", "2", "--test-per-category", "1",
                          "--points", "32"])
            assert result.exit_code == 0, result.output
            outs.append(out)
        files_a = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
        assert files_a == files_b and files_a
        for rel in files_a:
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel

    def test_unknown_subcommand(self):
        result = CliRunner().invoke(main, ["frobnicate"])
        assert result.exit_code != 0
        assert "Usage" in result.output or "No such command" in result.output

    def test_unknown_flag(self):
        result = CliRunner().invoke(main, ["gen-data", "--bogus"])
        assert result.exit_code != 0
        assert "Usage" in result.output or "No such option" in result.output

    def test_missing_checkpoint_one_line_error(self, tmp_path):
        result = CliRunner().invoke(
            main, ["train-gan", "--out", str(tmp_path), "--seed", "1"]
        )
        assert result.exit_code != 0
        assert "Error" in result.output

    def test_ae_mode_bypasses_gan(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CFG)
        base = ["--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "run")]
        assert run(["gen-data", *base]).exit_code == 0
        assert run(["train-ae", *base]).exit_code == 0
        partial = tmp_path / "run/dataset/test/partial/r30/table_000.xyz"
        result = run(["complete", *base, "--input", str(partial), "--mode", "ae"])
        assert result.exit_code == 0, result.output
        # vanilla needs the missing gan/agent checkpoints
        result = CliRunner().invoke(
            main, ["complete", *base, "--input", str(partial), "--mode", "vanilla"]
        )
        assert result.exit_code != 0
        assert "missing checkpoint" in result.output

    def test_evaluate_without_dataset_fails_cleanly(self, tmp_path):
        result = CliRunner().invoke(main, ["evaluate", "--out", str(tmp_path)])
        assert result.exit_code != 0

    def test_group_level_globals_accepted(self, tmp_path):
        result = run(["--seed", "5", "--out", str(tmp_path / "g"), "gen-data",
                      "--train-per-category", "1", "--test-per-category", "1",
                      "--points", "32"])
        assert result.exit_code == 0
        assert (tmp_path / "g/dataset/manifest.json").exists()
