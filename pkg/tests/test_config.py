import pytest

from shapefill.config import RunConfig, load_run_config, parse_config_text


class TestParse:
    def test_defaults(self):
        cfg = load_run_config()
        assert cfg.seed == 0
        assert cfg.ratios == (20, 30, 40, 50, 70)
        assert cfg.ae_epochs == 300
        assert cfg.gan_iterations == 20000

    def test_key_value_lines(self):
        values = parse_config_text("seed = 7\nae_epochs=12\nagent_tau = 0.01\n")
        assert values == {"seed": 7, "ae_epochs": 12, "agent_tau": 0.01}

    def test_comments_and_blanks(self):
        values = parse_config_text("# top comment\n\nseed = 3  # trailing\n")
        assert values == {"seed": 3}

    def test_ratio_list(self):
        values = parse_config_text("ratios = 20,70")
        assert values["ratios"] == (20, 70)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config_text("not_a_key = 1")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("seed 7")

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 5\nae_epochs = 10\n")
        cfg = load_run_config(path, {"seed": 9, "out": None})
        assert cfg.seed == 9  # CLI flag wins
        assert cfg.ae_epochs == 10  # file wins over default
        assert cfg.out == "runs"  # None override ignored

    def test_builders(self):
        cfg = RunConfig(ae_points=64, agent_tau=0.5, reward_w_disc=0.5)
        assert cfg.ae_config().m_points == 64
        assert cfg.agent_config().tau == 0.5
        assert cfg.reward_weights().disc == 0.5
        assert cfg.missing_ratios() == (0.2, 0.3, 0.4, 0.5, 0.7)
