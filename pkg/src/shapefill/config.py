"""Run configuration: desk-scale defaults, flat key=value config files, and
builders for the per-stage training configs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .agent import AgentConfig, RewardWeights
from .autoencoder import AEConfig
from .classifier import ClassifierConfig
from .gan import GANConfig


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs"
    # dataset
    train_per_category: int = 100
    test_per_category: int = 20
    cloud_points: int = 512
    ratios: tuple = (20, 30, 40, 50, 70)  # percent missing
    # autoencoder
    ae_points: int = 512
    ae_epochs: int = 300
    ae_batch: int = 32
    ae_lr: float = 1e-3
    # latent gan
    gan_iterations: int = 20000
    gan_batch: int = 50
    gan_n_critic: int = 5
    gan_lr: float = 1e-4
    gan_lambda_gp: float = 10.0
    # agent
    agent_steps: int = 4000
    agent_start_steps: int = 1000
    agent_batch: int = 100
    agent_expl_noise: float = 0.1
    agent_gamma: float = 0.9
    agent_tau: float = 0.005
    agent_policy_noise: float = 0.2
    agent_noise_clip: float = 0.5
    agent_policy_delay: int = 2
    agent_eval_frequency: int = 500
    agent_lr: float = 3e-4
    agent_eval_clouds: int = 40
    # reward weights
    reward_w_chamfer: float = 100.0
    reward_w_gfv: float = 10.0
    reward_w_disc: float = 0.01
    # classifier
    classifier_epochs: int = 60
    classifier_batch: int = 32
    classifier_lr: float = 1e-3

    def ae_config(self) -> AEConfig:
        return AEConfig(
            m_points=self.ae_points,
            epochs=self.ae_epochs,
            batch_size=self.ae_batch,
            lr=self.ae_lr,
        )

    def gan_config(self) -> GANConfig:
        return GANConfig(
            iterations=self.gan_iterations,
            batch_size=self.gan_batch,
            n_critic=self.gan_n_critic,
            lr=self.gan_lr,
            lambda_gp=self.gan_lambda_gp,
        )

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            max_steps=self.agent_steps,
            start_steps=self.agent_start_steps,
            batch_size=self.agent_batch,
            expl_noise=self.agent_expl_noise,
            gamma=self.agent_gamma,
            tau=self.agent_tau,
            policy_noise=self.agent_policy_noise,
            noise_clip=self.agent_noise_clip,
            policy_delay=self.agent_policy_delay,
            eval_frequency=self.agent_eval_frequency,
            lr=self.agent_lr,
        )

    def reward_weights(self) -> RewardWeights:
        return RewardWeights(
            chamfer=self.reward_w_chamfer, gfv=self.reward_w_gfv, disc=self.reward_w_disc
        )

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(
            epochs=self.classifier_epochs,
            batch_size=self.classifier_batch,
            lr=self.classifier_lr,
        )

    def missing_ratios(self) -> tuple:
        return tuple(r / 100.0 for r in self.ratios)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    if name not in _FIELDS:
        raise ValueError(f"unknown config key {name!r}")
    default = getattr(RunConfig(), name)
    if isinstance(default, tuple):
        return tuple(int(v) if float(v) == int(float(v)) else float(v) for v in raw.split(","))
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse flat `key = value` lines; '#' starts a comment; blanks ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line.rstrip()!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = _coerce(key.strip(), value.strip())
    return out


def load_run_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then config-file values, then explicit overrides."""
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    if overrides:
        for key, val in overrides.items():
            if val is None:
                continue
            if key not in _FIELDS:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = val
    return RunConfig(**values)
