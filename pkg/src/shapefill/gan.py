"""Latent-space GAN: generator z -> feature vector, critic trained with the
WGAN gradient penalty on encoder outputs of complete shapes.

The critic is a plain Dense/ReLU stack with a linear head (no normalization
layers), so per-sample scores never depend on batch composition; `score` and
`score_many` deliberately push every sample through the identical
single-sample path to keep that exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .autoencoder import GFV_DIM
from .geometry import seed_sequence


@dataclass
class GANConfig:
    z_dim: int = 1
    lambda_gp: float = 10.0
    n_critic: int = 5
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    batch_size: int = 50
    iterations: int = 20000
    generator_widths: tuple = (64, 128)
    critic_widths: tuple = (128, 64)

    def __post_init__(self):
        if self.lambda_gp <= 0:
            raise ValueError("lambda_gp must be positive")
        if self.n_critic < 1:
            raise ValueError("n_critic must be >= 1")


class Generator:
    def __init__(self, config: GANConfig, seed=0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.net = nn.MLP(
            [config.z_dim, *config.generator_widths, GFV_DIM], rng, hidden="relu", name="gen"
        )

    def generate(self, z) -> np.ndarray:
        """Deterministic forward pass of one seed vector to a feature vector."""
        zv = np.atleast_1d(np.asarray(z, dtype=np.float32))
        if zv.shape != (self.config.z_dim,):
            raise ValueError(f"expected z of shape ({self.config.z_dim},), got {zv.shape}")
        return self.net.forward(zv[None, :])[0]

    def generate_many(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=np.float32)
        return np.stack([self.generate(z) for z in zs])

    def state(self):
        return self.net.state()

    def load_state(self, state):
        self.net.load_state(state)
        return self

    def freeze(self):
        self.net.freeze()
        return self


class Critic:
    def __init__(self, config: GANConfig, seed=0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.net = nn.MLP([GFV_DIM, *config.critic_widths, 1], rng, hidden="relu", name="critic")

    def score(self, gfv) -> float:
        """Unbounded critic score of one feature vector; higher reads as more real."""
        g = np.asarray(gfv, dtype=np.float32)
        if g.shape != (GFV_DIM,):
            raise ValueError(f"expected a ({GFV_DIM},) feature vector, got shape {g.shape}")
        if not np.isfinite(g).all():
            raise ValueError("feature vector contains non-finite values")
        return float(self.net.forward(g[None, :])[0, 0])

    def score_many(self, gfvs) -> np.ndarray:
        return np.array([self.score(g) for g in np.asarray(gfvs)])

    def state(self):
        return self.net.state()

    def load_state(self, state):
        self.net.load_state(state)
        return self

    def freeze(self):
        self.net.freeze()
        return self


def interpolate(real, fake, eps):
    """Per-sample convex mix eps*real + (1-eps)*fake; eps broadcasts (B, 1)."""
    real = np.asarray(real)
    fake = np.asarray(fake)
    if real.shape != fake.shape:
        raise ValueError(f"real/fake batch shapes differ: {real.shape} vs {fake.shape}")
    return eps * real + (1.0 - eps) * fake


def _penalty_terms(critic_net: nn.MLP, xhat: np.ndarray, lambda_gp: float):
    critic_net.forward(xhat)
    g = critic_net.input_grad(np.ones((xhat.shape[0], 1), dtype=xhat.dtype))
    norms = np.sqrt((g * g).sum(axis=1))
    value = lambda_gp * float(np.mean((norms - 1.0) ** 2))
    return g, norms, value


def gradient_penalty(critic: Critic, real, fake, eps, lambda_gp=None) -> float:
    """lambda_gp * mean over interpolates of (||grad_x D(x)||_2 - 1)^2."""
    lam = critic.config.lambda_gp if lambda_gp is None else lambda_gp
    xhat = interpolate(real, fake, eps)
    _, _, value = _penalty_terms(critic.net, xhat, lam)
    return value


def gradient_penalty_with_grads(critic: Critic, real, fake, eps, lambda_gp=None) -> float:
    """Penalty value; also accumulates its parameter gradient into the critic.

    The parameter gradient requires differentiating through the critic's own
    input gradient; `MLP.double_backward` supplies that second-order sweep.
    """
    lam = critic.config.lambda_gp if lambda_gp is None else lambda_gp
    xhat = interpolate(real, fake, eps)
    g, norms, value = _penalty_terms(critic.net, xhat, lam)
    b = xhat.shape[0]
    safe = np.where(norms > 1e-12, norms, 1.0)
    coeff = (2.0 * lam / b) * (norms - 1.0) / safe
    coeff = np.where(norms > 1e-12, coeff, 0.0)  # subgradient 0 at a zero-gradient point
    u = (coeff[:, None] * g).astype(xhat.dtype)
    critic.net.double_backward(u)
    return value


@dataclass
class GANHistory:
    rows: list  # (iteration, mean_d_real, mean_d_fake, gp)
    critic_steps: int = 0
    generator_steps: int = 0
    init_probe: tuple = None   # (mean D(real), mean D(fake)) before any update
    final_probe: tuple = None  # same probe after training

    def init_gap(self) -> float:
        return abs(self.init_probe[0] - self.init_probe[1])

    def final_gap(self) -> float:
        return abs(self.final_probe[0] - self.final_probe[1])


def train_gan(gfvs, config: GANConfig, seed=0, progress=None):
    """Alternating WGAN-GP training on a feature-vector dataset.

    Per iteration: `n_critic` critic updates (loss mean D(fake) - mean D(real)
    + gradient penalty) then one generator update (loss -mean D(fake)), with
    z drawn uniformly from [-1, 1]^z_dim. Returns (generator, critic, history);
    bit-reproducible given (gfvs, config, seed).
    """
    data = np.asarray(gfvs, dtype=np.float32)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"need a non-empty (S, {GFV_DIM}) feature dataset, got {data.shape}")
    gen_ss, critic_ss, draw_ss, probe_ss = seed_sequence(seed).spawn(4)
    gen = Generator(config, seed=gen_ss)
    critic = Critic(config, seed=critic_ss)
    rng = np.random.default_rng(draw_ss)
    opt_g = nn.Adam(gen.net.params(), lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    opt_c = nn.Adam(critic.net.params(), lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    b = config.batch_size
    history = GANHistory(rows=[])
    probe_rng = np.random.default_rng(probe_ss)
    probe_real = data[probe_rng.integers(0, data.shape[0], size=min(256, 4 * b))]
    probe_z = probe_rng.uniform(-1.0, 1.0, size=(probe_real.shape[0], config.z_dim)).astype(np.float32)

    def probe():
        fakes = gen.generate_many(probe_z)
        return (float(critic.score_many(probe_real).mean()),
                float(critic.score_many(fakes).mean()))

    history.init_probe = probe()
    for it in range(config.iterations):
        d_real = d_fake = gp_val = 0.0
        for _ in range(config.n_critic):
            real = data[rng.integers(0, data.shape[0], size=b)]
            z = rng.uniform(-1.0, 1.0, size=(b, config.z_dim)).astype(np.float32)
            fake = gen.net.forward(z)
            critic.net.zero_grad()
            s_fake = critic.net.forward(fake)
            critic.net.backward(np.full_like(s_fake, 1.0 / b))
            s_real = critic.net.forward(real)
            critic.net.backward(np.full_like(s_real, -1.0 / b))
            eps = rng.uniform(0.0, 1.0, size=(b, 1)).astype(np.float32)
            gp_val = gradient_penalty_with_grads(critic, real, fake, eps)
            opt_c.step()
            history.critic_steps += 1
            d_real = float(s_real.mean())
            d_fake = float(s_fake.mean())
        z = rng.uniform(-1.0, 1.0, size=(b, config.z_dim)).astype(np.float32)
        fake = gen.net.forward(z)
        s = critic.net.forward(fake)
        d_gen_in = critic.net.input_grad(np.full_like(s, -1.0 / b))
        gen.net.zero_grad()
        gen.net.backward(d_gen_in)
        opt_g.step()
        history.generator_steps += 1
        history.rows.append((it, d_real, d_fake, gp_val))
        if progress is not None:
            progress(it, d_real, d_fake, gp_val)
    history.final_probe = probe()
    return gen, critic, history
