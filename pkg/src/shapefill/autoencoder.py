"""Permutation-invariant point-cloud autoencoder trained with Chamfer loss.

The encoder runs every point through a shared dense stack (ReLU after each
layer) and max-pools over the point axis into a 128-dim feature vector, so
it accepts clouds of any size and is exactly invariant to point order. The
decoder expands the feature vector back to a fixed-size cloud.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import nn
from .geometry import as_cloud, seed_sequence

GFV_DIM = 128


@dataclass
class AEConfig:
    m_points: int = 512
    encoder_channels: tuple = (64, 128, 128, 256, 128)
    decoder_widths: tuple = (256, 256)
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-3

    def __post_init__(self):
        if self.encoder_channels[-1] != GFV_DIM:
            raise ValueError(
                f"last encoder channel must be {GFV_DIM}, got {self.encoder_channels[-1]}"
            )


class Autoencoder:
    def __init__(self, config: AEConfig, seed=0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.per_point = nn.MLP(
            [3, *config.encoder_channels], rng, hidden="relu", output="relu", name="enc"
        )
        self.pool = nn.MaxPoolPoints()
        self.decoder = nn.MLP(
            [GFV_DIM, *config.decoder_widths, 3 * config.m_points], rng, name="dec"
        )
        self.frozen = False

    # -- inference -----------------------------------------------------------

    def encode(self, points) -> np.ndarray:
        """Map an (N, 3) cloud, any N >= 1, to its 128-dim feature vector."""
        pts = as_cloud(points).astype(np.float32, copy=False)
        return self.pool.forward(self.per_point.forward(pts))

    def decode(self, gfv) -> np.ndarray:
        """Map a 128-dim feature vector to an (M, 3) cloud."""
        g = np.asarray(gfv, dtype=np.float32)
        if g.shape != (GFV_DIM,):
            raise ValueError(f"expected a ({GFV_DIM},) feature vector, got shape {g.shape}")
        if not np.isfinite(g).all():
            raise ValueError("feature vector contains non-finite values")
        flat = self.decoder.forward(g[None, :])[0]
        return flat.reshape(self.config.m_points, 3)

    def reconstruct(self, points) -> np.ndarray:
        return self.decode(self.encode(points))

    def encode_many(self, clouds, chunk: int = 64) -> np.ndarray:
        """Encode a sequence of clouds; equal-size clouds go through the
        batched path in chunks, mixed sizes fall back to one-by-one."""
        if len({np.asarray(c).shape for c in clouds}) == 1:
            stacked = np.stack([as_cloud(c).astype(np.float32, copy=False) for c in clouds])
            parts = []
            for i in range(0, len(stacked), chunk):
                feats = self.per_point.forward(stacked[i:i + chunk])
                parts.append(self.pool.forward(feats))
            return np.concatenate(parts, axis=0)
        return np.stack([self.encode(c) for c in clouds])

    # -- training ------------------------------------------------------------

    def forward_batch(self, clouds: np.ndarray) -> np.ndarray:
        """(B, N, 3) -> (B, M, 3), caching activations for backward_batch."""
        feats = self.per_point.forward(clouds)
        gfv = self.pool.forward(feats)
        flat = self.decoder.forward(gfv)
        return flat.reshape(clouds.shape[0], self.config.m_points, 3)

    def backward_batch(self, d_out: np.ndarray) -> None:
        d_flat = d_out.reshape(d_out.shape[0], -1)
        d_gfv = self.decoder.backward(d_flat)
        d_feats = self.pool.backward(d_gfv)
        self.per_point.backward(d_feats)

    def params(self):
        return self.per_point.params() + self.decoder.params()

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def freeze(self):
        self.frozen = True
        self.per_point.freeze()
        self.decoder.freeze()
        return self

    def state(self) -> dict:
        return {**self.per_point.state(), **self.decoder.state()}

    def load_state(self, state: dict):
        self.per_point.load_state(state)
        self.decoder.load_state(state)
        return self


def chamfer_loss_grad(inp: np.ndarray, out: np.ndarray):
    """Chamfer sum between two clouds and its gradient w.r.t. `out`.

    The nearest-neighbor pairing is held fixed within the step (standard
    subgradient of the min selection).
    """
    fwd_idx = cKDTree(out).query(inp)[1]  # nearest output point per input point
    bwd_idx = cKDTree(inp).query(out)[1]  # nearest input point per output point
    diff_fwd = out[fwd_idx] - inp
    diff_bwd = out - inp[bwd_idx]
    loss = float(np.sum(diff_fwd.astype(np.float64) ** 2) + np.sum(diff_bwd.astype(np.float64) ** 2))
    grad = 2.0 * diff_bwd
    np.add.at(grad, fwd_idx, 2.0 * diff_fwd)
    return loss, grad


def train_ae(clouds, config: AEConfig, seed=0, progress=None):
    """Train an autoencoder on complete clouds; returns (ae, per-epoch mean loss).

    The loss history records the epoch mean of the raw Chamfer sum between each
    input cloud and its reconstruction. Fully deterministic given (clouds,
    config, seed).
    """
    if len(clouds) == 0:
        raise ValueError("empty training dataset")
    init_ss, shuffle_ss = seed_sequence(seed).spawn(2)
    ae = Autoencoder(config, seed=init_ss)
    rng = np.random.default_rng(shuffle_ss)
    data = np.stack([as_cloud(c).astype(np.float32, copy=False) for c in clouds])
    opt = nn.Adam(ae.params(), lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            out = ae.forward_batch(batch)
            d_out = np.empty_like(out)
            for i in range(batch.shape[0]):
                loss_i, d_out[i] = chamfer_loss_grad(batch[i], out[i])
                total += loss_i
            ae.zero_grad()
            ae.backward_batch(d_out)
            opt.step()
        history.append(total / len(data))
        if progress is not None:
            progress(epoch, history[-1])
    return ae, history
