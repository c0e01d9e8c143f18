"""End-to-end completion paths, evaluation reports, and the latency bench.

Vanilla completion decodes the generator output steered by the agent; the
hybrid path additionally scores the autoencoder's feature vector and the
generated one with the adversarial critic and decodes whichever scores
higher (ties go to the generated path).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import Actor
from .autoencoder import Autoencoder
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import PointClassifier
from .gan import Critic, Generator
from .geometry import as_cloud, chamfer_normalized, corrupt_cloud, jitter_cloud, seed_sequence
from .shapes import CATEGORIES

MODES = ("ae", "vanilla", "hybrid")
INPUT_MODE = "input"


@dataclass
class CompletionResult:
    points: np.ndarray
    mode: str
    path_taken: str             # "AE" or "GAN"
    d_score_ae: float | None
    d_score_gan: float | None
    action_ms: float | None     # actor + generator forward only
    codec_ms: float             # encode + decode


class Pipeline:
    """Trained networks behind the completion interface."""

    def __init__(self, ae: Autoencoder, gen: Generator = None, critic: Critic = None,
                 actor: Actor = None, classifier: PointClassifier = None):
        self.ae = ae
        self.gen = gen
        self.critic = critic
        self.actor = actor
        self.classifier = classifier

    def _require(self, mode: str):
        missing = []
        if mode in ("vanilla", "hybrid"):
            if self.gen is None:
                missing.append("generator")
            if self.actor is None:
                missing.append("actor")
        if mode == "hybrid" and self.critic is None:
            missing.append("critic")
        if missing:
            raise ValueError(f"mode {mode!r} needs checkpoints for: {', '.join(missing)}")

    def complete(self, points, mode: str = "hybrid") -> CompletionResult:
        if mode not in MODES:
            raise ValueError(f"unknown completion mode {mode!r}; expected one of {MODES}")
        self._require(mode)
        pts = as_cloud(points).astype(np.float32, copy=False)

        t0 = time.perf_counter()
        gfv_ae = self.ae.encode(pts)
        t1 = time.perf_counter()
        codec_ms = (t1 - t0) * 1e3

        if mode == "ae":
            t2 = time.perf_counter()
            out = self.ae.decode(gfv_ae)
            codec_ms += (time.perf_counter() - t2) * 1e3
            return CompletionResult(out, mode, "AE", None, None, None, codec_ms)

        t2 = time.perf_counter()
        action = self.actor.act(gfv_ae)
        gfv_gan = self.gen.generate(action)
        action_ms = (time.perf_counter() - t2) * 1e3

        if mode == "vanilla":
            t3 = time.perf_counter()
            out = self.ae.decode(gfv_gan)
            codec_ms += (time.perf_counter() - t3) * 1e3
            return CompletionResult(out, mode, "GAN", None, None, action_ms, codec_ms)

        d_ae = self.critic.score(gfv_ae)
        d_gan = self.critic.score(gfv_gan)
        path = "GAN" if d_gan >= d_ae else "AE"  # tie goes to the generated path
        t3 = time.perf_counter()
        out = self.ae.decode(gfv_gan if path == "GAN" else gfv_ae)
        codec_ms += (time.perf_counter() - t3) * 1e3
        return CompletionResult(out, mode, path, d_ae, d_gan, action_ms, codec_ms)


# -- checkpoint files ---------------------------------------------------------

CKPT_FILES = {
    "ae": "ae.ckpt",
    "gan": "gan.ckpt",
    "agent": "agent.ckpt",
    "classifier": "classifier.ckpt",
}


def save_stage(ckpt_dir, stage: str, state: dict) -> Path:
    path = Path(ckpt_dir) / CKPT_FILES[stage]
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path, state)
    return path


def load_pipeline(ckpt_dir, run_config, need=("ae",)) -> Pipeline:
    """Build networks from the run config and load whatever checkpoints exist.

    Stages listed in `need` must be present on disk; the rest are optional.
    """
    ckpt_dir = Path(ckpt_dir)
    paths = {stage: ckpt_dir / name for stage, name in CKPT_FILES.items()}
    for stage in need:
        if not paths[stage].exists():
            raise FileNotFoundError(f"missing checkpoint for stage {stage!r}: {paths[stage]}")

    ae = Autoencoder(run_config.ae_config(), seed=0)
    ae.load_state(load_checkpoint(paths["ae"]))
    ae.freeze()
    gen = critic = actor = classifier = None
    if paths["gan"].exists():
        state = load_checkpoint(paths["gan"])
        gen = Generator(run_config.gan_config(), seed=0).load_state(state)
        gen.freeze()
        critic = Critic(run_config.gan_config(), seed=0).load_state(state)
        critic.freeze()
    if paths["agent"].exists():
        actor = Actor(seed=0)
        actor.load_state(load_checkpoint(paths["agent"]))
        actor.net.freeze()
    if paths["classifier"].exists():
        classifier = PointClassifier(run_config.classifier_config(), seed=0)
        classifier.load_state(load_checkpoint(paths["classifier"]))
    return Pipeline(ae, gen=gen, critic=critic, actor=actor, classifier=classifier)


# -- evaluation ---------------------------------------------------------------

def corrupt_test_set(clouds, ratio: float, seed, jitter_sigma: float = 0.0):
    """Seeded per-cloud corruption (and optional jitter) of a test split."""
    children = seed_sequence(seed).spawn(2 * len(clouds))
    partials = []
    for i, cloud in enumerate(clouds):
        partial = corrupt_cloud(cloud, ratio, seed=children[2 * i])
        if jitter_sigma > 0.0:
            partial = jitter_cloud(partial, jitter_sigma, seed=children[2 * i + 1])
        partials.append(partial.astype(np.float32))
    return partials


def evaluate_completion(pipeline: Pipeline, clouds, labels, ratios_percent, modes=MODES,
                        seed=0, jitter_sigma: float = 0.0, progress=None):
    """Per-ratio, per-mode mean normalized Chamfer to ground truth (plus the
    raw-partial baseline), with classification accuracy when a classifier is
    loaded. Returns a list of report rows."""
    if len(clouds) == 0:
        raise ValueError("empty evaluation set")
    for mode in modes:
        pipeline._require(mode)
    gts = [as_cloud(c).astype(np.float32, copy=False) for c in clouds]
    rows = []
    ratio_seeds = seed_sequence(seed).spawn(len(ratios_percent))
    for ratio_pct, rseed in zip(ratios_percent, ratio_seeds):
        partials = corrupt_test_set(gts, ratio_pct / 100.0, rseed, jitter_sigma)
        rows.append(_report_row(pipeline, ratio_pct, INPUT_MODE, partials, gts, labels, None))
        for mode in modes:
            results = [pipeline.complete(p, mode) for p in partials]
            outs = [r.points for r in results]
            lat = [r.action_ms for r in results if r.action_ms is not None]
            lat_mean = float(np.mean(lat)) if lat else None
            rows.append(_report_row(pipeline, ratio_pct, mode, outs, gts, labels, lat_mean))
        if progress is not None:
            progress(ratio_pct)
    return rows


def _report_row(pipeline, ratio_pct, mode, outs, gts, labels, latency_ms):
    chamfer = float(np.mean([chamfer_normalized(o, g) for o, g in zip(outs, gts)]))
    accuracy = None
    if pipeline.classifier is not None and labels is not None:
        hits = sum(
            1 for o, t in zip(outs, labels) if pipeline.classifier.classify(o) == CATEGORIES[t]
        )
        accuracy = hits / len(outs)
    return {
        "ratio": ratio_pct,
        "mode": mode,
        "mean_chamfer_normalized": chamfer,
        "accuracy": accuracy,
        "latency_ms_mean": latency_ms,
    }


# -- latency bench ------------------------------------------------------------

def bench_latency(pipeline: Pipeline, n_shapes=1000, seed=0, ratios_percent=(20, 30, 40, 50, 70)):
    """Time the actor+generator forward (the seed-selection step) per shape.

    State preparation (sampling, corruption, encoding) happens outside the
    timed section. Returns per-shape samples plus mean/p99 in milliseconds.
    """
    pipeline._require("vanilla")
    from .shapes import sample_shape  # local import to keep module deps one-way

    children = seed_sequence(seed).spawn(2 * n_shapes)
    states = []
    for i in range(n_shapes):
        cat = CATEGORIES[i % len(CATEGORIES)]
        ratio = ratios_percent[i % len(ratios_percent)] / 100.0
        cloud = sample_shape(cat, pipeline.ae.config.m_points, children[2 * i])
        partial = corrupt_cloud(cloud, ratio, seed=children[2 * i + 1]).astype(np.float32)
        states.append(pipeline.ae.encode(partial))
    samples = np.empty(n_shapes)
    for i, s in enumerate(states):
        t0 = time.perf_counter()
        a = pipeline.actor.act(s)
        pipeline.gen.generate(a)
        samples[i] = (time.perf_counter() - t0) * 1e3
    return {
        "count": n_shapes,
        "mean_ms": float(samples.mean()),
        "p99_ms": float(np.percentile(samples, 99)),
        "max_ms": float(samples.max()),
        "samples_ms": samples,
    }
