"""Command-line interface: dataset generation, the four training stages,
completion, evaluation, and the latency bench.

Reports land under the output root: delimited CSV/JSON plus rendered PNG
figures next to them.
"""

from __future__ import annotations

import functools
from pathlib import Path

import click
import numpy as np

from . import datasets, report
from .agent import CompletionEnv, evaluate_policy, random_policy_reward, train_agent
from .autoencoder import train_ae
from .classifier import evaluate_accuracy, train_classifier
from .config import load_run_config
from .gan import train_gan
from .geometry import corrupt_cloud, load_xyz, save_xyz
from .pipeline import (
    MODES,
    bench_latency,
    evaluate_completion,
    load_pipeline,
    save_stage,
)


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="Flat key=value config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master RNG seed.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output root directory.")(fn)
    return fn


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # one-line diagnostic, nonzero exit
            raise click.ClickException(str(exc))

    return wrapper


def _config(ctx, config_path, seed, out, **extra):
    group = ctx.obj or {}
    overrides = {"seed": seed if seed is not None else group.get("seed"),
                 "out": out if out is not None else group.get("out")}
    overrides.update(extra)
    path = config_path or group.get("config")
    return load_run_config(path, overrides)


def _paths(cfg):
    root = Path(cfg.out)
    return {
        "root": root,
        "dataset": root / "dataset",
        "ckpt": root / "checkpoints",
        "logs": root / "logs",
        "reports": root / "reports",
        "completions": root / "completions",
    }


@click.group()
@common_options
@click.pass_context
def main(ctx, config_path, seed, out):
    """Point-cloud shape completion: latent GAN steered by a control agent."""
    ctx.obj = {"config": config_path, "seed": seed, "out": out}


@main.command("gen-data")
@common_options
@click.option("--train-per-category", type=int, default=None)
@click.option("--test-per-category", type=int, default=None)
@click.option("--points", "cloud_points", type=int, default=None)
@click.pass_context
@guarded
def gen_data(ctx, config_path, seed, out, train_per_category, test_per_category, cloud_points):
    """Generate the synthetic dataset (complete splits + corrupted test sets)."""
    cfg = _config(ctx, config_path, seed, out,
                  train_per_category=train_per_category,
                  test_per_category=test_per_category,
                  cloud_points=cloud_points)
    paths = _paths(cfg)
    manifest = datasets.write_dataset(
        paths["dataset"], cfg.seed, cfg.train_per_category, cfg.test_per_category,
        cfg.cloud_points, cfg.ratios,
    )
    n_train = manifest["train_per_category"] * len(manifest["categories"])
    n_test = manifest["test_per_category"] * len(manifest["categories"])
    click.echo(f"dataset written to {paths['dataset']} "
               f"({n_train} train, {n_test} test, ratios {manifest['ratios']})")


@main.command("train-ae")
@common_options
@click.option("--epochs", type=int, default=None)
@click.pass_context
@guarded
def cmd_train_ae(ctx, config_path, seed, out, epochs):
    """Train the autoencoder on the complete training split."""
    cfg = _config(ctx, config_path, seed, out, ae_epochs=epochs)
    paths = _paths(cfg)
    clouds, _, _ = datasets.load_split(paths["dataset"], "train")
    echo_every = max(1, cfg.ae_epochs // 10)

    def progress(epoch, loss):
        if (epoch + 1) % echo_every == 0 or epoch == 0:
            click.echo(f"epoch {epoch + 1}/{cfg.ae_epochs}  mean chamfer {loss:.5f}")

    ae, history = train_ae(clouds, cfg.ae_config(), seed=cfg.seed, progress=progress)
    save_stage(paths["ckpt"], "ae", ae.state())
    report.write_csv(paths["logs"] / "ae_loss.csv", ["epoch", "mean_chamfer"],
                     [(i + 1, v) for i, v in enumerate(history)])
    report.plot_curves(paths["logs"] / "ae_loss.png", range(1, len(history) + 1),
                       {"train": history}, "Autoencoder Chamfer loss", "epoch",
                       "mean Chamfer sum", logy=True)
    click.echo(f"autoencoder saved; final epoch mean chamfer {history[-1]:.5f}")


@main.command("train-gan")
@common_options
@click.option("--iterations", type=int, default=None)
@click.pass_context
@guarded
def cmd_train_gan(ctx, config_path, seed, out, iterations):
    """Train the latent GAN on encoder outputs of the training split."""
    cfg = _config(ctx, config_path, seed, out, gan_iterations=iterations)
    paths = _paths(cfg)
    pipe = load_pipeline(paths["ckpt"], cfg, need=("ae",))
    clouds, _, _ = datasets.load_split(paths["dataset"], "train")
    gfvs = pipe.ae.encode_many(clouds)
    echo_every = max(1, cfg.gan_iterations // 10)

    def progress(it, d_real, d_fake, gp):
        if (it + 1) % echo_every == 0 or it == 0:
            click.echo(f"iter {it + 1}/{cfg.gan_iterations}  "
                       f"d_real {d_real:+.4f}  d_fake {d_fake:+.4f}  gp {gp:.4f}")

    gen, critic, hist = train_gan(gfvs, cfg.gan_config(), seed=cfg.seed, progress=progress)
    save_stage(paths["ckpt"], "gan", {**gen.state(), **critic.state()})
    report.write_csv(paths["logs"] / "gan_log.csv", ["iter", "d_real", "d_fake", "gp"], hist.rows)
    its = [r[0] for r in hist.rows]
    report.plot_curves(paths["logs"] / "gan_log.png", its,
                       {"d_real": [r[1] for r in hist.rows],
                        "d_fake": [r[2] for r in hist.rows],
                        "gp": [r[3] for r in hist.rows]},
                       "Latent GAN training", "generator iteration", "score")
    click.echo(f"gan saved; critic steps {hist.critic_steps}, generator steps {hist.generator_steps}")


@main.command("train-agent")
@common_options
@click.option("--steps", type=int, default=None)
@click.pass_context
@guarded
def cmd_train_agent(ctx, config_path, seed, out, steps):
    """Train the seed-selection agent against the frozen pipeline."""
    cfg = _config(ctx, config_path, seed, out, agent_steps=steps)
    paths = _paths(cfg)
    pipe = load_pipeline(paths["ckpt"], cfg, need=("ae", "gan"))
    env = CompletionEnv(pipe.ae, pipe.gen, pipe.critic, cfg.reward_weights())
    train_clouds, _, _ = datasets.load_split(paths["dataset"], "train")
    test_clouds, _, _ = datasets.load_split(paths["dataset"], "test")
    partials = agent_training_partials(train_clouds, cfg)
    eval_clouds = agent_eval_partials(test_clouds, cfg)

    def progress(step, mean_r):
        click.echo(f"step {step}/{cfg.agent_steps}  eval mean reward {mean_r:.3f}")

    agent, hist = train_agent(partials, env, cfg.agent_config(), seed=cfg.seed,
                              eval_clouds=eval_clouds, progress=progress)
    save_stage(paths["ckpt"], "agent", agent.state())
    report.write_csv(paths["logs"] / "agent_log.csv",
                     ["step", "reward", "L_CH", "L_GFV", "D_score"], hist.rows)
    report.write_csv(paths["logs"] / "agent_evals.csv", ["step", "mean_reward"], hist.evals)
    rewards = [r[1] for r in hist.rows]
    window = max(1, min(100, len(rewards) // 10))
    smoothed = np.convolve(rewards, np.ones(window) / window, mode="valid")
    report.plot_curves(paths["logs"] / "agent_reward.png",
                       range(window - 1, len(rewards)), {"reward (smoothed)": smoothed},
                       "Agent training reward", "step", "reward")
    baseline = random_policy_reward(env, eval_clouds, seed=cfg.seed)
    final = evaluate_policy(agent, env, eval_clouds)
    click.echo(f"agent saved; final eval reward {final:.3f} vs random baseline {baseline:.3f}")


def agent_training_partials(train_clouds, cfg):
    """Corrupt the training split, cycling through the configured ratios."""
    children = np.random.SeedSequence((cfg.seed, 0xA6E)).spawn(len(train_clouds))
    ratios = cfg.missing_ratios()
    return [
        corrupt_cloud(c, ratios[i % len(ratios)], seed=children[i]).astype(np.float32)
        for i, c in enumerate(train_clouds)
    ]


def agent_eval_partials(test_clouds, cfg):
    children = np.random.SeedSequence((cfg.seed, 0xE7A1)).spawn(len(test_clouds))
    ratios = cfg.missing_ratios()
    clouds = [
        corrupt_cloud(c, ratios[i % len(ratios)], seed=children[i]).astype(np.float32)
        for i, c in enumerate(test_clouds)
    ]
    return clouds[: cfg.agent_eval_clouds]


@main.command("train-classifier")
@common_options
@click.option("--epochs", type=int, default=None)
@click.pass_context
@guarded
def cmd_train_classifier(ctx, config_path, seed, out, epochs):
    """Train the category classifier on complete shapes."""
    cfg = _config(ctx, config_path, seed, out, classifier_epochs=epochs)
    paths = _paths(cfg)
    clouds, labels, _ = datasets.load_split(paths["dataset"], "train")
    model, history = train_classifier(clouds, labels, cfg.classifier_config(), seed=cfg.seed)
    save_stage(paths["ckpt"], "classifier", model.state())
    report.write_csv(paths["logs"] / "classifier_loss.csv", ["epoch", "mean_cross_entropy"],
                     [(i + 1, v) for i, v in enumerate(history)])
    report.plot_curves(paths["logs"] / "classifier_loss.png", range(1, len(history) + 1),
                       {"train": history}, "Classifier loss", "epoch", "cross entropy", logy=True)
    test_clouds, test_labels, _ = datasets.load_split(paths["dataset"], "test")
    acc = evaluate_accuracy(model, test_clouds, test_labels)
    click.echo(f"classifier saved; held-out accuracy on complete shapes {acc:.3f}")


@main.command("complete")
@common_options
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Partial cloud (.xyz) to complete.")
@click.option("--mode", type=click.Choice(MODES), default="hybrid")
@click.option("--figure/--no-figure", default=False, help="Render input/output scatter PNG.")
@click.pass_context
@guarded
def cmd_complete(ctx, config_path, seed, out, input_path, mode, figure):
    """Complete a single partial cloud and write the result as .xyz."""
    cfg = _config(ctx, config_path, seed, out)
    paths = _paths(cfg)
    need = ("ae",) if mode == "ae" else ("ae", "gan", "agent")
    pipe = load_pipeline(paths["ckpt"], cfg, need=need)
    pts = load_xyz(input_path)
    result = pipe.complete(pts, mode=mode)
    dest = paths["completions"] / f"{Path(input_path).stem}_{mode}.xyz"
    dest.parent.mkdir(parents=True, exist_ok=True)
    save_xyz(dest, result.points)
    detail = f"path {result.path_taken}"
    if result.d_score_ae is not None:
        detail += f"  d_ae {result.d_score_ae:+.4f}  d_gan {result.d_score_gan:+.4f}"
    if result.action_ms is not None:
        detail += f"  action {result.action_ms:.3f} ms"
    click.echo(f"completed {input_path} -> {dest}  ({detail})")
    if figure:
        fig_path = dest.with_suffix(".png")
        report.plot_clouds(fig_path, {"input": pts, f"{mode} completion": result.points})
        click.echo(f"figure written to {fig_path}")


@main.command("evaluate")
@common_options
@click.option("--ratios", default=None, help="Comma-separated missing percentages, e.g. 20,30,70.")
@click.option("--modes", default=",".join(MODES), show_default=True)
@click.option("--jitter", "jitter_sigma", type=float, default=0.0,
              help="Gaussian jitter sigma added to partial inputs (clipped at 5 sigma).")
@click.pass_context
@guarded
def cmd_evaluate(ctx, config_path, seed, out, ratios, modes, jitter_sigma):
    """Evaluate completion quality per missing ratio; write CSV/JSON/figures."""
    overrides = {}
    if ratios is not None:
        overrides["ratios"] = tuple(int(r) for r in ratios.split(","))
    cfg = _config(ctx, config_path, seed, out, **overrides)
    paths = _paths(cfg)
    mode_list = tuple(m.strip() for m in modes.split(",") if m.strip())
    for m in mode_list:
        if m not in MODES:
            raise click.ClickException(f"unknown mode {m!r}; expected subset of {MODES}")
    need = {"ae"}
    if {"vanilla", "hybrid"} & set(mode_list):
        need |= {"gan", "agent"}
    pipe = load_pipeline(paths["ckpt"], cfg, need=tuple(sorted(need)))
    clouds, labels, _ = datasets.load_split(paths["dataset"], "test")
    rows = evaluate_completion(
        pipe, clouds, labels, cfg.ratios, modes=mode_list, seed=cfg.seed,
        jitter_sigma=jitter_sigma,
        progress=lambda pct: click.echo(f"evaluated {pct}% missing"),
    )
    report.write_csv(
        paths["reports"] / "evaluation.csv",
        ["ratio", "mode", "mean_chamfer_normalized", "accuracy", "latency_ms_mean"],
        [[r["ratio"], r["mode"], r["mean_chamfer_normalized"], r["accuracy"], r["latency_ms_mean"]]
         for r in rows],
    )
    report.write_json(paths["reports"] / "evaluation.json", {"rows": rows})
    report.plot_completion_report(paths["reports"] / "evaluation.png", rows)
    report.plot_accuracy_report(paths["reports"] / "accuracy.png", rows)
    for row in rows:
        acc = "-" if row["accuracy"] is None else f"{row['accuracy']:.3f}"
        click.echo(f"ratio {row['ratio']:>3}%  {row['mode']:>8}  "
                   f"chamfer {row['mean_chamfer_normalized']:.5f}  accuracy {acc}")
    click.echo(f"report written to {paths['reports']}")


@main.command("bench")
@common_options
@click.option("--count", type=int, default=1000, show_default=True)
@click.pass_context
@guarded
def cmd_bench(ctx, config_path, seed, out, count):
    """Measure actor+generator forward latency over synthetic partial shapes."""
    cfg = _config(ctx, config_path, seed, out)
    paths = _paths(cfg)
    pipe = load_pipeline(paths["ckpt"], cfg, need=("ae", "gan", "agent"))
    result = bench_latency(pipe, n_shapes=count, seed=cfg.seed, ratios_percent=cfg.ratios)
    samples = result.pop("samples_ms")
    report.write_json(paths["reports"] / "bench.json", result)
    report.plot_latency_histogram(paths["reports"] / "bench.png", samples)
    click.echo(f"seed selection over {result['count']} shapes: "
               f"mean {result['mean_ms']:.3f} ms, p99 {result['p99_ms']:.3f} ms")


if __name__ == "__main__":
    main()
