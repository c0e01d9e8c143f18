"""Dataset directory layout: xyz files for complete and corrupted splits.

    dataset/
      manifest.json
      train/complete/{category}_{index:03d}.xyz
      test/complete/{category}_{index:03d}.xyz
      test/partial/r{ratio}/{category}_{index:03d}.xyz

Every file is the ASCII xyz format; filenames carry the category label.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import corrupt_cloud, load_xyz, save_xyz, seed_sequence
from .report import write_json
from .shapes import CATEGORIES, make_dataset


def write_dataset(root, seed, train_per_category, test_per_category, points, ratios_pct):
    """Generate and write the full dataset tree; returns the manifest dict."""
    root = Path(root)
    train_ss, test_ss, corrupt_ss = seed_sequence(seed).spawn(3)
    splits = {
        "train": make_dataset(train_per_category, points, train_ss),
        "test": make_dataset(test_per_category, points, test_ss),
    }
    for split, (clouds, labels) in splits.items():
        out_dir = root / split / "complete"
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, cloud in zip(_names(labels), clouds):
            save_xyz(out_dir / name, cloud.astype(np.float32))
    test_clouds = [c.astype(np.float32) for c in splits["test"][0]]
    test_names = _names(splits["test"][1])
    children = corrupt_ss.spawn(len(ratios_pct) * len(test_clouds))
    for ri, ratio in enumerate(ratios_pct):
        out_dir = root / "test" / "partial" / f"r{ratio}"
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, (name, cloud) in enumerate(zip(test_names, test_clouds)):
            partial = corrupt_cloud(cloud, ratio / 100.0, children[ri * len(test_clouds) + i])
            save_xyz(out_dir / name, partial)
    manifest = {
        "seed": int(seed) if not isinstance(seed, np.random.SeedSequence) else None,
        "points": points,
        "train_per_category": train_per_category,
        "test_per_category": test_per_category,
        "categories": list(CATEGORIES),
        "ratios": list(ratios_pct),
    }
    write_json(root / "manifest.json", manifest)
    return manifest


def _names(labels):
    counters = {}
    names = []
    for lab in labels:
        cat = CATEGORIES[int(lab)]
        idx = counters.get(cat, 0)
        counters[cat] = idx + 1
        names.append(f"{cat}_{idx:03d}.xyz")
    return names


def load_split(root, split):
    """Load a complete split; returns (clouds, labels, names) sorted by filename."""
    split_dir = Path(root) / split / "complete"
    if not split_dir.is_dir():
        raise FileNotFoundError(f"no {split!r} split at {split_dir}; run gen-data first")
    return _load_dir(split_dir)


def load_partial_split(root, ratio_pct):
    """Load a pre-generated partial test split, or None if absent."""
    part_dir = Path(root) / "test" / "partial" / f"r{ratio_pct:g}"
    if not part_dir.is_dir():
        return None
    return _load_dir(part_dir)


def _load_dir(path):
    clouds, labels, names = [], [], []
    for file in sorted(path.glob("*.xyz")):
        cat = file.stem.rsplit("_", 1)[0]
        if cat not in CATEGORIES:
            raise ValueError(f"cannot infer category from filename {file.name!r}")
        clouds.append(load_xyz(file))
        labels.append(CATEGORIES.index(cat))
        names.append(file.name)
    if not clouds:
        raise FileNotFoundError(f"no .xyz files in {path}")
    return clouds, np.array(labels, dtype=np.int64), names
