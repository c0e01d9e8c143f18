import numpy as np
import pytest

from shapefill import shapes
from shapefill.classifier import (
    ClassifierConfig,
    PointClassifier,
    evaluate_accuracy,
    train_classifier,
)


def tiny_dataset(per_category=6, points=64, seed=0):
    clouds, labels = shapes.make_dataset(per_category, points, seed)
    return [c.astype(np.float32) for c in clouds], labels


def tiny_config(**kw):
    defaults = dict(point_channels=(32, 64), head_widths=(32,), epochs=30, batch_size=8, lr=2e-3)
    defaults.update(kw)
    return ClassifierConfig(**defaults)


class TestClassifier:
    def test_untrained_classify_rejected(self):
        model = PointClassifier(tiny_config(), seed=0)
        with pytest.raises(ValueError, match="trained"):
            model.classify(np.zeros((8, 3), dtype=np.float32))

    def test_training_reduces_loss_and_fits(self):
        clouds, labels = tiny_dataset()
        model, history = train_classifier(clouds, labels, tiny_config(), seed=1)
        assert history[-1] < history[0]
        assert evaluate_accuracy(model, clouds, labels) > 0.8

    def test_generalizes_to_held_out(self):
        clouds, labels = tiny_dataset(per_category=8, seed=2)
        test_clouds, test_labels = tiny_dataset(per_category=3, seed=99)
        model, _ = train_classifier(clouds, labels, tiny_config(epochs=60), seed=3)
        assert evaluate_accuracy(model, test_clouds, test_labels) > 0.6

    def test_permutation_invariant_logits(self):
        clouds, labels = tiny_dataset(per_category=1)
        model, _ = train_classifier(clouds, labels, tiny_config(epochs=2), seed=4)
        rng = np.random.default_rng(5)
        pts = clouds[0]
        base = model.logits(pts)
        assert np.array_equal(model.logits(pts[rng.permutation(len(pts))]), base)

    def test_variable_size_input(self):
        clouds, labels = tiny_dataset(per_category=2)
        model, _ = train_classifier(clouds, labels, tiny_config(epochs=2), seed=6)
        assert model.classify(clouds[0][:17]) in shapes.CATEGORIES

    def test_state_round_trip_marks_trained(self):
        clouds, labels = tiny_dataset(per_category=2)
        model, _ = train_classifier(clouds, labels, tiny_config(epochs=2), seed=7)
        clone = PointClassifier(tiny_config(), seed=99).load_state(model.state())
        assert clone.trained
        assert clone.classify(clouds[0]) == model.classify(clouds[0])

    def test_deterministic_history(self):
        clouds, labels = tiny_dataset(per_category=2)
        _, h1 = train_classifier(clouds, labels, tiny_config(epochs=3), seed=8)
        _, h2 = train_classifier(clouds, labels, tiny_config(epochs=3), seed=8)
        assert h1 == h2

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_classifier([], [], tiny_config(), seed=0)
