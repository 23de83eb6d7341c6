"""Shared test fixtures for odskit tests."""

import numpy as np
import pytest

from odskit import datasets
from odskit.config_schema import (
    AdversarialTrainingConfig, DatasetSpec, ExperimentConfig, ModelSpec, TargetSpec, TrainConfig
)
from odskit.models import MlpClassifier, init_mlp, train


@pytest.fixture(scope="session")
def small_spec():
    """A quick 16-dim, 4-class blob dataset with 4 held-out classes."""
    return DatasetSpec(
        dim=16, classes=4, samples_per_class=40, sigma=0.05, separation=6.0,
        latent_dim=4, ood_classes=4, seed=0,
    )


@pytest.fixture(scope="session")
def small_splits(small_spec):
    full = datasets.generate(small_spec)
    train_set, test_set = datasets.split(full, 0.8, seed=0)
    target_classes = list(range(small_spec.classes))
    return (
        datasets.select_classes(train_set, target_classes),
        datasets.select_classes(test_set, target_classes),
    )


@pytest.fixture(scope="session")
def quick_train():
    return TrainConfig(epochs=30, batch_size=32, optimizer="adam", schedule=[(0, 0.01)], seed=0)


@pytest.fixture(scope="session")
def trained_target(small_splits, quick_train):
    """Natural target trained on the 4 evaluation classes."""
    train_set, _ = small_splits
    model, _ = train(init_mlp([16, 32, 4], seed=0), train_set, quick_train)
    return model


@pytest.fixture(scope="session")
def robust_target(small_splits, quick_train):
    """Adversarially trained twin of the natural target."""
    train_set, _ = small_splits
    config = TrainConfig(
        epochs=30, batch_size=32, optimizer="adam", schedule=[(0, 0.01)], seed=0,
        adversarial=AdversarialTrainingConfig(epsilon=0.02, step_size=0.005, steps=3),
    )
    model, _ = train(init_mlp([16, 32, 4], seed=0), train_set, config)
    return model


@pytest.fixture(scope="session")
def surrogates(small_splits, quick_train):
    """Two surrogates with different widths and seeds."""
    train_set, _ = small_splits
    first, _ = train(init_mlp([16, 24, 4], seed=1), train_set, quick_train)
    second, _ = train(init_mlp([16, 48, 4], seed=2), train_set, quick_train)
    return [first, second]


@pytest.fixture
def linear_binary():
    """Two-class linear classifier: class 1 iff x . w > 0.5 * sum(w) with w = ones."""
    dim = 4
    w = np.zeros((dim, 2))
    w[:, 1] = 1.0
    b = np.array([0.5 * dim, 0.0])
    return MlpClassifier(layer_sizes=[dim, 2], weights=[w], biases=[b])


@pytest.fixture
def tiny_experiment(tmp_path):
    """A pipeline config small enough to run in seconds."""
    return ExperimentConfig(
        dataset=DatasetSpec(dim=8, classes=3, samples_per_class=20, latent_dim=3,
                            ood_classes=3, seed=0),
        target=TargetSpec(
            model=ModelSpec(name="target", hidden=[16],
                            train=TrainConfig(epochs=20, batch_size=16, schedule=[(0, 0.02)])),
            robust=AdversarialTrainingConfig(epsilon=0.02, step_size=0.01, steps=2),
        ),
        surrogates=[
            ModelSpec(name="surrogate-a", hidden=[16], seed=1,
                      train=TrainConfig(epochs=20, batch_size=16, schedule=[(0, 0.02)])),
            ModelSpec(name="ood-surrogate", hidden=[16], seed=2, ood=True,
                      train=TrainConfig(epochs=20, batch_size=16, schedule=[(0, 0.02)])),
        ],
        eval_size=5,
        budgets=[50, 100],
        output_dir=str(tmp_path / "out"),
        log_path=str(tmp_path / "logs"),
    )


@pytest.fixture
def eval_inputs(small_splits, trained_target):
    """Up to six test inputs the natural target classifies correctly."""
    from odskit.models import predict
    from odskit.processors.pool import EvalInputs
    _, test_set = small_splits
    correct = np.flatnonzero(predict(trained_target, test_set.features) == test_set.labels)[:6]
    return EvalInputs(ids=correct, features=test_set.features[correct], labels=test_set.labels[correct])
