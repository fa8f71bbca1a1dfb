"""Session-scoped fixtures: one trained desk net shared by the expensive suites."""

import numpy as np
import pytest

from mbfdetect.data import DESK_STYLE, SHIFTED_STYLE, make_glyph_dataset
from mbfdetect.net import desk_config, predict, train_net

NET_SEED = 20260808


@pytest.fixture(scope="session")
def desk_net():
    """Recipe mirror of the bundled desk experiment's classifier."""
    images, labels = make_glyph_dataset(1400, seed=101)
    result = train_net((images, labels), desk_config(10), epochs=80, lr=0.25,
                       seed=NET_SEED, noise_sigma=0.35, label_smoothing=0.1,
                       step_lr=True)
    assert result.train_accuracy >= 0.90
    return result.net


@pytest.fixture(scope="session")
def desk_pool(desk_net):
    """Images, labels, and a correctly-classified mask for attack targets."""
    images, labels = make_glyph_dataset(400, seed=202, style=DESK_STYLE)
    correct = predict(desk_net, images) == labels
    return images, labels, correct


@pytest.fixture(scope="session")
def shifted_pool(desk_net):
    images, labels = make_glyph_dataset(400, seed=303, style=SHIFTED_STYLE)
    correct = predict(desk_net, images) == labels
    return images, labels, correct


@pytest.fixture(scope="session")
def plain_net():
    """A conventionally trained classifier (no smoothing or augmentation),
    the regime the attack-strength oracles were frozen against."""
    images, labels = make_glyph_dataset(700, seed=101)
    result = train_net((images, labels), desk_config(10), epochs=25, lr=0.2,
                       seed=NET_SEED)
    assert result.train_accuracy >= 0.97
    return result.net


@pytest.fixture(scope="session")
def eligible(plain_net):
    images, labels = make_glyph_dataset(400, seed=202, style=DESK_STYLE)
    idx = np.flatnonzero(predict(plain_net, images) == labels)[:200]
    return images[idx], labels[idx]
