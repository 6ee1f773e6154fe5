import os
from pathlib import Path

import numpy as np
import pytest

from advlab import idx, nn, synth

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def mnist_dir() -> Path | None:
    root = Path(os.environ.get("ADVLAB_MNIST_DIR", "data"))
    if all((root / name).is_file() for name in MNIST_FILES.values()):
        return root
    return None


@pytest.fixture(scope="session")
def mnist():
    """Real MNIST train/test batches; skips when the IDX files are absent."""
    root = mnist_dir()
    if root is None:
        pytest.skip(
            "MNIST IDX files not found; place train-images-idx3-ubyte, "
            "train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte "
            "under $ADVLAB_MNIST_DIR (default ./data)"
        )
    train = idx.to_batch(idx.load_idx(str(root / MNIST_FILES["train_images"]), str(root / MNIST_FILES["train_labels"])))
    test = idx.to_batch(idx.load_idx(str(root / MNIST_FILES["test_images"]), str(root / MNIST_FILES["test_labels"])))
    return train, test


@pytest.fixture(scope="session")
def digits_small():
    """Synthetic digit corpus for pipeline tests: 2000 train / 500 test."""
    train = idx.to_batch(synth.make_digits(2000, rng_seed=0))
    test = idx.to_batch(synth.make_digits(500, rng_seed=1))
    return train, test


@pytest.fixture(scope="session")
def digits_mlp(digits_small):
    train, _ = digits_small
    net = nn.build_network([784, 128, 10], rng_seed=0)
    nn.train(net, train, nn.TrainConfig(learning_rate=0.1, epochs=6, batch_size=128, rng_seed=0))
    return net


def random_net(rng: np.random.Generator, dims=None) -> nn.Network:
    """A small random network for property checks."""
    if dims is None:
        depth = rng.integers(1, 3)
        dims = [int(rng.integers(2, 6)) for _ in range(depth + 1)]
        dims[-1] = max(dims[-1], 2)
    return nn.build_network(dims, rng_seed=int(rng.integers(0, 2**31)))
