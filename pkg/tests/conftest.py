import os

import pytest

MNIST_DIR = os.environ.get("MCNC_DATA_DIR", "/root/data/mnist")


def mnist_available():
    return os.path.exists(os.path.join(MNIST_DIR, "train-images-idx3-ubyte"))


@pytest.fixture
def mnist_dir():
    if not mnist_available():
        pytest.skip(f"MNIST IDX files not found under {MNIST_DIR} (set MCNC_DATA_DIR)")
    return MNIST_DIR


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running MNIST training criteria")
