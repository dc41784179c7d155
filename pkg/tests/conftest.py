import struct

import numpy as np
import pytest

from adauc import data, model
from adauc.objective import AuxParams, ObjectiveContext

# Filled by test_acceptance; echoed in the terminal summary so the per-criterion
# verdicts are visible in plain `pytest -v` output.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def ctx():
    return ObjectiveContext(0.3, 0.0)


@pytest.fixture
def aux():
    return AuxParams(0.6, 0.3, -0.3)


@pytest.fixture
def mlp():
    return model.init((4, 6, 1), 11)


@pytest.fixture
def small_synthetic():
    return data.gen_synthetic_longtail(seed=4, n=300, d=5, rho=0.1, separation=4.0)


@pytest.fixture
def idx_fixture(tmp_path):
    """Two 2x2 images written byte by byte, independent of the library writer."""
    pixels = bytes([0, 255, 128, 1, 255, 0, 64, 200])
    labels = bytes([3, 7])
    img = tmp_path / "images.idx"
    lab = tmp_path / "labels.idx"
    img.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + pixels)
    lab.write_bytes(struct.pack(">II", 0x801, 2) + labels)
    return img, lab, pixels, labels


@pytest.fixture
def cifar_fixture(tmp_path):
    rng = np.random.default_rng(0)
    recs = []
    for label in (3, 0, 9):
        recs.append(bytes([label]) + rng.integers(0, 256, 3072, dtype=np.uint8).tobytes())
    path = tmp_path / "batch.bin"
    path.write_bytes(b"".join(recs))
    return path, recs
