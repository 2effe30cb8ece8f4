import numpy as np
import pytest
import torch
from hypothesis import settings

settings.register_profile("dsovt", deadline=None, max_examples=50)
settings.load_profile("dsovt")

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sw_sequence(rng):
    """Small (6, 16, 16, 3) sequence with (u, v, h) channels."""
    uv = rng.uniform(-0.1, 0.1, size=(6, 16, 16, 2))
    h = rng.uniform(0.9, 1.3, size=(6, 16, 16, 1))
    return np.concatenate([uv, h], axis=-1).astype(np.float32)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get("acceptance", None) if hasattr(config, "stash") else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
