import numpy as np
import pytest
import torch

from rgbdsal import make_toy_data, seed_all

# One line per acceptance criterion, filled in by test_acceptance.py and
# echoed after the run so the verdicts survive pytest's output capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _fixed_seed():
    seed_all(0)


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    """Small shared toy dataset: 4 labeled triples + 4 unlabeled RGBs."""
    root = tmp_path_factory.mktemp("toy")
    make_toy_data(root, n_labeled=4, n_unlabeled=4, seed=7, size=64)
    return root


def zero_init(module):
    """Zero every conv weight and bias under `module`, in place."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, torch.nn.Conv2d):
                m.weight.zero_()
                if m.bias is not None:
                    m.bias.zero_()
    return module


def rand_plane(shape, seed=0):
    rng = np.random.default_rng(seed)
    return torch.from_numpy(rng.random(shape, dtype=np.float64))
