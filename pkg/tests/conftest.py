import numpy as np
import pytest

from pvm_saccade import engine
from pvm_saccade.topology import ModelConfig, build_uniform
from pvm_saccade.unit import LearningConfig, Rect, UnitSpec, init_state, init_weights


def make_unit(signal_dim=4, hidden_dim=2, context_dim=4, seed=0, level=0):
    tile = Rect(0, 0, 1, 1) if level == 0 else None
    # signal_dim for a real input unit is tile area * 3; tests use free-form
    # dims, so the tile is just a placeholder
    spec = UnitSpec(0, level, signal_dim, hidden_dim, context_dim, tile)
    weights = init_weights(spec, seed)
    state = init_state(spec)
    return spec, weights, state


TOY_CONFIGS = [
    ModelConfig(view_w=8, view_h=8, level_grids=(4, 2, 1), hidden_dim=4),
    ModelConfig(view_w=8, view_h=8, level_grids=(2, 1), hidden_dim=3),
    ModelConfig(view_w=12, view_h=12, level_grids=(4, 3, 1), hidden_dim=4),
    ModelConfig(view_w=16, view_h=16, level_grids=(8, 4, 2, 1), hidden_dim=4),
]


def toy_model(config=None, seed=0, mode=engine.MODE_TRAINING):
    config = config or TOY_CONFIGS[0]
    topo = build_uniform(config)
    model = engine.new_model(topo, LearningConfig(seed=seed), mode=mode)
    return model


def random_frames(n, h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n, h, w, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Release-gate result lines collected by tests/test_acceptance.py; echoed
# after the test summary so they always appear in the run log.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
