"""Run configuration: a flat INI file with one section per subsystem.

Example::

    [model]
    view_w = 32
    view_h = 32
    level_grids = 16,8,4,3,2,1
    fovea = central
    fovea_k = 8
    hidden_dim = 8

    [learning]
    learning_rate = 0.01
    tau_integral = 0.99
    seed = 0

    [saccade]
    omega_dt = 0.8
    gamma = 0.9
    tau_threshold = 0.05
    jitter_l = 1
    window_w = 3
    window_h = 3
    seed = 0

    [experiment]
    scenario = moving_texture(obj_w=16,obj_h=16)
    n_frames = 200
    frame_w = 64
    frame_h = 64
    n_trials = 100
    seed = 0
    disk_radius = 5

Every key is optional; defaults mirror the reference setup.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .entropy import EntropyConfig
from .errors import ConfigurationError
from .saccade import SaccadeConfig
from .topology import ModelConfig
from .unit import LearningConfig
from .vision import Scenario, parse_scenario


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=lambda: Scenario("moving_texture"))
    n_frames: int = 200
    frame_w: int = 64
    frame_h: int = 64
    n_trials: int = 100
    seed: int = 0
    disk_radius: int = 5
    progress_every: int = 100


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    saccade: SaccadeConfig = field(default_factory=SaccadeConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    @property
    def entropy(self) -> EntropyConfig:
        return EntropyConfig(disk_radius=self.experiment.disk_radius)


def _section(parser: configparser.ConfigParser, name: str) -> dict[str, str]:
    return dict(parser[name]) if parser.has_section(name) else {}


def _take(sec: dict[str, str], key: str, conv, default):
    if key not in sec:
        return default
    raw = sec.pop(key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as e:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from e


def _grids(raw: str) -> tuple[int, ...]:
    return tuple(int(g) for g in raw.replace(" ", "").split(","))


def load_run_config(path: str | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path}")

    m = _section(parser, "model")
    model = ModelConfig(
        view_w=_take(m, "view_w", int, 32),
        view_h=_take(m, "view_h", int, 32),
        level_grids=_take(m, "level_grids", _grids, (16, 8, 4, 3, 2, 1)),
        fovea=_take(m, "fovea", str, "none"),
        fovea_k=_take(m, "fovea_k", int, 8),
        hidden_dim=_take(m, "hidden_dim", int, 8),
    )
    _reject_unknown("model", m)

    l = _section(parser, "learning")
    learning = LearningConfig(
        learning_rate=_take(l, "learning_rate", float, 0.01),
        tau_integral=_take(l, "tau_integral", float, 0.99),
        seed=_take(l, "seed", int, 0),
    )
    _reject_unknown("learning", l)

    s = _section(parser, "saccade")
    sac = SaccadeConfig(
        omega_dt=_take(s, "omega_dt", float, 0.8),
        gamma=_take(s, "gamma", float, 0.9),
        tau_threshold=_take(s, "tau_threshold", float, 0.05),
        jitter_l=_take(s, "jitter_l", int, 1),
        window_w=_take(s, "window_w", int, 3),
        window_h=_take(s, "window_h", int, 3),
        view_w=model.view_w,
        view_h=model.view_h,
        seed=_take(s, "seed", int, 0),
    )
    _reject_unknown("saccade", s)

    e = _section(parser, "experiment")
    experiment = ExperimentConfig(
        scenario=_take(e, "scenario", parse_scenario, Scenario("moving_texture")),
        n_frames=_take(e, "n_frames", int, 200),
        frame_w=_take(e, "frame_w", int, 64),
        frame_h=_take(e, "frame_h", int, 64),
        n_trials=_take(e, "n_trials", int, 100),
        seed=_take(e, "seed", int, 0),
        disk_radius=_take(e, "disk_radius", int, 5),
        progress_every=_take(e, "progress_every", int, 100),
    )
    _reject_unknown("experiment", e)

    return RunConfig(model=model, learning=learning, saccade=sac, experiment=experiment)


def _reject_unknown(section: str, leftovers: dict[str, str]) -> None:
    if leftovers:
        raise ConfigurationError(
            f"unknown keys in [{section}]: {', '.join(sorted(leftovers))}"
        )
