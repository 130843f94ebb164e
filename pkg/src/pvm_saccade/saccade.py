"""Error-driven view movement: window scan, fixation gating, oscillator.

The controller sums squared prediction error over sliding windows of the
view, retargets the fixation point at the window with the largest total when
that total beats a slow moving average of past maxima, and moves the view
origin with damped-harmonic-oscillator dynamics plus integer fixational
jitter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .backend import window_sum_argmax
from .errors import ConfigurationError, InputDataError


@dataclass(frozen=True)
class SaccadeConfig:
    omega_dt: float = 0.8
    gamma: float = 0.9
    tau_threshold: float = 0.05
    jitter_l: int = 1
    window_w: int = 3
    window_h: int = 3
    view_w: int = 32
    view_h: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.omega_dt <= 0:
            raise ConfigurationError("omega_dt must be positive")
        if not 0 < self.gamma < 1:
            raise ConfigurationError("gamma must be in (0, 1) (underdamped)")
        if not 0 <= self.tau_threshold <= 1:
            raise ConfigurationError("tau_threshold must be in [0, 1]")
        if self.jitter_l < 0:
            raise ConfigurationError("jitter_l must be >= 0")
        if self.window_w > self.view_w or self.window_h > self.view_h:
            raise ConfigurationError("window larger than the view")


@dataclass
class ViewState:
    x_t: int
    y_t: int
    x_prev: int
    y_prev: int
    x_fix: int
    y_fix: int
    frame_w: int
    frame_h: int
    threshold: float = 0.0

    @classmethod
    def at(cls, x: int, y: int, frame_w: int, frame_h: int) -> "ViewState":
        return cls(x, y, x, y, x, y, frame_w, frame_h)


def window_error_map(error_map: np.ndarray, config: SaccadeConfig) -> tuple[float, tuple[int, int]]:
    """Max channel-summed window total and its top-left position (y-first ties win)."""
    h, w = error_map.shape[0], error_map.shape[1]
    if config.window_h > h or config.window_w > w:
        raise ConfigurationError("window larger than the error map")
    best, y, x = window_sum_argmax(
        np.ascontiguousarray(error_map, dtype=np.float64), config.window_h, config.window_w
    )
    return float(best), (int(y), int(x))


def update_fixation(
    view: ViewState,
    max_value: float,
    argmax: tuple[int, int],
    config: SaccadeConfig,
) -> None:
    """Retarget the fixation when the max window error beats the threshold.

    The fixation point is the frame-coordinate view origin that would center
    the view on the winning window; the threshold moving average is updated
    every frame regardless.
    """
    if max_value > view.threshold:
        wy, wx = argmax
        cx = view.x_t + wx + config.window_w // 2
        cy = view.y_t + wy + config.window_h // 2
        view.x_fix = _clamp(cx - config.view_w // 2, 0, view.frame_w - config.view_w)
        view.y_fix = _clamp(cy - config.view_h // 2, 0, view.frame_h - config.view_h)
    tau = config.tau_threshold
    view.threshold = (1.0 - tau) * view.threshold + tau * max_value


def _clamp(v: int, lo: int, hi: int) -> int:
    return lo if v < lo else hi if v > hi else v


def _round_half_away(v: float) -> int:
    return math.floor(v + 0.5) if v >= 0 else math.ceil(v - 0.5)


def _oscillate(cur: int, prev: int, fix: int, a: float, gamma: float) -> int:
    num = (2.0 - a * a) * cur + (gamma * a - 1.0) * prev + a * a * fix
    return _round_half_away(num / (1.0 + gamma * a))


def oscillator_step(view: ViewState, config: SaccadeConfig, rng: np.random.Generator) -> None:
    """Advance the view origin one step toward the fixation point.

    Damped-harmonic recurrence applied to x and y independently, rounded
    half-away-from-zero, plus uniform integer jitter in [-l, l], clamped to
    the legal origin range.
    """
    a, g, l = config.omega_dt, config.gamma, config.jitter_l
    nx = _oscillate(view.x_t, view.x_prev, view.x_fix, a, g)
    ny = _oscillate(view.y_t, view.y_prev, view.y_fix, a, g)
    if l > 0:
        nx += int(rng.integers(-l, l + 1))
        ny += int(rng.integers(-l, l + 1))
    view.x_prev, view.y_prev = view.x_t, view.y_t
    view.x_t = _clamp(nx, 0, view.frame_w - config.view_w)
    view.y_t = _clamp(ny, 0, view.frame_h - config.view_h)


@dataclass
class TrialRecord:
    """Per-frame log of one saccade run."""

    COLUMNS = ("frame", "x", "y", "x_fix", "y_fix", "max_err", "threshold")

    rows: list[tuple[int, int, int, int, int, float, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_saccade_loop(
    model: "engine.ModelState",
    frames: np.ndarray,
    config: SaccadeConfig,
    *,
    n_frames: int | None = None,
    rng: np.random.Generator | None = None,
    initial_origin: tuple[int, int] | None = None,
    static_view: bool = False,
    n_threads: int | None = None,
    on_frame=None,
) -> TrialRecord:
    """Run the full loop: crop, predict, scan, retarget, move; one row per frame.

    ``frames`` is an array [n, h, w, 3]; with ``n_frames`` set the sequence
    is cycled. ``initial_origin`` defaults to a uniformly random legal origin
    drawn from ``rng``. ``static_view`` disables the oscillator (the view
    stays put), used for fixed-window training. ``on_frame(idx, view, out)``
    is an optional per-frame hook for overlays and progress dumps.
    """
    frames = np.asarray(frames)
    record = TrialRecord()
    if n_frames is None:
        n_frames = len(frames)
    if n_frames == 0 or len(frames) == 0:
        return record
    frame_h, frame_w = frames.shape[1], frames.shape[2]
    if frame_w < config.view_w or frame_h < config.view_h:
        raise InputDataError(
            f"frames {frame_w}x{frame_h} smaller than the view "
            f"{config.view_w}x{config.view_h}"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if initial_origin is None:
        x0 = int(rng.integers(0, frame_w - config.view_w + 1))
        y0 = int(rng.integers(0, frame_h - config.view_h + 1))
    else:
        x0, y0 = initial_origin
    view = ViewState.at(x0, y0, frame_w, frame_h)

    for idx in range(n_frames):
        frame = frames[idx % len(frames)]
        sub = frame[view.y_t:view.y_t + config.view_h,
                    view.x_t:view.x_t + config.view_w, :]
        out = engine.step(model, sub, n_threads=n_threads)
        max_value, argmax = window_error_map(out.error_map, config)
        x_used, y_used = view.x_t, view.y_t
        update_fixation(view, max_value, argmax, config)
        if not static_view:
            oscillator_step(view, config, rng)
        record.rows.append(
            (idx, x_used, y_used, view.x_fix, view.y_fix, max_value, view.threshold)
        )
        if on_frame is not None:
            on_frame(idx, view, out)
    return record
