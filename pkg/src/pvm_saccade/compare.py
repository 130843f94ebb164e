"""Trial aggregation: run saccade trials per model and compare the time-
averaged view entropy across model variants.

Emits three CSVs sufficient to redraw the distribution comparison
externally: per-trial values, per-model summary stats, and a binned density
table. All outputs are deterministic given the models, frames and seeds.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import engine
from .entropy import EntropyConfig, local_entropy_map, view_entropy
from .errors import ConfigurationError
from .saccade import SaccadeConfig, run_saccade_loop

N_DENSITY_BINS = 20


@dataclass(frozen=True)
class TrialSummary:
    model_tag: str
    trial_seed: int
    mean_view_entropy: float


@dataclass(frozen=True)
class ModelStats:
    model_tag: str
    mean: float
    median: float
    q1: float
    q3: float
    n: int


def entropy_maps_for(frames: np.ndarray, config: EntropyConfig) -> np.ndarray:
    """Precomputed per-frame entropy maps, shape [n, h, w]."""
    return np.stack([local_entropy_map(f, config) for f in frames])


def run_trial(
    model: "engine.ModelState",
    frames: np.ndarray,
    maps: np.ndarray,
    sac: SaccadeConfig,
    seed: int,
) -> float:
    """One frozen-mode trial: random start, full pass, mean view entropy."""
    trial_model = model.copy(fresh_states=True, share_weights=True)
    trial_model.mode = engine.MODE_FROZEN
    rng = np.random.default_rng(seed)
    record = run_saccade_loop(trial_model, frames, sac, rng=rng)
    vals = [
        view_entropy(maps[row[0]], row[1], row[2], sac.view_w, sac.view_h)
        for row in record.rows
    ]
    return float(np.mean(vals))


def run_comparison(
    models: dict[str, "engine.ModelState"],
    frames: np.ndarray,
    sac: SaccadeConfig,
    seeds: list[int],
    entropy_config: EntropyConfig | None = None,
    n_threads: int = 1,
) -> tuple[list[TrialSummary], list[ModelStats], list[tuple[str, float, float, int]]]:
    """Run every (model, seed) trial; returns (trials, stats, density rows)."""
    for tag, model in models.items():
        if (model.topology.view_w, model.topology.view_h) != (sac.view_w, sac.view_h):
            raise ConfigurationError(
                f"model {tag!r} view {model.topology.view_w}x{model.topology.view_h} "
                f"!= configured view {sac.view_w}x{sac.view_h}"
            )
    if not seeds:
        return [], [], []
    entropy_config = entropy_config or EntropyConfig()
    maps = entropy_maps_for(frames, entropy_config)

    trials: list[TrialSummary] = []
    jobs = [(tag, seed) for tag in models for seed in seeds]
    if n_threads <= 1:
        results = [run_trial(models[tag], frames, maps, sac, seed) for tag, seed in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(
                lambda job: run_trial(models[job[0]], frames, maps, sac, job[1]), jobs
            ))
    for (tag, seed), val in zip(jobs, results):
        trials.append(TrialSummary(tag, seed, val))

    stats = []
    for tag in models:
        vals = np.array([t.mean_view_entropy for t in trials if t.model_tag == tag])
        stats.append(ModelStats(
            tag,
            mean=float(np.mean(vals)),
            median=float(np.median(vals)),
            q1=float(np.percentile(vals, 25)),
            q3=float(np.percentile(vals, 75)),
            n=len(vals),
        ))

    all_vals = np.array([t.mean_view_entropy for t in trials])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi <= lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, N_DENSITY_BINS + 1)
    density: list[tuple[str, float, float, int]] = []
    for tag in models:
        vals = np.array([t.mean_view_entropy for t in trials if t.model_tag == tag])
        counts, _ = np.histogram(vals, bins=edges)
        for b in range(N_DENSITY_BINS):
            density.append((tag, float(edges[b]), float(edges[b + 1]), int(counts[b])))
    return trials, stats, density


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_comparison_csvs(
    out_dir: str,
    trials: list[TrialSummary],
    stats: list[ModelStats],
    density: list[tuple[str, float, float, int]],
) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "seed", "mean_view_entropy"])
        for t in trials:
            w.writerow([t.model_tag, t.trial_seed, _fmt(t.mean_view_entropy)])
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mean", "median", "q1", "q3", "n"])
        for s in stats:
            w.writerow([s.model_tag, _fmt(s.mean), _fmt(s.median),
                        _fmt(s.q1), _fmt(s.q3), s.n])
    with open(os.path.join(out_dir, "density.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "bin_lo", "bin_hi", "count"])
        for tag, lo, hi, count in density:
            w.writerow([tag, _fmt(lo), _fmt(hi), count])
