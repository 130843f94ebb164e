"""Benchmark the compiled kernel against the pure-python fallback.

Usage::

    python3 benchmarks/bench_step.py [n_steps]

Steps the default 32x32 foveated model with each available backend and
reports per-frame times, plus the thread-count scaling of the compiled
engine.
"""

import sys
import time

import numpy as np

from pvm_saccade import engine
from pvm_saccade.backend import get_backend
from pvm_saccade.topology import ModelConfig, build_model_kind
from pvm_saccade.unit import LearningConfig


def bench(backend_name: str, n_steps: int, n_threads: int = 1) -> float:
    import pvm_saccade.engine as eng
    import pvm_saccade.backend as bk

    saved = bk.unit_step
    bk.unit_step = get_backend(backend_name).unit_step
    try:
        model = eng.new_model(
            build_model_kind(ModelConfig(fovea="central"), "foveated"),
            LearningConfig(seed=0),
        )
        rng = np.random.default_rng(0)
        frames = rng.uniform(0, 1, size=(8, 32, 32, 3))
        eng.step(model, frames[0], n_threads=n_threads)  # warm up
        t0 = time.perf_counter()
        for i in range(n_steps):
            eng.step(model, frames[i % 8], n_threads=n_threads)
        return (time.perf_counter() - t0) / n_steps
    finally:
        bk.unit_step = saved


def main() -> None:
    n_steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    names = ["python"]
    try:
        get_backend("compiled")
        names.append("compiled")
    except ImportError:
        print("compiled backend not available; benchmarking fallback only")

    results = {}
    for name in names:
        steps = n_steps if name == "compiled" else max(10, n_steps // 10)
        dt = bench(name, steps)
        results[name] = dt
        print(f"{name:9s} 1 thread   {dt * 1e3:8.3f} ms/frame")
    if "compiled" in results:
        for k in (2, 4, 8):
            dt = bench("compiled", n_steps, n_threads=k)
            print(f"compiled  {k} threads  {dt * 1e3:8.3f} ms/frame")
        ratio = results["python"] / results["compiled"]
        print(f"speedup (1 thread): {ratio:.1f}x")


if __name__ == "__main__":
    main()
