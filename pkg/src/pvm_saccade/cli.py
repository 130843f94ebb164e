"""Command-line entry point.

Subcommands::

    build     construct a model variant and write a fresh checkpoint
    train     run the training loop over footage (saccading or fixed view)
    run       frozen-mode saccade run; --trace repeats one static frame
    compare   run base/foveated/uhr trials and emit the entropy CSVs
    topology  dump the hierarchy wiring as a readable listing

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric fault.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import engine, topology, vision
from .backend import BACKEND_NAME
from .compare import run_comparison, write_comparison_csvs
from .config import RunConfig, load_run_config
from .errors import ConfigurationError, InputDataError, NumericFault
from .saccade import run_saccade_loop
from .topology import MODEL_KINDS, build_model_kind, dump_adjacency
from .vision import FrameSequence, load_sequence, synth_video


def _resolve_frames(args, cfg: RunConfig) -> FrameSequence:
    if getattr(args, "frames", None):
        return load_sequence(args.frames)
    e = cfg.experiment
    return synth_video(e.scenario, e.seed, e.n_frames, e.frame_w, e.frame_h)


def cmd_build(args) -> int:
    cfg = load_run_config(args.config)
    model_cfg = cfg.model
    topo = build_model_kind(model_cfg, args.model)
    model = engine.new_model(topo, cfg.learning)
    os.makedirs(os.path.dirname(os.path.abspath(args.checkpoint)), exist_ok=True)
    engine.save_checkpoint(model, args.checkpoint)
    print(f"wrote {args.checkpoint}: {args.model} model, "
          f"{len(topo.levels[0])} input units, {topo.n_units} total")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    model = engine.load_checkpoint(args.checkpoint)
    os.makedirs(args.out, exist_ok=True)
    out_ckpt = os.path.join(args.out, "checkpoint.pvms")
    if args.n_frames == 0:
        engine.save_checkpoint(model, out_ckpt)
        print(f"wrote {out_ckpt} (no training requested)")
        return 0
    frames = _resolve_frames(args, cfg)
    model.mode = engine.MODE_TRAINING
    sac = cfg.saccade
    progress_path = os.path.join(args.out, "progress.csv")
    every = cfg.experiment.progress_every
    with open(progress_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "mean_input_error"])

        def on_frame(idx, view, out):
            if idx % every == 0:
                writer.writerow([idx, repr(model.last_level_errors[0])])

        run_saccade_loop(
            model, frames.frames, sac,
            n_frames=args.n_frames,
            rng=np.random.default_rng(args.seed if args.seed is not None else sac.seed),
            static_view=args.static_view,
            initial_origin=_center_origin(frames, sac) if args.static_view else None,
            on_frame=on_frame,
        )
    engine.save_checkpoint(model, out_ckpt)
    print(f"trained {args.n_frames} frames ({BACKEND_NAME} backend); wrote {out_ckpt}")
    return 0


def _center_origin(frames: FrameSequence, sac) -> tuple[int, int]:
    return ((frames.frame_w - sac.view_w) // 2, (frames.frame_h - sac.view_h) // 2)


def cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    model = engine.load_checkpoint(args.checkpoint)
    model.mode = engine.MODE_FROZEN
    sac = cfg.saccade
    frames = _resolve_frames(args, cfg)
    os.makedirs(args.out, exist_ok=True)
    if args.trace:
        seq = np.repeat(frames.frames[:1], args.n_frames or 100, axis=0)
        initial = _center_origin(frames, sac)
    else:
        seq = frames.frames
        initial = None
    rng = np.random.default_rng(args.seed if args.seed is not None else sac.seed)
    record = run_saccade_loop(
        model, seq, sac,
        n_frames=args.n_frames if args.n_frames else None,
        rng=rng, initial_origin=initial,
    )
    csv_path = os.path.join(args.out, "trace.csv" if args.trace else "trial.csv")
    record.write_csv(csv_path)
    if args.overlays:
        for row in record.rows:
            frame = seq[row[0] % len(seq)]
            over = vision.draw_view_rect(frame, row[1], row[2], sac.view_w, sac.view_h)
            vision.write_png(over, os.path.join(args.out, f"overlay_{row[0]:05d}.png"))
    print(f"wrote {csv_path} ({len(record)} frames)")
    return 0


def cmd_compare(args) -> int:
    cfg = load_run_config(args.config)
    if len(args.checkpoint) != 3:
        raise ConfigurationError(
            "compare needs exactly three --checkpoint flags (base, foveated, uhr order)"
        )
    models = {}
    for tag, path in zip(MODEL_KINDS, args.checkpoint):
        m = engine.load_checkpoint(path)
        m.mode = engine.MODE_FROZEN
        models[tag] = m
    frames = _resolve_frames(args, cfg)
    sac = cfg.saccade
    n_trials = args.n_trials if args.n_trials is not None else cfg.experiment.n_trials
    base_seed = args.seed if args.seed is not None else cfg.experiment.seed
    seeds = [base_seed + i for i in range(n_trials)]
    n_threads = engine.default_threads()
    trials, stats, density = run_comparison(
        models, frames.frames, sac, seeds, cfg.entropy, n_threads=n_threads
    )
    os.makedirs(args.out, exist_ok=True)
    write_comparison_csvs(args.out, trials, stats, density)
    for s in stats:
        print(f"{s.model_tag}: mean={s.mean:.4f} median={s.median:.4f} "
              f"q1={s.q1:.4f} q3={s.q3:.4f} n={s.n}")
    return 0


def cmd_topology(args) -> int:
    if args.checkpoint:
        topo = engine.load_checkpoint(args.checkpoint).topology
    else:
        cfg = load_run_config(args.config)
        topo = build_model_kind(cfg.model, args.model)
    print(dump_adjacency(topo))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvm-saccade", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)

    def common(sp, frames=True):
        sp.add_argument("--config", default=None, help="INI run configuration")
        if frames:
            sp.add_argument("--frames", default=None,
                            help="frame directory or RGB8 file (default: config scenario)")
        sp.add_argument("--seed", type=int, default=None)

    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="construct a model and write a checkpoint")
    common(sp, frames=False)
    sp.add_argument("--model", choices=MODEL_KINDS, required=True)
    sp.add_argument("--checkpoint", required=True, help="output checkpoint path")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("train", help="train a checkpointed model on footage")
    common(sp)
    sp.add_argument("--checkpoint", required=True, help="input checkpoint")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--n-frames", type=int, required=True)
    sp.add_argument("--static-view", action="store_true",
                    help="train on a fixed centered window instead of saccading")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("run", help="frozen-mode saccade run")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--n-frames", type=int, default=None)
    sp.add_argument("--trace", action="store_true",
                    help="repeat the first frame and emit the view trajectory")
    sp.add_argument("--overlays", action="store_true",
                    help="write per-frame PNGs with the view rectangle drawn")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="base/foveated/uhr entropy comparison")
    common(sp)
    sp.add_argument("--checkpoint", action="append", required=True,
                    help="three times, in base/foveated/uhr order")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--n-trials", type=int, default=None)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("topology", help="dump hierarchy wiring")
    common(sp, frames=False)
    sp.add_argument("--model", choices=MODEL_KINDS, default="base")
    sp.add_argument("--checkpoint", default=None)
    sp.set_defaults(func=cmd_topology)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InputDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericFault as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
