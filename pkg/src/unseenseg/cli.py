"""Command-line entry point: ``unseenseg <subcommand> ...``.

Exit status is 0 on success, 1 on input or format errors and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import __version__
from .bundle import load_bundle
from .config import ConfigError, load_config
from .harness import ScenarioParams, format_report, video_report, write_scenario
from .mining import write_selection
from .motion import motion_saliency, video_saliency
from .pipeline import PipelineConfig, initial_weights, mine, run, write_outputs
from .tensorio import FormatError, load_flo, save_tensor
from .transfer import DivergenceError, load_gallery, load_weights, save_weights


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return h, w


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return replace(cfg, threads=args.threads)


def cmd_saliency(args) -> None:
    sal = motion_saliency(load_flo(args.flow))
    save_tensor(args.out, sal)


def cmd_mine(args) -> None:
    cfg = _config(args)
    bundle = load_bundle(args.bundle)
    theta = load_weights(args.weights)
    saliency = video_saliency(bundle.flows, cfg.mbd_max_passes, cfg.mbd_tol)
    _, _, sel = mine(bundle, theta, saliency, cfg)
    with open(args.out, "w") as f:
        write_selection(sel, f)


def cmd_init_weights(args) -> None:
    bundle = load_bundle(args.bundle)
    gallery = load_gallery(args.gallery)
    cfg = PipelineConfig(threads=args.threads)
    saliency = video_saliency(bundle.flows, cfg.mbd_max_passes, cfg.mbd_tol)
    save_weights(args.out, initial_weights(bundle, gallery, saliency, cfg))


def cmd_run(args) -> None:
    cfg = _config(args)
    bundle = load_bundle(args.bundle)
    gallery = load_gallery(args.gallery) if args.gallery else None
    result = run(bundle, gallery=gallery, category=args.category, cfg=cfg)
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    write_outputs(result, args.out)


def cmd_eval(args) -> None:
    scores, mean = video_report(args.pred, args.gt)
    sys.stdout.write(format_report(scores, mean))


def cmd_synth(args) -> None:
    params = ScenarioParams()
    over = {"frames": args.frames, "distractors": args.distractors}
    if args.size:
        h, w = args.size
        over.update(height=h, width=w, object_size=(max(2, min(16, h // 3)), max(2, min(20, w // 3))))
    if args.channels is not None:
        c = args.channels
        if c < 2:
            raise ValueError("need at least two channels")
        over.update(channels=c, dsim=max(16, c + 1), dmine=max(12, c + 1))
        if c < 4:
            over["mix_categories"] = (0, 1)
    write_scenario(args.out, args.seed, replace(params, **over))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unseenseg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-frame work")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("saliency", help="motion saliency of one .flo file")
    s.add_argument("--flow", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_saliency)

    s = sub.add_parser("mine", help="select pseudo-label proposals under given weights")
    s.add_argument("--bundle", required=True)
    s.add_argument("--config")
    s.add_argument("--weights", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("init-weights", help="similarity-based transfer weights")
    s.add_argument("--bundle", required=True)
    s.add_argument("--gallery", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_init_weights)

    s = sub.add_parser("run", help="full self-learning pipeline")
    s.add_argument("--bundle", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--gallery")
    g.add_argument("--category", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", help="per-frame IoU of predicted vs ground-truth masks")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic scenario (bundle/ and gallery/)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, default=8)
    s.add_argument("--size", type=_size)
    s.add_argument("--channels", type=int)
    s.add_argument("--distractors", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FormatError, ConfigError, DivergenceError, ValueError, IndexError, OSError) as exc:
        print(f"unseenseg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
