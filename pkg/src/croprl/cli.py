"""Command-line interface.

Subcommands: train, crop, eval, bench.  Flags override values from an
optional plain ``key = value`` config file.  Exit codes: 0 on success, 2 for
configuration or input errors, 3 when training aborts on a non-finite loss,
4 for checkpoint/build mismatches.  The A2RL_LOG environment variable
selects log verbosity (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from .errors import CheckpointMismatchError, ConfigError, DivergenceError
from .evaluation import (
    GRID_PRESETS,
    agent_crop,
    bench_methods,
    evaluate_dataset,
    format_bench,
    format_report,
    load_annotations,
)
from .fileio import atomic_write_text
from .images import ImageFormatError, load_image, save_image
from .policy import (
    COORDINATE_ENCODER,
    NetConfig,
    PIXEL_ENCODER,
    load_checkpoint,
    save_checkpoint,
)
from .rewards import RewardConfig
from .scoring import CompositionScorer
from .training import HiddenTargetTasks, ImageTasks, TrainerConfig, train
from .window import MAX_EPISODE_STEPS, to_pixel_rect

log = logging.getLogger("croprl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECKPOINT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="croprl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="plain key = value config file")
        p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train a cropping agent")
    common(p_train)
    p_train.add_argument("--scorer", choices=["target-iou", "composition"], default=None)
    p_train.add_argument("--encoder", choices=[PIXEL_ENCODER, COORDINATE_ENCODER], default=None)
    p_train.add_argument("--steps", type=int, default=None, help="environment steps to train")
    p_train.add_argument("--nr", type=float, default=None, help="aspect-ratio penalty (<= 0)")
    p_train.add_argument(
        "--no-recurrent", action="store_true", default=None, help="disable the recurrent cell"
    )
    p_train.add_argument("--gamma", type=float, default=None)
    p_train.add_argument("--beta", type=float, default=None)
    p_train.add_argument("--tmax", type=int, default=None, help="update period in steps")
    p_train.add_argument("--Tmax", type=int, default=None, help="episode step cap")
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--batch", type=int, default=None)
    p_train.add_argument("--images", default=None, help="directory of PGM/PPM training images")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--log", default=None, help="training log path (default: OUT.log)")

    p_crop = sub.add_parser("crop", help="crop one image with a trained agent")
    common(p_crop)
    p_crop.add_argument("checkpoint")
    p_crop.add_argument("image")
    p_crop.add_argument("--emit-image", default=None, help="also write the cropped raster here")

    p_eval = sub.add_parser("eval", help="score agent crops against annotations")
    common(p_eval)
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("--annotations", required=True)
    p_eval.add_argument("--images", default=".", help="directory annotation paths resolve against")

    p_bench = sub.add_parser("bench", help="efficiency comparison vs sliding-window grids")
    common(p_bench)
    p_bench.add_argument("checkpoint")
    p_bench.add_argument("--images", required=True)
    p_bench.add_argument("--grid", choices=sorted(GRID_PRESETS), default=None)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ConfigError(f"{path}: line {lineno}: expected key = value")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _merge(args: argparse.Namespace, key: str, file_values: dict[str, str], cast, default):
    """Flag value if given, else config-file value, else the default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_values:
        raw = file_values[key]
        try:
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key}: bad value {raw!r}") from exc
    return default


def _load_images_dir(path: str) -> list:
    if not os.path.isdir(path):
        raise ConfigError(f"images directory not found: {path}")
    names = sorted(
        n for n in os.listdir(path) if n.lower().endswith((".pgm", ".ppm"))
    )
    if not names:
        raise ConfigError(f"no PGM/PPM images in {path}")
    return [load_image(os.path.join(path, n)) for n in names]


def cmd_train(args: argparse.Namespace) -> int:
    file_values = read_config_file(args.config) if args.config else {}

    def opt(key, cast, default):
        return _merge(args, key, file_values, cast, default)

    scorer_kind = opt("scorer", str, "target-iou")
    encoder = opt("encoder", str, PIXEL_ENCODER)
    seed = opt("seed", int, 0)
    nr = opt("nr", float, -5.0)
    no_recurrent = bool(_merge(args, "no_recurrent", file_values, bool, False))
    try:
        reward_cfg = RewardConfig(aspect_penalty=nr)
        trainer_cfg = TrainerConfig(
            gamma=opt("gamma", float, 0.99),
            beta=opt("beta", float, 0.05),
            update_period=opt("tmax", int, 10),
            max_episode_steps=opt("Tmax", int, MAX_EPISODE_STEPS),
            learning_rate=opt("lr", float, 0.0005),
            batch_size=opt("batch", int, 32),
            seed=seed,
            total_steps=opt("steps", int, 20_000),
        )
        net_cfg = NetConfig(encoder=encoder, use_recurrent=not no_recurrent)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if scorer_kind == "composition":
        images_dir = opt("images", str, None)
        if images_dir is None:
            raise ConfigError("composition scorer needs --images DIR")
        tasks = ImageTasks(_load_images_dir(images_dir), CompositionScorer())
    else:
        tasks = HiddenTargetTasks(ar_bounds=(reward_cfg.ar_low, reward_cfg.ar_high))

    log.info("training: %s scorer, %s encoder, %d steps", scorer_kind, encoder, trainer_cfg.total_steps)
    log_path = args.log or f"{args.out}.log"
    net, records = train(trainer_cfg, tasks, net_cfg, reward_cfg, log_path=log_path)
    save_checkpoint(args.out, net, extra=_run_config_header(scorer_kind, trainer_cfg, reward_cfg))
    log.info("wrote checkpoint %s and log %s (%d records)", args.out, log_path, len(records))
    return EXIT_OK


def _run_config_header(scorer_kind: str, t: TrainerConfig, r: RewardConfig) -> dict:
    return {
        "scorer": scorer_kind,
        "nr": r.aspect_penalty,
        "step_penalty_coeff": r.step_penalty_coeff,
        "ar_low": r.ar_low,
        "ar_high": r.ar_high,
        "gamma": t.gamma,
        "beta": t.beta,
        "update_period": t.update_period,
        "max_episode_steps": t.max_episode_steps,
        "learning_rate": t.learning_rate,
        "batch_size": t.batch_size,
        "seed": t.seed,
        "total_steps": t.total_steps,
        "grad_clip": "none" if t.grad_clip is None else t.grad_clip,
        "step_size": t.step_size,
    }


def _inference_limits(header: dict[str, str]) -> tuple[int, float]:
    max_steps = int(header.get("max_episode_steps", MAX_EPISODE_STEPS))
    step_size = float(header.get("step_size", 0.05))
    return max_steps, step_size


def cmd_crop(args: argparse.Namespace) -> int:
    net, header = load_checkpoint(args.checkpoint)
    try:
        image = load_image(args.image)
    except ImageFormatError as exc:
        raise ConfigError(str(exc)) from exc
    max_steps, step_size = _inference_limits(header)
    window, steps = agent_crop(net, image, max_steps=max_steps, step=step_size)
    left, top, w, h = to_pixel_rect(window, image.dims)
    print(f"{left} {top} {w} {h}")
    print(f"steps: {steps}", file=sys.stderr)
    if args.emit_image:
        save_image(args.emit_image, image.crop((left, top, w, h)))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    net, header = load_checkpoint(args.checkpoint)
    records = load_annotations(args.annotations)
    paths = [
        p if os.path.isabs(p) else os.path.join(args.images, p) for p, _ in records
    ]
    missing = [p for p in paths if not os.path.isfile(p)]
    if missing:
        raise ConfigError(f"annotated image not found: {missing[0]}")
    n_annotations = {len(rects) for _, rects in records}
    if len(n_annotations) != 1:
        raise ConfigError("annotation records carry differing numbers of boxes")
    try:
        images = [load_image(p) for p in paths]
    except ImageFormatError as exc:
        raise ConfigError(str(exc)) from exc
    max_steps, step_size = _inference_limits(header)
    t0 = time.perf_counter()
    crops = []
    steps = []
    for image in images:
        window, n = agent_crop(net, image, max_steps=max_steps, step=step_size)
        crops.append(to_pixel_rect(window, image.dims))
        steps.append(n)
    elapsed = time.perf_counter() - t0
    report = evaluate_dataset(
        crops,
        [rects for _, rects in records],
        [img.dims for img in images],
        topk=(1,),
    )
    report.avg_steps = float(np.mean(steps))
    report.avg_scorer_calls = 0.0
    report.avg_seconds = elapsed / len(images)
    sys.stdout.write(format_report(report, include_topk=len(records[0][1]) > 1))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    net, header = load_checkpoint(args.checkpoint)
    images = _load_images_dir(args.images)
    presets = (
        {args.grid: GRID_PRESETS[args.grid]} if args.grid else dict(sorted(GRID_PRESETS.items()))
    )
    max_steps, _ = _inference_limits(header)
    rows = bench_methods(net, images, CompositionScorer, presets, max_steps=max_steps)
    sys.stdout.write(format_bench(rows))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("A2RL_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": cmd_train, "crop": cmd_crop, "eval": cmd_eval, "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckpointMismatchError as exc:
        print(f"checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
