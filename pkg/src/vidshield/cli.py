"""Command-line pipeline: generate, protect, evaluate, compare.

Configuration precedence, lowest to highest: built-in defaults, the
PRIME_SEED environment variable (seed only), a key=value config file
given with --config, explicit flags. Every subcommand is a pure function
of its resolved settings, so identical invocations produce byte-identical
outputs.

Exit codes: 0 success, 2 usage or path errors, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from .codec import CodecConfig, ContainerError, Video, compress_video, read_frames, write_frames
from .embedder import ImageEmbedder
from .engine import (MODES, OptimizationDivergedError, ProtectionConfig, protect_video)
from .metrics import evaluate, surrogate_edit
from .surrogate import SurrogateLDM
from .synthetic import gen_target_queue, gen_video
from .targets import EmptyQueueError, TargetQueue

DEFAULT_QUEUE_SIZE = 8

# Component seeds are derived from the master seed with fixed offsets.
EMBEDDER_SEED_OFFSET = 1
QUEUE_SEED_OFFSET = 2
EDIT_SEED_OFFSET = 3
CODEC_SEED_OFFSET = 4


class UsageError(ValueError):
    """Bad invocation: unknown config keys, invalid values, missing paths."""


@dataclass
class Settings:
    seed: int = 0
    epsilon: int = 8
    steps: int = 100
    diffusion_steps: int = 2
    quant_step: int = 2
    mode: str = "prime"
    codec_quality: int = 75
    codec_mode: str = "constant_q"
    target_dir: str | None = None

    _INT_KEYS = ("seed", "epsilon", "steps", "diffusion_steps", "quant_step",
                 "codec_quality")

    def apply(self, key: str, value) -> None:
        if key not in {f.name for f in fields(self)}:
            raise UsageError(f"unknown configuration key {key!r}")
        if key in self._INT_KEYS:
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise UsageError(f"configuration key {key!r} needs an integer, "
                                 f"got {value!r}") from None
        setattr(self, key, value)

    def protection_config(self) -> ProtectionConfig:
        try:
            return ProtectionConfig(epsilon=self.epsilon, steps=self.steps,
                                    diffusion_steps=self.diffusion_steps,
                                    quant_step=self.quant_step, mode=self.mode)
        except ValueError as err:
            raise UsageError(str(err)) from None

    def codec_config(self) -> CodecConfig:
        try:
            return CodecConfig(quality=self.codec_quality, rate_mode=self.codec_mode,
                               variable_seed=self.seed + CODEC_SEED_OFFSET)
        except ValueError as err:
            raise UsageError(str(err)) from None


def parse_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; blank lines ignored."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def resolve_settings(args) -> Settings:
    settings = Settings()
    env_seed = os.environ.get("PRIME_SEED")
    if env_seed is not None:
        settings.apply("seed", env_seed)
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            settings.apply(key, value)
    for key in (f.name for f in fields(Settings)):
        flag = getattr(args, key, None)
        if flag is not None:
            settings.apply(key, flag)
    return settings


def _read_video(path) -> Video:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input path does not exist: {p}")
    return read_frames(p)


def _build_pipeline(settings: Settings, video: Video):
    model = SurrogateLDM(seed=settings.seed, image_size=(video.height, video.width))
    embedder = ImageEmbedder(seed=settings.seed + EMBEDDER_SEED_OFFSET)
    if settings.target_dir:
        queue = TargetQueue.from_directory(settings.target_dir, embedder)
        for img in queue.images:
            if (img.height, img.width) != (video.height, video.width):
                raise UsageError(
                    f"target image size {img.width}x{img.height} does not match "
                    f"video size {video.width}x{video.height}")
    else:
        queue = TargetQueue(
            gen_target_queue(settings.seed + QUEUE_SEED_OFFSET, DEFAULT_QUEUE_SIZE,
                             video.width, video.height), embedder)
    return model, embedder, queue


def _result_log_line(i: int, res) -> str:
    record = {
        "frame": i,
        "target_index": res.target_index,
        "steps_used": res.steps_used,
        "final_loss": res.final_loss,
        "stop_reason": res.stop_reason,
        "c_trace": res.c_trace,
    }
    return json.dumps(record, sort_keys=True)


def cmd_protect(args) -> int:
    settings = resolve_settings(args)
    cfg = settings.protection_config()
    video = _read_video(args.input)
    model, _, queue = _build_pipeline(settings, video)

    results = protect_video(video, queue, model, cfg)

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_frames(Video([r.protected_frame for r in results], video.fps), out)
    log_path = Path(str(out) + ".log.jsonl")
    log_path.write_text("".join(_result_log_line(i, r) + "\n"
                                for i, r in enumerate(results)))
    print(f"protected {len(results)} frames -> {out}")
    print(f"log -> {log_path}")
    return 0


def cmd_evaluate(args) -> int:
    settings = resolve_settings(args)
    video_a = _read_video(args.protected)
    video_b = _read_video(args.clean)
    if (video_a.width, video_a.height) != (video_b.width, video_b.height):
        raise UsageError("videos have different dimensions")
    embedder = ImageEmbedder(seed=settings.seed + EMBEDDER_SEED_OFFSET)

    if args.edit:
        model = SurrogateLDM(seed=settings.seed,
                             image_size=(video_a.height, video_a.width))
        schedule = settings.protection_config().schedule()
        strength = args.edit_strength
        if strength is None:
            strength = schedule.steps
        edit_seed = settings.seed + EDIT_SEED_OFFSET
        video_a = surrogate_edit(video_a, model, schedule, strength, seed=edit_seed)
        video_b = surrogate_edit(video_b, model, schedule, strength, seed=edit_seed)

    report = evaluate(video_a, video_b, embedder)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(str(out) + ".txt").write_text(report.to_text())
    Path(str(out) + ".csv").write_text(report.to_csv())
    sys.stdout.write(report.to_text())
    return 0


def cmd_compare(args) -> int:
    settings = resolve_settings(args)
    video = _read_video(args.input)
    model, embedder, queue = _build_pipeline(settings, video)
    codec_cfg = settings.codec_config()
    schedule = settings.protection_config().schedule()
    edit_seed = settings.seed + EDIT_SEED_OFFSET

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    clean_edit = surrogate_edit(video, model, schedule, schedule.steps, seed=edit_seed)

    rows = []
    for mode in MODES:
        cfg = settings.protection_config()
        cfg.mode = mode
        results = protect_video(video, queue, model, cfg)
        protected = Video([r.protected_frame for r in results], video.fps)

        write_frames(protected, out_dir / f"protected_{mode}.rvf")
        (out_dir / f"log_{mode}.jsonl").write_text(
            "".join(_result_log_line(i, r) + "\n" for i, r in enumerate(results)))

        _, bitrate = compress_video(protected, codec_cfg)
        prot_edit = surrogate_edit(protected, model, schedule, schedule.steps,
                                   seed=edit_seed)
        report = evaluate(prot_edit, clean_edit, embedder)
        rows.append({
            "mode": mode,
            "total_steps": sum(r.steps_used for r in results),
            "converged": sum(r.stop_reason == "converged" for r in results),
            "bitrate_proxy": bitrate,
            "mean_psnr_db": report.mean_psnr,
            "mean_ssim": report.mean_ssim,
            "embed_sim": report.embed_sim,
        })

    header = (f"{'mode':<22}{'total_steps':>12}{'converged':>10}{'bitrate_proxy':>15}"
              f"{'mean_psnr_db':>14}{'mean_ssim':>11}{'embed_sim':>11}")
    lines = [header]
    for r in rows:
        lines.append(f"{r['mode']:<22}{r['total_steps']:>12}{r['converged']:>10}"
                     f"{r['bitrate_proxy']:>15.3f}{r['mean_psnr_db']:>14.4f}"
                     f"{r['mean_ssim']:>11.6f}{r['embed_sim']:>11.6f}")
    table = "\n".join(lines) + "\n"
    (out_dir / "compare.txt").write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_gen_synthetic(args) -> int:
    settings = resolve_settings(args)
    try:
        video = gen_video(settings.seed, args.frames, args.width, args.height,
                          fps=Fraction(args.fps))
    except ValueError as err:
        raise UsageError(str(err)) from None
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_frames(video, out)
    print(f"wrote {args.frames} frames ({args.width}x{args.height}) -> {out}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (default: PRIME_SEED env var or 0)")
    parser.add_argument("--config", default=None, help="key=value config file")


def _add_protection_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=int, default=None,
                        help="l-infinity budget in pixel units (default 8)")
    parser.add_argument("--steps", type=int, default=None,
                        help="max optimization steps per frame (default 100)")
    parser.add_argument("--diffusion-steps", dest="diffusion_steps", type=int,
                        default=None, help="DDIM steps each direction (default 2)")
    parser.add_argument("--quant-step", dest="quant_step", type=int, default=None,
                        help="perturbation quantization granularity (default 2)")
    parser.add_argument("--target-dir", dest="target_dir", default=None,
                        help="directory of .rvf files to use as the target queue")


def _add_codec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--codec-quality", dest="codec_quality", type=int,
                        default=None, help="codec quality 0-100 (default 75)")
    parser.add_argument("--codec-mode", dest="codec_mode", default=None,
                        choices=("constant_q", "variable"),
                        help="rate mode (default constant_q)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidshield",
        description="Protect videos against diffusion-based editing and "
                    "measure the protection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protect", help="perturb every frame of a video")
    p.add_argument("--input", required=True, help="input .rvf video")
    p.add_argument("--output", required=True, help="output .rvf path")
    p.add_argument("--mode", default=None, choices=MODES)
    _add_protection_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("evaluate", help="score two videos against each other")
    p.add_argument("protected", help="protected (or protected-edit) video")
    p.add_argument("clean", help="clean (or clean-edit) reference video")
    p.add_argument("--output", required=True, help="report path prefix")
    p.add_argument("--edit", action="store_true",
                   help="surrogate-edit both inputs before scoring")
    p.add_argument("--edit-strength", dest="edit_strength", type=int, default=None,
                   help="noising steps for --edit (default: diffusion steps)")
    p.add_argument("--diffusion-steps", dest="diffusion_steps", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run all protection modes side by side")
    p.add_argument("--input", required=True, help="input .rvf video")
    p.add_argument("--output", required=True, help="output directory")
    _add_protection_flags(p)
    _add_codec_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic video")
    p.add_argument("--output", required=True, help="output .rvf path")
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--fps", type=int, default=24)
    _add_common(p)
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OptimizationDivergedError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (UsageError, ContainerError, EmptyQueueError, FileNotFoundError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
