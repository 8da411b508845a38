"""Command-line interface.

Exit codes: 0 success, 1 runtime failure (bad data, unreadable files,
mismatched checkpoints), 2 usage errors (argparse reports those itself).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from . import config as runconfig
from . import imageio, metrics, simulate
from .baselines import BASELINES, apply_baseline
from .checkpoint import Checkpoint
from .core import DEGRADATION_KINDS, ModelConfig, TideError, to_array
from .model import TideModel
from .training import (
    TrainConfig,
    count_parameters,
    restore,
    set_determinism,
    train_base,
    train_combined,
    train_refine,
)


def _load_sections(path) -> dict:
    return runconfig.load_config(path) if path else {}


def _train_config(args, factory) -> TrainConfig:
    sections = _load_sections(args.config)
    model_cfg = runconfig.make_model_config(sections.get("model", {}), preset=args.preset)
    cfg = factory(
        model=model_cfg, loss=runconfig.make_loss_weights(sections.get("loss", {}))
    )
    cfg = replace(cfg, **runconfig.train_overrides(sections.get("train", {})))
    for flag in ("epochs", "batch_size", "lr", "seed"):
        value = getattr(args, flag)
        if value is not None:
            cfg = replace(cfg, **{flag: value})
    return cfg.validate()


def _cmd_simulate(args) -> int:
    sections = _load_sections(args.config)
    params = runconfig.make_degrade_params(sections.get("simulate", {}))
    if args.seed is not None:
        params = replace(params, seed=args.seed)
    manifest = simulate.make_dataset(args.out, args.count, args.size, params)
    print(f"wrote {manifest['count']} pairs of size {args.size} to {args.out}")
    return 0


def _cmd_train_base(args) -> int:
    cfg = _train_config(args, TrainConfig.base)
    pairs = simulate.load_dataset(args.data)
    ckpt = train_base(pairs, cfg, log_path=args.log)
    ckpt.save(args.out)
    print(f"base checkpoint: {args.out} ({count_parameters(ckpt).base_count} parameters)")
    return 0


def _cmd_train_refine(args) -> int:
    cfg = _train_config(args, TrainConfig.refine)
    base_ckpt = Checkpoint.load(args.base)
    cfg = replace(cfg, model=base_ckpt.config).validate()
    pairs = simulate.load_dataset(args.data)
    ckpt = train_refine(pairs, base_ckpt, cfg, log_path=args.log)
    ckpt.save(args.out)
    report = count_parameters(ckpt)
    print(
        f"refine checkpoint: {args.out} "
        f"(base {report.base_count}, refine {report.refine_count} parameters)"
    )
    return 0


def _cmd_train_combined(args) -> int:
    cfg = _train_config(args, TrainConfig.combined)
    full_ckpt = Checkpoint.load(args.ckpt)
    cfg = replace(cfg, model=full_ckpt.config).validate()
    pairs = simulate.load_dataset(args.data)
    ckpt = train_combined(pairs, full_ckpt, cfg, log_path=args.log)
    ckpt.save(args.out)
    print(f"combined checkpoint: {args.out}")
    return 0


def _input_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
        if not files:
            raise TideError(f"no PNG files in {path}")
        return files
    if not path.exists():
        raise TideError(f"input {path} does not exist")
    return [path]


def _fit_divisible(img, divisor: int, resize: bool):
    if resize:
        return imageio.resize_to_multiple(img, divisor)
    return imageio.center_crop_to_multiple(img, divisor)


def _dump_intermediates(res, out_dir: Path, stem: str) -> None:
    sub = out_dir / f"{stem}_intermediates"
    sub.mkdir(parents=True, exist_ok=True)
    for k, kind in enumerate(DEGRADATION_KINDS):
        imageio.save_image(to_array(res.hypotheses[k]), sub / f"hypothesis_{kind}.png")
        imageio.save_gray(to_array(res.maps[k]), sub / f"map_{kind}.png")
        if res.residual_maps is not None:
            imageio.save_gray(to_array(res.residual_maps[k]), sub / f"residual_map_{kind}.png")
    if res.gate is not None:
        imageio.save_gray(to_array(res.gate[0]), sub / "gate.png")
    if res.correction is not None:
        # Corrections are signed; stored shifted so 0 maps to mid-gray.
        imageio.save_image((to_array(res.correction) + 1.0) / 2.0, sub / "correction.png")


def _cmd_restore(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    divisor = ckpt.config.divisor
    for path in _input_files(Path(args.input)):
        img = imageio.load_image(path)
        img = _fit_divisible(img, divisor, args.resize)
        res = restore(img, ckpt)
        imageio.save_image(to_array(res.final), out_dir / path.name)
        if args.dump_intermediates:
            _dump_intermediates(res, out_dir, path.stem)
    print(f"restored images written to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    names = [m for m in args.metrics.split(",") if m.strip()]
    report = metrics.evaluate_pairs(args.pred, args.ref, names)
    csv_text = report.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_baseline(args) -> int:
    params = {}
    for item in args.param:
        if "=" not in item:
            raise TideError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = float(value)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in _input_files(Path(args.input)):
        result = apply_baseline(args.method, imageio.load_image(path), **params)
        imageio.save_image(result, out_dir / path.name)
    print(f"{args.method} results written to {out_dir}")
    return 0


def _cmd_bench(args) -> int:
    cfg = ModelConfig.full() if args.preset == "full" else ModelConfig.toy()
    set_determinism(0, True)
    model = TideModel(cfg)
    model.eval()
    report = count_parameters(model)
    x = torch.rand(args.batch, 3, args.size, args.size)
    with torch.no_grad():
        model(x)  # warmup
        start = time.perf_counter()
        for _ in range(args.repeat):
            model(x)
        elapsed = time.perf_counter() - start
    per_image = elapsed / (args.repeat * args.batch)
    print(f"preset:          {args.preset}")
    print(f"input:           {args.batch}x3x{args.size}x{args.size}")
    print(f"base params:     {report.base_count}")
    print(f"refine params:   {report.refine_count}")
    print(f"refine/base:     {report.ratio:.4f}")
    print(f"latency:         {per_image * 1e3:.2f} ms/image")
    print(f"throughput:      {1.0 / per_image:.2f} images/s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tide", description="Two-stage underwater image restoration toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a paired synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_simulate)

    def train_flags(p):
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--log", default=None)
        p.add_argument("--preset", choices=("toy", "full"), default="toy")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None)

    p = sub.add_parser("train-base", help="phase 1: fit the base restorer")
    train_flags(p)
    p.set_defaults(func=_cmd_train_base)

    p = sub.add_parser("train-refine", help="phase 2: fit refinement on a frozen base")
    train_flags(p)
    p.add_argument("--base", required=True, help="base-phase checkpoint")
    p.set_defaults(func=_cmd_train_refine)

    p = sub.add_parser("train-combined", help="optional joint fine-tune")
    train_flags(p)
    p.add_argument("--ckpt", required=True, help="refine-phase checkpoint")
    p.set_defaults(func=_cmd_train_combined)

    p = sub.add_parser("restore", help="run the pipeline on PNG images")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="PNG file or directory")
    p.add_argument("--out", required=True)
    p.add_argument("--resize", action="store_true",
                   help="rescale to a valid size instead of center-cropping")
    p.add_argument("--dump-intermediates", action="store_true")
    p.set_defaults(func=_cmd_restore)

    p = sub.add_parser("evaluate", help="score restored images")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", default=None)
    p.add_argument("--metrics", default="psnr,ssim,uiqm")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("baseline", help="run a classical enhancement method")
    p.add_argument("--method", required=True, choices=sorted(BASELINES))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--param", action="append", default=[],
                   help="method parameter as key=value; repeatable")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("bench", help="timing and parameter-count report")
    p.add_argument("--preset", choices=("toy", "full"), default="toy")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
