"""Two-phase training, restoration entry point, and parameter accounting.

Phase 1 fits the base restorer; phase 2 freezes it bit-exactly and fits
the refinement stack; an optional combined phase fine-tunes both under a
weighted joint objective. Deterministic mode pins seeds and thread count
so reruns produce byte-identical checkpoints and logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .blocks import init_parameters
from .checkpoint import Checkpoint
from .core import (
    BadParamsError,
    BadShapeError,
    ConfigMismatchError,
    EmptyDatasetError,
    LossWeights,
    ModelConfig,
    PhaseMismatchError,
    RestorationResult,
    Tensor,
    to_tensor,
    validate_image,
)
from .losses import PerceptualFeatures, stage1_terms, stage2_terms
from .model import TideModel, result_from_outputs

LOG_COLUMNS = {
    "base": ("step", "lr", "total", "l1", "ssim", "perceptual", "diversity", "consistency", "aux", "grad_norm"),
    "refine": ("step", "lr", "total", "l1", "ssim", "perceptual", "magnitude", "improvement", "grad_norm"),
    "combined": ("step", "lr", "total", "base_total", "refine_total", "grad_norm"),
}


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters for one training phase."""

    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    lr: float = 1e-4
    lr_min: float = 1e-6
    epochs: int = 300
    batch_size: int = 16
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    cycle_epochs: int = 50
    seed: int = 0
    deterministic: bool = True

    @classmethod
    def base(cls, **overrides) -> "TrainConfig":
        return replace(cls(lr=1e-4, epochs=300, batch_size=16), **overrides)

    @classmethod
    def refine(cls, **overrides) -> "TrainConfig":
        return replace(cls(lr=5e-5, epochs=100, batch_size=16), **overrides)

    @classmethod
    def combined(cls, **overrides) -> "TrainConfig":
        return replace(cls(lr=5e-5, epochs=50, batch_size=16), **overrides)

    def validate(self) -> "TrainConfig":
        self.model.validate()
        if self.lr <= 0 or not 0 <= self.lr_min <= self.lr:
            raise BadParamsError("need lr > 0 and 0 <= lr_min <= lr")
        if self.epochs < 1 or self.batch_size < 1 or self.cycle_epochs < 1:
            raise BadParamsError("epochs, batch_size, cycle_epochs must be >= 1")
        if self.weight_decay < 0 or self.clip_norm <= 0:
            raise BadParamsError("need weight_decay >= 0 and clip_norm > 0")
        return self


@dataclass
class ParamReport:
    base_count: int
    refine_count: int

    @property
    def ratio(self) -> float:
        return self.refine_count / self.base_count if self.base_count else float("inf")


def set_determinism(seed: int, deterministic: bool = True) -> None:
    """Seed torch and, in deterministic mode, pin kernels to one thread."""
    torch.manual_seed(int(seed))
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


def lr_at(step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """Cosine annealing with warm restarts every cycle_epochs epochs."""
    epoch_pos = step / steps_per_epoch
    cycle_pos = (epoch_pos % cfg.cycle_epochs) / cfg.cycle_epochs
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + math.cos(math.pi * cycle_pos))


def _prepare_pairs(pairs, divisor: int) -> tuple[Tensor, Tensor]:
    if len(pairs) == 0:
        raise EmptyDatasetError("training requires at least one image pair")
    imgs, refs = [], []
    for i, pair in enumerate(pairs):
        # Accept (degraded, clean) or (degraded, clean, gt_maps, ...) records.
        img, ref = to_tensor(pair[0]), to_tensor(pair[1])
        if img.shape != ref.shape:
            raise BadShapeError(f"pair {i}: degraded and clean shapes differ")
        validate_image(img, f"pair {i} degraded")
        validate_image(ref, f"pair {i} clean")
        if img.shape[-1] % divisor or img.shape[-2] % divisor:
            raise BadShapeError(
                f"pair {i}: spatial size must be divisible by {divisor}"
            )
        imgs.append(img)
        refs.append(ref)
    if len({tuple(t.shape) for t in imgs}) != 1:
        raise BadShapeError("all training pairs must share one resolution")
    return torch.stack(imgs), torch.stack(refs)


def _clip_gradients(params: list[Tensor], clip_norm: float) -> float:
    """Clip to the global-norm ball and return the post-clip norm."""
    torch.nn.utils.clip_grad_norm_(params, clip_norm)
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(p.grad.detach().pow(2).sum())
    return math.sqrt(total)


class _LogWriter:
    """Collects per-step rows and renders a byte-stable CSV."""

    def __init__(self, phase: str):
        self.columns = LOG_COLUMNS[phase]
        self.rows: list[dict] = []

    def add(self, **values) -> None:
        self.rows.append(values)

    def render(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                v = row[col]
                cells.append(str(v) if col == "step" else format(float(v), ".10e"))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.render())


def _run_phase(model, trainable, forward, phase, pairs, cfg, log_path):
    """Shared loop: schedule, clip, step, log. `forward` maps a batch to
    (loss, term dict)."""
    imgs, refs = _prepare_pairs(pairs, cfg.model.divisor)
    n = imgs.shape[0]
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    opt = torch.optim.Adam(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)
    order_rng = np.random.default_rng(cfg.seed)
    log = _LogWriter(phase)
    step = 0
    for _ in range(cfg.epochs):
        perm = order_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(perm[start : start + cfg.batch_size].copy())
            lr = lr_at(step, steps_per_epoch, cfg)
            for group in opt.param_groups:
                group["lr"] = lr
            loss, terms = forward(imgs[idx], refs[idx])
            opt.zero_grad()
            loss.backward()
            grad_norm = _clip_gradients(trainable, cfg.clip_norm)
            opt.step()
            log.add(step=step, lr=lr, total=float(loss.detach()), grad_norm=grad_norm,
                    **{k: float(v.detach()) for k, v in terms.items()})
            step += 1
    if log_path is not None:
        log.write(log_path)
    ckpt = Checkpoint.from_model(model, cfg.model, phase, cfg.seed, step)
    return ckpt, log


def train_base(pairs, cfg: TrainConfig, log_path=None) -> Checkpoint:
    """Phase 1: fit encoder, estimator, decoders, and fusion."""
    cfg.validate()
    set_determinism(cfg.seed, cfg.deterministic)
    model = TideModel(cfg.model)
    init_parameters(model, cfg.seed, cfg.model.negative_slope)
    features = PerceptualFeatures()
    trainable = list(model.base.parameters())

    def forward(img, ref):
        out = model.base(img)
        return stage1_terms(
            out["initial"], ref, out["hypotheses"], out["maps"], img,
            cfg.loss, features,
        )

    ckpt, _ = _run_phase(model, trainable, forward, "base", pairs, cfg, log_path)
    return ckpt


def train_refine(pairs, base_ckpt: Checkpoint, cfg: TrainConfig, log_path=None) -> Checkpoint:
    """Phase 2: freeze the base bit-exactly, fit the refinement stack."""
    cfg.validate()
    if base_ckpt.phase != "base":
        raise PhaseMismatchError(
            f"train_refine needs a base-phase checkpoint, got {base_ckpt.phase!r}"
        )
    if base_ckpt.config != cfg.model:
        raise ConfigMismatchError("checkpoint and training configs differ")
    set_determinism(cfg.seed, cfg.deterministic)
    model = TideModel(cfg.model)
    init_parameters(model, cfg.seed, cfg.model.negative_slope)
    base_ckpt.apply_to(model)
    model.base.requires_grad_(False)
    model.base.eval()
    features = PerceptualFeatures()
    trainable = list(model.refine.parameters())

    def forward(img, ref):
        with torch.no_grad():
            initial = model.base(img)["initial"]
        out = model.refine(img, initial)
        return stage2_terms(
            out["final"], initial, ref, out["correction"], cfg.loss, features
        )

    ckpt, _ = _run_phase(model, trainable, forward, "refine", pairs, cfg, log_path)
    return ckpt


def train_combined(pairs, full_ckpt: Checkpoint, cfg: TrainConfig, log_path=None) -> Checkpoint:
    """Optional joint fine-tune of both stages."""
    cfg.validate()
    if full_ckpt.phase not in ("refine", "combined"):
        raise PhaseMismatchError(
            f"train_combined needs a refine or combined checkpoint, got {full_ckpt.phase!r}"
        )
    if full_ckpt.config != cfg.model:
        raise ConfigMismatchError("checkpoint and training configs differ")
    set_determinism(cfg.seed, cfg.deterministic)
    model = TideModel(cfg.model)
    init_parameters(model, cfg.seed, cfg.model.negative_slope)
    full_ckpt.apply_to(model)
    features = PerceptualFeatures()
    trainable = list(model.parameters())
    w = cfg.loss

    def forward(img, ref):
        out = model(img)
        base_total, _ = stage1_terms(
            out["initial"], ref, out["hypotheses"], out["maps"], img, w, features
        )
        refine_total, _ = stage2_terms(
            out["final"], out["initial"], ref, out["correction"], w, features
        )
        total = w.base_combined * base_total + w.refine_combined * refine_total
        return total, {"base_total": base_total, "refine_total": refine_total}

    ckpt, _ = _run_phase(model, trainable, forward, "combined", pairs, cfg, log_path)
    return ckpt


def build_model(ckpt: Checkpoint) -> TideModel:
    """Reconstruct a model from a checkpoint; stage-2 weights fall back to
    seeded init for base-phase checkpoints."""
    model = TideModel(ckpt.config)
    init_parameters(model, ckpt.seed, ckpt.config.negative_slope)
    ckpt.apply_to(model)
    model.eval()
    return model


def restore(img, ckpt: Checkpoint) -> RestorationResult:
    """Run the pipeline on one 3xHxW image in [0, 1].

    Base-phase checkpoints skip stage 2; `final` is then a bitwise copy of
    `initial`.
    """
    validate_image(img)
    model = build_model(ckpt)
    x = to_tensor(img).unsqueeze(0)
    refined = ckpt.phase != "base"
    with torch.no_grad():
        out = model(x, with_refine=refined)
    return result_from_outputs(out, refined, model)


def count_parameters(obj) -> ParamReport:
    """Parameter totals per component from a model or a checkpoint."""
    if isinstance(obj, TideModel):
        return ParamReport(
            base_count=sum(p.numel() for p in obj.base.parameters()),
            refine_count=sum(p.numel() for p in obj.refine.parameters()),
        )
    if isinstance(obj, Checkpoint):
        sizes = {name: arr.size for name, arr in obj.tensors.items()}
        return ParamReport(
            base_count=sum(s for n, s in sizes.items() if n.startswith("base.")),
            refine_count=sum(s for n, s in sizes.items() if n.startswith("refine.")),
        )
    raise BadParamsError(f"cannot count parameters of {type(obj).__name__}")
