"""Flat sectioned key=value run configuration.

Four sections: [model], [train], [loss], [simulate]. Keys are the
corresponding dataclass field names (tuple fields flattened, e.g.
beta_r / beta_g / beta_b). '#' starts a comment, blank lines are
ignored, and unknown sections or keys are rejected outright.
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

from .core import ConfigKeyError, LossWeights, ModelConfig
from .simulate import DegradeParams

_MODEL_KEYS = {"preset"} | {f.name for f in fields(ModelConfig)}
_LOSS_KEYS = {f.name for f in fields(LossWeights)}
_TRAIN_KEYS = {
    "lr",
    "lr_min",
    "epochs",
    "batch_size",
    "weight_decay",
    "clip_norm",
    "cycle_epochs",
    "seed",
    "deterministic",
}
_SIMULATE_KEYS = {
    "beta_r",
    "beta_g",
    "beta_b",
    "beta_s",
    "ambient_r",
    "ambient_g",
    "ambient_b",
    "blur_min",
    "blur_max",
    "noise_std",
    "snow_density",
    "seed",
}
_SECTIONS = {
    "model": _MODEL_KEYS,
    "train": _TRAIN_KEYS,
    "loss": _LOSS_KEYS,
    "simulate": _SIMULATE_KEYS,
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def parse_config(text: str) -> dict[str, dict[str, str]]:
    """Parse and structurally validate config text into raw string values."""
    sections: dict[str, dict[str, str]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ConfigKeyError(
                    f"line {lineno}: unknown section [{name}]; "
                    f"expected one of {sorted(_SECTIONS)}"
                )
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigKeyError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ConfigKeyError(f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _SECTIONS[current]:
            raise ConfigKeyError(
                f"line {lineno}: unknown key {key!r} in [{current}]; "
                f"allowed: {sorted(_SECTIONS[current])}"
            )
        sections[current][key] = value
    return sections


def load_config(path) -> dict[str, dict[str, str]]:
    return parse_config(Path(path).read_text())


def _convert(section: str, key: str, value: str, target: type):
    try:
        if target is bool:
            low = value.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return target(value)
    except ValueError as exc:
        raise ConfigKeyError(f"[{section}] {key}: {exc}") from exc


def make_model_config(section: dict[str, str], preset: str = "toy") -> ModelConfig:
    preset = section.get("preset", preset).lower()
    if preset == "toy":
        cfg = ModelConfig.toy()
    elif preset == "full":
        cfg = ModelConfig.full()
    else:
        raise ConfigKeyError(f"unknown preset {preset!r}; expected toy or full")
    by_name = {f.name: f for f in fields(ModelConfig)}
    overrides = {}
    for key, value in section.items():
        if key == "preset":
            continue
        target = {"int": int, "float": float}[by_name[key].type.replace(" ", "")]
        overrides[key] = _convert("model", key, value, target)
    return replace(cfg, **overrides).validate()


def make_loss_weights(section: dict[str, str]) -> LossWeights:
    overrides = {
        key: _convert("loss", key, value, float) for key, value in section.items()
    }
    return replace(LossWeights(), **overrides)


def make_degrade_params(section: dict[str, str]) -> DegradeParams:
    params = DegradeParams()
    scalars = {
        "beta_s": float,
        "noise_std": float,
        "snow_density": float,
        "seed": int,
    }
    values: dict = {}
    betas = list(params.betas)
    ambient = list(params.ambient)
    blur = list(params.blur_sigma)
    for key, value in section.items():
        if key in scalars:
            values[key] = _convert("simulate", key, value, scalars[key])
        elif key.startswith("beta_"):
            betas["rgb".index(key[-1])] = _convert("simulate", key, value, float)
        elif key.startswith("ambient_"):
            ambient["rgb".index(key[-1])] = _convert("simulate", key, value, float)
        elif key == "blur_min":
            blur[0] = _convert("simulate", key, value, float)
        elif key == "blur_max":
            blur[1] = _convert("simulate", key, value, float)
    return replace(
        params,
        betas=tuple(betas),
        ambient=tuple(ambient),
        blur_sigma=tuple(blur),
        **values,
    ).validate()


def train_overrides(section: dict[str, str]) -> dict:
    """Typed [train] overrides ready for dataclasses.replace on a TrainConfig."""
    types = {
        "lr": float,
        "lr_min": float,
        "epochs": int,
        "batch_size": int,
        "weight_decay": float,
        "clip_norm": float,
        "cycle_epochs": int,
        "seed": int,
        "deterministic": bool,
    }
    return {
        key: _convert("train", key, value, types[key]) for key, value in section.items()
    }
