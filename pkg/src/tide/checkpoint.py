"""Self-contained binary checkpoint format.

Layout: 4-byte magic "TIDE", 4-byte little-endian format version, 8-byte
little-endian manifest length, a UTF-8 JSON manifest (tensor names, shapes,
byte offsets, model config, phase, seed, step, payload digest), then the
raw little-endian float32 tensor payloads in manifest order. Loading and
re-saving reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import CheckpointError, ModelConfig, PhaseMismatchError

MAGIC = b"TIDE"
FORMAT_VERSION = 1
PHASES = ("base", "refine", "combined")


def _payload(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


@dataclass
class Checkpoint:
    """Parameter snapshot plus the config needed to rebuild the model."""

    phase: str
    seed: int
    step: int
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def digest(self, prefix: str = "") -> str:
        """sha256 over the float32 payload bytes of keys with the prefix."""
        h = hashlib.sha256()
        for name, arr in self.tensors.items():
            if name.startswith(prefix):
                h.update(_payload(arr))
        return h.hexdigest()

    def save(self, path) -> None:
        path = Path(path)
        entries = []
        offset = 0
        blobs = []
        for name, arr in self.tensors.items():
            blob = _payload(arr)
            entries.append(
                {
                    "name": name,
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": len(blob),
                }
            )
            blobs.append(blob)
            offset += len(blob)
        manifest = {
            "config": self.config.to_dict(),
            "digest": self.digest(),
            "phase": self.phase,
            "seed": int(self.seed),
            "step": int(self.step),
            "tensors": entries,
        }
        body = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(FORMAT_VERSION.to_bytes(4, "little"))
            fh.write(len(body).to_bytes(8, "little"))
            fh.write(body)
            for blob in blobs:
                fh.write(blob)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        raw = path.read_bytes()
        if len(raw) < 16 or raw[:4] != MAGIC:
            raise CheckpointError(
                f"{path}: not a TIDE checkpoint (bad magic {raw[:4]!r})"
            )
        version = int.from_bytes(raw[4:8], "little")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        mlen = int.from_bytes(raw[8:16], "little")
        if len(raw) < 16 + mlen:
            raise CheckpointError(f"{path}: truncated manifest")
        try:
            manifest = json.loads(raw[16 : 16 + mlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable manifest: {exc}") from exc
        base = 16 + mlen
        tensors: dict[str, np.ndarray] = {}
        for entry in manifest["tensors"]:
            start = base + entry["offset"]
            end = start + entry["nbytes"]
            if end > len(raw):
                raise CheckpointError(f"{path}: truncated payload for {entry['name']}")
            arr = np.frombuffer(raw[start:end], dtype="<f4").reshape(entry["shape"])
            tensors[entry["name"]] = arr.copy()
        ckpt = cls(
            phase=manifest["phase"],
            seed=int(manifest["seed"]),
            step=int(manifest["step"]),
            config=ModelConfig(**manifest["config"]),
            tensors=tensors,
        )
        if ckpt.digest() != manifest["digest"]:
            raise CheckpointError(f"{path}: payload digest mismatch")
        return ckpt

    @classmethod
    def from_model(
        cls, model: torch.nn.Module, config: ModelConfig, phase: str, seed: int, step: int
    ) -> "Checkpoint":
        if phase not in PHASES:
            raise PhaseMismatchError(f"unknown phase {phase!r}; expected one of {PHASES}")
        tensors = {}
        for name, value in model.state_dict().items():
            if phase == "base" and not name.startswith("base."):
                continue
            tensors[name] = value.detach().cpu().numpy().astype(np.float32)
        return cls(phase=phase, seed=seed, step=step, config=config, tensors=tensors)

    def apply_to(self, model: torch.nn.Module) -> None:
        """Copy stored tensors into a model built from the same config."""
        state = {name: torch.from_numpy(arr.copy()) for name, arr in self.tensors.items()}
        missing_ok = {
            name for name, _ in model.state_dict().items() if not name.startswith("base.")
        }
        if self.phase == "base":
            # Stage-2 parameters keep their freshly initialized values.
            result = model.load_state_dict(state, strict=False)
            unexpected = list(result.unexpected_keys)
            missing = [k for k in result.missing_keys if k not in missing_ok]
            if unexpected or missing:
                raise CheckpointError(
                    f"checkpoint does not match model (missing {missing}, unexpected {unexpected})"
                )
        else:
            model.load_state_dict(state, strict=True)
