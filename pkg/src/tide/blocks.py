"""Building blocks shared by every network in the pipeline."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import Tensor


class SafeInstanceNorm2d(nn.Module):
    """Instance norm that passes 1x1 feature maps through unchanged.

    A 1x1 map has no spatial statistics; normalizing it would divide a zero
    deviation by the epsilon and erase the features at deep bottlenecks.
    """

    def __init__(self, eps: float = 1e-5):
        super().__init__()
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] * x.shape[-2] == 1:
            return x
        return F.instance_norm(x, eps=self.eps)


class ConvBlock(nn.Module):
    """3x3 conv -> instance norm -> LeakyReLU."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, slope: float = 0.2):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
        self.norm = SafeInstanceNorm2d()
        self.act = nn.LeakyReLU(slope)

    def forward(self, x: Tensor) -> Tensor:
        return self.act(self.norm(self.conv(x)))


class ResidualBranch(nn.Module):
    """Inner path of a residual block: conv -> norm -> act -> conv -> norm."""

    def __init__(self, ch: int, slope: float = 0.2):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(ch, ch, 3, padding=1),
            SafeInstanceNorm2d(),
            nn.LeakyReLU(slope),
            nn.Conv2d(ch, ch, 3, padding=1),
            SafeInstanceNorm2d(),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.body(x)


class ResidualBlock(nn.Module):
    """x + branch(x); zeroing the branch parameters makes this the identity."""

    def __init__(self, ch: int, slope: float = 0.2):
        super().__init__()
        self.branch = ResidualBranch(ch, slope)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.branch(x)


class GlobalContext(nn.Module):
    """Squeeze-excite channel gate: x * sigmoid(W2 relu(W1 gap(x)))."""

    def __init__(self, ch: int, reduction: int = 4):
        super().__init__()
        hidden = max(1, ch // reduction)
        self.squeeze = nn.Conv2d(ch, hidden, 1)
        self.excite = nn.Conv2d(hidden, ch, 1)

    def forward(self, x: Tensor) -> Tensor:
        s = x.mean(dim=(-2, -1), keepdim=True)
        s = torch.sigmoid(self.excite(F.relu(self.squeeze(s))))
        return x * s


def init_parameters(module: nn.Module, seed: int, slope: float = 0.2) -> None:
    """Deterministic Kaiming fan-in initialization.

    Parameters are visited in name order so the draw sequence does not depend
    on registration order. Weight tensors get Kaiming normal scaled for the
    leaky slope, biases are zeroed, and scalar parameters (expert scales,
    gate scale, attention strength) keep their constructed values.
    """
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for _, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
            if p.dim() >= 2:
                nn.init.kaiming_normal_(
                    p, a=slope, mode="fan_in", nonlinearity="leaky_relu", generator=gen
                )
            elif p.dim() == 1:
                p.zero_()
