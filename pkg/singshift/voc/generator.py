# ==============================================================================
# generator.py  –  Toy HiFi-GAN style generator G (mel → waveform)
#
#   conv_pre (k=7) → [leaky ReLU → transposed conv ×u_i → residual stack]* →
#   leaky ReLU → conv_post (k=7) → tanh
#
# Every transposed convolution multiplies the length by exactly u_i, so a mel of
# F frames becomes F · prod(upsample_factors) samples.
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

LRELU_SLOPE = 0.1


class VocError(ValueError):
    """Bad vocoder configuration or input."""


@dataclass(frozen=True)
class VocConfig:
    n_mels: int = 40
    upsample_factors: Tuple[int, ...] = (5, 5, 4)
    channels: int = 32
    periods: Tuple[int, ...] = (2, 3)
    n_scales: int = 2
    resblock_kernel: int = 3
    resblock_dilations: Tuple[int, ...] = (1, 3)
    disc_channels: int = 16
    segment_frames: int = 16

    def __post_init__(self) -> None:
        if not self.upsample_factors or any(u < 2 for u in self.upsample_factors):
            raise VocError(f"upsample factors must all be >= 2, got {self.upsample_factors}")
        if not self.periods or any(p < 2 for p in self.periods):
            raise VocError(f"periods must be >= 2, got {self.periods}")
        if len(set(self.periods)) != len(self.periods):
            raise VocError(f"periods must be distinct, got {self.periods}")
        if self.n_scales < 1:
            raise VocError("need at least one scale discriminator")
        if self.channels < 1 or self.disc_channels < 1 or self.n_mels < 1:
            raise VocError("channel counts and n_mels must be positive")
        if self.resblock_kernel % 2 == 0 or not self.resblock_dilations:
            raise VocError("residual stack needs an odd kernel and at least one dilation")
        if self.segment_frames < 1:
            raise VocError("segment_frames must be >= 1")

    @property
    def hop(self) -> int:
        return math.prod(self.upsample_factors)

    @property
    def min_disc_samples(self) -> int:
        return max(max(self.periods), 8 * 2 ** (self.n_scales - 1))


def get_padding(kernel_size: int, dilation: int = 1) -> int:
    return (kernel_size * dilation - dilation) // 2


class ResBlock(nn.Module):
    """Dilated residual stack; length preserving."""

    def __init__(self, channels: int, kernel_size: int, dilations: Tuple[int, ...]):
        super().__init__()
        self.convs1 = nn.ModuleList(
            nn.Conv1d(channels, channels, kernel_size, dilation=d, padding=get_padding(kernel_size, d))
            for d in dilations
        )
        self.convs2 = nn.ModuleList(
            nn.Conv1d(channels, channels, kernel_size, padding=get_padding(kernel_size))
            for _ in dilations
        )

    def forward(self, x: Tensor) -> Tensor:
        for c1, c2 in zip(self.convs1, self.convs2):
            xt = c1(F.leaky_relu(x, LRELU_SLOPE))
            xt = c2(F.leaky_relu(xt, LRELU_SLOPE))
            x = xt + x
        return x


class Generator(nn.Module):
    def __init__(self, cfg: VocConfig):
        super().__init__()
        self.cfg = cfg
        self.conv_pre = nn.Conv1d(cfg.n_mels, cfg.channels, 7, padding=3)

        self.ups = nn.ModuleList()
        self.resblocks = nn.ModuleList()
        ch = cfg.channels
        for i, u in enumerate(cfg.upsample_factors):
            out_ch = max(cfg.channels // 2 ** (i + 1), 2)
            self.ups.append(
                nn.ConvTranspose1d(
                    ch, out_ch, kernel_size=2 * u, stride=u,
                    padding=u // 2 + u % 2, output_padding=u % 2,
                )
            )
            self.resblocks.append(ResBlock(out_ch, cfg.resblock_kernel, cfg.resblock_dilations))
            ch = out_ch

        self.conv_post = nn.Conv1d(ch, 1, 7, padding=3)

    def forward(self, mel: Tensor) -> Tensor:
        """
        Parameters
        ----------
        mel : Tensor
            (frames, n_mels) or (B, frames, n_mels).

        Returns
        -------
        Tensor
            (frames · hop,) or (B, frames · hop), values in (-1, 1).
        """
        squeeze = mel.dim() == 2
        batch = mel.unsqueeze(0) if squeeze else mel
        if batch.dim() != 3 or batch.shape[1] < 1:
            raise VocError(f"need a non-empty (B, frames, n_mels) mel, got {tuple(mel.shape)}")
        if batch.shape[2] != self.cfg.n_mels:
            raise VocError(f"expected {self.cfg.n_mels} mel bins, got {batch.shape[2]}")

        x = self.conv_pre(batch.transpose(1, 2))
        for up, res in zip(self.ups, self.resblocks):
            x = up(F.leaky_relu(x, LRELU_SLOPE))
            x = res(x)
        x = torch.tanh(self.conv_post(F.leaky_relu(x, LRELU_SLOPE))).squeeze(1)

        return x.squeeze(0) if squeeze else x
