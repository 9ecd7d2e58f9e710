# ==============================================================================
# discriminators.py  –  Multi-period + multi-scale discriminators (toy scale)
#
# Period branch: right zero-pad to a multiple of p, fold to (T/p, p), 2-D convs
# with (k, 1) kernels. Scale branch: 1-D convs on the waveform, then on copies
# average-pooled by 2, 4, … Outputs are ordered periods first, then scales.
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import torch.nn.functional as F
from torch import Tensor, nn

from singshift.voc.generator import LRELU_SLOPE, VocConfig, VocError, get_padding


@dataclass
class DiscOutput:
    scores: List[Tensor]  # one final score map per discriminator
    features: List[List[Tensor]]  # intermediate maps per discriminator


class PeriodDiscriminator(nn.Module):
    def __init__(self, period: int, channels: int, kernel_size: int = 5, stride: int = 3):
        super().__init__()
        self.period = period
        pad = (get_padding(kernel_size), 0)
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, channels, (kernel_size, 1), (stride, 1), padding=pad),
                nn.Conv2d(channels, 2 * channels, (kernel_size, 1), (stride, 1), padding=pad),
                nn.Conv2d(2 * channels, 2 * channels, (kernel_size, 1), 1, padding=pad),
            ]
        )
        self.conv_post = nn.Conv2d(2 * channels, 1, (3, 1), 1, padding=(1, 0))

    def forward(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        """x: (B, T) → score map (B, -1) and feature maps."""
        b, t = x.shape
        if t % self.period:
            pad = self.period - t % self.period
            x = F.pad(x, (0, pad))  # zeros
            t += pad
        x = x.reshape(b, 1, t // self.period, self.period)

        fmap: List[Tensor] = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            fmap.append(x)
        x = self.conv_post(x)
        fmap.append(x)
        return x.flatten(1), fmap


class ScaleDiscriminator(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.convs = nn.ModuleList(
            [
                nn.Conv1d(1, channels, 15, 1, padding=7),
                nn.Conv1d(channels, 2 * channels, 15, 2, padding=7),
                nn.Conv1d(2 * channels, 2 * channels, 15, 4, padding=7),
                nn.Conv1d(2 * channels, 2 * channels, 5, 1, padding=2),
            ]
        )
        self.conv_post = nn.Conv1d(2 * channels, 1, 3, 1, padding=1)

    def forward(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        x = x.unsqueeze(1)
        fmap: List[Tensor] = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            fmap.append(x)
        x = self.conv_post(x)
        fmap.append(x)
        return x.flatten(1), fmap


class Discriminators(nn.Module):
    """All period discriminators followed by all scale discriminators."""

    def __init__(self, cfg: VocConfig):
        super().__init__()
        self.cfg = cfg
        self.period_discs = nn.ModuleList(
            PeriodDiscriminator(p, cfg.disc_channels) for p in cfg.periods
        )
        self.scale_discs = nn.ModuleList(
            ScaleDiscriminator(cfg.disc_channels) for _ in range(cfg.n_scales)
        )
        self.pool = nn.AvgPool1d(4, 2, padding=2)

    def forward(self, w: Tensor) -> DiscOutput:
        """
        Parameters
        ----------
        w : Tensor
            (T,) or (B, T) waveform.
        """
        batch = w.unsqueeze(0) if w.dim() == 1 else w
        if batch.shape[-1] < self.cfg.min_disc_samples:
            raise VocError(
                f"waveform of {batch.shape[-1]} samples is shorter than the "
                f"discriminator minimum {self.cfg.min_disc_samples}"
            )

        scores: List[Tensor] = []
        features: List[List[Tensor]] = []
        for disc in self.period_discs:
            score, fmap = disc(batch)
            scores.append(score)
            features.append(fmap)

        x = batch
        for i, disc in enumerate(self.scale_discs):
            if i > 0:
                x = self.pool(x.unsqueeze(1)).squeeze(1)
            score, fmap = disc(x)
            scores.append(score)
            features.append(fmap)

        return DiscOutput(scores=scores, features=features)
