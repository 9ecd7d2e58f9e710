# ==============================================================================
# acoustic_model.py  –  Toy score → mel acoustic model
# ------------------------------------------------------------------------------
# Structure:
#   • embeddings: phoneme id + pitch id (summed)
#   • encoder: per-phoneme hidden sequence (BiLSTM or Transformer encoder)
#   • duration predictor: positive per-phoneme frame counts
#   • length regulator: repeat each hidden vector `duration` times
#   • decoder (same kind as the encoder) + linear mel head
#
# Utterances are processed one at a time (no padding, no masks).
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from singshift.score.frame_targets import PITCH_VOCAB, REST_PITCH_ID, phoneme_vocabulary
from singshift.score.score_format import DEFAULT_INVENTORY, MusicScore


class AmError(ValueError):
    """Bad acoustic-model configuration or input."""


class EncoderKind(str, Enum):
    RECURRENT = "recurrent"
    SELF_ATTENTION = "self_attention"


@dataclass(frozen=True)
class AmConfig:
    encoder_kind: str = EncoderKind.RECURRENT.value
    hidden_dim: int = 32
    n_layers: int = 2
    phoneme_vocab: int = len(DEFAULT_INVENTORY) + 1
    n_mels: int = 40
    n_heads: int = 2
    pitch_vocab: int = PITCH_VOCAB

    def __post_init__(self) -> None:
        try:
            kind = EncoderKind(self.encoder_kind)
        except ValueError as exc:
            raise AmError(f"unknown encoder kind `{self.encoder_kind}`") from exc
        if self.hidden_dim < 1 or self.n_layers < 1:
            raise AmError("hidden_dim and n_layers must be >= 1")
        if self.phoneme_vocab < 2 or self.n_mels < 1 or self.pitch_vocab < 1:
            raise AmError("vocabulary sizes and n_mels must be positive")
        if kind is EncoderKind.RECURRENT and self.hidden_dim % 2:
            raise AmError("recurrent encoders split hidden_dim across two directions; use an even size")
        if kind is EncoderKind.SELF_ATTENTION and self.hidden_dim % self.n_heads:
            raise AmError(f"hidden_dim {self.hidden_dim} not divisible by n_heads {self.n_heads}")


@dataclass
class AmOutput:
    mel_pred: Tensor  # (frames, n_mels), x̂
    dur_pred: Tensor  # (n_phonemes,), strictly positive
    durations: Tensor  # (n_phonemes,), frame counts used by the regulator


# ------------------------------------------------------------------------------
# Building blocks
# ------------------------------------------------------------------------------


def sinusoidal_positions(length: int, dim: int, dtype: torch.dtype) -> Tensor:
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    freqs = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * freqs)
    table[:, 1::2] = torch.cos(position * freqs[: dim // 2])
    return table.to(dtype)


class SequenceStack(nn.Module):
    """Context stack over a (1, T, hidden) sequence; output has the same shape."""

    def __init__(self, cfg: AmConfig):
        super().__init__()
        self.kind = EncoderKind(cfg.encoder_kind)
        if self.kind is EncoderKind.RECURRENT:
            self.net = nn.LSTM(
                cfg.hidden_dim,
                cfg.hidden_dim // 2,
                num_layers=cfg.n_layers,
                batch_first=True,
                bidirectional=True,
            )
        else:
            layer = nn.TransformerEncoderLayer(
                d_model=cfg.hidden_dim,
                nhead=cfg.n_heads,
                dim_feedforward=2 * cfg.hidden_dim,
                dropout=0.0,
                batch_first=True,
            )
            self.net = nn.TransformerEncoder(layer, cfg.n_layers, enable_nested_tensor=False)

    def forward(self, x: Tensor) -> Tensor:
        if self.kind is EncoderKind.RECURRENT:
            out, _ = self.net(x)
            return out
        pos = sinusoidal_positions(x.shape[1], x.shape[2], x.dtype).to(x.device)
        return self.net(x + pos.unsqueeze(0))


class DurationPredictor(nn.Module):
    def __init__(self, hidden_dim: int):
        super().__init__()
        self.model = nn.Sequential(
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, 1),
            nn.Softplus(),
        )

    def forward(self, hidden: Tensor) -> Tensor:
        """(n, hidden) → (n,) positive frame counts."""
        return self.model(hidden).squeeze(-1)


def length_regulate(hidden: Tensor, durations: Tensor) -> Tensor:
    """
    Expand per-phoneme vectors to frames.

    Parameters
    ----------
    hidden : Tensor
        (n_phonemes, dim).
    durations : Tensor
        (n_phonemes,) nonnegative integer frame counts, at least one positive.

    Returns
    -------
    Tensor
        (sum(durations), dim); frame j carries the vector of the phoneme whose
        cumulative-duration interval contains j.
    """
    durations = torch.as_tensor(durations, device=hidden.device)
    if durations.dim() != 1 or durations.shape[0] != hidden.shape[0]:
        raise AmError(f"need one duration per phoneme, got {tuple(durations.shape)} for {hidden.shape[0]}")
    if durations.is_floating_point():
        if not torch.equal(durations, durations.round()):
            raise AmError("durations must be whole frame counts")
        durations = durations.long()
    if (durations < 0).any():
        raise AmError("durations must be nonnegative")
    if int(durations.sum()) == 0:
        raise AmError("all durations are zero")
    return torch.repeat_interleave(hidden, durations, dim=0)


def predicted_durations(dur_pred: Tensor) -> Tensor:
    """
    round(dur_pred) as frame counts. When every note rounds to zero the
    longest prediction gets one frame, so an utterance never regulates to
    an empty sequence.
    """
    durations = torch.round(dur_pred.detach()).long()
    if int(durations.sum()) == 0:
        durations[int(torch.argmax(dur_pred.detach()))] = 1
    return durations


# ------------------------------------------------------------------------------
# Model
# ------------------------------------------------------------------------------


class AcousticModel(nn.Module):
    def __init__(self, cfg: AmConfig):
        super().__init__()
        self.cfg = cfg
        self.phoneme_embedding = nn.Embedding(cfg.phoneme_vocab, cfg.hidden_dim)
        self.pitch_embedding = nn.Embedding(cfg.pitch_vocab, cfg.hidden_dim)
        self.encoder = SequenceStack(cfg)
        self.duration_predictor = DurationPredictor(cfg.hidden_dim)
        self.decoder = SequenceStack(cfg)
        self.mel_head = nn.Linear(cfg.hidden_dim, cfg.n_mels)

    def _check_tokens(self, phoneme_ids: Tensor, pitch_ids: Tensor) -> None:
        if phoneme_ids.dim() != 1 or phoneme_ids.numel() == 0:
            raise AmError("need a non-empty 1-D token sequence")
        if phoneme_ids.shape != pitch_ids.shape:
            raise AmError("phoneme and pitch sequences differ in length")
        if int(phoneme_ids.min()) < 0 or int(phoneme_ids.max()) >= self.cfg.phoneme_vocab:
            raise AmError(f"phoneme id outside [0, {self.cfg.phoneme_vocab})")
        if int(pitch_ids.min()) < 0 or int(pitch_ids.max()) >= self.cfg.pitch_vocab:
            raise AmError(f"pitch id outside [0, {self.cfg.pitch_vocab})")

    def encode(self, phoneme_ids: Tensor, pitch_ids: Tensor) -> Tensor:
        """(n,) token ids → (n, hidden_dim)."""
        self._check_tokens(phoneme_ids, pitch_ids)
        x = self.phoneme_embedding(phoneme_ids) + self.pitch_embedding(pitch_ids)
        return self.encoder(x.unsqueeze(0)).squeeze(0)

    def forward(
        self,
        phoneme_ids: Tensor,
        pitch_ids: Tensor,
        durations: Optional[Tensor] = None,
    ) -> AmOutput:
        """
        Teacher-forced when `durations` is given, otherwise regulated by
        `predicted_durations(dur_pred)`.
        """
        hidden = self.encode(phoneme_ids, pitch_ids)
        dur_pred = self.duration_predictor(hidden)

        if durations is None:
            durations = predicted_durations(dur_pred)
        frames = length_regulate(hidden, durations)

        decoded = self.decoder(frames.unsqueeze(0)).squeeze(0)
        return AmOutput(
            mel_pred=self.mel_head(decoded),
            dur_pred=dur_pred,
            durations=torch.as_tensor(durations).long(),
        )


# ------------------------------------------------------------------------------
# Loss and helpers
# ------------------------------------------------------------------------------


def am_loss(
    output: AmOutput,
    x: Tensor,
    gt_durations: Tensor,
    lambda_d: float = 1.0,
    lambda_ma: float = 1.0,
) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Returns
    -------
    (L_d, L_ma, L_AM)
        L_d  = MSE(log(1 + dur_pred), log(1 + gt_durations))
        L_ma = L1(mel_pred, x)
        L_AM = lambda_d · L_d + lambda_ma · L_ma
    """
    if output.mel_pred.shape != x.shape:
        raise AmError(f"mel shape mismatch: {tuple(output.mel_pred.shape)} vs {tuple(x.shape)}")
    if output.dur_pred.shape != gt_durations.shape:
        raise AmError("duration count mismatch")

    target = torch.log1p(gt_durations.to(output.dur_pred.dtype))
    l_d = F.mse_loss(torch.log1p(output.dur_pred), target)
    l_ma = F.l1_loss(output.mel_pred, x.to(output.mel_pred.dtype))
    return l_d, l_ma, lambda_d * l_d + lambda_ma * l_ma


def score_tokens(
    score: MusicScore, inventory: Sequence[str] = DEFAULT_INVENTORY
) -> Tuple[Tensor, Tensor]:
    """(phoneme_ids, pitch_ids) for inference on a parsed score."""
    vocab = phoneme_vocabulary(inventory)
    try:
        phonemes = [vocab[ev.phoneme] for ev in score.events]
    except KeyError as exc:
        raise AmError(f"phoneme {exc.args[0]!r} not in inventory") from exc
    pitches = [REST_PITCH_ID if ev.is_rest else ev.midi_pitch for ev in score.events]
    return torch.tensor(phonemes, dtype=torch.long), torch.tensor(pitches, dtype=torch.long)
