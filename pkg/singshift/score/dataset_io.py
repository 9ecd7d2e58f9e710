# ==============================================================================
# dataset_io.py  –  On-disk dataset layout
#
#   <dir>/manifest.txt        one utterance id per line, sorted
#   <dir>/dataset.txt         generator settings + analysis preset (config format)
#   <dir>/scores/<id>.txt     score text (normalized form)
#   <dir>/wav/<id>.raw        headerless little-endian int16 samples
#   <dir>/wav/<id>.txt        sidecar: sample_rate, n_samples
#
# WAV helpers (scipy.io.wavfile) are used for synthesis output and eval input.
# ==============================================================================

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.io import wavfile

from singshift.dsp.features import STFT_PRESETS, StftConfig
from singshift.score.score_format import parse_score, serialize_score
from singshift.score.synthetic_corpus import DataConfig, Utterance
from singshift.utils.logging_utils import setup_logger
from singshift.utils.run_config import build_section, parse_sections, render_section

LOGGER = setup_logger("dataset_io")

PathLike = Union[str, Path]
_INT16_SCALE = 32767.0


class DatasetError(ValueError):
    """Missing or inconsistent dataset files."""


# ------------------------------------------------------------------------------
# Sample codecs
# ------------------------------------------------------------------------------


def to_int16(waveform: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(waveform, dtype=np.float64), -1.0, 1.0)
    return np.round(clipped * _INT16_SCALE).astype("<i2")


def from_int16(samples: np.ndarray) -> np.ndarray:
    return samples.astype(np.float64) / _INT16_SCALE


def write_raw(path: PathLike, waveform: np.ndarray, sample_rate: int) -> None:
    path = Path(path)
    samples = to_int16(waveform)
    path.write_bytes(samples.tobytes())
    path.with_suffix(".txt").write_text(
        f"sample_rate = {sample_rate}\nn_samples = {len(samples)}\n", encoding="utf-8"
    )


def read_raw(path: PathLike) -> Tuple[np.ndarray, int]:
    """Return (waveform in [-1, 1], sample_rate)."""
    path = Path(path)
    sidecar = path.with_suffix(".txt")
    if not sidecar.exists():
        raise DatasetError(f"missing sidecar {sidecar}")

    meta: Dict[str, str] = {}
    for line in sidecar.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()

    try:
        sample_rate = int(meta["sample_rate"])
        n_samples = int(meta["n_samples"])
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"bad sidecar {sidecar}") from exc

    samples = np.frombuffer(path.read_bytes(), dtype="<i2")
    if len(samples) != n_samples:
        raise DatasetError(f"{path}: sidecar says {n_samples} samples, found {len(samples)}")
    return from_int16(samples), sample_rate


def write_wav(path: PathLike, waveform: np.ndarray, sample_rate: int) -> None:
    wavfile.write(str(path), sample_rate, to_int16(waveform))


def read_wav(path: PathLike) -> Tuple[np.ndarray, int]:
    sample_rate, data = wavfile.read(str(path))
    if data.ndim > 1:
        data = data[:, 0]
    if data.dtype.kind == "f":
        return data.astype(np.float64), int(sample_rate)
    return from_int16(data.astype("<i2")), int(sample_rate)


# ------------------------------------------------------------------------------
# Dataset metadata
# ------------------------------------------------------------------------------


def stft_preset_name(cfg: StftConfig) -> str:
    for name, preset in STFT_PRESETS.items():
        if preset == cfg:
            return name
    return "custom"


def _write_metadata(root: Path, data_cfg: DataConfig, stft_cfg: StftConfig) -> None:
    text = (
        render_section("data", data_cfg)
        + "\n"
        + render_section("dsp", stft_cfg, extra={"preset": stft_preset_name(stft_cfg)})
    )
    (root / "dataset.txt").write_text(text, encoding="utf-8")


def read_dataset_config(root: PathLike) -> Tuple[DataConfig, StftConfig]:
    """Generator settings and analysis config recorded next to a dataset."""
    path = Path(root) / "dataset.txt"
    if not path.exists():
        raise DatasetError(f"{root} has no dataset.txt")

    sections = parse_sections(path.read_text(encoding="utf-8"))
    dsp_pairs = [item for item in sections.get("dsp", []) if item[1] != "preset"]
    return (
        build_section("data", DataConfig(), sections.get("data", [])),
        build_section("dsp", StftConfig(), dsp_pairs),
    )


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def write_dataset(
    root: PathLike,
    utterances: Sequence[Utterance],
    data_cfg: DataConfig,
    stft_cfg: StftConfig,
) -> Path:
    """Write utterances in the dataset layout; returns the dataset root."""
    root = Path(root)
    (root / "scores").mkdir(parents=True, exist_ok=True)
    (root / "wav").mkdir(parents=True, exist_ok=True)

    ids = sorted(utt.id for utt in utterances)
    for utt in utterances:
        (root / "scores" / f"{utt.id}.txt").write_text(serialize_score(utt.score), encoding="utf-8")
        write_raw(root / "wav" / f"{utt.id}.raw", utt.waveform, utt.sample_rate)

    (root / "manifest.txt").write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    _write_metadata(root, data_cfg, stft_cfg)

    LOGGER.info("Wrote %d utterance(s) to %s", len(ids), root)
    return root


def read_manifest(root: PathLike) -> List[str]:
    path = Path(root) / "manifest.txt"
    if not path.exists():
        raise DatasetError(f"{root} has no manifest.txt")
    return sorted(line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip())


def read_dataset(root: PathLike, inventory: Optional[Sequence[str]] = None) -> List[Utterance]:
    """
    Load every utterance listed in the manifest, sorted by id.

    Parameters
    ----------
    inventory : Sequence[str] | None
        Phoneme inventory for score parsing; defaults to the one in dataset.txt.
    """
    root = Path(root)
    if inventory is None:
        inventory = read_dataset_config(root)[0].inventory

    utterances: List[Utterance] = []
    for utt_id in read_manifest(root):
        score_path = root / "scores" / f"{utt_id}.txt"
        if not score_path.exists():
            raise DatasetError(f"manifest lists {utt_id} but {score_path} is missing")
        score = parse_score(score_path.read_bytes(), inventory)
        waveform, sample_rate = read_raw(root / "wav" / f"{utt_id}.raw")
        utterances.append(Utterance(utt_id, score, waveform, sample_rate))

    return utterances


def split_ids(ids: Sequence[str], n_val: int) -> Tuple[List[str], List[str]]:
    """(train, validation): the last `n_val` ids in sorted order are validation."""
    ordered = sorted(ids)
    if n_val <= 0:
        return ordered, []
    return ordered[:-n_val], ordered[-n_val:]


def read_waveforms(root: PathLike) -> Dict[str, Tuple[np.ndarray, int]]:
    """
    Waveforms keyed by id, from a dataset layout or a flat directory of .wav files.
    """
    root = Path(root)
    if (root / "manifest.txt").exists():
        return {utt_id: read_raw(root / "wav" / f"{utt_id}.raw") for utt_id in read_manifest(root)}

    wavs = sorted(root.glob("*.wav"))
    if not wavs:
        raise DatasetError(f"{root} holds neither a manifest nor .wav files")
    return {p.stem: read_wav(p) for p in wavs}
