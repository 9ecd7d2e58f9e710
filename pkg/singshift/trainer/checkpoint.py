# ==============================================================================
# checkpoint.py  –  Per-epoch training snapshots
#
# Layout of checkpoints/epoch_N/:
#   state.pt      model, optimizer and scheduler state, RNG states, counters
#   config.txt    resolved run config (same text as the run's config.txt)
#   manifest.txt  version, epoch and parameter shapes (human-readable)
#
# N is the number of completed epochs; resuming from epoch_N continues at
# epoch index N.
# ==============================================================================

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import torch

from singshift.am.acoustic_model import AcousticModel
from singshift.trainer.config import ConfigError, ExperimentConfig
from singshift.trainer.steps import AM_ABSENT, TrainModels
from singshift.utils.logging_utils import setup_logger
from singshift.utils.run_config import parse_run_config, render_run_config
from singshift.voc.discriminators import Discriminators
from singshift.voc.generator import Generator

LOGGER = setup_logger("checkpoint")

CHECKPOINT_VERSION = 1
STATE_FILE = "state.pt"
CONFIG_FILE = "config.txt"
MANIFEST_FILE = "manifest.txt"

PathLike = Union[str, Path]


class CheckpointError(RuntimeError):
    """Missing, unreadable or incompatible checkpoint."""


@dataclass
class Snapshot:
    """Everything needed to continue (or synthesize from) a run."""

    exp: ExperimentConfig
    epoch: int  # completed epochs
    am_mode: str
    train_vocoder: bool
    models: Dict[str, Dict[str, torch.Tensor]]
    optimizers: Dict[str, Dict[str, Any]]
    schedulers: Dict[str, Dict[str, Any]]
    numpy_rng: Dict[str, Any]
    torch_rng: torch.Tensor
    counters: Dict[str, int]


def checkpoint_dir(out_dir: PathLike, epoch: int) -> Path:
    return Path(out_dir) / "checkpoints" / f"epoch_{epoch}"


def _manifest_text(snapshot: Snapshot) -> str:
    lines = [f"version = {CHECKPOINT_VERSION}", f"epoch = {snapshot.epoch}", f"am_mode = {snapshot.am_mode}"]
    for model_name, state in snapshot.models.items():
        for key, tensor in state.items():
            lines.append(f"{model_name}.{key} {' '.join(str(d) for d in tensor.shape)}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------------------
# Save / load
# ------------------------------------------------------------------------------


def save_checkpoint(path: PathLike, snapshot: Snapshot) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    payload = {
        "version": CHECKPOINT_VERSION,
        "epoch": snapshot.epoch,
        "am_mode": snapshot.am_mode,
        "train_vocoder": snapshot.train_vocoder,
        "models": snapshot.models,
        "optimizers": snapshot.optimizers,
        "schedulers": snapshot.schedulers,
        "numpy_rng": json.dumps(snapshot.numpy_rng),
        "torch_rng": snapshot.torch_rng,
        "counters": dict(snapshot.counters),
    }
    torch.save(payload, path / STATE_FILE)
    (path / CONFIG_FILE).write_text(render_run_config(snapshot.exp), encoding="utf-8")
    (path / MANIFEST_FILE).write_text(_manifest_text(snapshot), encoding="utf-8")

    LOGGER.info("Checkpoint written: %s", path)
    return path


def load_checkpoint(path: PathLike) -> Snapshot:
    """
    Raises
    ------
    CheckpointError
        Missing files, unreadable state or a version this code does not write.
    """
    path = Path(path)
    state_path, config_path = path / STATE_FILE, path / CONFIG_FILE
    if not state_path.exists() or not config_path.exists():
        raise CheckpointError(f"{path} is not a checkpoint directory")

    try:
        payload = torch.load(state_path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read {state_path}: {exc}") from exc

    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")

    try:
        exp = parse_run_config(config_path.read_text(encoding="utf-8"))
    except ConfigError as exc:
        raise CheckpointError(f"{config_path}: {exc}") from exc

    return Snapshot(
        exp=exp,
        epoch=int(payload["epoch"]),
        am_mode=str(payload["am_mode"]),
        train_vocoder=bool(payload["train_vocoder"]),
        models=payload["models"],
        optimizers=payload["optimizers"],
        schedulers=payload["schedulers"],
        numpy_rng=json.loads(payload["numpy_rng"]),
        torch_rng=payload["torch_rng"],
        counters={k: int(v) for k, v in payload["counters"].items()},
    )


def find_latest(out_dir: PathLike) -> Optional[Path]:
    """Newest epoch_N directory under out_dir/checkpoints, if any."""
    root = Path(out_dir) / "checkpoints"
    candidates = []
    for child in root.glob("epoch_*"):
        suffix = child.name.split("_", 1)[1]
        if suffix.isdigit() and (child / STATE_FILE).exists():
            candidates.append((int(suffix), child))
    return max(candidates)[1] if candidates else None


# ------------------------------------------------------------------------------
# Models from a checkpoint
# ------------------------------------------------------------------------------


def instantiate_models(exp: ExperimentConfig, with_am: bool = True, dtype: torch.dtype = torch.float32) -> TrainModels:
    """
    Fresh models; each gets its own seed so that adding or removing the
    acoustic model never shifts the vocoder's initial weights.
    """
    seed = exp.train.seed
    am = None
    if with_am:
        torch.manual_seed(seed)
        am = AcousticModel(exp.am).to(dtype)
    torch.manual_seed(seed + 1)
    generator = Generator(exp.voc).to(dtype)
    torch.manual_seed(seed + 2)
    discriminators = Discriminators(exp.voc).to(dtype)
    return TrainModels(am=am, generator=generator, discriminators=discriminators)


def load_models(path: PathLike, dtype: torch.dtype = torch.float32) -> Tuple[ExperimentConfig, TrainModels]:
    """Config and weights of a checkpoint, for synthesis or a frozen phase."""
    snapshot = load_checkpoint(path)
    has_am = snapshot.am_mode != AM_ABSENT and "am" in snapshot.models
    models = instantiate_models(snapshot.exp, with_am=has_am, dtype=dtype)

    try:
        if models.am is not None:
            models.am.load_state_dict(snapshot.models["am"])
        models.generator.load_state_dict(snapshot.models["generator"])
        models.discriminators.load_state_dict(snapshot.models["discriminators"])
    except (KeyError, RuntimeError) as exc:
        raise CheckpointError(f"{path}: weights do not fit the recorded config: {exc}") from exc

    return snapshot.exp, models


def numpy_rng_state(rng: np.random.Generator) -> Dict[str, Any]:
    return rng.bit_generator.state


def restore_numpy_rng(state: Dict[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
