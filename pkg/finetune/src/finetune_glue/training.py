"""Adapter training loop: instruction records in, checkpoints and loss.csv out."""
from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .data import load_sft_file, make_batch
from .errors import OutOfMemory
from .model import BASE_MODELS, ByteLM, adapter_state, build_model

CHECKPOINT_PREFIX = "checkpoint-"
LOSS_LOG_NAME = "loss.csv"


@dataclass
class TrainConfig:
    train_path: str
    output_dir: str
    base_model: str = "tiny-byte-lm"
    validation_path: str | None = None
    # Budgets are in tokens (bytes for this model family): article side and
    # generated-answer side respectively.
    source_max_len: int = 750
    target_max_len: int = 1024
    max_steps: int = 1000
    checkpoint_every: int = 500
    adapter_rank: int = 8
    adapter_alpha: float = 16.0
    quantize_base: bool = False
    # Not dictated by the task definition; recorded here so every checkpoint
    # carries the values it was actually trained with.
    learning_rate: float = 1e-3
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.checkpoint_every < 1:
            raise ValueError(
                f"checkpoint_every must be >= 1, got {self.checkpoint_every}"
            )
        if self.max_steps < self.checkpoint_every:
            raise ValueError(
                f"max_steps ({self.max_steps}) must be >= checkpoint_every "
                f"({self.checkpoint_every}); the schedule would never fire"
            )
        if self.adapter_rank < 0:
            raise ValueError("adapter_rank must be >= 0 (0 trains all weights)")
        if self.base_model not in BASE_MODELS:
            raise ValueError(
                f"unknown base model {self.base_model!r}; known: "
                + ", ".join(sorted(BASE_MODELS))
            )
        if not Path(self.train_path).exists():
            raise FileNotFoundError(f"train_path does not exist: {self.train_path}")
        if self.validation_path and not Path(self.validation_path).exists():
            raise FileNotFoundError(
                f"validation_path does not exist: {self.validation_path}"
            )


@dataclass(frozen=True)
class TrainResult:
    final_checkpoint: Path
    checkpoints: tuple[Path, ...]
    loss_log: Path
    initial_loss: float
    final_loss: float
    validation_loss: float | None = None


def _loss_on(model: ByteLM, batch) -> torch.Tensor:
    tokens, labels, mask = batch
    logits = model(tokens)
    per_token = nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), reduction="none"
    )
    selected = per_token[mask.reshape(-1)]
    return selected.mean()


def _save_checkpoint(model: ByteLM, config: TrainConfig, step: int) -> Path:
    directory = Path(config.output_dir) / f"{CHECKPOINT_PREFIX}{step}"
    directory.mkdir(parents=True, exist_ok=True)
    state = adapter_state(model) if config.adapter_rank else model.state_dict()
    torch.save(state, directory / "weights.pt")
    payload = dict(asdict(config), step=step)
    (directory / "train_config.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    return directory


def _wrap_oom(exc: BaseException, config: TrainConfig) -> OutOfMemory:
    return OutOfMemory(
        f"allocation failed during training: {exc}. Try a smaller batch_size "
        f"(currently {config.batch_size}), a shorter source_max_len/"
        f"target_max_len, or a smaller base model."
    )


def train(config: TrainConfig) -> TrainResult:
    """Run the loop and return checkpoint paths plus the per-step loss log.

    Checkpoints land at every checkpoint_every-th step; the final step is
    always checkpointed even when it is off-schedule, so a short smoke run
    still produces a servable artifact.
    """
    examples = load_sft_file(config.train_path)
    model = build_model(
        config.base_model,
        adapter_rank=config.adapter_rank,
        adapter_alpha=config.adapter_alpha,
        quantize_base=config.quantize_base,
        seed=config.seed,
    )
    model.train()
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.learning_rate)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = random.Random(config.seed)
    rows: list[tuple[int, float]] = []
    checkpoints: list[Path] = []

    for step in range(1, config.max_steps + 1):
        indices = [order.randrange(len(examples)) for _ in range(config.batch_size)]
        try:
            batch = make_batch(
                examples, indices, config.source_max_len, config.target_max_len
            )
            loss = _loss_on(model, batch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        except torch.cuda.OutOfMemoryError as exc:
            raise _wrap_oom(exc, config) from exc
        except MemoryError as exc:
            raise _wrap_oom(exc, config) from exc
        except RuntimeError as exc:
            if "memory" in str(exc).lower():
                raise _wrap_oom(exc, config) from exc
            raise
        rows.append((step, float(loss.detach())))
        if step % config.checkpoint_every == 0:
            checkpoints.append(_save_checkpoint(model, config, step))
    if config.max_steps % config.checkpoint_every != 0:
        checkpoints.append(_save_checkpoint(model, config, config.max_steps))

    loss_log = out_dir / LOSS_LOG_NAME
    with loss_log.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["step", "loss"])
        writer.writerows(rows)

    validation_loss = None
    if config.validation_path:
        validation_loss = evaluate(model, config)

    return TrainResult(
        final_checkpoint=checkpoints[-1],
        checkpoints=tuple(checkpoints),
        loss_log=loss_log,
        initial_loss=rows[0][1],
        final_loss=rows[-1][1],
        validation_loss=validation_loss,
    )


def evaluate(model: ByteLM, config: TrainConfig) -> float:
    """Mean masked loss over the whole validation file, batched in file order."""
    examples = load_sft_file(config.validation_path)
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(examples), config.batch_size):
            indices = list(range(start, min(start + config.batch_size, len(examples))))
            batch = make_batch(
                examples, indices, config.source_max_len, config.target_max_len
            )
            total += float(_loss_on(model, batch)) * len(indices)
            count += len(indices)
    model.train()
    return total / count
