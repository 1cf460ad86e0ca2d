"""A deliberately small byte-level causal LM with optional low-rank adapters.

The adapter scheme is the usual frozen-base + trainable A/B pair on the
attention query and value projections: forward adds scale * B(A(x)) on top of
the frozen linear, and merging folds scale * (B @ A) into the base weight so
the served model is a plain dense network again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .data import VOCAB_SIZE


@dataclass(frozen=True)
class ModelSpec:
    d_model: int
    n_layers: int
    n_heads: int
    max_seq_len: int

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads:
            raise ValueError("d_model must divide evenly into heads")


# Registry of toy architectures; checkpoints store the id, not the numbers.
BASE_MODELS: dict[str, ModelSpec] = {
    "tiny-byte-lm": ModelSpec(d_model=32, n_layers=2, n_heads=2, max_seq_len=2048),
    "micro-byte-lm": ModelSpec(d_model=16, n_layers=1, n_heads=2, max_seq_len=2048),
}


class LoraLinear(nn.Module):
    """Frozen nn.Linear plus a trainable rank-r update."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float) -> None:
        super().__init__()
        self.base = base
        for parameter in self.base.parameters():
            parameter.requires_grad_(False)
        self.rank = rank
        self.scale = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        # B starts at zero so the adapted model is exactly the base model.
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scale * nn.functional.linear(
            nn.functional.linear(x, self.lora_a), self.lora_b
        )

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + self.scale * (self.lora_b @ self.lora_a)


class CausalSelfAttention(nn.Module):
    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        self.n_heads = spec.n_heads
        self.head_dim = spec.d_model // spec.n_heads
        self.q_proj = nn.Linear(spec.d_model, spec.d_model)
        self.k_proj = nn.Linear(spec.d_model, spec.d_model)
        self.v_proj = nn.Linear(spec.d_model, spec.d_model)
        self.o_proj = nn.Linear(spec.d_model, spec.d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, width = x.shape
        shape = (batch, length, self.n_heads, self.head_dim)
        q = self.q_proj(x).view(shape).transpose(1, 2)
        k = self.k_proj(x).view(shape).transpose(1, 2)
        v = self.v_proj(x).view(shape).transpose(1, 2)
        y = nn.functional.scaled_dot_product_attention(q, k, v, is_causal=True)
        return self.o_proj(y.transpose(1, 2).reshape(batch, length, width))


class Block(nn.Module):
    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        self.ln_attn = nn.LayerNorm(spec.d_model)
        self.attn = CausalSelfAttention(spec)
        self.ln_mlp = nn.LayerNorm(spec.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(spec.d_model, 4 * spec.d_model),
            nn.GELU(),
            nn.Linear(4 * spec.d_model, spec.d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln_attn(x))
        return x + self.mlp(self.ln_mlp(x))


class ByteLM(nn.Module):
    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        self.spec = spec
        self.token_embedding = nn.Embedding(VOCAB_SIZE, spec.d_model)
        self.position_embedding = nn.Embedding(spec.max_seq_len, spec.d_model)
        self.blocks = nn.ModuleList(Block(spec) for _ in range(spec.n_layers))
        self.ln_final = nn.LayerNorm(spec.d_model)
        self.head = nn.Linear(spec.d_model, VOCAB_SIZE, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.shape[1] > self.spec.max_seq_len:
            ids = ids[:, -self.spec.max_seq_len :]
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_final(x))


ADAPTED_PROJECTIONS = ("q_proj", "v_proj")


def fake_quantize_int8_(module: nn.Module) -> None:
    """Round every weight matrix to its own 255-level int8 grid, in place."""
    with torch.no_grad():
        for parameter in module.parameters():
            scale = parameter.abs().max() / 127.0
            if scale > 0:
                parameter.copy_(torch.round(parameter / scale) * scale)


def attach_adapters(model: ByteLM, rank: int, alpha: float) -> ByteLM:
    """Freeze the base model and wrap the q/v projections; rank 0 is full FT."""
    if rank == 0:
        return model
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    for block in model.blocks:
        for name in ADAPTED_PROJECTIONS:
            setattr(block.attn, name, LoraLinear(getattr(block.attn, name), rank, alpha))
    return model


def build_model(
    base_model: str,
    adapter_rank: int = 0,
    adapter_alpha: float = 16.0,
    quantize_base: bool = False,
    seed: int = 0,
) -> ByteLM:
    if base_model not in BASE_MODELS:
        known = ", ".join(sorted(BASE_MODELS))
        raise ValueError(f"unknown base model {base_model!r}; known: {known}")
    torch.manual_seed(seed)
    model = ByteLM(BASE_MODELS[base_model])
    if quantize_base:
        fake_quantize_int8_(model)
    return attach_adapters(model, adapter_rank, adapter_alpha)


def adapter_state(model: ByteLM) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_" in name
    }


def merge_adapters(model: ByteLM) -> ByteLM:
    """Fold adapters into the base weights and return a plain dense model."""
    merged = ByteLM(model.spec)
    state = {}
    for name, tensor in model.state_dict().items():
        if "lora_" in name:
            continue
        state[name.replace(".base.", ".")] = tensor.clone()
    for block_index, block in enumerate(model.blocks):
        for proj in ADAPTED_PROJECTIONS:
            layer = getattr(block.attn, proj)
            if isinstance(layer, LoraLinear):
                key = f"blocks.{block_index}.attn.{proj}.weight"
                state[key] = layer.merged_weight().detach().clone()
    merged.load_state_dict(state)
    merged.eval()
    return merged
