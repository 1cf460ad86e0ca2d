"""Instruction-record loading and byte-level batch packing.

The only input format is the exported JSON Lines schema
`{"instruction": str, "input": str, "output": str}`; nothing else from the
exporting toolkit is imported or assumed. Text is tokenized as raw UTF-8
bytes, so the vocabulary is fixed and no tokenizer artifact ships with a
checkpoint.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import SchemaMismatch

BOS = 256
EOS = 257
PAD = 258
VOCAB_SIZE = 259

SFT_KEYS = ("instruction", "input", "output")


@dataclass(frozen=True)
class SftExample:
    instruction: str
    input: str
    output: str


def load_sft_file(path: str | Path) -> list[SftExample]:
    """Read and validate one JSON Lines file; blank lines are skipped.

    Raises SchemaMismatch naming the 1-based line of the first bad record.
    """
    path = Path(path)
    examples: list[SftExample] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaMismatch(path, line_no, f"not valid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise SchemaMismatch(path, line_no, "line is not a JSON object")
            missing = [key for key in SFT_KEYS if key not in obj]
            if missing:
                raise SchemaMismatch(path, line_no, f"missing keys: {', '.join(missing)}")
            for key in SFT_KEYS:
                if not isinstance(obj[key], str):
                    raise SchemaMismatch(path, line_no, f"field {key!r} must be a string")
            examples.append(
                SftExample(obj["instruction"], obj["input"], obj["output"])
            )
    if not examples:
        raise SchemaMismatch(path, 0, "file contains no records")
    return examples


def encode_example(
    example: SftExample, source_max_len: int, target_max_len: int
) -> tuple[list[int], list[int]]:
    """(prompt ids, target ids); budgets are in tokens, i.e. bytes here.

    The target keeps its closing EOS even when truncated, matching what the
    serving loop is trained to emit.
    """
    prompt = list(f"{example.instruction}\n{example.input}\n".encode("utf-8"))
    target = list(example.output.encode("utf-8"))
    return (
        [BOS] + prompt[:source_max_len],
        target[: target_max_len - 1] + [EOS],
    )


def make_batch(
    examples: list[SftExample],
    indices: list[int],
    source_max_len: int,
    target_max_len: int,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pack examples into (tokens, labels, loss_mask), right-padded.

    labels[t] is the next token after tokens[t]; the mask selects exactly the
    target span, so prompt and padding positions carry no gradient.
    """
    rows = []
    for index in indices:
        prompt, target = encode_example(examples[index], source_max_len, target_max_len)
        rows.append((prompt + target, len(prompt)))
    width = max(len(sequence) for sequence, _ in rows)

    tokens = torch.full((len(rows), width - 1), PAD, dtype=torch.long)
    labels = torch.full((len(rows), width - 1), PAD, dtype=torch.long)
    mask = torch.zeros((len(rows), width - 1), dtype=torch.bool)
    for row, (sequence, prompt_len) in enumerate(rows):
        ids = torch.tensor(sequence, dtype=torch.long)
        tokens[row, : len(sequence) - 1] = ids[:-1]
        labels[row, : len(sequence) - 1] = ids[1:]
        mask[row, prompt_len - 1 : len(sequence) - 1] = True
    return tokens, labels, mask
