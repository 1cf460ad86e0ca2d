from __future__ import annotations

import json

import pytest
import torch

from finetune_glue.data import (
    BOS,
    EOS,
    PAD,
    SftExample,
    encode_example,
    load_sft_file,
    make_batch,
)
from finetune_glue.errors import SchemaMismatch


def test_load_valid_file(sft_file):
    examples = load_sft_file(sft_file)
    assert len(examples) == 8
    assert all(isinstance(example, SftExample) for example in examples)
    assert json.loads(examples[0].output)["what"]


def write_lines(tmp_path, lines):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_malformed_json_names_the_line(tmp_path):
    good = json.dumps({"instruction": "i", "input": "x", "output": "o"})
    path = write_lines(tmp_path, [good, good, "{not json"])
    with pytest.raises(SchemaMismatch) as err:
        load_sft_file(path)
    assert err.value.line_no == 3
    assert "bad.jsonl:3" in str(err.value)


def test_missing_key_rejected(tmp_path):
    path = write_lines(tmp_path, [json.dumps({"instruction": "i", "input": "x"})])
    with pytest.raises(SchemaMismatch) as err:
        load_sft_file(path)
    assert "output" in str(err.value)
    assert err.value.line_no == 1


def test_non_string_field_rejected(tmp_path):
    record = {"instruction": "i", "input": "x", "output": ["not", "a", "string"]}
    path = write_lines(tmp_path, [json.dumps(record)])
    with pytest.raises(SchemaMismatch) as err:
        load_sft_file(path)
    assert "'output'" in str(err.value)


def test_non_object_line_rejected(tmp_path):
    path = write_lines(tmp_path, ['["a", "list"]'])
    with pytest.raises(SchemaMismatch):
        load_sft_file(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("\n\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch) as err:
        load_sft_file(path)
    assert "no records" in str(err.value)


def test_blank_lines_are_skipped(tmp_path):
    good = json.dumps({"instruction": "i", "input": "x", "output": "o"})
    path = write_lines(tmp_path, [good, "", good])
    assert len(load_sft_file(path)) == 2


def test_encode_budgets_and_eos():
    example = SftExample(instruction="abc", input="defgh", output="x" * 50)
    prompt, target = encode_example(example, source_max_len=6, target_max_len=10)
    assert prompt[0] == BOS
    assert len(prompt) == 1 + 6  # BOS plus the source budget
    assert len(target) == 10
    assert target[-1] == EOS  # EOS survives truncation
    full_prompt, full_target = encode_example(example, 750, 1024)
    assert bytes(full_prompt[1:]).decode() == "abc\ndefgh\n"
    assert len(full_target) == 51


def test_batch_masks_exactly_the_target_span():
    examples = [
        SftExample("i", "in", "out"),
        SftExample("longer instruction", "longer input", "y"),
    ]
    tokens, labels, mask = make_batch(examples, [0, 1], 100, 100)
    assert tokens.shape == labels.shape == mask.shape
    for row, example in enumerate(examples):
        prompt, target = encode_example(example, 100, 100)
        assert int(mask[row].sum()) == len(target)
        assert labels[row][mask[row]].tolist() == target
    # Padding positions never contribute.
    assert not mask[tokens == PAD].any()


def test_batch_rows_align_next_token():
    examples = [SftExample("ab", "cd", "ef")]
    tokens, labels, _ = make_batch(examples, [0], 100, 100)
    sequence = encode_example(examples[0], 100, 100)
    flat = sequence[0] + sequence[1]
    assert tokens[0].tolist() == flat[:-1]
    assert labels[0].tolist() == flat[1:]


def test_repeated_indices_allowed(sft_file):
    examples = load_sft_file(sft_file)
    tokens, _, _ = make_batch(examples, [0, 0, 0], 50, 50)
    assert tokens.shape[0] == 3
    assert torch.equal(tokens[0], tokens[1])
