from __future__ import annotations

import json

import pytest
import torch

from finetune_glue.errors import MergeFailure
from finetune_glue.export import (
    INT8_NOTE,
    export_for_serving,
    load_artifact_state,
)
from finetune_glue.model import BASE_MODELS, ByteLM, build_model, merge_adapters
from finetune_glue.training import TrainConfig, train


@pytest.fixture(scope="module")
def checkpoint(sft_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    result = train(
        TrainConfig(
            train_path=str(sft_file),
            output_dir=str(out),
            base_model="micro-byte-lm",
            source_max_len=120,
            target_max_len=120,
            max_steps=10,
            checkpoint_every=10,
            adapter_rank=4,
            batch_size=2,
            seed=0,
        )
    )
    return result.final_checkpoint


def test_merged_artifact_contents(checkpoint, tmp_path):
    artifact = export_for_serving(checkpoint, out_dir=tmp_path / "art")
    names = sorted(path.name for path in artifact.iterdir())
    assert names == ["config.json", "model.pt", "serve.md"]
    config = json.loads((artifact / "config.json").read_text())
    assert config["base_model"] == "micro-byte-lm"
    assert config["int8"] is False and config["notes"] == []
    assert "chat-completions" in (artifact / "serve.md").read_text()


def test_merge_preserves_model_function(checkpoint):
    """The merged dense model computes the same logits as base + adapters."""
    train_config = json.loads((checkpoint / "train_config.json").read_text())
    model = build_model(
        train_config["base_model"],
        adapter_rank=train_config["adapter_rank"],
        adapter_alpha=train_config["adapter_alpha"],
        quantize_base=train_config["quantize_base"],
        seed=train_config["seed"],
    )
    state = torch.load(checkpoint / "weights.pt", weights_only=True)
    model.load_state_dict(state, strict=False)
    model.eval()
    merged = merge_adapters(model)

    ids = torch.randint(0, 256, (2, 20), generator=torch.Generator().manual_seed(5))
    with torch.no_grad():
        assert torch.allclose(model(ids), merged(ids), atol=1e-5)
    assert not any("lora_" in key for key in merged.state_dict())


def test_exported_state_loads_into_plain_model(checkpoint, tmp_path):
    artifact = export_for_serving(checkpoint, out_dir=tmp_path / "art")
    plain = ByteLM(BASE_MODELS["micro-byte-lm"])
    plain.load_state_dict(load_artifact_state(artifact))  # strict by default


def test_int8_artifact_and_provenance_note(checkpoint, tmp_path):
    artifact = export_for_serving(checkpoint, out_dir=tmp_path / "art8", int8=True)
    assert (artifact / "model-int8.pt").exists()
    config = json.loads((artifact / "config.json").read_text())
    assert config["int8"] is True
    assert INT8_NOTE in config["notes"]
    assert INT8_NOTE in (artifact / "serve.md").read_text()

    float_state = load_artifact_state(artifact)
    int8_state = load_artifact_state(artifact, int8=True)
    for name, tensor in float_state.items():
        # Dequantized weights sit within half a quantization step.
        step = tensor.abs().max() / 127.0
        assert (int8_state[name] - tensor).abs().max() <= step / 2 + 1e-8


def test_missing_checkpoint_is_merge_failure(tmp_path):
    with pytest.raises(MergeFailure) as err:
        export_for_serving(tmp_path / "ghost")
    assert "does not exist" in str(err.value)


def test_incomplete_checkpoint_is_merge_failure(checkpoint, tmp_path):
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "train_config.json").write_text(
        (checkpoint / "train_config.json").read_text()
    )
    with pytest.raises(MergeFailure) as err:
        export_for_serving(broken)
    assert "weights.pt" in str(err.value)


def test_foreign_weights_are_merge_failure(checkpoint, tmp_path):
    alien = tmp_path / "alien"
    alien.mkdir()
    (alien / "train_config.json").write_text(
        (checkpoint / "train_config.json").read_text()
    )
    torch.save({"blocks.9.bogus.lora_a": torch.zeros(2, 2)}, alien / "weights.pt")
    with pytest.raises(MergeFailure):
        export_for_serving(alien)


def test_default_artifact_location(checkpoint):
    artifact = export_for_serving(checkpoint)
    assert artifact == checkpoint.parent / "serving"
    assert (artifact / "model.pt").exists()
