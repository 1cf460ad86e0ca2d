"""Turn a training checkpoint into a servable artifact directory.

Adapters are folded back into the base weights so serving needs no adapter
code; optionally an int8 copy of the merged weights is written alongside the
float one.
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import torch

from .errors import MergeFailure
from .model import build_model, merge_adapters

WEIGHTS_NAME = "model.pt"
INT8_WEIGHTS_NAME = "model-int8.pt"
CONFIG_NAME = "config.json"
SERVE_DOC_NAME = "serve.md"

# Kept with the artifact so downstream users see the trade-off at the point
# of deployment, not in a doc they never open.
INT8_NOTE = (
    "int8 conversion makes the artifact smaller and serving faster, but it "
    "slightly degrades output quality; spot-check against the float weights "
    "before relying on it."
)

_SERVE_TEMPLATE = """\
# Serving this artifact

Launch a chat-completions-compatible server on the merged weights:

```sh
finetune-glue serve --artifact {artifact} --host 127.0.0.1 --port 8211
```

Then point any chat-completions client at it, e.g. with an endpoint config:

```json
{{"name": "local-finetune", "base_url": "http://127.0.0.1:8211",
 "model": "{base_model}", "api_key_env": "LOCAL_API_KEY"}}
```

The server reads decoding parameters (`temperature`, `top_p`, `max_tokens`)
from each request; it does not impose its own.
{int8_section}"""

_INT8_SECTION = f"""
## int8 weights

`{INT8_WEIGHTS_NAME}` holds an int8 copy of the same weights (pass
`--int8` to `finetune-glue serve` to use it). {INT8_NOTE}
"""


def export_for_serving(
    checkpoint: str | Path,
    out_dir: str | Path | None = None,
    int8: bool = False,
) -> Path:
    """Merge adapters from `checkpoint` and write the serving directory.

    Returns the artifact directory; raises MergeFailure when the checkpoint
    is missing or incomplete.
    """
    checkpoint = Path(checkpoint)
    weights_file = checkpoint / "weights.pt"
    config_file = checkpoint / "train_config.json"
    if not checkpoint.is_dir():
        raise MergeFailure(f"checkpoint directory does not exist: {checkpoint}")
    for required in (weights_file, config_file):
        if not required.exists():
            raise MergeFailure(f"checkpoint is incomplete: missing {required.name}")

    train_config = json.loads(config_file.read_text(encoding="utf-8"))
    model = build_model(
        train_config["base_model"],
        adapter_rank=train_config["adapter_rank"],
        adapter_alpha=train_config["adapter_alpha"],
        quantize_base=train_config["quantize_base"],
        seed=train_config["seed"],
    )
    state = torch.load(weights_file, map_location="cpu", weights_only=True)
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected or (not train_config["adapter_rank"] and missing):
        raise MergeFailure(
            f"checkpoint weights do not fit base model "
            f"{train_config['base_model']!r}: missing={missing} "
            f"unexpected={unexpected}"
        )
    merged = merge_adapters(model)

    artifact = Path(out_dir) if out_dir else checkpoint.parent / "serving"
    artifact.mkdir(parents=True, exist_ok=True)
    torch.save(merged.state_dict(), artifact / WEIGHTS_NAME)

    notes = []
    if int8:
        torch.save(_int8_state(merged.state_dict()), artifact / INT8_WEIGHTS_NAME)
        notes.append(INT8_NOTE)
    config = {
        "base_model": train_config["base_model"],
        "merged_from": str(checkpoint),
        "step": train_config.get("step"),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "int8": int8,
        "notes": notes,
    }
    (artifact / CONFIG_NAME).write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8"
    )
    (artifact / SERVE_DOC_NAME).write_text(
        _SERVE_TEMPLATE.format(
            artifact=artifact,
            base_model=train_config["base_model"],
            int8_section=_INT8_SECTION if int8 else "",
        ),
        encoding="utf-8",
    )
    return artifact


def _int8_state(state: dict[str, torch.Tensor]) -> dict[str, dict]:
    """Per-tensor symmetric int8: store quantized values plus one scale each."""
    quantized = {}
    for name, tensor in state.items():
        scale = float(tensor.abs().max()) / 127.0 or 1.0
        quantized[name] = {
            "int8": torch.round(tensor / scale).to(torch.int8),
            "scale": scale,
        }
    return quantized


def load_artifact_state(artifact: str | Path, int8: bool = False) -> dict:
    """State dict from an artifact dir, dequantizing the int8 copy if asked."""
    artifact = Path(artifact)
    if not int8:
        return torch.load(
            artifact / WEIGHTS_NAME, map_location="cpu", weights_only=True
        )
    packed = torch.load(
        artifact / INT8_WEIGHTS_NAME, map_location="cpu", weights_only=True
    )
    return {
        name: entry["int8"].to(torch.float32) * entry["scale"]
        for name, entry in packed.items()
    }
