"""Chat-completions-compatible HTTP server over an exported artifact.

Decoding parameters come from each request; nothing is hardcoded here.
temperature 0 (or omitted) decodes greedily and is fully deterministic.
"""
from __future__ import annotations

import json
import time
import uuid
from pathlib import Path

import torch

from .data import BOS, EOS
from .export import CONFIG_NAME, load_artifact_state
from .model import BASE_MODELS, ByteLM

DEFAULT_MAX_TOKENS = 256


class InferenceSession:
    """A loaded merged model plus a byte-level generate loop."""

    def __init__(self, artifact: str | Path, int8: bool = False) -> None:
        artifact = Path(artifact)
        config = json.loads((artifact / CONFIG_NAME).read_text(encoding="utf-8"))
        self.base_model: str = config["base_model"]
        self.model = ByteLM(BASE_MODELS[self.base_model])
        self.model.load_state_dict(load_artifact_state(artifact, int8=int8))
        self.model.eval()

    @torch.no_grad()
    def generate(
        self,
        prompt: str,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        temperature: float = 0.0,
        top_p: float = 1.0,
        seed: int | None = None,
    ) -> str:
        ids = [BOS] + list(prompt.encode("utf-8"))
        generator = torch.Generator()
        generator.manual_seed(seed if seed is not None else 0)
        produced: list[int] = []
        for _ in range(max_tokens):
            tokens = torch.tensor([ids], dtype=torch.long)
            logits = self.model(tokens)[0, -1]
            next_id = _choose(logits, temperature, top_p, generator)
            if next_id == EOS:
                break
            ids.append(next_id)
            produced.append(next_id)
        return bytes(byte for byte in produced if byte < 256).decode(
            "utf-8", errors="replace"
        )


def _choose(
    logits: torch.Tensor, temperature: float, top_p: float, generator: torch.Generator
) -> int:
    if temperature <= 0.0:
        return int(torch.argmax(logits))
    probabilities = torch.softmax(logits / temperature, dim=-1)
    if top_p < 1.0:
        ordered, order = torch.sort(probabilities, descending=True)
        keep = torch.cumsum(ordered, dim=-1) - ordered < top_p
        keep[0] = True  # always keep the most likely token
        filtered = torch.zeros_like(probabilities)
        filtered[order[keep]] = probabilities[order[keep]]
        probabilities = filtered / filtered.sum()
    return int(torch.multinomial(probabilities, 1, generator=generator))


def _messages_to_prompt(messages: list[dict]) -> str:
    """Flatten a chat into the instruction\ninput\n layout used in training."""
    parts = [message.get("content", "") for message in messages]
    return "\n".join(part for part in parts if part) + "\n"


def create_app(artifact: str | Path, int8: bool = False):
    from fastapi import FastAPI, HTTPException

    session = InferenceSession(artifact, int8=int8)
    app = FastAPI(title="finetune-glue", version="0.1.0")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "model": session.base_model}

    @app.post("/chat/completions")
    def chat_completions(payload: dict) -> dict:
        messages = payload.get("messages")
        if not isinstance(messages, list) or not messages:
            raise HTTPException(status_code=400, detail="messages must be a list")
        text = session.generate(
            _messages_to_prompt(messages),
            max_tokens=int(payload.get("max_tokens", DEFAULT_MAX_TOKENS)),
            temperature=float(payload.get("temperature", 0.0)),
            top_p=float(payload.get("top_p", 1.0)),
            seed=payload.get("seed"),
        )
        return {
            "id": f"chatcmpl-{uuid.uuid4().hex[:12]}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": payload.get("model", session.base_model),
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }
            ],
            "usage": {
                "prompt_tokens": sum(len(m.get("content", "")) for m in messages),
                "completion_tokens": len(text),
                "total_tokens": sum(len(m.get("content", "")) for m in messages)
                + len(text),
            },
        }

    return app


def main(argv: list[str] | None = None) -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--artifact", required=True)
    parser.add_argument("--int8", action="store_true")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8211)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.artifact, int8=args.int8), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
