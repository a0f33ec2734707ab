"""Model zoo: a dependency-light hashing classifier for CPU runs, builders
for HuggingFace checkpoints when available, and a minimal LoRA wrapper."""

from __future__ import annotations

import re
import zlib

import torch
from torch import nn

_TOKEN_RE = re.compile(r"\w+|[一-鿿]", re.UNICODE)


class HashTokenizer:
    """Stable hashing of word/CJK-character tokens into a fixed id space."""

    def __init__(self, buckets: int = 4096):
        self.buckets = buckets

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        tokens = _TOKEN_RE.findall(text.lower())
        if max_len is not None:
            tokens = tokens[:max_len]
        return [zlib.crc32(t.encode("utf-8")) % self.buckets for t in tokens]


class HashBowClassifier(nn.Module):
    """Mean bag-of-hashed-embeddings followed by a small MLP head; the CPU
    fallback for encoder fine-tuning runs."""

    def __init__(self, buckets: int = 4096, dim: int = 64, classes: int = 2):
        super().__init__()
        self.buckets = buckets
        self.embedding = nn.EmbeddingBag(buckets, dim, mode="mean")
        self.hidden = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, classes)

    def forward(self, flat_ids: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        pooled = self.embedding(flat_ids, offsets)
        return self.out(torch.relu(self.hidden(pooled)))


def batch_bags(encoded: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    """Flatten variable-length id lists into EmbeddingBag inputs."""
    offsets = []
    flat: list[int] = []
    for ids in encoded:
        offsets.append(len(flat))
        flat.extend(ids)
    return (
        torch.tensor(flat, dtype=torch.long),
        torch.tensor(offsets, dtype=torch.long),
    )


#: Base-model name that selects the built-in CPU classifier.
HASH_BOW = "hash-bow"
#: Base-model name that selects the built-in tiny causal LM (tests, smoke).
TINY_CAUSAL = "tiny-causal"


def linear_warmup(optimizer, warmup_steps: int):
    def factor(step: int) -> float:
        if warmup_steps <= 0:
            return 1.0
        return min(1.0, (step + 1) / warmup_steps)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


# ---------------------------------------------------------------------------
# HuggingFace paths (optional dependency, network-reachable checkpoints)


def load_hf_classifier(name: str, max_seq_length: int):
    try:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError(
            "transformers is required for HuggingFace base models; install "
            "mftrainer[hf] or use base model 'hash-bow'"
        ) from exc
    tokenizer = AutoTokenizer.from_pretrained(name, model_max_length=max_seq_length)
    model = AutoModelForSequenceClassification.from_pretrained(name, num_labels=2)
    return tokenizer, model


class ByteTokenizer:
    """Self-contained byte-level tokenizer for the built-in causal LM."""

    PAD = 256
    EOS = 257
    VOCAB = 258

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids: list[int]) -> str:
        return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")


def build_causal(name: str, max_seq_length: int):
    """(tokenizer, model, eos_id) for an instruct base; ``tiny-causal``
    builds a small randomly initialized llama-architecture model offline."""
    if name == TINY_CAUSAL:
        try:
            from transformers import LlamaConfig, LlamaForCausalLM
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError(
                "the multiclass_lora task requires transformers; install mftrainer[hf]"
            ) from exc

        tokenizer = ByteTokenizer()
        config = LlamaConfig(
            vocab_size=ByteTokenizer.VOCAB,
            hidden_size=64,
            intermediate_size=128,
            num_hidden_layers=2,
            num_attention_heads=4,
            num_key_value_heads=4,
            max_position_embeddings=max_seq_length,
            pad_token_id=ByteTokenizer.PAD,
            eos_token_id=ByteTokenizer.EOS,
        )
        return tokenizer, LlamaForCausalLM(config), ByteTokenizer.EOS
    try:
        from transformers import AutoModelForCausalLM, AutoTokenizer
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError(
            "the multiclass_lora task requires transformers; install mftrainer[hf]"
        ) from exc
    tokenizer = AutoTokenizer.from_pretrained(name, model_max_length=max_seq_length)
    model = AutoModelForCausalLM.from_pretrained(name)
    return tokenizer, model, tokenizer.eos_token_id


# ---------------------------------------------------------------------------
# LoRA


class LoraLinear(nn.Module):
    """Frozen base linear plus a trainable rank-r update (B @ A, scaled)."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float | None = None):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.rank = rank
        self.scaling = (alpha or rank) / rank
        self.lora_a = nn.Parameter(torch.zeros(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=5**0.5)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * ((x @ self.lora_a.T) @ self.lora_b.T)


def apply_lora(model: nn.Module, targets: list[str], rank: int) -> list[str]:
    """Replace every linear module whose name ends with a target (e.g.
    ``q_proj``) by a LoRA-wrapped version; freezes everything else and
    returns the wrapped module names."""
    for param in model.parameters():
        param.requires_grad_(False)
    wrapped: list[str] = []
    for name, module in list(model.named_modules()):
        leaf = name.rsplit(".", 1)[-1]
        if leaf in targets and isinstance(module, nn.Linear):
            parent_name, _, child = name.rpartition(".")
            parent = model.get_submodule(parent_name) if parent_name else model
            setattr(parent, child, LoraLinear(module, rank))
            wrapped.append(name)
    if not wrapped:
        raise ValueError(f"no linear modules matched LoRA targets {targets}")
    return wrapped


def lora_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }
