"""Instruct-model fine-tuning with low-rank adapters."""

from __future__ import annotations

import logging
import random
from pathlib import Path

import torch

from .data import (
    RenderedExample,
    load_ordered,
    load_train_file,
    prediction_record,
    prepare_chat_examples,
    render_chat,
    write_predictions,
)
from .jobspec import TASK_LORA, JobSpec
from .models import apply_lora, build_causal, linear_warmup, lora_state_dict
from .parsing import parse_reply
from .records import TrainedModelRecord

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100
MAX_NEW_TOKENS = 64


def _encode(tokenizer, text: str) -> list[int]:
    return tokenizer.encode(text)


def _collate(
    batch: list[RenderedExample], tokenizer, pad_id: int, max_seq_length: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad a batch; the loss mask covers only the assistant reply tokens."""
    encoded = []
    prompt_lens = []
    for example in batch:
        ids = _encode(tokenizer, example.full)[:max_seq_length]
        encoded.append(ids)
        prompt_lens.append(min(len(_encode(tokenizer, example.prompt)), len(ids)))
    width = max(len(ids) for ids in encoded)
    input_ids = torch.full((len(encoded), width), pad_id, dtype=torch.long)
    attention = torch.zeros((len(encoded), width), dtype=torch.long)
    labels = torch.full((len(encoded), width), IGNORE_INDEX, dtype=torch.long)
    for row, (ids, prompt_len) in enumerate(zip(encoded, prompt_lens)):
        input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        attention[row, : len(ids)] = 1
        labels[row, prompt_len : len(ids)] = torch.tensor(
            ids[prompt_len:], dtype=torch.long
        )
    return input_ids, attention, labels


def _resolve_quantization(requested: str) -> str:
    if requested in ("none", "", None):
        return "none"
    if requested == "4bit":
        if torch.cuda.is_available():
            try:
                import bitsandbytes  # noqa: F401

                return "4bit"
            except ImportError:
                pass
        logger.warning(
            "4-bit quantization unavailable on this host; training in full precision"
        )
        return "none"
    raise ValueError(f"unknown quantization setting {requested!r}")


def train_lora(spec: JobSpec, out_dir: str | Path, device: str = "cpu") -> TrainedModelRecord:
    """Fit rank-r adapters on the configured projections; records exceeding
    the sequence budget are dropped and counted in the record."""
    if spec.task != TASK_LORA:
        raise ValueError(f"train_lora got task {spec.task!r}")
    spec.validate()
    hp = dict(spec.hyperparameters)
    seed = int(hp["seed"])
    max_seq_length = int(hp["max_seq_length"])
    system = Path(spec.prompt_file).read_text(encoding="utf-8")

    tokenizer, model, _eos = build_causal(spec.base_model, max_seq_length)
    docs = load_ordered(spec.train_files)
    examples, dropped = prepare_chat_examples(
        docs, system, lambda text: len(_encode(tokenizer, text)), max_seq_length
    )
    if dropped:
        logger.warning("dropped %d records over %d tokens", dropped, max_seq_length)
    if not examples:
        raise ValueError("no training records fit the sequence budget")

    quant_effective = _resolve_quantization(str(hp["quantization"]))
    wrapped = apply_lora(model, list(hp["adapter_targets"]), int(hp["adapter_rank"]))
    model.to(device)
    torch.manual_seed(seed)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(
        trainable, lr=float(hp["learning_rate"]), weight_decay=float(hp["weight_decay"])
    )
    scheduler = linear_warmup(optimizer, int(hp.get("warmup_steps", 0)))
    pad_id = getattr(tokenizer, "PAD", None)
    if pad_id is None:  # pragma: no cover - HF tokenizer path
        pad_id = tokenizer.pad_token_id or tokenizer.eos_token_id

    batch_size = int(hp["batch_size"])
    order_rng = random.Random(seed)
    log_lines: list[str] = []
    step = 0
    model.train()
    for epoch in range(int(hp["epochs"])):
        order = list(range(len(examples)))
        order_rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            batch = [examples[i] for i in order[start : start + batch_size]]
            input_ids, attention, labels = _collate(
                batch, tokenizer, pad_id, max_seq_length
            )
            out = model(
                input_ids=input_ids.to(device),
                attention_mask=attention.to(device),
                labels=labels.to(device),
            )
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
            scheduler.step()
            log_lines.append(f"lora\t{step}\t{out.loss.item():.6f}")
            step += 1

    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints" / spec.job_id
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "adapter_state": lora_state_dict(model),
            "wrapped_modules": wrapped,
            "base_model": spec.base_model,
        },
        ckpt_dir / "adapter.pt",
    )
    log_path = out_dir / "logs" / f"{spec.job_id}.log"
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")

    record = TrainedModelRecord(
        job_id=spec.job_id,
        base_model=spec.base_model,
        task=spec.task,
        checkpoint_path=str(ckpt_dir),
        log_path=str(log_path),
        hyperparameters=dict(spec.hyperparameters),
        seed=seed,
        details={
            "dropped_records": dropped,
            "wrapped_modules": len(wrapped),
            "quantization_effective": quant_effective,
            "prompt_file": str(spec.prompt_file),
            "torch_version": torch.__version__,
        },
    )
    record.save(out_dir / "records" / f"{spec.job_id}.json")
    return record


@torch.no_grad()
def _greedy_continue(model, ids: list[int], max_new: int, eos: int, device: str) -> list[int]:
    generated: list[int] = []
    for _ in range(max_new):
        window = torch.tensor([ids + generated], dtype=torch.long, device=device)
        logits = model(input_ids=window).logits[0, -1]
        nxt = int(logits.argmax().item())
        if nxt == eos:
            break
        generated.append(nxt)
    return generated


def predict_lora(
    record: TrainedModelRecord,
    bench_path: str | Path,
    out_dir: str | Path,
    device: str = "cpu",
) -> Path:
    """Generate one annotation per document, parsed with the exchange repair
    rules; unparseable generations degrade to ``unknown``."""
    max_seq_length = int(record.hyperparameters["max_seq_length"])
    tokenizer, model, eos = build_causal(record.base_model, max_seq_length)
    ckpt = torch.load(Path(record.checkpoint_path) / "adapter.pt", weights_only=False)
    apply_lora(
        model,
        list(record.hyperparameters["adapter_targets"]),
        int(record.hyperparameters["adapter_rank"]),
    )
    model.load_state_dict(ckpt["adapter_state"], strict=False)
    model.to(device)
    model.eval()
    system = Path(record.details["prompt_file"]).read_text(encoding="utf-8")

    bench = load_train_file(bench_path)
    records = []
    for doc in bench:
        prompt_ids = _encode(tokenizer, render_chat(system, doc.text))
        keep = max(1, max_seq_length - MAX_NEW_TOKENS)
        prompt_ids = prompt_ids[-keep:]
        generated = _greedy_continue(model, prompt_ids, MAX_NEW_TOKENS, eos, device)
        labels, rationale = parse_reply(tokenizer.decode(generated))
        records.append(
            prediction_record(
                doc.id, labels, approach=f"trainer:{record.task}", rationale=rationale
            )
        )
    out_dir = Path(out_dir)
    return write_predictions(records, out_dir / "predictions" / f"{record.job_id}.jsonl")
