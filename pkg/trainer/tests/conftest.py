import json
import random

import pytest

SEPARABLE_VOCAB = {
    "care": ["nurture", "kindness", "compassion", "gentle"],
    "fairness": ["justice", "equal", "honest", "rights"],
    "loyalty": ["patriot", "devoted", "solidarity", "allegiance"],
    "authority": ["obedience", "hierarchy", "tradition", "command"],
    "sanctity": ["purity", "sacred", "holy", "clean"],
}


def separable_rows(per_class, seed=0, prefix="t", words_per_doc=6):
    rng = random.Random(seed)
    rows = []
    i = 0
    for label, words in SEPARABLE_VOCAB.items():
        for _ in range(per_class):
            text = " ".join(rng.choice(words) for _ in range(words_per_doc))
            rows.append({"id": f"{prefix}{i}", "text": text, "label": label})
            i += 1
    return rows


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def binary_spec(train_files, bench, job_id="job-1", **hp_overrides):
    hp = {
        "learning_rate": 0.01,
        "epochs": 3,
        "batch_size": 16,
        "weight_decay": 0.01,
        "warmup_steps": 100,
        "max_seq_length": 512,
        "seed": 3,
    }
    hp.update(hp_overrides)
    return {
        "job_id": job_id,
        "base_model": "hash-bow",
        "task": "binary_per_foundation",
        "train_files": [str(p) for p in train_files],
        "batches_used": 1,
        "predict_on": str(bench),
        "hyperparameters": hp,
    }


def lora_spec(train_files, bench, prompt_file, job_id="lora-1", **hp_overrides):
    hp = {
        "learning_rate": 2e-4,
        "epochs": 1,
        "batch_size": 8,
        "weight_decay": 0.01,
        "max_seq_length": 512,
        "quantization": "4bit",
        "adapter_rank": 16,
        "adapter_targets": [
            "q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj",
        ],
        "seed": 3047,
    }
    hp.update(hp_overrides)
    return {
        "job_id": job_id,
        "base_model": "tiny-causal",
        "task": "multiclass_lora",
        "train_files": [str(p) for p in train_files],
        "batches_used": 1,
        "predict_on": str(bench),
        "prompt_file": str(prompt_file),
        "hyperparameters": hp,
    }


@pytest.fixture
def spec_loader(tmp_path):
    from mftrainer.jobspec import JobSpec

    def load(spec_dict, name="job.json"):
        path = tmp_path / name
        path.write_text(json.dumps(spec_dict))
        return JobSpec.load(path)

    return load
