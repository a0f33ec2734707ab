"""Secondary-component acceptance: trainer smoke and exchange conformance,
with the measurement toolkit consumed only through its CLI."""

import json
import shutil
import subprocess
import time
from contextlib import contextmanager

import pytest

from mftrainer.binary import predict_binary, train_binary
from mftrainer.lora import predict_lora, train_lora

from conftest import binary_spec, lora_spec, separable_rows, write_jsonl

MFKIT = shutil.which("mfkit")

pytestmark = pytest.mark.skipif(MFKIT is None, reason="measurement CLI not installed")


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


def run_mfkit(*args):
    return subprocess.run(
        [MFKIT, *args], capture_output=True, text=True, timeout=300
    )


@pytest.fixture(scope="module")
def smoke_artifacts(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("smoke")
    train = write_jsonl(tmp_path / "train.jsonl", separable_rows(100, seed=11))
    bench = write_jsonl(tmp_path / "bench.jsonl", separable_rows(20, seed=12, prefix="b"))
    spec_path = tmp_path / "job.json"
    spec_path.write_text(json.dumps(binary_spec([train], bench, job_id="smoke")))

    from mftrainer.jobspec import JobSpec

    started = time.perf_counter()
    record = train_binary(JobSpec.load(spec_path), tmp_path / "out")
    fused = predict_binary(record, bench, tmp_path / "out")
    elapsed = time.perf_counter() - started
    return tmp_path, bench, record, fused, elapsed


class TestSecondaryAcceptance:
    def test_trainer_smoke_beats_baseline(self, smoke_artifacts, tmp_path):
        """500 synthetic records, five binary models on CPU in < 10 min;
        fused predictions beat the closed-form baseline accuracy by >= 0.2
        when evaluated by the measurement component."""
        with criterion("trainer smoke beats baseline"):
            smoke_dir, bench, record, fused, elapsed = smoke_artifacts
            assert elapsed < 600, f"training took {elapsed:.0f}s"

            report_path = tmp_path / "report.json"
            result = run_mfkit(
                "evaluate", "--dataset", str(bench), "--predictions", str(fused),
                "--scope", "all", "--out", str(report_path),
            )
            assert result.returncode == 0, result.output if hasattr(result, "output") else result.stderr
            accuracy = json.loads(report_path.read_text())["all"]["accuracy"]

            baseline_path = tmp_path / "baseline.json"
            result = run_mfkit(
                "baseline",
                "--counts", "care=20,fairness=20,loyalty=20,authority=20,sanctity=20",
            )
            assert result.returncode == 0, result.stderr
            baseline_accuracy = 0.2  # balanced 5-class closed form; printed row confirms
            assert "| 0.20 | 1.00 |" in result.stdout
            assert accuracy >= baseline_accuracy + 0.2, (
                f"accuracy {accuracy} does not beat baseline {baseline_accuracy} by 0.2"
            )

    def test_exchange_conformance(self, smoke_artifacts, tmp_path):
        """Every trainer output file validates against the measurement
        loader with zero schema errors."""
        with criterion("exchange conformance"):
            smoke_dir, bench, record, fused, _ = smoke_artifacts
            result = run_mfkit(
                "evaluate", "--dataset", str(bench), "--predictions", str(fused)
            )
            assert result.returncode == 0, result.stderr

            binary_dir = smoke_dir / "out" / "predictions" / f"{record.job_id}-binary"
            result = run_mfkit(
                "evaluate", "--dataset", str(bench), "--binary-dir", str(binary_dir)
            )
            assert result.returncode == 0, result.stderr

            lora_train = write_jsonl(tmp_path / "lt.jsonl", separable_rows(4, seed=3))
            lora_bench = write_jsonl(tmp_path / "lb.jsonl", separable_rows(2, seed=4, prefix="lb"))
            prompt = tmp_path / "p.txt"
            prompt.write_text("label the moral foundation of the document.")
            spec_path = tmp_path / "lora.json"
            spec_path.write_text(json.dumps(lora_spec(
                [lora_train], lora_bench, prompt, job_id="lora-conf", epochs=1,
            )))
            from mftrainer.jobspec import JobSpec

            record2 = train_lora(JobSpec.load(spec_path), tmp_path / "lora-out")
            lora_preds = predict_lora(record2, lora_bench, tmp_path / "lora-out")
            result = run_mfkit(
                "evaluate", "--dataset", str(lora_bench), "--predictions", str(lora_preds)
            )
            assert result.returncode == 0, result.stderr
