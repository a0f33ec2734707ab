"""Trainer entry points: run a job spec, or predict from a saved record."""

from __future__ import annotations

import logging

import click

from .binary import predict_binary, train_binary
from .jobspec import TASK_BINARY, TASK_LORA, JobSpec
from .lora import predict_lora, train_lora
from .records import TrainedModelRecord


@click.group()
def main():
    """Fine-tuning worker: job specs in, exchange-format predictions out."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
@click.option("--device", default="cpu")
@click.option("--skip-predict", is_flag=True, default=False)
def run(spec_path, out_dir, device, skip_predict):
    """Train per the job spec, then predict on its benchmark file."""
    spec = JobSpec.load(spec_path)
    if spec.task == TASK_BINARY:
        record = train_binary(spec, out_dir, device=device)
        predict = predict_binary
    elif spec.task == TASK_LORA:
        record = train_lora(spec, out_dir, device=device)
        predict = predict_lora
    else:  # pragma: no cover - JobSpec.validate rejects earlier
        raise click.ClickException(f"unknown task {spec.task!r}")
    click.echo(f"trained {record.job_id}; checkpoint at {record.checkpoint_path}")
    if not skip_predict:
        path = predict(record, spec.predict_on, out_dir, device=device)
        click.echo(f"predictions at {path}")


@main.command()
@click.option("--record", "record_path", required=True, type=click.Path(exists=True))
@click.option("--bench", "bench_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
@click.option("--device", default="cpu")
def predict(record_path, bench_path, out_dir, device):
    """Predict on a benchmark file from a previously trained record."""
    record = TrainedModelRecord.load(record_path)
    if record.task == TASK_BINARY:
        path = predict_binary(record, bench_path, out_dir, device=device)
    else:
        path = predict_lora(record, bench_path, out_dir, device=device)
    click.echo(f"predictions at {path}")


if __name__ == "__main__":
    main()
