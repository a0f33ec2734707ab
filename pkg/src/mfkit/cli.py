"""Command-line client for the measurement service.

Every command goes through the HTTP API: against a remote server when
``--server`` is given, otherwise against an in-process instance of the app
(no daemon required). ``mfkit serve`` starts a standalone server.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

REPORT_COLUMNS = ("Auth", "Care", "Fair", "Loya", "Sanc", "Acc", "Cov", "Fw", "Fm")
_REPORT_CLASS_ORDER = ("authority", "care", "fairness", "loyalty", "sanctity")


def _abs(path: str | None) -> str | None:
    """Resolve client-side paths so a shared-filesystem server sees the same file."""
    return str(Path(path).resolve()) if path else None


def _request(server: str | None, path: str, payload: dict) -> dict:
    async def go() -> httpx.Response:
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=None) as client:
                return await client.post(path, json=payload)
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://mfkit.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    response = asyncio.run(go())
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    return response.json()


def _report_row(report: dict) -> list[str]:
    cells = [f"{report['per_class'][c]['f1']:.2f}" for c in _REPORT_CLASS_ORDER]
    cells += [
        f"{report['accuracy']:.2f}",
        f"{report['coverage']:.2f}",
        f"{report['f1_weighted']:.2f}",
        f"{report['f1_macro']:.2f}",
    ]
    return cells


def _print_reports(reports: dict[str, dict]) -> None:
    click.echo("| Method | " + " | ".join(REPORT_COLUMNS) + " |")
    click.echo("|" + "---|" * (len(REPORT_COLUMNS) + 1))
    for name, report in reports.items():
        click.echo("| " + name + " | " + " | ".join(_report_row(report)) + " |")
    for name, report in reports.items():
        for note in report.get("notes", []):
            click.echo(f"note [{name}]: {note}", err=True)


def _load_toml(path: str | Path) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with Path(path).open("rb") as fh:
        return tomllib.load(fh)


def _parse_counts(text: str) -> dict[str, int]:
    counts = {}
    for item in text.split(","):
        label, _, value = item.partition("=")
        if not value:
            raise click.BadParameter(f"expected label=count, got {item!r}")
        counts[label.strip()] = int(value)
    return counts


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; in-process when omitted.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML run config.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", default=None, help="Override the output directory.")
@click.pass_context
def main(ctx, server, config_path, seed, out_dir):
    """Cross-language moral foundation measurement toolkit."""
    ctx.ensure_object(dict)
    ctx.obj.update(server=server, config_path=config_path, seed=seed, out_dir=out_dir)


@main.command()
@click.pass_context
def score(ctx):
    """Run one measurement approach end to end per the TOML config."""
    if not ctx.obj["config_path"]:
        raise click.UsageError("score requires --config")
    config = _load_toml(ctx.obj["config_path"])
    if ctx.obj["seed"] is not None:
        config["seed"] = ctx.obj["seed"]
    if ctx.obj["out_dir"] is not None:
        config["out"] = _abs(ctx.obj["out_dir"])
    base_dir = str(Path(ctx.obj["config_path"]).resolve().parent)
    data = _request(ctx.obj["server"], "/score", {"config": config, "base_dir": base_dir})
    _print_reports(data["reports"])
    click.echo(f"artifacts: {data['out_dir']}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--predictions", default=None, help="Exchange-format predictions JSONL.")
@click.option("--binary-dir", default=None,
              help="Directory of per-foundation files (<foundation>.jsonl) to score as five binary streams.")
@click.option("--scope", "scopes", multiple=True, default=("covered_only", "all"))
@click.option("--out", "out_path", default=None, help="Write the report JSON here.")
@click.pass_context
def evaluate(ctx, dataset, predictions, binary_dir, scopes, out_path):
    """Evaluate an exchange-format prediction file against a benchmark."""
    if binary_dir:
        streams = {
            f: str((Path(binary_dir) / f"{f}.jsonl").resolve()) for f in _REPORT_CLASS_ORDER
        }
        data = _request(
            ctx.obj["server"],
            "/evaluate/binary",
            {"dataset": _abs(dataset), "predictions_by_foundation": streams},
        )
        click.echo("| | " + " | ".join(c.capitalize()[:4] for c in _REPORT_CLASS_ORDER) + " | Avg |")
        click.echo("|" + "---|" * 7)
        by_f = {row["foundation"]: row for row in data["rows"]}
        for label, key in (("0", "f1_negative"), ("1", "f1_positive"),
                           ("Acc", "accuracy"), ("Fm", "f1_macro"), ("Fw", "f1_weighted")):
            cells = [f"{by_f[f][key]:.2f}" for f in _REPORT_CLASS_ORDER]
            click.echo(f"| {label} | " + " | ".join(cells) + f" | {data['averages'][key]:.2f} |")
        _print_reports({"fused": data["fused_report"]})
        if out_path:
            Path(out_path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        return
    if not predictions:
        raise click.UsageError("evaluate requires --predictions or --binary-dir")
    data = _request(
        ctx.obj["server"],
        "/evaluate",
        {"dataset": _abs(dataset), "predictions": _abs(predictions), "scopes": list(scopes)},
    )
    _print_reports(data["reports"])
    if out_path:
        Path(out_path).write_text(json.dumps(data["reports"], sort_keys=True, indent=2) + "\n")


@main.command()
@click.option("--counts", default=None, help="Comma-separated label=count pairs.")
@click.option("--dataset", default=None)
@click.pass_context
def baseline(ctx, counts, dataset):
    """Closed-form random-guessing baseline from class counts."""
    payload = {}
    if counts:
        payload["counts"] = _parse_counts(counts)
    if dataset:
        payload["dataset"] = _abs(dataset)
    data = _request(ctx.obj["server"], "/baseline", payload)
    _print_reports({"baseline": data["report"]})


@main.group()
def curve():
    """Learning-curve job emission and ingestion."""


@curve.command("emit-jobs")
@click.option("--train", required=True)
@click.option("--bench", required=True)
@click.option("--task", required=True,
              type=click.Choice(["binary_per_foundation", "multiclass_lora"]))
@click.option("--out", "out_dir", required=True)
@click.option("--base-model", required=True)
@click.option("--seeds", default="0", help="Comma-separated seeds.")
@click.option("--max-batches", type=int, default=None)
@click.option("--base-train", "base_train", multiple=True,
              help="Train files prepended to every job (e.g. the English base).")
@click.option("--prompt-file", default=None)
@click.pass_context
def curve_emit(ctx, train, bench, task, out_dir, base_model, seeds, max_batches,
               base_train, prompt_file):
    """Write batch data and one fine-tuning job spec per curve point."""
    data = _request(
        ctx.obj["server"],
        "/curve/emit-jobs",
        {
            "train_dataset": _abs(train),
            "bench_dataset": _abs(bench),
            "task": task,
            "out_dir": _abs(out_dir),
            "base_model": base_model,
            "seeds": [int(s) for s in seeds.split(",")],
            "max_batches": max_batches,
            "base_train_files": [_abs(p) for p in base_train],
            "prompt_file": _abs(prompt_file),
        },
    )
    for warning in data["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"emitted {len(data['job_files'])} job specs")
    for path in data["job_files"]:
        click.echo(path)


@curve.command("ingest")
@click.option("--jobs", "jobs_dir", required=True)
@click.option("--predictions", "predictions_dir", required=True)
@click.option("--dataset", required=True)
@click.option("--thresholds", default="0.70,0.80")
@click.option("--scope", default="covered_only")
@click.pass_context
def curve_ingest(ctx, jobs_dir, predictions_dir, dataset, thresholds, scope):
    """Evaluate per-job predictions into a learning curve + threshold table."""
    data = _request(
        ctx.obj["server"],
        "/curve/ingest",
        {
            "jobs_dir": _abs(jobs_dir),
            "predictions_dir": _abs(predictions_dir),
            "dataset": _abs(dataset),
            "thresholds": [float(t) for t in thresholds.split(",")],
            "scope": scope,
        },
    )
    click.echo("| batches | Acc | Cov | Fw | Fm |")
    click.echo("|---|---|---|---|---|")
    for point in data["points"]:
        report = point["report"]
        click.echo(
            f"| {point['batches_used']} | {report['accuracy']:.2f} | "
            f"{report['coverage']:.2f} | {report['f1_weighted']:.2f} | "
            f"{report['f1_macro']:.2f} |"
        )
    for threshold, batches in data["thresholds"].items():
        reached = batches if batches is not None else "not reached"
        click.echo(f"Fw >= {threshold}: {reached}")
    for job_id in data["missing_jobs"]:
        click.echo(f"warning: curve gap, no predictions for {job_id}", err=True)


@main.command("sample-mislabeled")
@click.option("--dataset", required=True)
@click.option("--predictions", required=True)
@click.option("--n", type=int, required=True)
@click.option("--foundations", default=None, help="Comma-separated gold-label filter.")
@click.option("--out", "out_path", default=None, help="Write sampled records as JSONL.")
@click.pass_context
def sample_mislabeled_cmd(ctx, dataset, predictions, n, foundations, out_path):
    """Random sample of records failing the lenient criterion."""
    data = _request(
        ctx.obj["server"],
        "/sample-mislabeled",
        {
            "dataset": _abs(dataset),
            "predictions": _abs(predictions),
            "n": n,
            "foundations": foundations.split(",") if foundations else None,
            "seed": ctx.obj["seed"] if ctx.obj["seed"] is not None else 0,
        },
    )
    items = data["items"]
    if out_path:
        with Path(out_path).open("w", encoding="utf-8") as fh:
            for item in items:
                fh.write(json.dumps(item, ensure_ascii=False, sort_keys=True) + "\n")
    click.echo(f"sampled {len(items)} mislabeled records")
    for item in items[:10]:
        click.echo(f"  {item['doc_id']}: gold={item['gold']} pred={','.join(item['predicted'])}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--source", required=True)
@click.option("--target", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--cache", "cache_path", default=None)
@click.pass_context
def translate(ctx, dataset, source, target, out_path, cache_path):
    """Machine-translate a dataset's texts; endpoint comes from --config."""
    if not ctx.obj["config_path"]:
        raise click.UsageError("translate requires --config with an [endpoint] table")
    endpoint = _load_toml(ctx.obj["config_path"]).get("endpoint")
    if not endpoint or "url" not in endpoint:
        raise click.UsageError("config lacks [endpoint].url")
    data = _request(
        ctx.obj["server"],
        "/translate",
        {
            "dataset": _abs(dataset),
            "source": source,
            "target": target,
            "out_path": _abs(out_path),
            "endpoint": endpoint,
            "cache_path": _abs(cache_path),
        },
    )
    click.echo(
        f"translated {data['translated']} documents to {data['out_path']} "
        f"({data['failed']} failed)"
    )


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8820)
def serve(host, port):
    """Run the measurement service under uvicorn."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
