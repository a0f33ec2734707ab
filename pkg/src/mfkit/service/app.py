"""FastAPI service exposing the toolkit's operations.

The CLI is a thin client of this app; long-lived deployments can serve it
with uvicorn so several clients share one process (useful when embedding
stores are large). Endpoints take filesystem paths: the service and its
clients are assumed to share a filesystem, as in local research use.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..corpus import (
    Document,
    load_dataset,
    parse_label,
    read_predictions,
    save_dataset,
)
from ..curves import default_policy, emit_curve_jobs, ingest_curve
from ..errors import MFKitError
from ..evaluation import (
    EvalReport,
    evaluate,
    evaluate_binary,
    fuse_binary,
    sample_mislabeled,
)
from ..runs import RunConfig, baseline_from_counts, run
from . import schemas


def _report_model(report: EvalReport) -> schemas.ReportModel:
    return schemas.ReportModel.model_validate(report.to_dict())


def create_app() -> FastAPI:
    app = FastAPI(title="mfkit service", version=__version__)

    @app.exception_handler(MFKitError)
    async def _mfkit_error(request, exc):  # noqa: ANN001
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score(request: schemas.ScoreRequest) -> schemas.ScoreResponse:
        try:
            config = RunConfig.from_dict(request.config, base_dir=request.base_dir)
            result = run(config)
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.ScoreResponse(
            out_dir=str(result.out_dir),
            predictions_path=str(result.predictions_path),
            manifest_path=str(result.manifest_path),
            report_paths={k: str(v) for k, v in result.report_paths.items()},
            reports={k: _report_model(v) for k, v in result.reports.items()},
        )

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_endpoint(request: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        try:
            bench = load_dataset(request.dataset)
            preds = read_predictions(request.predictions)
            reports = {
                scope: evaluate(bench, preds, scope=scope) for scope in request.scopes
            }
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.EvaluateResponse(
            reports={k: _report_model(v) for k, v in reports.items()}
        )

    @app.post("/evaluate/binary", response_model=schemas.BinaryEvaluateResponse)
    def evaluate_binary_endpoint(
        request: schemas.BinaryEvaluateRequest,
    ) -> schemas.BinaryEvaluateResponse:
        try:
            bench = load_dataset(request.dataset)
            streams = {
                parse_label(name): read_predictions(path)
                for name, path in request.predictions_by_foundation.items()
            }
            report = evaluate_binary(bench, streams)
            fused = fuse_binary(bench, streams)
            fused_report = evaluate(bench, fused, scope="all")
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.BinaryEvaluateResponse(
            rows=[
                schemas.BinaryRowModel(
                    foundation=row.foundation.value,
                    f1_negative=row.f1_negative,
                    f1_positive=row.f1_positive,
                    accuracy=row.accuracy,
                    f1_macro=row.f1_macro,
                    f1_weighted=row.f1_weighted,
                )
                for row in report.per_foundation
            ],
            averages=report.averages(),
            fused_report=_report_model(fused_report),
        )

    @app.post("/baseline", response_model=schemas.BaselineResponse)
    def baseline(request: schemas.BaselineRequest) -> schemas.BaselineResponse:
        try:
            if request.counts:
                report = baseline_from_counts(request.counts)
            elif request.dataset:
                dataset = load_dataset(request.dataset)
                report = baseline_from_counts(
                    {f.value: c for f, c in dataset.class_counts.items()}
                )
            else:
                raise ValueError("baseline requires counts or a dataset path")
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.BaselineResponse(report=_report_model(report))

    @app.post("/curve/emit-jobs", response_model=schemas.CurveEmitResponse)
    def curve_emit(request: schemas.CurveEmitRequest) -> schemas.CurveEmitResponse:
        try:
            train = load_dataset(request.train_dataset)
            policy = default_policy(request.task, max_batches=request.max_batches)
            jobs, warnings = emit_curve_jobs(
                train,
                request.bench_dataset,
                request.task,
                policy,
                seeds=request.seeds,
                out_dir=request.out_dir,
                base_model=request.base_model,
                base_train_files=request.base_train_files,
                prompt_file=request.prompt_file,
                hyperparameters=request.hyperparameters,
            )
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        job_files = [
            str(Path(request.out_dir) / "jobs" / f"{job.job_id}.json") for job in jobs
        ]
        return schemas.CurveEmitResponse(job_files=job_files, warnings=warnings)

    @app.post("/curve/ingest", response_model=schemas.CurveIngestResponse)
    def curve_ingest(request: schemas.CurveIngestRequest) -> schemas.CurveIngestResponse:
        try:
            bench = load_dataset(request.dataset)
            job_files = sorted(Path(request.jobs_dir).glob("*.json"))
            if not job_files:
                raise ValueError(f"no job specs found in {request.jobs_dir}")
            curve, table = ingest_curve(
                job_files,
                request.predictions_dir,
                bench,
                thresholds=request.thresholds,
                scope=request.scope,
            )
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.CurveIngestResponse(
            points=[
                schemas.CurvePointModel(
                    batches_used=batches_used, report=_report_model(report)
                )
                for batches_used, report in curve.points
            ],
            thresholds={f"{t:.2f}": v for t, v in table.items()},
            missing_jobs=list(curve.missing),
        )

    @app.post("/sample-mislabeled", response_model=schemas.SampleMislabeledResponse)
    def sample_mislabeled_endpoint(
        request: schemas.SampleMislabeledRequest,
    ) -> schemas.SampleMislabeledResponse:
        try:
            bench = load_dataset(request.dataset)
            preds = read_predictions(request.predictions)
            foundations = None
            if request.foundations:
                foundations = [parse_label(f) for f in request.foundations]
            items = sample_mislabeled(
                bench, preds, request.n, foundations=foundations, seed=request.seed
            )
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.SampleMislabeledResponse(
            items=[
                schemas.MislabeledItemModel(
                    doc_id=doc.id,
                    text=doc.text,
                    gold=doc.gold.value,
                    predicted=sorted(l.value for l in pred.labels),
                    rationale=pred.rationale,
                    approach=pred.approach,
                )
                for doc, pred in items
            ]
        )

    @app.post("/translate", response_model=schemas.TranslateResponse)
    def translate(request: schemas.TranslateRequest) -> schemas.TranslateResponse:
        from ..llm import EndpointConfig, TranslationClient

        try:
            dataset = load_dataset(request.dataset)
            endpoint = EndpointConfig(
                url=request.endpoint["url"],
                model=request.endpoint.get("model", ""),
                auth_env=request.endpoint.get("auth_env"),
                timeout=float(request.endpoint.get("timeout", 30.0)),
                max_retries=int(request.endpoint.get("max_retries", 3)),
                max_parallel=int(request.endpoint.get("max_parallel", 4)),
                backoff_base=float(request.endpoint.get("backoff_base", 0.5)),
                audit_path=request.endpoint.get("audit"),
            )
            with TranslationClient(endpoint, cache_path=request.cache_path) as client:
                texts = [doc.text for doc in dataset.documents]
                translated = client.translate_batch(texts, request.source, request.target)
        except (KeyError, ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        kept = []
        failed = 0
        for doc, new_text in zip(dataset.documents, translated):
            if new_text is None:
                failed += 1
                continue
            kept.append(
                Document(
                    id=doc.id,
                    text=new_text,
                    gold=doc.gold,
                    language=request.target,
                    source=doc.source,
                )
            )
        out = save_dataset(dataset.replace(kept), request.out_path)
        return schemas.TranslateResponse(
            out_path=str(out), translated=len(kept), failed=failed
        )

    return app


app = create_app()
