"""Command-line front end.

Subcommands mirror the pipeline stages: mesh validation, texture pool
checks, rendering, farm coordination, dataset assembly, and metric
evaluation of prediction files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
import time
from pathlib import Path

from .dataset import (AblationPlan, DatasetError, SourceClip, attach_strata,
                      build_manifest, plan_jobs, read_manifest, read_records,
                      read_strata_table, stratified_split, verify_leakage,
                      write_manifest)
from .farm import (Coordinator, CoordinatorClient, FarmConfig, FarmError,
                   FarmWorker, RenderJob, make_render_runner, start_server)
from .mesh import MeshError, load_sequence
from .metrics import MetricError, evaluate, read_predictions
from .render import RenderError, RenderSettings, load_cameras, render_sequence
from .texture import TextureError, load_texture, read_pool_manifest

logger = logging.getLogger(__name__)

_ERRORS = (MeshError, TextureError, RenderError, FarmError, DatasetError,
           MetricError, OSError, ValueError)


def _print_json(payload, stream=None) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True),
          file=stream or sys.stdout)


# ---------------------------------------------------------------------------
# mesh


def cmd_mesh_validate(args) -> int:
    directory = Path(args.directory)
    sequence = load_sequence(directory, patient_id=args.patient,
                             clip_id=args.clip,
                             frame_rate=args.frame_rate)
    first = sequence.frames[0]
    _print_json({
        "directory": str(directory),
        "frames": len(sequence.frames),
        "frame_rate": sequence.frame_rate,
        "vertices": int(first.vertices.shape[0]),
        "triangles": int(first.triangles.shape[0]),
        "has_uvs": first.uvs is not None and first.uvs.shape[0] > 0,
        "has_normals": (first.normals is not None
                        and first.normals.shape[0] > 0),
    })
    return 0


# ---------------------------------------------------------------------------
# texture


def cmd_texture_pool(args) -> int:
    entries = read_pool_manifest(args.manifest)
    failures = []
    if args.check:
        for entry in entries:
            try:
                load_texture(entry.path, entry.texture_id, tags=entry.tags)
            except (TextureError, OSError) as exc:
                failures.append({"texture_id": entry.texture_id,
                                 "error": str(exc)})
    _print_json({
        "manifest": str(args.manifest),
        "textures": len(entries),
        "ids": [e.texture_id for e in entries],
        "checked": bool(args.check),
        "failures": failures,
    })
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# render


def _parse_texture_arg(raw: str) -> list[str]:
    if raw.strip().lower() == "none":
        return []
    return [t.strip() for t in raw.split(",") if t.strip()]


def cmd_render(args) -> int:
    seq_dir = Path(args.seq)
    patient = args.patient or seq_dir.name
    clip = args.clip or seq_dir.name
    sequence = load_sequence(seq_dir, patient_id=patient, clip_id=clip,
                             frame_rate=args.frame_rate)
    cameras = load_cameras(args.cameras)
    texture_ids = _parse_texture_arg(args.textures)

    pool = {}
    if args.pool:
        pool = {e.texture_id: e for e in read_pool_manifest(args.pool)}
    missing = [t for t in texture_ids if t not in pool]
    if missing:
        raise RenderError(f"texture ids not in pool: {', '.join(missing)}"
                          if args.pool else
                          "--pool is required to resolve texture ids")

    def resolver(texture_id):
        entry = pool.get(texture_id)
        if entry is None:
            return None
        return load_texture(entry.path, entry.texture_id, tags=entry.tags)

    clips = render_sequence(sequence, texture_ids, cameras,
                            RenderSettings(), Path(args.out), resolver,
                            workers=args.workers)
    _print_json({"clips": [c.as_dict() for c in clips]})
    return 0


# ---------------------------------------------------------------------------
# farm


def _read_jobs_file(path: str | Path) -> list[RenderJob]:
    jobs = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            jobs.append(RenderJob.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            raise FarmError(f"{path}:{lineno}: bad job row: {exc}")
    return jobs


def cmd_farm_serve(args) -> int:
    journal = Path(args.journal)
    config = FarmConfig(lease_timeout=args.lease_timeout,
                        max_retries=args.max_retries)
    if journal.exists() and journal.stat().st_size > 0:
        coordinator = Coordinator.restore(journal, config=config)
        logger.info("restored coordinator state from %s", journal)
    else:
        coordinator = Coordinator(journal_path=journal, config=config)
    if args.jobs:
        jobs = _read_jobs_file(args.jobs)
        batch_id = coordinator.enqueue_batch(jobs, batch_id=args.batch_id)
        logger.info("enqueued %d jobs as batch %s", len(jobs), batch_id)
    server, thread = start_server(coordinator, host=args.host,
                                  port=args.port)
    host, port = server.server_address[:2]
    print(json.dumps({"host": host, "port": port,
                      "journal": str(journal)}), flush=True)
    try:
        while True:
            time.sleep(max(0.5, config.lease_timeout / 4))
            coordinator.reap_stale()
    except KeyboardInterrupt:
        logger.info("shutting down")
    finally:
        server.shutdown()
        thread.join(timeout=5)
        coordinator.close()
    return 0


def _parse_host_port(raw: str) -> tuple[str, int]:
    host, sep, port = raw.rpartition(":")
    if not sep or not host:
        raise FarmError(f"expected host:port, got {raw!r}")
    return host, int(port)


def cmd_farm_work(args) -> int:
    import os
    import socket

    host, port = _parse_host_port(args.coordinator)
    runner = make_render_runner(width=args.width, height=args.height,
                                fov_deg=args.fov,
                                frame_workers=args.frame_workers)
    worker_id = args.worker_id or f"{socket.gethostname()}-{os.getpid()}"
    worker = FarmWorker(host, port, worker_id=worker_id,
                        capacity=args.capacity,
                        poll_interval=args.poll_interval,
                        runner=runner)
    stop = threading.Event()
    try:
        worker.run(stop)
    except KeyboardInterrupt:
        stop.set()
    return 0


def cmd_farm_status(args) -> int:
    host, port = _parse_host_port(args.coordinator)
    with CoordinatorClient(host, port) as client:
        _print_json(client.report(args.batch))
    return 0


# ---------------------------------------------------------------------------
# dataset


def _read_clips_csv(path: str | Path) -> list[SourceClip]:
    import csv

    clips = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"clip_id", "patient_id", "sequence_uri"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DatasetError(f"{path}: missing columns: "
                               f"{', '.join(sorted(missing))}")
        for row in reader:
            clips.append(SourceClip(clip_id=row["clip_id"].strip(),
                                    patient_id=row["patient_id"].strip(),
                                    sequence_uri=row["sequence_uri"].strip()))
    return clips


def _parse_views(raw: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def cmd_dataset_plan(args) -> int:
    from .texture import assign_textures

    clips = _read_clips_csv(args.clips)
    plan = AblationPlan(textures_per_patient=args.textures,
                        views=_parse_views(args.views), seed=args.seed)
    assignments = {}
    texture_uris = None
    if plan.textures_per_patient > 0:
        if not args.pool:
            raise DatasetError("--pool is required when textures > 0")
        entries = read_pool_manifest(args.pool)
        patients = sorted({c.patient_id for c in clips})
        assignments = {a.patient_id: a for a in assign_textures(
            patients, [e.texture_id for e in entries],
            plan.textures_per_patient, plan.seed)}
        texture_uris = {e.texture_id: str(e.path) for e in entries}
    jobs = plan_jobs(clips, assignments, plan, out_root=args.out_root,
                     texture_uris=texture_uris)
    lines = [json.dumps(job.as_dict(), separators=(",", ":"))
             for job in jobs]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        _print_json({"jobs": len(jobs), "out": str(args.out)})
    else:
        for line in lines:
            print(line)
    return 0


def cmd_dataset_split(args) -> int:
    records = read_records(args.records)
    if args.strata:
        records = attach_strata(records, read_strata_table(args.strata))
    ratios = tuple(float(r) for r in args.ratios.split(","))
    result = stratified_split(records, ratios=ratios,
                              strata_keys=tuple(args.keys.split(",")),
                              tolerance=args.tolerance, seed=args.seed)
    payload = {
        "assignment": dict(sorted(result.assignment.items())),
        "best_effort": result.best_effort,
        "max_deviation": result.max_deviation,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2,
                                             sort_keys=True) + "\n",
                                  encoding="utf-8")
        _print_json({"patients": len(result.assignment),
                     "best_effort": result.best_effort,
                     "max_deviation": result.max_deviation,
                     "out": str(args.out)})
    else:
        _print_json(payload)
    return 0


def _read_split_map(path: str | Path | None) -> dict | None:
    if path is None:
        return None
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "assignment" in payload:
        payload = payload["assignment"]
    if not isinstance(payload, dict):
        raise DatasetError(f"{path}: expected an id->split JSON object")
    return payload


def cmd_dataset_build(args) -> int:
    real = read_records(args.real) if args.real else []
    synth = read_records(args.synth) if args.synth else []
    manifest = build_manifest(args.regime, real=real, synth=synth,
                              real_split=_read_split_map(args.real_split),
                              synth_split=_read_split_map(args.synth_split))
    write_manifest(manifest, args.out)
    _print_json({"regime": manifest.regime,
                 "records": len(manifest.records),
                 "splits": manifest.counts(),
                 "out": str(args.out)})
    return 0


def cmd_dataset_verify(args) -> int:
    report = verify_leakage(read_manifest(args.manifest))
    _print_json(report.as_dict())
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    records = read_predictions(args.pred)
    report = evaluate(records, threshold=args.threshold)
    _print_json(report.as_dict())
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headforge",
        description="Synthetic head-video dataset pipeline")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="mesh sequence tools")
    mesh_sub = mesh.add_subparsers(dest="mesh_command", required=True)
    validate = mesh_sub.add_parser("validate",
                                   help="load and validate a sequence dir")
    validate.add_argument("directory")
    validate.add_argument("--patient", default="unknown")
    validate.add_argument("--clip", default="unknown")
    validate.add_argument("--frame-rate", type=float, default=25.0)
    validate.set_defaults(func=cmd_mesh_validate)

    texture = sub.add_parser("texture", help="texture pool tools")
    texture_sub = texture.add_subparsers(dest="texture_command",
                                         required=True)
    pool = texture_sub.add_parser("pool", help="inspect a pool manifest")
    pool.add_argument("manifest")
    pool.add_argument("--check", action="store_true",
                      help="decode every texture")
    pool.set_defaults(func=cmd_texture_pool)

    render = sub.add_parser("render", help="render one mesh sequence")
    render.add_argument("--seq", required=True, help="sequence directory")
    render.add_argument("--textures", required=True,
                        help="comma-separated texture ids, or 'none'")
    render.add_argument("--cameras", required=True,
                        help="camera config JSON")
    render.add_argument("--out", required=True, help="output directory")
    render.add_argument("--pool", help="texture pool manifest")
    render.add_argument("--patient")
    render.add_argument("--clip")
    render.add_argument("--frame-rate", type=float, default=25.0)
    render.add_argument("--workers", type=int, default=1)
    render.set_defaults(func=cmd_render)

    farm = sub.add_parser("farm", help="distributed render farm")
    farm_sub = farm.add_subparsers(dest="farm_command", required=True)

    serve = farm_sub.add_parser("serve", help="run the coordinator")
    serve.add_argument("--port", type=int, default=0)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--journal", required=True)
    serve.add_argument("--jobs", help="NDJSON file of jobs to enqueue")
    serve.add_argument("--batch-id")
    serve.add_argument("--lease-timeout", type=float, default=120.0)
    serve.add_argument("--max-retries", type=int, default=3)
    serve.set_defaults(func=cmd_farm_serve)

    work = farm_sub.add_parser("work", help="run a render worker")
    work.add_argument("--coordinator", required=True, help="host:port")
    work.add_argument("--capacity", type=int, required=True)
    work.add_argument("--worker-id", default=None)
    work.add_argument("--poll-interval", type=float, default=0.5)
    work.add_argument("--width", type=int, default=224)
    work.add_argument("--height", type=int, default=224)
    work.add_argument("--fov", type=float, default=30.0)
    work.add_argument("--frame-workers", type=int, default=1)
    work.set_defaults(func=cmd_farm_work)

    status = farm_sub.add_parser("status", help="query a batch report")
    status.add_argument("batch")
    status.add_argument("--coordinator", required=True, help="host:port")
    status.set_defaults(func=cmd_farm_status)

    dataset = sub.add_parser("dataset", help="manifests, plans, splits")
    dataset_sub = dataset.add_subparsers(dest="dataset_command",
                                         required=True)

    plan = dataset_sub.add_parser("plan", help="expand an ablation grid "
                                               "into render jobs")
    plan.add_argument("--clips", required=True,
                      help="CSV: clip_id,patient_id,sequence_uri")
    plan.add_argument("--textures", type=int, required=True,
                      help="textures per patient (0 = untextured)")
    plan.add_argument("--views", default="front,side")
    plan.add_argument("--seed", type=int, default=0)
    plan.add_argument("--pool", help="texture pool manifest")
    plan.add_argument("--out-root", required=True,
                      help="root for job output uris")
    plan.add_argument("--out", help="write jobs NDJSON here (else stdout)")
    plan.set_defaults(func=cmd_dataset_plan)

    split = dataset_sub.add_parser("split",
                                   help="stratified patient-level split")
    split.add_argument("--records", required=True, help="records NDJSON")
    split.add_argument("--strata", help="patient strata CSV")
    split.add_argument("--ratios", default="0.8,0.2")
    split.add_argument("--keys", default="gender,age_bucket,expressiveness")
    split.add_argument("--tolerance", type=float, default=0.05)
    split.add_argument("--seed", type=int, default=0)
    split.add_argument("--out", help="write assignment JSON here")
    split.set_defaults(func=cmd_dataset_split)

    build = dataset_sub.add_parser("build", help="assemble a manifest")
    build.add_argument("--regime", required=True,
                       choices=["real", "synth", "mixed"])
    build.add_argument("--real", help="real records NDJSON")
    build.add_argument("--synth", help="synthetic records NDJSON")
    build.add_argument("--real-split", help="JSON clip->train|test")
    build.add_argument("--synth-split", help="JSON clip->train|val")
    build.add_argument("--out", required=True)
    build.set_defaults(func=cmd_dataset_build)

    verify = dataset_sub.add_parser("verify",
                                    help="audit a manifest for leakage")
    verify.add_argument("manifest")
    verify.set_defaults(func=cmd_dataset_verify)

    ev = sub.add_parser("eval", help="score a prediction file")
    ev.add_argument("--pred", required=True,
                    help="CSV with header clip_id,label,score")
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
