#!/usr/bin/env python3
"""End-to-end demo: plan an ablation grid over the demo corpus, render
every job in-process, assemble real/synth/mixed manifests with stratified
patient-level splits, and audit them for leakage."""
import argparse
import csv
import json
from pathlib import Path

import _bootstrap  # noqa: F401
from headforge.dataset import (AblationPlan, ClipRecord, SourceClip,
                               attach_strata, build_manifest, plan_jobs,
                               read_strata_table, stratified_split,
                               verify_leakage, write_manifest)
from headforge.farm import make_render_runner
from headforge.texture import assign_textures, read_pool_manifest


def read_clip_table(path: Path):
    clips, labels = [], {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            clips.append(SourceClip(clip_id=row["clip_id"],
                                    patient_id=row["patient_id"],
                                    sequence_uri=row["sequence_uri"]))
            labels[row["clip_id"]] = int(row.get("label", 0))
    return clips, labels


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--assets", required=True,
                        help="directory produced by make_demo_assets.py")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--textures", type=int, default=2,
                        help="textures per patient (0 = untextured)")
    parser.add_argument("--views", default="front,side")
    parser.add_argument("--resolution", type=int, default=96)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    assets = Path(args.assets)
    out = Path(args.out)
    clips, labels = read_clip_table(assets / "clips.csv")
    strata = read_strata_table(assets / "strata.csv")
    pool = read_pool_manifest(assets / "pool.tsv")

    plan = AblationPlan(textures_per_patient=args.textures,
                        views=tuple(args.views.split(",")), seed=args.seed)
    assignments = {}
    texture_uris = None
    if plan.textures_per_patient:
        patients = sorted({c.patient_id for c in clips})
        assignments = {a.patient_id: a for a in assign_textures(
            patients, [e.texture_id for e in pool],
            plan.textures_per_patient, plan.seed)}
        texture_uris = {e.texture_id: str(e.path) for e in pool}
    jobs = plan_jobs(clips, assignments, plan, out_root=out / "rendered",
                     texture_uris=texture_uris)
    print(f"planned {len(jobs)} render jobs")

    runner = make_render_runner(width=args.resolution,
                                height=args.resolution)
    for i, job in enumerate(jobs, start=1):
        runner(job)
        if i % 10 == 0 or i == len(jobs):
            print(f"rendered {i}/{len(jobs)}")

    real_records = attach_strata(
        [ClipRecord(clip_id=c.clip_id, patient_id=c.patient_id,
                    origin="real", label=labels[c.clip_id],
                    uri=c.sequence_uri) for c in clips], strata)
    synth_records = attach_strata(
        [ClipRecord(clip_id=job.job_id.replace("|", "-"),
                    patient_id=job.patient_id, origin="synthetic",
                    label=labels[job.clip_id], texture_id=job.texture_id,
                    view_name=job.view_name, uri=job.output_uri)
         for job in jobs], strata)

    real_result = stratified_split(real_records, ratios=(0.7, 0.3),
                                   seed=args.seed,
                                   split_names=("train", "test"))
    real_split = {r.clip_id: real_result.assignment[r.patient_id]
                  for r in real_records}
    synth_result = stratified_split(synth_records, ratios=(0.8, 0.2),
                                    seed=args.seed)
    synth_split = {r.clip_id: synth_result.assignment[r.patient_id]
                   for r in synth_records}

    summary = {}
    manifests = {
        "real": build_manifest("real", real=real_records,
                               real_split=real_split),
        "synth": build_manifest("synth", real=real_records,
                                synth=synth_records,
                                real_split=real_split,
                                synth_split=synth_split),
        "mixed": build_manifest("mixed", real=real_records,
                                synth=synth_records,
                                real_split=real_split,
                                synth_split=synth_split),
    }
    out.mkdir(parents=True, exist_ok=True)
    for regime, manifest in manifests.items():
        path = out / f"manifest_{regime}.ndjson"
        write_manifest(manifest, path)
        report = verify_leakage(manifest)
        summary[regime] = {
            "records": len(manifest.records),
            "splits": manifest.counts(),
            "leakage_ok": report.ok,
            "manifest": str(path),
        }
        if not report.ok:
            raise SystemExit(f"leakage audit failed for {regime}: "
                             f"{json.dumps(report.as_dict())}")

    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
