"""Acceptance suite: one test per top-level deliverable guarantee.

Each test pins the documented tolerance and re-verifies the behaviour with
an independent oracle where one exists.  Helpers and oracles are shared
with the per-module test files.
"""
import json
import math
import random
import shutil
import time
from collections import Counter, defaultdict

import numpy as np
import pytest

from headforge.dataset import AblationPlan, plan_jobs, stratified_split
from headforge.farm import (BatchReport, Coordinator, JobState, RenderJob,
                            read_journal, replay_events, run_simulation)
from headforge.mesh import (MeshSequence, frames_structurally_equal,
                            parse_mesh_file, serialize_mesh)
from headforge.metrics import (PredictionRecord, accuracy, auroc, evaluate,
                               f1, inverse_frequency_weights, weighted_bce)
from headforge.render import (Camera, RenderSettings, project_vertex,
                              rasterize_triangle, render_sequence)

from conftest import random_mesh_frame
from test_dataset import (brute_force_variants, histogram_deviations,
                          make_assignments, make_clips, random_strata,
                          records_for_patients)
from test_metrics import bce_direct, confusion_counts, pairwise_auroc
from test_render import (FRONT, coverage_oracle, flat_atlas,
                         matrix_projection_oracle, perspective_uv_oracle,
                         random_camera, small_sequence)


def test_obj_round_trip_hundred_meshes_under_five_seconds():
    start = time.perf_counter()
    rng = np.random.default_rng(808)
    for _ in range(100):
        frame = random_mesh_frame(rng)
        again = parse_mesh_file(serialize_mesh(frame))
        assert frames_structurally_equal(frame, again)
    assert time.perf_counter() - start < 5.0


def test_rasterizer_matches_pixel_oracle_on_fifty_scenes():
    start = time.perf_counter()
    rng = np.random.default_rng(9090)
    for _ in range(50):
        verts = rng.uniform(-2, 2, (3, 3))
        verts[:, 2] = rng.uniform(-1.0, 1.0, 3)
        uvs = rng.random((3, 2))
        xy = np.array([project_vertex(FRONT, v)[0] for v in verts])
        depths = np.array([project_vertex(FRONT, v)[1] for v in verts])
        raster = rasterize_triangle(xy, depths, uvs,
                                    FRONT.width, FRONT.height)
        np.testing.assert_array_equal(
            raster.mask, coverage_oracle(xy, FRONT.width, FRONT.height))
        ys, xs = np.nonzero(raster.mask)
        for iy, ix in list(zip(ys, xs))[::5]:
            u_exp, v_exp = perspective_uv_oracle(xy, depths, uvs,
                                                 ix + 0.5, iy + 0.5)
            assert raster.u[iy, ix] == pytest.approx(u_exp, abs=1e-4)
            assert raster.v[iy, ix] == pytest.approx(v_exp, abs=1e-4)
    assert time.perf_counter() - start < 30.0


def test_projection_matches_matrix_oracle_on_hundred_points():
    rng = np.random.default_rng(4242)
    checked = 0
    while checked < 100:
        camera = random_camera(rng)
        point = rng.uniform(-8, 8, 3)
        expected_xy, depth = matrix_projection_oracle(camera, point)
        if depth <= camera.near:  # behind the camera: clipping territory
            continue
        xy, _ = project_vertex(camera, point)
        assert np.abs(np.asarray(xy) - expected_xy).max() < 1e-4
        checked += 1


def test_render_determinism_two_runs_byte_identical(tmp_path):
    sequence = MeshSequence(frames=small_sequence(2).frames[:2],
                            patient_id="p01", clip_id="c01")
    cameras = [
        Camera(view_name="front", eye=(0, 0, 6), target=(0, 0, 0),
               up=(0, 1, 0), vertical_fov_deg=40, width=48, height=48),
        Camera(view_name="side", eye=(6, 0, 0), target=(0, 0, 0),
               up=(0, 1, 0), vertical_fov_deg=40, width=48, height=48),
    ]
    atlas = flat_atlas((180, 120, 90), texture_id="skin")
    out = tmp_path / "render"

    def run():
        render_sequence(sequence, ["skin"], cameras, RenderSettings(),
                        out, lambda tid: atlas, workers=2)
        files = {p.relative_to(out).as_posix(): p.read_bytes()
                 for p in sorted(out.rglob("*")) if p.is_file()}
        shutil.rmtree(out)
        return files

    first, second = run(), run()
    assert first.keys() == second.keys()
    # 2 frames x 2 views x 1 texture
    assert sum(name.endswith(".png") for name in first) == 4
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"


def test_farm_fault_tolerance_exactly_once(tmp_path):
    journal = tmp_path / "journal.ndjson"
    result = run_simulation(n_jobs=200, n_workers=4, service_time=1.0,
                            failure_rate=0.1, seed=77, kill={"w0": 30.0},
                            journal_path=journal)

    # Every job reaches a terminal state, none lost, none duplicated.
    assert len(result.states) == 200
    terminal = {JobState.COMPLETED, JobState.FAILED_PERMANENT}
    assert set(result.states.values()) <= terminal
    completed = {j for j, s in result.states.items()
                 if s is JobState.COMPLETED}
    assert set(result.outputs) == completed
    assert all(count == 1 for count in result.outputs.values())

    # Conservation at every journal checkpoint: once the batch exists, the
    # per-state counts always sum to the batch size.
    events = read_journal(journal)
    assert events, "journal must not be empty"
    for upto in range(1, len(events) + 1):
        snapshot = replay_events(events[:upto]).get(result.batch_id)
        if snapshot is None:
            continue
        assert sum(snapshot.state_counts().values()) == 200, \
            f"conservation broken after event {upto}"
    final = replay_events(events)[result.batch_id]
    assert all(n == 1 for n in final.complete_events.values())

    # Restarting from the journal must not forget or redo completed work.
    restored = Coordinator.restore(journal)
    states = {job_id: view.state
              for job_id, view in restored.snapshot(result.batch_id).items()}
    assert states == result.states
    counts = restored.counts(result.batch_id)
    assert counts[JobState.PENDING] == 0 and counts[JobState.RUNNING] == 0
    restored.close()


def test_farm_restart_mid_batch_keeps_completed_work(tmp_path):
    journal = tmp_path / "journal.ndjson"
    coordinator = Coordinator(journal_path=journal)
    jobs = [RenderJob(job_id=f"j{i}", patient_id="p", clip_id="c",
                      texture_id=None, view_name="front", sequence_uri="s",
                      texture_uri=None, output_uri=f"o{i}")
            for i in range(6)]
    batch_id = coordinator.enqueue_batch(jobs, batch_id="interrupted")
    coordinator.hello("w0", capacity=4)
    assigned = coordinator.assign("w0")
    assert len(assigned) == 4
    coordinator.complete("w0", "j0", "done")
    coordinator.complete("w0", "j1", "done")
    coordinator.close()  # crash with j2/j3 still running

    restored = Coordinator.restore(journal)
    counts = restored.counts(batch_id)
    assert counts[JobState.COMPLETED] == 2
    assert counts[JobState.RUNNING] == 0
    assert counts[JobState.PENDING] == 4  # two orphans + two untouched
    restored.hello("w1", capacity=6)
    reassigned = {job.job_id for job in restored.assign("w1")}
    assert reassigned == {"j2", "j3", "j4", "j5"}  # completed never redone
    restored.close()


def test_farm_scaling_four_workers_beat_two_by_35_percent():
    wall_two = run_simulation(n_jobs=200, n_workers=2,
                              service_time=1.0).wall_time
    wall_four = run_simulation(n_jobs=200, n_workers=4,
                               service_time=1.0).wall_time
    assert wall_four <= 0.65 * wall_two


def test_batch_report_cluster_scale_arithmetic():
    report = BatchReport.compute(batch_id="cluster", total_jobs=8600,
                                 completed=8600, failed_permanently=0,
                                 retried=0, wall_time=120 * 60.0)
    assert report.throughput == pytest.approx(71.7, rel=0.01)
    assert report.mean_slot_minutes(320) == pytest.approx(4.47, rel=0.01)


def test_plan_job_counts_match_brute_force_on_thirty_configs():
    texture_counts = (0, 1, 2, 3, 5, 10)
    view_sets = (("front",), ("side",), ("front", "side"))
    # Every (texture count, view set) condition appears at least once, then
    # extra randomized shapes up to 30 configurations total.
    configs = [(n, views) for n in texture_counts for views in view_sets]
    rng = random.Random(30303)
    while len(configs) < 30:
        configs.append((rng.choice(texture_counts), rng.choice(view_sets)))
    for index, (n, views) in enumerate(configs):
        shape_rng = random.Random(1000 + index)
        clips = make_clips(n_patients=shape_rng.randint(1, 6),
                           clips_per_patient=shape_rng.randint(1, 4))
        plan = AblationPlan(textures_per_patient=n, views=views, seed=index)
        assignments = make_assignments(clips, n, seed=index) if n else {}
        jobs = plan_jobs(clips, assignments, plan, out_root="out")
        expected = brute_force_variants(clips, assignments, plan)
        assert len(jobs) == len(clips) * max(1, n) * len(views)
        assert [(j.clip_id, j.texture_id, j.view_name)
                for j in jobs] == expected


def test_metric_oracles_at_scale():
    rng = random.Random(2718)

    # AUROC vs the O(n^2) pairwise estimator, with deliberate score ties.
    for _ in range(20):
        records = [PredictionRecord(f"c{i}", i % 2,
                                    round(rng.random(), 2))
                   for i in range(500)]
        rng.shuffle(records)
        assert auroc(records) == pytest.approx(pairwise_auroc(records),
                                               abs=1e-12)

    # Threshold metrics vs confusion-matrix brute force, exact.
    for _ in range(10):
        records = [PredictionRecord(f"c{i}", rng.randint(0, 1),
                                    rng.random()) for i in range(200)]
        threshold = rng.random()
        tp, fp, fn, tn = confusion_counts(records, threshold)
        denom = 2 * tp + fp + fn
        assert f1(records, threshold) == (2 * tp / denom if denom else 0.0)
        assert accuracy(records, threshold) == (tp + tn) / len(records)

    # Weighted BCE vs direct summation.
    for _ in range(10):
        records = [PredictionRecord(f"c{i}", i % 2, rng.random())
                   for i in range(300)]
        w_pos, w_neg = inverse_frequency_weights(r.label for r in records)
        assert weighted_bce(records, w_pos, w_neg) == pytest.approx(
            bce_direct(records, w_pos, w_neg), abs=1e-10)

    # AUROC is rank-based: strictly monotone score maps cannot change it.
    base = [PredictionRecord(f"c{i}", i % 2, round(rng.random(), 3))
            for i in range(300)]
    reference = auroc(base)
    monotone_maps = []
    for k in range(10):
        power = rng.uniform(0.3, 3.0)
        scale = rng.uniform(1.0, 9.0)
        monotone_maps.extend([
            lambda x, p=power: x ** p,
            lambda x, a=scale: math.log1p(a * x) / math.log1p(a),
        ])
    for transform in monotone_maps[:10]:
        mapped = [PredictionRecord(r.clip_id, r.label, transform(r.score))
                  for r in base]
        assert auroc(mapped) == pytest.approx(reference, abs=1e-12)


def test_split_balance_two_hundred_patients():
    rng = random.Random(515)
    strata = random_strata(rng, 200)
    records = records_for_patients(strata, clips_per_patient=4)
    result = stratified_split(records, ratios=(0.8, 0.2), seed=515)

    # Patient atomicity: zero patients with records in more than one split.
    splits_per_patient = defaultdict(set)
    for record in records:
        splits_per_patient[record.patient_id].add(
            result.assignment[record.patient_id])
    violations = sum(1 for s in splits_per_patient.values() if len(s) != 1)
    assert violations == 0

    # Recomputed per-stratum deviations stay within 0.05 on every axis.
    worst = histogram_deviations(result.assignment, strata,
                                 ("gender", "age_bucket", "expressiveness"))
    assert worst <= 0.05
    assert not result.best_effort


def test_headline_result_format_is_pinned_not_the_values():
    # Full-scale benchmark results depend on a restricted corpus and
    # cluster-scale training; they are out of reach here by design.  What
    # this artifact guarantees is the report schema those results are
    # published in: AUROC / F1 / accuracy per training regime.
    rng = random.Random(1001)
    table = {}
    for regime in ("real", "synth", "mixed"):
        records = [PredictionRecord(f"{regime}{i}", i % 2,
                                    min(1.0, max(0.0, 0.3 * (i % 2)
                                                 + rng.random() * 0.7)))
                   for i in range(40)]
        report = evaluate(records, threshold=0.5)
        payload = report.as_dict()
        assert set(payload) == {"auroc", "f1", "accuracy", "threshold",
                                "n_pos", "n_neg"}
        assert 0.0 <= payload["auroc"] <= 1.0
        assert 0.0 <= payload["f1"] <= 1.0
        assert 0.0 <= payload["accuracy"] <= 1.0
        assert payload["threshold"] == 0.5
        assert payload["n_pos"] + payload["n_neg"] == 40
        table[regime] = payload
    rendered = json.dumps(table, indent=2, sort_keys=True)
    assert json.loads(rendered) == table
