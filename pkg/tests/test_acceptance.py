"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS/FAIL
lines and measured values. All fixtures and thresholds are frozen here;
nothing is tuned at run time.
"""

import time
from decimal import Decimal, getcontext

import numpy as np

from renntrack import (EngineConfig, IdentityEngine, MemoryStore, SynthConfig,
                       renn_match, rotating_schedule, run_stability_suite)
from renntrack.cli import bench_matching, main
from renntrack.matching import Observation
from renntrack.metrics import (GtEntry, MatchedPair, PredEntry, EvalCounts,
                               evaluate_frames, id_switches, mota,
                               weighted_purity)
from renntrack.streams import synth_frames

getcontext().prec = 60


def verdict(ok: bool, label: str, detail: str) -> bool:
    print(f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


# -- criterion 1: matcher equals a full-sort oracle --------------------------

def oracle_full_sort(mem, frame, rho_bar):
    accepted = {}
    for row in range(len(mem)):
        dists = np.linalg.norm(frame - mem[row], axis=1)
        order = sorted(range(len(frame)), key=lambda j: (dists[j], j))
        nn1, nn2 = order[0], order[1]
        d1, d2 = float(dists[nn1]), float(dists[nn2])
        ratio = d1 / d2 if d2 > 0 else 0.0
        if ratio < rho_bar:
            accepted.setdefault(nn1, {})[row] = (d1, d2, ratio)
    return accepted


def test_criterion_1_renn_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    checked = 0
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 501))
        m = int(rng.integers(2, 21))
        d = int(rng.integers(2, 65))
        mem = rng.standard_normal((n, d))
        frame_pts = rng.standard_normal((m, d))
        store = MemoryStore(d, capacity=n + 1, normalize=False)
        keys = [store.insert(mem[i], store.next_id) for i in range(n)]
        row_of = {key: row for row, key in enumerate(keys)}
        frame = [Observation(j, frame_pts[j]) for j in range(m)]
        groups = renn_match(store, frame, rho_bar=1.6, alpha=0.01,
                            tau_abs=1.0)
        expected = oracle_full_sort(mem, frame_pts, 1.6)

        assert set(groups) == set(expected)
        for obs_index, recs in groups.items():
            want = expected[obs_index]
            assert {row_of[r.item_key] for r in recs} == set(want)
            for rec in recs:
                d1, d2, ratio = want[row_of[rec.item_key]]
                assert rec.obs_index == obs_index
                worst = max(worst, abs(rec.d1 - d1), abs(rec.d2 - d2),
                            abs(rec.ratio - ratio))
                assert abs(rec.d1 - d1) < 1e-6
                assert abs(rec.d2 - d2) < 1e-6
                assert abs(rec.ratio - ratio) < 1e-6
            checked += len(recs)
    elapsed = time.perf_counter() - start
    ok = elapsed < 30.0
    assert verdict(ok, "1 renn-oracle-equivalence",
                   f"1000 instances, {checked} records, worst |err| "
                   f"{worst:.2e}, {elapsed:.1f}s < 30s")


# -- criterion 2: contraction over a long run + exact threshold crossing -----

def test_criterion_2_contraction_and_crossing():
    cfg = SynthConfig(n_identities=5, dimension=16, frames=10_000,
                      sigma=0.05, min_separation_deg=60.0, miss_rate=0.02,
                      clutter_rate=0.01, seed=17,
                      presence=rotating_schedule(5, 10_000))
    engine = IdentityEngine(EngineConfig(dimension=16, capacity=1500,
                                         rho_bar=0.7, seed=17))
    eligibility: dict[int, float] = {}
    n_decays = 0
    eta_max = 0.0
    monotone = True
    for frame in synth_frames(cfg):
        result = engine.process_frame(frame.observations(), frame.frame)
        for key, eta in result.decays:
            assert 0.0 < eta < 1.0
            eta_max = max(eta_max, eta)
            before = eligibility.get(key, 1.0)
            after = before * eta
            monotone &= after < before
            eligibility[key] = after
            n_decays += 1

    # constant-factor iteration crosses the 0.5 threshold exactly at step 60
    value, steps = Decimal(1), 0
    while value >= Decimal("0.5"):
        value *= Decimal("0.988434")
        steps += 1
    store = MemoryStore(2, capacity=4, e_bar=0.5)
    key = store.insert(np.array([1.0, 0.0]), 0)
    crossing = None
    for step in range(1, 100):
        if store.decay_and_touch([(key, 0.988434)]) == [key]:
            crossing = step
            break
    ok = monotone and eta_max < 1.0 and steps == 60 and crossing == 60
    assert verdict(ok, "2 contraction-stability",
                   f"{n_decays} decays over 10k frames, max eta "
                   f"{eta_max:.6f} < 1, traces non-increasing={monotone}, "
                   f"crossing at step {crossing} (oracle {steps})")


# -- criterion 3: scalar convergence study -----------------------------------

def test_criterion_3_stability_reproduction():
    start = time.perf_counter()
    results = run_stability_suite()  # offsets 6, 3, 1.5 at 1000 iterations
    elapsed = time.perf_counter() - start
    details = []
    ok = elapsed < 10.0
    for res in results:
        ok &= res.l1_distinctive < res.l1_non_distinctive
        ok &= res.l1_distinctive < res.l1_uniform_baseline
        details.append(f"offset {res.offset:g}: {res.l1_distinctive:.3f} < "
                       f"other {res.l1_non_distinctive:.3f} / uniform "
                       f"{res.l1_uniform_baseline:.3f}")
    assert verdict(ok, "3 stability-reproduction",
                   "; ".join(details) + f"; {elapsed:.1f}s < 10s")


# -- criterion 4: synthetic tracking benchmark -------------------------------

def run_benchmark_stream(stream_cfg: SynthConfig, engine_cfg: EngineConfig):
    engine = IdentityEngine(engine_cfg)
    preds, gts = [], []
    for frame in synth_frames(stream_cfg):
        result = engine.process_frame(frame.observations(), frame.frame)
        gts.append([GtEntry(d.det, d.gt, d.bbox)
                    for d in frame.detections if d.gt is not None])
        frame_preds = []
        for a in result.assignments:
            if a.identity is None:
                continue
            det = frame.detections[a.obs_index]
            frame_preds.append(PredEntry(a.det_key or det.det, a.identity,
                                         det.bbox))
        preds.append(frame_preds)
    return evaluate_frames(preds, gts, mode="key"), engine


def test_criterion_4_tracking_benchmark():
    start = time.perf_counter()
    stream_cfg = SynthConfig(
        n_identities=5, dimension=64, frames=2000, sigma=0.1,
        min_separation_deg=60.0, miss_rate=0.02, clutter_rate=0.01, seed=1,
        presence=rotating_schedule(5, 2000))
    engine_cfg = EngineConfig(dimension=64, capacity=2000, rho_bar=0.7,
                              seed=1)
    report, _ = run_benchmark_stream(stream_cfg, engine_cfg)
    elapsed = time.perf_counter() - start
    ok = (report.mota >= 0.90
          and report.purity.weighted_purity >= 0.95
          and report.counts.total_ids <= 2
          and elapsed < 60.0)
    assert verdict(ok, "4 synthetic-benchmark",
                   f"MOTA {report.mota:.4f} >= 0.90, purity "
                   f"{report.purity.weighted_purity:.4f} >= 0.95, IDS "
                   f"{report.counts.total_ids} <= 2, {elapsed:.1f}s < 60s")


# -- criterion 5: memory boundedness under overflow pressure -----------------

def run_boundedness_stream():
    stream_cfg = SynthConfig(
        n_identities=20, dimension=16, frames=20_000, sigma=0.05,
        min_separation_deg=60.0, miss_rate=0.02, clutter_rate=0.05, seed=11,
        presence=rotating_schedule(20, 20_000, warmup=500, absence=400,
                                   spacing=300))
    engine = IdentityEngine(EngineConfig(dimension=16, capacity=1000,
                                         rho_bar=0.7, seed=11))
    sizes, evictions = [], []
    for frame in synth_frames(stream_cfg):
        result = engine.process_frame(frame.observations(), frame.frame)
        sizes.append(result.memory_size)
        evictions.extend(result.evicted_keys)
    return sizes, evictions


def test_criterion_5_memory_boundedness():
    sizes_a, evictions_a = run_boundedness_stream()
    sizes_b, evictions_b = run_boundedness_stream()
    bounded = max(sizes_a) <= 1000
    ok = (bounded and len(evictions_a) > 0
          and evictions_a == evictions_b and sizes_a == sizes_b)
    assert verdict(ok, "5 memory-boundedness",
                   f"20k frames, max size {max(sizes_a)} <= 1000, "
                   f"{len(evictions_a)} LRUA evictions, replay identical="
                   f"{evictions_a == evictions_b}")


# -- criterion 6: metric unit values -----------------------------------------

def test_criterion_6_metric_units():
    counts = EvalCounts()
    counts.add_frame(10, 1, 1, 0)
    mota_value = mota(counts)

    purity_value = weighted_purity(
        [(1, "A")] * 3 + [(1, "B")] + [(2, "B")] * 6).weighted_purity

    switch_total = sum(id_switches(
        [[MatchedPair(3, label, None)] for label in
         ("alice", "bob", "alice")]))

    ok = (mota_value == 0.8 and purity_value == 0.9 and switch_total == 2)
    assert verdict(ok, "6 metric-units",
                   f"MOTA {mota_value} == 0.8, W {purity_value} == 0.9, "
                   f"IDS {switch_total} == 2")


# -- criterion 7: matching throughput ----------------------------------------

def test_criterion_7_throughput():
    record = bench_matching(50_000, 10, 256, frames=20, repeats=5, seed=0)
    ok = record["fps_median"] >= 10.0
    assert verdict(ok, "7 throughput",
                   f"median {record['fps_median']:.1f} fps >= 10 "
                   f"(N=50000, M=10, d=256)")


# -- criterion 8: bit-identical replays through the CLI -----------------------

def test_criterion_8_determinism(tmp_path, capsys):
    stream = tmp_path / "stream.jsonl"
    assert main(["synth", "--output", str(stream), "--identities", "5",
                 "--frames", "500", "--dim", "32", "--sigma", "0.08",
                 "--seed", "21"]) == 0
    blobs = []
    for tag in ("a", "b"):
        results = tmp_path / f"{tag}.results.jsonl"
        snapshot = tmp_path / f"{tag}.memory"
        assert main(["track", "--input", str(stream),
                     "--output", str(results), "--snapshot", str(snapshot),
                     "--rho-bar", "0.7", "--seed", "13"]) == 0
        blobs.append((results.read_bytes(), snapshot.read_bytes()))
    capsys.readouterr()
    ok = blobs[0] == blobs[1]
    with capsys.disabled():
        assert verdict(ok, "8 determinism",
                       f"results {len(blobs[0][0])} bytes and snapshot "
                       f"{len(blobs[0][1])} bytes identical across runs")
