"""Acceptance suite. Run with ``pytest tests/test_acceptance.py -s`` to see one
PASS/FAIL line per criterion."""

import itertools
import statistics
import time

import numpy as np
import pytest

from signalcurate.controllers import (
    AssistantController,
    CriticModel,
    FixedTimeController,
    MaxPressureController,
    RandomController,
    StateEncoding,
    critic_value,
    select_duration,
    train_assistant,
)
from signalcurate.cli import bench
from signalcurate.curation import (
    CurationBatch,
    NON_DELIBERATED_PRIORITY,
    PriorityConfig,
    PromptRecord,
    Provenance,
    evaluate_curation_loss,
    export_dataset,
    fuse_priority,
    import_dataset,
    label_record,
    partition_and_weight,
)
from signalcurate.deliberation import Candidate, DeliberationContext, deliberate, mock_panel
from signalcurate.network import ConflictRelation, Movement, TimingAction, Turn, enumerate_phases, grid_scenario
from signalcurate.sim import Simulator, run_episode, write_csv

SEEDS = range(5)


def verdict(n, title, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, detail


@pytest.fixture(scope="module")
def grid3():
    net, demand, cfg = grid_scenario(3, 3, veh_per_hour=300, horizon=3600)
    return Simulator(net, demand, cfg)


def median_metrics(sim, make):
    runs = [run_episode(sim, make(), seed=s).metrics for s in SEEDS]
    return statistics.median(r.att for r in runs), statistics.median(r.awt for r in runs)


def test_01_baseline_ordering(grid3):
    t0 = time.perf_counter()
    mp = median_metrics(grid3, MaxPressureController)
    ft = median_metrics(grid3, FixedTimeController)
    rnd = median_metrics(grid3, RandomController)
    wall = time.perf_counter() - t0
    ok = mp[0] < ft[0] < rnd[0] and mp[1] < ft[1] < rnd[1] and wall < 60
    verdict(1, "MaxPressure < FixedTime < Random on median ATT and AWT", ok,
            f"ATT {mp[0]:.1f}/{ft[0]:.1f}/{rnd[0]:.1f}, AWT {mp[1]:.1f}/{ft[1]:.1f}/{rnd[1]:.1f}, {wall:.1f}s")


def test_02_critic_durations_beat_fixed_15s(grid3):
    rl, fixed = [], []
    for s in SEEDS:
        assistant = train_assistant(grid3, s, episodes=2, explore=0.1)
        rl.append(run_episode(grid3, AssistantController(assistant), seed=s).metrics.att)
        fixed.append(run_episode(grid3, MaxPressureController(15.0), seed=s).metrics.att)
    a, b = statistics.median(rl), statistics.median(fixed)
    verdict(2, "critic-selected durations within 2% of fixed 15 s or better", a <= 1.02 * b,
            f"median ATT {a:.2f} vs {b:.2f}")


def test_03_select_duration_is_exhaustive_argmax():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        Q = CriticModel(n_quantiles=int(rng.integers(1, 9)))
        Q.weights = rng.normal(size=Q.weights.shape)
        h = StateEncoding(rng.uniform(0, 10, size=(1, 4)), rng.normal(size=3), int(rng.integers(0, 4)),
                          float(rng.integers(0, 60)))
        p = int(rng.integers(1, 4))
        cands = rng.choice(np.arange(5, 61), size=int(rng.integers(1, 21)), replace=False).astype(float)
        vals = [(critic_value(Q, h, p, d, 5, 60)[1], -d) for d in cands]
        oracle = -max(vals)[1]
        mismatches += select_duration(list(cands), Q, h, p, 5, 60) != oracle
    verdict(3, "select_duration equals exhaustive argmax", mismatches == 0, f"{mismatches} mismatches")


def first_argmax(m):
    keys = sorted(m)
    return max(keys, key=lambda k: (m[k], -keys.index(k)))


def test_04_fusion_boundary_laws():
    rng = np.random.default_rng(77)
    mismatches = 0
    for _ in range(1000):
        keys = [f"a{i}" for i in range(int(rng.integers(1, 9)))]
        q = {k: float(rng.normal()) for k in keys}
        r = {k: float(rng.uniform()) for k in keys}
        s1 = fuse_priority(q, r, PriorityConfig(alpha=1.0))
        s0 = fuse_priority(q, r, PriorityConfig(alpha=0.0))
        mismatches += first_argmax(s1) != first_argmax(q)
        mismatches += first_argmax(s0) != first_argmax(r)
    hand = fuse_priority({"a": 0.0, "b": 10.0}, {"a": 1.0, "b": 0.0}, PriorityConfig(alpha=0.5))
    err = max(abs(hand["a"] - 0.5), abs(hand["b"] - 0.5))
    verdict(4, "fusion boundary laws and hand example", mismatches == 0 and err <= 1e-12,
            f"{mismatches} mismatches, hand error {err:.1e}")


def rec(s):
    prov = Provenance.DELIBERATED if s >= 0 else Provenance.NON_DELIBERATED
    return PromptRecord("x", "y", s, prov, {})


def test_05_loss_identities():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 8))
        w = float(rng.uniform(0.1, 1.0))
        lps = [rng.normal(size=int(rng.integers(1, 6))) - 3 for _ in range(n)]
        batch = CurationBatch(tuple(rec(w) for _ in range(n)), (), (w,) * n, 0.3)
        mean_ce = float(np.mean([-lp.sum() for lp in lps]))
        worst = max(worst, abs(evaluate_curation_loss(batch, lps, []) - mean_ce))
    hand_batch = CurationBatch((rec(0.25), rec(0.75)), (rec(-1.0),), (1.0, 3.0), 0.5)
    hand = evaluate_curation_loss(hand_batch, [[-2.0], [-4.0]], [1.0])
    independent = True
    for _ in range(200):
        n_plus, n_minus = int(rng.integers(1, 6)), int(rng.integers(0, 6))
        w = tuple(rng.uniform(0.1, 1, n_plus))
        lps = [rng.normal(size=3) for _ in range(n_plus)]
        a = CurationBatch(tuple(rec(x) for x in w), tuple(rec(-1.0) for _ in range(n_minus)), w, 0.0)
        b = CurationBatch(tuple(rec(x) for x in w), tuple(rec(-1.0) for _ in range(int(rng.integers(0, 6)))), w, 0.0)
        la = evaluate_curation_loss(a, lps, list(rng.uniform(0, 5, len(a.minus))))
        lb = evaluate_curation_loss(b, lps, list(rng.uniform(0, 5, len(b.minus))))
        independent &= la == lb
    ok = worst <= 1e-12 and hand == 4.0 and independent
    verdict(5, "loss identities", ok, f"mean-CE error {worst:.1e}, hand {hand!r}, lambda=0 independent {independent}")


def mis_oracle(n, edges):
    adj = set(edges) | {(j, i) for i, j in edges}
    indep = [frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(n), r)
             if all((i, j) not in adj for i, j in itertools.combinations(c, 2))]
    sets = set(indep)
    return sorted(tuple(i + 1 for i in sorted(s)) for s in indep if not any(s < t for t in sets))


def test_06_phase_enumeration_oracle():
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 13))
        density = rng.uniform()
        edges = [e for e in itertools.combinations(range(n), 2) if rng.uniform() < density]
        moves = [Movement(i + 1, f"u{i}", f"o{i}", Turn.THROUGH) for i in range(n)]
        rel = ConflictRelation.from_pairs([(i + 1, j + 1) for i, j in edges])
        got = sorted(tuple(sorted(p.movements)) for p in enumerate_phases(moves, rel))
        mismatches += got != mis_oracle(n, edges)
    verdict(6, "phase enumeration equals maximal independent sets", mismatches == 0, f"{mismatches} mismatches")


def test_07_conservation_and_determinism(grid3):
    csvs = []
    for _ in range(2):
        result = run_episode(grid3, MaxPressureController(), seed=3, horizon=3600, check_conservation=True)
        csvs.append(write_csv([result.metrics.row("grid3x3", "max_pressure", 3)]))
    verdict(7, "conservation every tick and identical metrics CSVs", csvs[0] == csvs[1],
            f"{result.metrics.spawned} spawned")


def test_08_deliberation_determinism_and_totality():
    rng = np.random.default_rng(8)
    ok, checked = True, 0
    for _ in range(25):
        durations = rng.choice(np.arange(5, 61), 6, replace=False)
        cands = tuple(Candidate(TimingAction(int(rng.integers(1, 5)), float(d)), float(rng.normal()))
                      for d in durations)
        ctx = DeliberationContext("lane queues: inN=4 inS=2", cands, "3 1 0 2", "q=3 -> D=20s")
        outs = []
        for _ in range(2):
            defenders, consensus = mock_panel(3)
            outs.append(deliberate(ctx, defenders, consensus, K=4))
        ok &= repr(outs[0]) == repr(outs[1])
        res = outs[0]
        filtered = {c.id for c in res.filtered}
        ok &= set(res.summary.scores) == filtered
        ok &= all(0.0 <= v <= 1.0 for v in res.summary.scores.values())
        fused = fuse_priority({c.id: c.q_rl for c in res.filtered}, res.summary.scores)
        for c in cands:
            s, prov = label_record(c.id, filtered, fused)
            if c.id not in filtered:
                ok &= s == NON_DELIBERATED_PRIORITY == -1.0 and prov is Provenance.NON_DELIBERATED
                checked += 1
    verdict(8, "deliberation reproducible, scores total in [0,1], non-deliberated at -1", ok and checked > 0,
            f"{checked} non-deliberated actions checked")


def test_09_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    records = []
    for i in range(1000):
        prov = list(Provenance)[int(rng.integers(0, 3))]
        s = -1.0 if prov is Provenance.NON_DELIBERATED else float(rng.uniform())
        text = "".join(rng.choice(list("ab \n\t\"\\{}é中"), size=int(rng.integers(0, 30))))
        records.append(PromptRecord(text, f"Decision: phase=1 duration={i}", s, prov,
                                    {"scenario": "g", "intersection": int(rng.integers(1, 9)), "tick": i}))
    path = tmp_path / "d.jsonl"
    export_dataset(records, path)
    back = import_dataset(path)
    batch = partition_and_weight(back)
    ok = back == records and len(batch.plus) + len(batch.minus) == len(records)
    verdict(9, "dataset round trip and partition sizes", ok,
            f"D+ {len(batch.plus)} + D- {len(batch.minus)} = {len(records)}")


def test_10_scale():
    res = bench(12, 15, horizon=3600)
    ok = res["intersections"] >= 177 and res["wall_clock_s"] < 30
    verdict(10, "benchmark at >=177 intersections x 3600 ticks under 30 s", ok,
            f"{res['intersections']} intersections, {res['wall_clock_s']:.1f}s")
