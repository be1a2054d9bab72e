import json
import math
import string
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from signalcurate.controllers import CandidateSet, RLAssistant, RLProposal, StateEncoding, train_assistant
from signalcurate.curation import (
    HEADER,
    CurationBatch,
    DatasetError,
    DegenerateWeightsError,
    PriorityConfig,
    PromptRecord,
    Provenance,
    build_prompt,
    cross_entropy,
    curate_run,
    curation_report,
    evaluate_curation_loss,
    export_dataset,
    fuse_priority,
    import_dataset,
    label_record,
    normalize,
    partition_and_weight,
    render_answer,
    render_state,
    score_sample,
    strip_hidden,
    threshold_filter,
    unlikelihood,
)
from signalcurate.deliberation import ConsensusSummary, MockChatClient, mock_panel
from signalcurate.network import TimingAction, grid_scenario
from signalcurate.sim import Simulator

GOLDEN = Path(__file__).parent / "golden" / "prompt_small.txt"


def rec(s, prov=None, answer="a", ids=None):
    prov = prov or (Provenance.DELIBERATED if s >= 0 else Provenance.NON_DELIBERATED)
    return PromptRecord("x", answer, s, prov, ids or {})


def small_inputs():
    h = StateEncoding(np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 1.0]]), np.array([3.0, -1.0]), 2, 15.0)
    proposal = RLProposal(TimingAction(1, 20.0), -0.125, (-0.2, -0.1), (0.0, 0.0, 1.0),
                          ((2.5, 15.0), (7.5, 25.0)), CandidateSet(1, (20.0, 25.0), ("history", "generative")))
    state = render_state(h, ["inN", "inE", "inS"], 4, 120, "demo")
    summary = ConsensusSummary("p1_d20 clears the north queue fastest.", {"p1_d20": 0.8})
    return h, proposal, state, summary


class TestPrompt:
    def test_golden(self):
        _, proposal, state, summary = small_inputs()
        assert build_prompt(state, proposal, summary) == GOLDEN.read_text(encoding="utf-8")

    def test_no_consensus_no_hidden(self):
        _, proposal, state, _ = small_inputs()
        x = build_prompt(state, proposal, None)
        assert "[HIDDEN_CONTEXT]" not in x
        assert x.index("[STATE]") < x.index("[RL_REFERENCE]")

    def test_deterministic_and_strippable(self):
        _, proposal, state, summary = small_inputs()
        a, b = build_prompt(state, proposal, summary), build_prompt(state, proposal, summary)
        assert a == b
        visible = strip_hidden(a)
        assert summary.text not in visible and "[HIDDEN_CONTEXT]" not in visible and "[RL_REFERENCE]" in visible

    def test_answer_ends_with_decision(self):
        h, *_ = small_inputs()
        assert render_answer(TimingAction(2, 17.0), h).splitlines()[-1] == "Decision: phase=2 duration=17"


class TestFusion:
    def test_hand_example(self):
        s = fuse_priority({"a": 0.0, "b": 10.0}, {"a": 1.0, "b": 0.0}, PriorityConfig(alpha=0.5))
        assert abs(s["a"] - 0.5) <= 1e-12 and abs(s["b"] - 0.5) <= 1e-12

    def test_constant_input(self):
        assert normalize({"a": 3.0, "b": 3.0}) == {"a": 0.5, "b": 0.5}
        assert normalize({"a": 3.0, "b": 3.0}, "zsigmoid") == {"a": 0.5, "b": 0.5}

    @given(st.dictionaries(st.sampled_from(list("abcdefgh")), st.tuples(st.floats(-50, 50), st.floats(0, 1)),
                           min_size=1))
    def test_boundary_laws_and_range(self, m):
        q = {k: v[0] for k, v in m.items()}
        r = {k: v[1] for k, v in m.items()}
        for f in ("minmax", "zsigmoid"):
            s1 = fuse_priority(q, r, PriorityConfig(alpha=1.0, f=f, g=f))
            s0 = fuse_priority(q, r, PriorityConfig(alpha=0.0, f=f, g=f))
            assert max(q[k] for k in q if s1[k] == max(s1.values())) == max(q.values())
            assert max(r[k] for k in r if s0[k] == max(s0.values())) == max(r.values())
            s = fuse_priority(q, r, PriorityConfig(alpha=0.3, f=f, g=f))
            assert all(0.0 <= v <= 1.0 for v in s.values())

    def test_keys_must_match(self):
        with pytest.raises(ValueError):
            fuse_priority({"a": 1}, {"b": 1})

    def test_config_validation(self):
        for bad in (dict(alpha=1.5), dict(lambda_neg=-1), dict(tau=0), dict(f="rank")):
            with pytest.raises(ValueError):
                PriorityConfig(**bad)


class TestLabels:
    def test_deliberated(self):
        assert label_record("a", {"a"}, {"a": 0.8}) == (0.8, Provenance.DELIBERATED)

    def test_non_deliberated(self):
        assert label_record("z", {"a"}, {"a": 0.8}) == (-1.0, Provenance.NON_DELIBERATED)

    def test_zero_stays_plus(self):
        s, prov = label_record("a", {"a"}, {"a": 0.0})
        batch = partition_and_weight([rec(s, prov)])
        assert s == 0.0 and len(batch.plus) == 1 and not batch.minus

    def test_invariant(self):
        with pytest.raises(ValueError):
            PromptRecord("x", "y", 0.2, Provenance.NON_DELIBERATED)


class TestFilterAndSample:
    def test_threshold(self):
        rs = [rec(s) for s in (0.1, -1.0, 0.9, 0.5, 0.49)]
        assert threshold_filter(rs, -math.inf) == rs
        assert threshold_filter(rs, 1.0) == []
        assert threshold_filter(rs, 0.5) == [r for r in rs if r.priority >= 0.5]

    @given(st.lists(st.floats(-1, 1), max_size=30), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
    def test_monotone(self, ss, k1, k2):
        rs = [rec(s) for s in ss]
        lo, hi = min(k1, k2), max(k1, k2)
        big, small = threshold_filter(rs, lo), threshold_filter(rs, hi)
        assert all(r in big for r in small)

    def test_trivial_sampling(self):
        rng = np.random.default_rng(0)
        one = [rec(0.3)]
        assert score_sample(one, 1, 0.25, rng) == one
        many = [rec(0.1 * i) for i in range(5)]
        assert score_sample(many, 9, 0.25, rng) == many

    def test_high_temperature_is_uniform(self):
        rs = [rec(s, answer=str(j)) for j, s in enumerate((-1.0, 0.0, 0.3, 0.9, 1.0))]
        rng = np.random.default_rng(1)
        trials, count = 10_000, 2
        hits = np.zeros(len(rs))
        for _ in range(trials):
            for r in score_sample(rs, count, 1e9, rng):
                hits[int(r.answer)] += 1
        p = count / len(rs)
        sigma = math.sqrt(p * (1 - p) / trials)
        assert np.all(np.abs(hits / trials - p) <= 3 * sigma)

    def test_low_temperature_prefers_high_scores(self):
        rs = [rec(s, answer=str(j)) for j, s in enumerate((-1.0, 0.0, 0.9, 1.0))]
        picked = score_sample(rs, 2, 0.01, np.random.default_rng(2))
        assert {r.answer for r in picked} == {"2", "3"}


class TestLoss:
    def test_hand_example(self):
        plus = (rec(0.25), rec(0.75))
        batch = CurationBatch(plus, (rec(-1.0),), (1.0, 3.0), 0.5)
        assert evaluate_curation_loss(batch, [[-2.0], [-4.0]], [1.0]) == 4.0

    def test_uniform_weights_reduce_to_mean(self):
        rng = np.random.default_rng(3)
        lps = [rng.normal(-1, 0.3, size=int(rng.integers(1, 8))) for _ in range(20)]
        batch = CurationBatch(tuple(rec(0.5) for _ in lps), (), (0.5,) * 20, 0.3)
        mean_ce = float(np.mean([-lp.sum() for lp in lps]))
        assert abs(evaluate_curation_loss(batch, lps, []) - mean_ce) <= 1e-12

    def test_lambda_zero_ignores_minus(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n_plus, n_minus = int(rng.integers(1, 6)), int(rng.integers(0, 6))
            w = tuple(rng.uniform(0.1, 1, n_plus))
            lps = [rng.normal(size=3) for _ in range(n_plus)]
            base = CurationBatch(tuple(rec(x) for x in w), tuple(rec(-1.0) for _ in range(n_minus)), w, 0.0)
            a = evaluate_curation_loss(base, lps, list(rng.uniform(0, 5, n_minus)))
            b = evaluate_curation_loss(base, lps, list(rng.uniform(0, 5, n_minus)))
            assert a == b

    def test_pure_unlikelihood(self):
        batch = partition_and_weight([rec(-1.0), rec(-1.0)], PriorityConfig(lambda_neg=0.3))
        assert not batch.plus
        assert evaluate_curation_loss(batch, [], [1.0, 3.0]) == pytest.approx(0.3 * 2.0)

    def test_all_plus(self):
        batch = partition_and_weight([rec(0.2), rec(0.6)])
        assert not batch.minus and batch.weights == (0.2, 0.6)

    def test_degenerate_weights(self):
        batch = partition_and_weight([rec(0.0), rec(0.0)])
        with pytest.raises(DegenerateWeightsError):
            evaluate_curation_loss(batch, [[-1.0], [-1.0]], [])

    def test_partition_oracle(self):
        rng = np.random.default_rng(5)
        rs = [rec(float(s)) for s in rng.choice([-1.0, 0.0, 0.3, 0.7, 1.0], 200)]
        batch = partition_and_weight(rs)
        assert list(batch.plus) == [r for r in rs if r.priority >= 0]
        assert list(batch.minus) == [r for r in rs if r.priority < 0]
        assert len(batch) == len(rs) and all(w >= 0 for w in batch.weights)

    def test_helpers(self):
        assert cross_entropy([-0.5, -1.5]) == 2.0
        assert unlikelihood([0.0, 0.5]) == pytest.approx(math.log(2))
        with pytest.raises(ValueError):
            unlikelihood([1.0])


TEXT = st.text(alphabet=string.printable + "éß中→ ", max_size=40)


def random_records(rng, n):
    out = []
    for i in range(n):
        prov = list(Provenance)[int(rng.integers(0, 3))]
        s = -1.0 if prov is Provenance.NON_DELIBERATED else float(rng.uniform(0, 1))
        x = "".join(rng.choice(list("ab \n\t\"\\{}é中"), size=int(rng.integers(0, 30))))
        y = "".join(rng.choice(list("xyz\n\r:,"), size=int(rng.integers(0, 30))))
        out.append(PromptRecord(x, y, s, prov, {"scenario": "g", "intersection": int(rng.integers(1, 9)),
                                                "tick": int(rng.integers(0, 3600)), "action": f"p1_d{i}"}))
    return out


class TestDataset:
    def test_round_trip(self, tmp_path):
        rs = random_records(np.random.default_rng(6), 1000)
        assert export_dataset(rs, tmp_path / "d.jsonl") == 1000
        assert import_dataset(tmp_path / "d.jsonl") == rs

    def test_empty(self, tmp_path):
        export_dataset([], tmp_path / "e.jsonl")
        assert (tmp_path / "e.jsonl").read_text(encoding="utf-8").splitlines() == [HEADER]
        assert import_dataset(tmp_path / "e.jsonl") == []

    def test_newline_escaped(self, tmp_path):
        r = PromptRecord("p", "line one\nline two", 0.5, Provenance.DELIBERATED, {"tick": 1})
        export_dataset([r], tmp_path / "n.jsonl")
        lines = (tmp_path / "n.jsonl").read_text(encoding="utf-8").split("\n")
        assert len(lines) == 3 and lines[2] == ""
        doc = json.loads(lines[1])
        assert doc["answer"] == "line one\nline two"
        assert doc["split"] == "plus" and doc["weight"] == 0.5
        assert import_dataset(tmp_path / "n.jsonl") == [r]

    def test_batch_export_splits(self, tmp_path):
        batch = partition_and_weight([rec(0.4), rec(-1.0)])
        export_dataset(batch, tmp_path / "b.jsonl")
        docs = [json.loads(x) for x in (tmp_path / "b.jsonl").read_text().splitlines()[1:]]
        assert [d["split"] for d in docs] == ["plus", "minus"] and docs[1]["weight"] == 0.0

    @given(st.lists(st.tuples(TEXT, TEXT, st.floats(0, 1)), max_size=5))
    def test_round_trip_property(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "d.jsonl"
        rs = [PromptRecord(x, y, s, Provenance.DELIBERATED, {"k": x}) for x, y, s in rows]
        export_dataset(rs, path)
        assert import_dataset(path) == rs

    def test_io_errors_name_path(self, tmp_path):
        with pytest.raises(DatasetError, match="missing"):
            import_dataset(tmp_path / "missing.jsonl")
        with pytest.raises(DatasetError, match="nodir"):
            export_dataset([rec(0.1)], tmp_path / "nodir" / "x.jsonl")
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not a header\n")
        with pytest.raises(DatasetError, match="header"):
            import_dataset(bad)


@pytest.fixture(scope="module")
def single():
    net, demand, cfg = grid_scenario(1, 1, veh_per_hour=300, horizon=100)
    sim = Simulator(net, demand, cfg)
    return sim, train_assistant(sim, 0, episodes=1)


class TestPipeline:
    def test_records_per_decision(self, single):
        sim, assistant = single
        d, c = mock_panel()
        run = curate_run(sim, assistant, d, c, seed=0, scenario="one", horizon=100)
        ticks = {r.ids["tick"] for r in run.records}
        assert run.decisions >= 1 and len(ticks) == run.decisions
        assert len(run.records) >= run.decisions
        rep = curation_report(run.records, PriorityConfig(), run.decisions)
        assert rep["d_plus"] + rep["d_minus"] == rep["records"] == len(run.records)
        assert rep["priority_histogram"]["negative"] + sum(b["count"] for b in rep["priority_histogram"]["bins"]) \
            == rep["records"]

    def test_every_decision_has_deliberated_record(self, single):
        sim, assistant = single
        d, c = mock_panel()
        run = curate_run(sim, assistant, d, c, seed=1, horizon=100)
        by_tick = {}
        for r in run.records:
            by_tick.setdefault(r.ids["tick"], []).append(r)
            if r.provenance is Provenance.DELIBERATED:
                assert 0.0 <= r.priority <= 1.0
            else:
                assert r.priority == -1.0
        assert all(any(r.provenance is Provenance.DELIBERATED for r in rs) for rs in by_tick.values())

    def test_deterministic_dataset(self, single, tmp_path):
        sim, assistant = single
        blobs = []
        for i in range(2):
            d, c = mock_panel()
            run = curate_run(sim, assistant, d, c, seed=3, horizon=100)
            export_dataset(run.records, tmp_path / f"{i}.jsonl")
            blobs.append((tmp_path / f"{i}.jsonl").read_bytes())
        assert blobs[0] == blobs[1]

    def test_consensus_failure_falls_back(self, single):
        sim, assistant = single
        d, _ = mock_panel()
        run = curate_run(sim, assistant, d, MockChatClient(always_fail=True), seed=0, horizon=100)
        assert run.fallbacks == run.decisions >= 1
        provs = {r.provenance for r in run.records}
        assert Provenance.DELIBERATED not in provs and Provenance.RL_ONLY in provs
        for r in run.records:
            if r.provenance is Provenance.RL_ONLY:
                assert "[HIDDEN_CONTEXT]" not in r.prompt and 0.0 <= r.priority <= 1.0
