"""End-to-end smoke tests for the python bindings."""

import json

import pytest

import graphroute as gr


@pytest.fixture(scope="module")
def registry():
    return gr.BackendRegistry.default_registry()


@pytest.fixture(scope="module")
def world(registry):
    script, dataset = gr.make_synthetic_world(registry, count=30, seed=5)
    return gr.SimWorld(script, registry, seed=5), dataset


def test_registry(registry):
    assert registry.has_graphrag("RAPTOR")
    assert registry.has_llm("Qwen2.5-7B-Instruct")
    assert registry.llm_cost("LLaMA-3.1-70B-Instruct") == 4
    assert len(registry.graphrag_ids()) == 5


def test_protocol_round_trip():
    plan = [
        gr.Segment(gr.SegmentKind.THINK, "needs facts"),
        gr.Segment(gr.SegmentKind.ANSWER, "Beijing"),
    ]
    text = gr.render_turn(plan)
    assert text == "<think>needs facts</think><answer>Beijing</answer>"
    segments, defects = gr.tokenize(text)
    assert [s.kind for s in segments] == [gr.SegmentKind.THINK, gr.SegmentKind.ANSWER]
    assert not defects

    action = gr.parse_search_action("q: Qwen2.5-7B-Instruct; RAPTOR")
    assert action.llm_id == "Qwen2.5-7B-Instruct"
    assert action.graphrag_id == "RAPTOR"
    with pytest.raises(gr.EngineError):
        gr.parse_search_action("no separators")


def test_format_reward(registry):
    clean = (
        "<think>a</think><graphrag>HippoRAG2</graphrag><think>b</think>"
        "<llm>Qwen2.5-7B-Instruct</llm><search>q:Qwen2.5-7B-Instruct;HippoRAG2</search>"
        "<information>Answer: x</information><think>c</think><answer>x</answer>"
    )
    penalty, fired = gr.format_reward(gr.parse_trajectory(clean), registry)
    assert penalty == 0.0 and fired == []

    penalty, fired = gr.format_reward(gr.parse_trajectory("<think>a<answer>b</answer></think>"), registry)
    assert penalty == 1.0 and fired == ["fatal"]


def test_outcome_and_cost_rewards():
    assert gr.exact_match("beijing", ["Beijing"]) == 1.0
    assert gr.f1_score("alpha beta gamma", ["alpha beta"]) == pytest.approx(0.8)
    assert gr.cost_reward(4, gr.Difficulty.EASY, 1) == pytest.approx(0.15)
    assert gr.shape(0.0, 1.0, 0.15, gr.Stage.STAGE2) == pytest.approx(0.85)
    assert gr.shape(0.0, 0.0, 0.15, gr.Stage.STAGE2) == 0.0


def test_sim_world_and_episode(registry, world):
    backend, dataset = world
    q = dataset[0]
    profile = gr.profile_question(q, backend, registry, n_trials=5, tau=0.8, seed=5)
    assert profile.trials == 5
    assert profile.c_min in (1, 2, 4)

    policy = gr.PolicySnapshot.make(registry)
    episode = gr.run_episode(policy, registry, backend, q, seed=3)
    assert episode.question_id == q.id
    assert 0.0 <= episode.em <= 1.0
    assert episode.valid_calls <= 4


def test_policy_math(registry):
    q = gr.QuestionRecord("q1", "which entry?", ["x"], {"topic": "music", "hops": "1"})
    features = gr.featurize(q)
    assert features[0] == 1.0
    graphrag_probs, conditional = gr.action_probabilities(gr.PolicySnapshot.make(registry), features)
    assert sum(graphrag_probs.values()) == pytest.approx(1.0)
    for g, row in conditional.items():
        assert sum(row.values()) == pytest.approx(1.0)

    advantages = gr.group_advantages([1.0, 1.0, 0.0, 1.0, 0.0])
    assert advantages[0] == pytest.approx(0.8164966, abs=1e-4)
    assert sum(advantages) == pytest.approx(0.0, abs=1e-9)

    g1, l1, lp1 = gr.sample_action(gr.PolicySnapshot.make(registry), features, registry, seed=9)
    g2, l2, lp2 = gr.sample_action(gr.PolicySnapshot.make(registry), features, registry, seed=9)
    assert (g1, l1, lp1) == (g2, l2, lp2)


def test_traces(registry):
    plan = gr.GeneralTracePlan()
    plan.question = "what is bermuda competing in the winter olympics?"
    plan.graphrag_id = "HippoRAG2"
    plan.llm_id = "Qwen2.5-7B-Instruct"
    plan.information = "Answer: Cross-country skiing"
    plan.answer = "Cross-country skiing"
    plan.rationale_graphrag = "fact chains match the requirement"
    plan.rationale_llm = "a compact reader can provide the answer"
    plan.rationale_sufficiency = "sufficient"
    text = gr.build_general_trace(plan, registry)
    report = gr.validate_trace(text, registry)
    assert report["penalty"] == 0.0
    assert report["lint"] == []
    assert report["turns"] == 2

    plan.rationale_llm = "this one is optimal"
    linted = gr.validate_trace(gr.build_general_trace(plan, registry), registry)
    assert linted["lint"] == ["optimal"]


def test_evaluate_determinism(registry, world):
    backend, dataset = world
    policy = gr.PolicySnapshot.make(registry)
    r1 = gr.evaluate(policy, dataset, registry, backend, seed=7, parallelism=4)
    r2 = gr.evaluate(policy, dataset, registry, backend, seed=7, parallelism=1)
    assert r1["em"] == r2["em"]
    assert r1["routing_share"] == r2["routing_share"]


def test_cli_round_trip(tmp_path):
    world = str(tmp_path / "world.json")
    dataset = str(tmp_path / "dataset.jsonl")
    report = str(tmp_path / "report.jsonl")
    assert gr.run_cli(["make-world", "--quiet", "--out-world", world, "--out-dataset", dataset,
                       "--count", "10", "--seed", "3"]) == 0
    assert gr.run_cli(["eval", "--quiet", "--dataset", dataset, "--world", world,
                       "--seed", "3", "--out", report]) == 0
    lines = [json.loads(line) for line in open(report)]
    assert any(rec["metric"] == "em" for rec in lines)
