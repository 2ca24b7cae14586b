#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "graphroute/cli.hpp"
#include "graphroute/evaluate.hpp"
#include "graphroute/synthetic.hpp"
#include "graphroute/traces.hpp"
#include "graphroute/trainer.hpp"

using namespace graphroute;
using backends::BackendRegistry;
using backends::SimBackend;
using backends::Tier;

namespace {

const BackendRegistry& registry() {
    static BackendRegistry r = backends::default_registry();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// one scripted question solvable only via (HippoRAG2, small and above)
backends::WorldScript bermuda_world() {
    backends::WorldScript script;
    backends::QuestionScript q;
    q.id = "bermuda";
    q.question = "what is bermuda competing in the winter olympics?";
    q.answers = {"Cross-country skiing"};
    q.evidence = "Bermuda sent one athlete, a cross-country skier, to the Winter Olympics.";
    q.attrs["topic"] = "sports";
    for (auto tier : {Tier::Small, Tier::Medium, Tier::Large}) {
        q.pairs.push_back({"HippoRAG2", tier, 1.0});
    }
    script.questions.push_back(q);
    return script;
}

harness::QuestionRecord bermuda_record() {
    harness::QuestionRecord record;
    record.id = "bermuda";
    record.question = "what is bermuda competing in the winter olympics?";
    record.gold_answers = {"Cross-country skiing"};
    record.attrs["topic"] = "sports";
    return record;
}

policy::PolicySnapshot forced_policy(const std::string& graphrag_id, const std::string& llm_id) {
    policy::PolicySnapshot snapshot = policy::PolicySnapshot::make(registry());
    int g = snapshot.graphrag_index(graphrag_id);
    int l = snapshot.llm_index(llm_id);
    snapshot.params[snapshot.shape.graphrag_block(g) + 0] = 60.0;  // bias feature
    snapshot.params[snapshot.shape.llm_block(l) + 0] = 60.0;
    snapshot.reset_reference();
    return snapshot;
}

}  // namespace

TEST_CASE("load_dataset: happy path, validation errors, stable subsampling") {
    std::string path = "test_dataset.jsonl";
    {
        std::ofstream out(path);
        for (int i = 0; i < 50; ++i) {
            out << R"({"id":"q)" << i << R"(","question":"what is q)" << i
                << R"(?","golden_answers":["a)" << i << R"("],"source":"synth"})" << "\n";
        }
    }
    auto all = harness::load_dataset(path);
    CHECK(all.size() == 50);
    CHECK(all[0].source == "synth");

    auto sub1 = harness::load_dataset(path, 10, 7);
    auto sub2 = harness::load_dataset(path, 10, 7);
    CHECK(sub1.size() == 10);
    CHECK(sub1 == sub2);
    auto sub3 = harness::load_dataset(path, 10, 8);
    CHECK(sub1 != sub3);  // different seed, different subset
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << R"({"id":"q1","question":"missing golds"})" << "\n";
    }
    try {
        harness::load_dataset(path);
        FAIL("expected MalformedRecord");
    } catch (const Error& e) {
        CHECK(e.kind() == errkind::malformed_record);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << "\n";
    }
    CHECK_THROWS_AS(harness::load_dataset(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("run_episode: forced correct pair answers in one turn") {
    SimBackend world(bermuda_world(), registry(), 3);
    auto snapshot = forced_policy("HippoRAG2", "Qwen2.5-7B-Instruct");
    harness::EpisodeConfig cfg;
    cfg.seed = 3;
    auto episode = harness::run_episode(snapshot, registry(), world, bermuda_record(), cfg);
    CHECK(episode.em == 1.0);
    CHECK(episode.f1 == 1.0);
    REQUIRE(episode.invoked_tiers.size() == 1);
    CHECK(episode.invoked_tiers[0] == Tier::Small);
    REQUIRE(episode.final_answer.has_value());
    CHECK(*episode.final_answer == "Cross-country skiing");
    CHECK(episode.reward.format == 0.0);
    CHECK(episode.reward.total == 1.0);
    CHECK(episode.trajectory.defects.empty());
    // the transcript reparses to the recorded trajectory
    auto reparsed = protocol::parse_trajectory(episode.transcript);
    CHECK(reparsed.segments.size() == episode.trajectory.segments.size());
}

TEST_CASE("run_episode: unsolvable pair runs out of turns with no answer") {
    SimBackend world(bermuda_world(), registry(), 3);
    auto snapshot = forced_policy("RAPTOR", "Qwen2.5-7B-Instruct");  // never solves
    harness::EpisodeConfig cfg;
    cfg.seed = 3;
    auto episode = harness::run_episode(snapshot, registry(), world, bermuda_record(), cfg);
    CHECK(episode.em == 0.0);
    CHECK_FALSE(episode.final_answer.has_value());
    // four turns sampled; the last search is cut off by the turn cap before
    // its information could return, so only three calls execute
    CHECK(episode.decisions.size() == 4);
    CHECK(episode.actions.size() == 3);
}

TEST_CASE("run_episode: stage-2 reward subtracts gated cost") {
    SimBackend world(bermuda_world(), registry(), 3);
    auto snapshot = forced_policy("HippoRAG2", "LLaMA-3.1-70B-Instruct");
    harness::EpisodeConfig cfg;
    cfg.seed = 3;
    cfg.stage = reward::Stage::Stage2;
    reward::CostProfile profile{reward::Difficulty::Easy, 1};
    auto episode =
        harness::run_episode(snapshot, registry(), world, bermuda_record(), cfg, profile);
    CHECK(episode.em == 1.0);
    CHECK(episode.reward.cost == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(episode.reward.total == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("evaluate: ceiling with an oracle policy and empty dataset flagging") {
    SimBackend world(bermuda_world(), registry(), 3);
    auto snapshot = forced_policy("HippoRAG2", "Qwen2.5-7B-Instruct");
    harness::EvalOptions options;
    options.seed = 3;
    auto report = harness::evaluate(snapshot, {bermuda_record()}, registry(), world, options);
    CHECK(report.em == 1.0);
    CHECK(report.f1 == 1.0);
    CHECK(report.any_calls);
    CHECK(report.routing_share.at("small") == 1.0);
    CHECK(report.avg_valid_calls == 1.0);

    auto empty = harness::aggregate_episodes({}, {});
    CHECK(empty.episode_count == 0);
    CHECK_FALSE(empty.any_calls);
    CHECK(empty.to_jsonl().find("undefined:no_calls") != std::string::npos);
}

TEST_CASE("evaluate: uniform policy hit rate matches the closed form within 3 sigma") {
    // exactly 1 of 25 pairs solves each question; uniform policy, 4 turns:
    // p = 1 - (24/25)^4
    harness::SyntheticSpec spec;
    spec.question_count = 500;
    spec.seed = 11;
    // restrict to hard questions so only (g*, large) works: 1 pair of 25
    spec.easy_fraction = 0.0;
    spec.medium_fraction = 0.0;
    auto world = harness::make_synthetic_world(registry(), spec);
    SimBackend backend(world.script, registry(), 11);
    policy::PolicySnapshot uniform = policy::PolicySnapshot::make(registry());
    harness::EvalOptions options;
    options.seed = 11;
    options.parallelism = 4;
    auto report = harness::evaluate(uniform, world.dataset, registry(), backend, options);
    double p = 1.0 - std::pow(24.0 / 25.0, 4.0);
    double sigma = std::sqrt(p * (1 - p) / 500.0);
    CHECK(report.em > p - 3 * sigma);
    CHECK(report.em < p + 3 * sigma);
    CHECK(report.f1 >= report.em);  // per-item EM=1 => F1=1 propagates
}

TEST_CASE("evaluate: tier shares recomputed from episodes match the report") {
    harness::SyntheticSpec spec;
    spec.question_count = 60;
    spec.seed = 2;
    auto world = harness::make_synthetic_world(registry(), spec);
    SimBackend backend(world.script, registry(), 2);
    policy::PolicySnapshot uniform = policy::PolicySnapshot::make(registry());

    std::vector<harness::Episode> episodes;
    for (const auto& q : world.dataset) {
        harness::EpisodeConfig cfg;
        cfg.seed = derive_seed(9, "eval", q.id);
        episodes.push_back(harness::run_episode(uniform, registry(), backend, q, cfg));
    }
    auto report = harness::aggregate_episodes(episodes, world.dataset);
    std::map<std::string, double> recount;
    double total = 0;
    for (const auto& e : episodes) {
        for (auto tier : e.invoked_tiers) {
            recount[backends::tier_name(tier)] += 1;
            total += 1;
        }
    }
    for (auto& [k, v] : recount) v /= total;
    for (const auto& [tier, share] : report.routing_share) {
        CHECK(share == doctest::Approx(recount[tier]).epsilon(1e-12));
    }
    double sum = 0;
    for (const auto& [tier, share] : report.routing_share) sum += share;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("evaluate: parallel equals serial") {
    harness::SyntheticSpec spec;
    spec.question_count = 40;
    spec.seed = 21;
    auto world = harness::make_synthetic_world(registry(), spec);
    SimBackend backend(world.script, registry(), 21);
    policy::PolicySnapshot uniform = policy::PolicySnapshot::make(registry());
    harness::EvalOptions serial;
    serial.seed = 21;
    serial.parallelism = 1;
    harness::EvalOptions parallel = serial;
    parallel.parallelism = 8;
    auto a = harness::evaluate(uniform, world.dataset, registry(), backend, serial);
    auto b = harness::evaluate(uniform, world.dataset, registry(), backend, parallel);
    CHECK(a.to_jsonl() == b.to_jsonl());
}

TEST_CASE("train_stage: zero steps return the input policy") {
    harness::SyntheticSpec spec;
    spec.question_count = 10;
    spec.seed = 5;
    auto world = harness::make_synthetic_world(registry(), spec);
    SimBackend backend(world.script, registry(), 5);
    policy::PolicySnapshot start = policy::PolicySnapshot::make(registry());
    policy::TrainConfig cfg;
    cfg.max_steps = 0;
    std::vector<policy::TrainLogEntry> log;
    auto trained = policy::train_stage(start, world.dataset, nullptr, registry(), backend, cfg,
                                       {}, log);
    CHECK(trained.params == start.params);
    CHECK(log.empty());
}

TEST_CASE("train_stage: stage 2 without profiles raises MissingProfile") {
    harness::SyntheticSpec spec;
    spec.question_count = 4;
    spec.seed = 5;
    auto world = harness::make_synthetic_world(registry(), spec);
    SimBackend backend(world.script, registry(), 5);
    policy::PolicySnapshot start = policy::PolicySnapshot::make(registry());
    policy::TrainConfig cfg;
    cfg.stage = reward::Stage::Stage2;
    cfg.max_steps = 1;
    std::vector<policy::TrainLogEntry> log;
    difficulty::ProfileStore empty_store;
    try {
        policy::train_stage(start, world.dataset, &empty_store, registry(), backend, cfg, {},
                            log);
        FAIL("expected MissingProfile");
    } catch (const Error& e) {
        CHECK(e.kind() == errkind::missing_profile);
    }
}

TEST_CASE("cli: eval with a fixed seed writes byte-identical reports") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_test";
    fs::create_directories(dir);
    std::string world = (dir / "world.json").string();
    std::string dataset = (dir / "dataset.jsonl").string();
    std::string report1 = (dir / "r1.jsonl").string();
    std::string report2 = (dir / "r2.jsonl").string();

    CHECK(harness::run_cli({"make-world", "--out-world", world, "--out-dataset", dataset,
                            "--count", "40", "--seed", "5"}) == 0);
    CHECK(harness::run_cli({"eval", "--dataset", dataset, "--world", world, "--limit", "20",
                            "--seed", "7", "--out", report1}) == 0);
    CHECK(harness::run_cli({"eval", "--dataset", dataset, "--world", world, "--limit", "20",
                            "--seed", "7", "--out", report2}) == 0);
    CHECK(slurp(report1) == slurp(report2));

    // different seed, different report (subsample and rollouts move)
    std::string report3 = (dir / "r3.jsonl").string();
    CHECK(harness::run_cli({"eval", "--dataset", dataset, "--world", world, "--limit", "20",
                            "--seed", "8", "--out", report3}) == 0);
    CHECK(slurp(report1) != slurp(report3));
    fs::remove_all(dir);
}

TEST_CASE("cli: registry add extends a registry file") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_reg";
    fs::create_directories(dir);
    std::string path = (dir / "registry.json").string();
    backends::default_registry().save(path);

    CHECK(harness::run_cli({"registry", "add", "--registry", path, "--kind", "graphrag", "--id",
                            "LightRAG", "--description", "dual-level graph retrieval"}) == 0);
    CHECK(harness::run_cli({"registry", "add", "--registry", path, "--kind", "llm", "--id",
                            "gpt-oss-120b", "--tier", "large"}) == 0);
    auto registry2 = BackendRegistry::load(path);
    CHECK(registry2.has_graphrag("LightRAG"));
    CHECK(registry2.llm_cost("gpt-oss-120b") == 4);

    // duplicate id: nonzero exit
    CHECK(harness::run_cli({"registry", "add", "--registry", path, "--kind", "graphrag", "--id",
                            "LightRAG"}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("cli: train fails cleanly at stage 2 without profiles") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_train";
    fs::create_directories(dir);
    std::string world = (dir / "world.json").string();
    std::string dataset = (dir / "dataset.jsonl").string();
    CHECK(harness::run_cli({"make-world", "--out-world", world, "--out-dataset", dataset,
                            "--count", "8", "--seed", "5"}) == 0);
    std::string config = (dir / "config.json").string();
    {
        std::ofstream out(config);
        out << R"({"stage2": {"max_steps": 1, "questions_per_step": 2}})";
    }
    CHECK(harness::run_cli({"train", "--dataset", dataset, "--world", world, "--stage", "2",
                            "--config", config, "--out", (dir / "p.json").string()}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("cli: simulate dumps one verbose episode") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_sim";
    fs::create_directories(dir);
    std::string world = (dir / "world.json").string();
    std::string dataset = (dir / "dataset.jsonl").string();
    CHECK(harness::run_cli({"make-world", "--quiet", "--out-world", world, "--out-dataset",
                            dataset, "--count", "6", "--seed", "9"}) == 0);
    CHECK(harness::run_cli({"simulate", "--dataset", dataset, "--world", world, "--id", "q2",
                            "--seed", "9"}) == 0);
    // unknown question id is a clean machine-readable failure
    CHECK(harness::run_cli({"simulate", "--dataset", dataset, "--world", world, "--id", "nope",
                            "--seed", "9"}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("cli: train writes a checkpoint with provenance fields") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_ckpt";
    fs::create_directories(dir);
    std::string world = (dir / "world.json").string();
    std::string dataset = (dir / "dataset.jsonl").string();
    std::string ckpt = (dir / "policy.json").string();
    std::string log = (dir / "train.jsonl").string();
    std::string config = (dir / "config.json").string();
    CHECK(harness::run_cli({"make-world", "--quiet", "--out-world", world, "--out-dataset",
                            dataset, "--count", "10", "--seed", "4"}) == 0);
    {
        std::ofstream out(config);
        out << R"({"stage1": {"max_steps": 3, "questions_per_step": 4}})";
    }
    CHECK(harness::run_cli({"train", "--dataset", dataset, "--world", world, "--stage", "1",
                            "--config", config, "--seed", "4", "--out", ckpt, "--log", log}) ==
          0);
    auto snapshot = policy::PolicySnapshot::load(ckpt);
    CHECK(snapshot.stage == 1);
    CHECK(snapshot.step == 3);
    CHECK(snapshot.seed == 4);
    CHECK(snapshot.registry_fingerprint == backends::default_registry().fingerprint());

    // the log holds one record per step with tier shares
    std::ifstream in(log);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++lines;
    }
    CHECK(lines == 3);
    fs::remove_all(dir);
}

TEST_CASE("cli: validate-trace audits single traces and corpora") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "graphroute_cli_vt";
    fs::create_directories(dir);

    traces::GeneralTracePlan plan;
    plan.question = "what is bermuda competing in the winter olympics?";
    plan.graphrag_id = "HippoRAG2";
    plan.llm_id = "Qwen2.5-7B-Instruct";
    plan.information = "Answer: Cross-country skiing";
    plan.answer = "Cross-country skiing";
    plan.rationale_graphrag = "fact chains match the requirement";
    plan.rationale_llm = "a compact reader can provide the answer";
    plan.rationale_sufficiency = "sufficient";
    std::string text = traces::build_general_trace(plan, backends::default_registry());

    std::string trace_path = (dir / "trace.txt").string();
    {
        std::ofstream out(trace_path);
        out << text;
    }
    CHECK(harness::run_cli({"validate-trace", "--trace", trace_path}) == 0);

    std::string corpus_path = (dir / "corpus.jsonl").string();
    std::vector<traces::TraceRecord> records;
    records.push_back({plan.question, text, "general", {plan.answer}});
    records.push_back({plan.question, text, "reflection", {plan.answer}});
    traces::save_corpus(corpus_path, records);
    CHECK(harness::run_cli({"validate-trace", "--corpus", corpus_path}) == 0);

    CHECK(harness::run_cli({"validate-trace"}) == 1);  // needs --trace or --corpus
    fs::remove_all(dir);
}

TEST_CASE("run_episode: backend failures become in-band information, never aborts") {
    // every endpoint is unreachable; each search turn should surface an
    // in-band error and the episode should still run to the turn cap
    BackendRegistry reg({}, {});
    backends::GraphRagSpec g;
    g.id = "RemoteRAG";
    g.endpoint = "http://127.0.0.1:9/v1/retrieve";
    reg.add(std::move(g));
    backends::LlmSpec l;
    l.id = "remote-llm";
    l.tier = Tier::Small;
    l.endpoint = "http://127.0.0.1:9/v1/chat";
    reg.add(std::move(l));

    backends::HttpConfig config;
    config.max_retries = 1;
    config.timeout_seconds = 1;
    backends::HttpBackend http(reg, config);

    harness::QuestionRecord q;
    q.id = "q";
    q.question = "anything?";
    q.gold_answers = {"x"};

    auto snapshot = policy::PolicySnapshot::make(reg);
    harness::EpisodeConfig cfg;
    cfg.seed = 1;
    auto episode = harness::run_episode(snapshot, reg, http, q, cfg);
    CHECK(episode.em == 0.0);
    CHECK(episode.decisions.size() == 4);
    CHECK(episode.actions.empty());  // nothing executed cleanly
    bool saw_error_info = false;
    for (const auto& s : episode.trajectory.segments) {
        if (s.kind == protocol::SegmentKind::Information &&
            s.content.find("backend error:") == 0) {
            saw_error_info = true;
        }
    }
    CHECK(saw_error_info);
}

TEST_CASE("train_stage: two runs with one seed produce identical logs and parameters") {
    harness::SyntheticSpec spec;
    spec.question_count = 20;
    spec.seed = 31;
    auto world = harness::make_synthetic_world(registry(), spec);

    auto run_once = [&] {
        backends::SimBackend backend(world.script, registry(), 31);
        policy::TrainConfig cfg;
        cfg.max_steps = 5;
        cfg.questions_per_step = 6;
        cfg.seed = 31;
        cfg.parallelism = 4;
        std::vector<policy::TrainLogEntry> log;
        auto trained = policy::train_stage(policy::PolicySnapshot::make(registry()),
                                           world.dataset, nullptr, registry(), backend, cfg, {},
                                           log);
        return std::pair{trained.params, log};
    };
    auto [params1, log1] = run_once();
    auto [params2, log2] = run_once();
    CHECK(params1 == params2);
    REQUIRE(log1.size() == log2.size());
    for (std::size_t i = 0; i < log1.size(); ++i) {
        CHECK(log1[i].to_json() == log2[i].to_json());
    }
}

TEST_CASE("stage-2 optimum: on an all-easy solved world the modal tier becomes small") {
    // every tier solves every question; the shaped reward orders
    // small (1) > medium (1 - 0.05) > large (1 - 0.15)
    harness::SyntheticSpec spec;
    spec.question_count = 10;
    spec.easy_fraction = 1.0;
    spec.medium_fraction = 0.0;
    spec.seed = 77;
    auto world = harness::make_synthetic_world(registry(), spec);
    backends::SimBackend backend(world.script, registry(), 77);

    difficulty::ProfilerConfig pcfg;
    pcfg.seed = 77;
    auto profile_vec = difficulty::profile_dataset(world.dataset, registry().llms(), backend,
                                                   registry(), pcfg, std::nullopt);
    difficulty::ProfileStore profiles;
    for (auto& p : profile_vec) profiles.put(p);
    for (const auto& p : profiles.all()) CHECK(p.difficulty == reward::Difficulty::Easy);

    policy::TrainConfig cfg;
    cfg.stage = reward::Stage::Stage2;
    cfg.max_steps = 60;
    cfg.questions_per_step = 10;
    cfg.learning_rate = 0.8;
    cfg.seed = 77;
    cfg.parallelism = 4;
    std::vector<policy::TrainLogEntry> log;
    auto trained = policy::train_stage(policy::PolicySnapshot::make(registry()), world.dataset,
                                       &profiles, registry(), backend, cfg, {}, log);

    // modal tier across the evaluated routing distribution
    harness::EvalOptions eopts;
    eopts.seed = 78;
    auto report = harness::evaluate(trained, world.dataset, registry(), backend, eopts);
    REQUIRE(report.any_calls);
    CHECK(report.routing_share.at("small") > report.routing_share.at("medium"));
    CHECK(report.routing_share.at("small") > report.routing_share.at("large"));
    CHECK(report.em > 0.9);
}
