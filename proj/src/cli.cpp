#include "graphroute/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphroute/backends.hpp"
#include "graphroute/difficulty.hpp"
#include "graphroute/evaluate.hpp"
#include "graphroute/synthetic.hpp"
#include "graphroute/traces.hpp"
#include "graphroute/trainer.hpp"

namespace graphroute::harness {

using nlohmann::json;
using nlohmann::ordered_json;
using backends::BackendRegistry;

namespace {

struct AppConfig {
    std::uint64_t seed = 0;
    int max_turns = protocol::kDefaultMaxTurns;
    unsigned parallelism = 1;
    std::string registry_path;
    std::string world_path;
    bool http = false;
    reward::CostConfig cost;
    difficulty::ProfilerConfig profiler;
    policy::TrainConfig stage1;
    policy::TrainConfig stage2;

    AppConfig() {
        stage1.stage = reward::Stage::Stage1;
        stage1.max_steps = 80;
        stage1.temperature = 1.0;
        stage2.stage = reward::Stage::Stage2;
        stage2.max_steps = 40;
        stage2.temperature = 1.2;
    }
};

void apply_train_section(const json& section, policy::TrainConfig& cfg) {
    cfg.group_size = section.value("group_size", cfg.group_size);
    cfg.kl_coeff = section.value("kl_coeff", cfg.kl_coeff);
    cfg.learning_rate = section.value("learning_rate", cfg.learning_rate);
    cfg.max_steps = section.value("max_steps", cfg.max_steps);
    cfg.std_floor = section.value("std_floor", cfg.std_floor);
    cfg.temperature = section.value("temperature", cfg.temperature);
    cfg.questions_per_step = section.value("questions_per_step", cfg.questions_per_step);
    cfg.checkpoint_every = section.value("checkpoint_every", cfg.checkpoint_every);
}

AppConfig load_config(const std::string& path) {
    AppConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw Error(errkind::io_error, "cannot open config file " + path);
    json doc = json::parse(in, nullptr, true, true);  // allow comments
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.max_turns = doc.value("max_turns", cfg.max_turns);
    cfg.parallelism = doc.value("parallelism", cfg.parallelism);
    cfg.registry_path = doc.value("registry", cfg.registry_path);
    cfg.world_path = doc.value("world", cfg.world_path);
    if (doc.contains("reward")) {
        const auto& r = doc["reward"];
        cfg.cost.cost_scale = r.value("cost_scale", cfg.cost.cost_scale);
        cfg.cost.weight_easy = r.value("weight_easy", cfg.cost.weight_easy);
        cfg.cost.weight_medium = r.value("weight_medium", cfg.cost.weight_medium);
        cfg.cost.weight_hard = r.value("weight_hard", cfg.cost.weight_hard);
        std::string attribution = r.value("attribution", "max");
        if (attribution == "max") {
            cfg.cost.attribution = reward::CostAttribution::Max;
        } else if (attribution == "sum") {
            cfg.cost.attribution = reward::CostAttribution::Sum;
        } else if (attribution == "last") {
            cfg.cost.attribution = reward::CostAttribution::Last;
        } else {
            throw Error(errkind::bad_config, "unknown cost attribution '" + attribution + "'");
        }
    }
    if (doc.contains("profiler")) {
        const auto& p = doc["profiler"];
        cfg.profiler.n_trials = p.value("n_trials", cfg.profiler.n_trials);
        cfg.profiler.tau = p.value("tau", cfg.profiler.tau);
    }
    if (doc.contains("stage1")) apply_train_section(doc["stage1"], cfg.stage1);
    if (doc.contains("stage2")) apply_train_section(doc["stage2"], cfg.stage2);
    return cfg;
}

BackendRegistry load_registry_or_default(const AppConfig& cfg) {
    if (cfg.registry_path.empty()) return backends::default_registry();
    return BackendRegistry::load(cfg.registry_path);
}

std::unique_ptr<backends::Backend> make_world(const AppConfig& cfg,
                                              const BackendRegistry& registry) {
    if (cfg.http) {
        return std::make_unique<backends::HttpBackend>(registry, backends::HttpConfig{});
    }
    if (cfg.world_path.empty()) {
        throw Error(errkind::bad_config, "--world is required in simulation mode");
    }
    return std::make_unique<backends::SimBackend>(backends::WorldScript::load(cfg.world_path),
                                                  registry, cfg.seed);
}

policy::PolicySnapshot load_policy_or_uniform(const std::string& path,
                                              const BackendRegistry& registry) {
    if (path.empty()) return policy::PolicySnapshot::make(registry);
    return policy::PolicySnapshot::load(path);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write " + path);
    out << content;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"routing orchestration engine and training harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_flag = 0;
    int stage_flag = 0;
    std::size_t limit = 0;
    std::string world_flag, registry_flag;
    bool http_flag = false;
    bool quiet = false;
    app.add_option("--config", config_path, "config file (json)");
    app.add_flag("--quiet", quiet, "suppress console tables");
    auto* seed_opt = app.add_option("--seed", seed_flag, "global rng seed");
    app.add_option("--stage", stage_flag, "training stage: 1, 2, or 0 = both");
    app.add_option("--limit", limit, "subsample the dataset to this many questions");
    app.add_option("--world", world_flag, "world script file (simulation mode)");
    app.add_option("--registry", registry_flag, "registry file");
    app.add_flag("--http", http_flag, "use HTTP endpoints instead of the simulated world");

    // ---- make-world ----
    auto* make_world_cmd = app.add_subcommand("make-world", "generate a synthetic world");
    make_world_cmd->fallthrough();
    std::string mw_world = "world.json", mw_dataset = "dataset.jsonl", mw_registry;
    int mw_count = 200;
    double mw_easy = 0.60, mw_medium = 0.25, mw_noisy = 0.0;
    make_world_cmd->add_option("--out-world", mw_world, "world script output path");
    make_world_cmd->add_option("--out-dataset", mw_dataset, "dataset output path");
    make_world_cmd->add_option("--out-registry", mw_registry, "also write the default registry");
    make_world_cmd->add_option("--count", mw_count, "number of questions");
    make_world_cmd->add_option("--easy", mw_easy, "easy fraction");
    make_world_cmd->add_option("--medium", mw_medium, "medium fraction");
    make_world_cmd->add_option("--noisy", mw_noisy, "fraction with noisy success probabilities");

    // ---- profile ----
    auto* profile_cmd = app.add_subcommand("profile", "difficulty-profile a dataset");
    profile_cmd->fallthrough();
    std::string pr_dataset, pr_store = "profiles.jsonl";
    profile_cmd->add_option("--dataset", pr_dataset, "dataset file")->required();
    profile_cmd->add_option("--store", pr_store, "profile store output path");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "two-stage policy training");
    train_cmd->fallthrough();
    std::string tr_dataset, tr_profiles, tr_corpus, tr_out = "policy.json", tr_log;
    train_cmd->add_option("--dataset", tr_dataset, "dataset file")->required();
    train_cmd->add_option("--profiles", tr_profiles, "profile store (required for stage 2)");
    train_cmd->add_option("--corpus", tr_corpus, "trace corpus for behavior-cloned init");
    train_cmd->add_option("--out", tr_out, "final checkpoint path");
    train_cmd->add_option("--log", tr_log, "training log path (jsonl)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy");
    eval_cmd->fallthrough();
    std::string ev_dataset, ev_policy, ev_out, ev_profiles;
    eval_cmd->add_option("--dataset", ev_dataset, "dataset file")->required();
    eval_cmd->add_option("--policy", ev_policy, "checkpoint (default: uniform policy)");
    eval_cmd->add_option("--profiles", ev_profiles, "profile store (for stage-2 shaping)");
    eval_cmd->add_option("--out", ev_out, "report output path (jsonl)");

    // ---- validate-trace ----
    auto* validate_cmd = app.add_subcommand("validate-trace", "score trace files");
    validate_cmd->fallthrough();
    std::string vt_trace, vt_corpus;
    validate_cmd->add_option("--trace", vt_trace, "file holding one raw trace");
    validate_cmd->add_option("--corpus", vt_corpus, "trace corpus file (jsonl)");

    // ---- simulate ----
    auto* simulate_cmd = app.add_subcommand("simulate", "run one episode verbosely");
    simulate_cmd->fallthrough();
    std::string sm_dataset, sm_policy, sm_id;
    simulate_cmd->add_option("--dataset", sm_dataset, "dataset file")->required();
    simulate_cmd->add_option("--id", sm_id, "question id (default: first record)");
    simulate_cmd->add_option("--policy", sm_policy, "checkpoint (default: uniform policy)");

    // ---- registry add ----
    auto* registry_cmd = app.add_subcommand("registry", "registry maintenance");
    registry_cmd->fallthrough();
    auto* registry_add = registry_cmd->add_subcommand("add", "add a candidate to a registry file");
    registry_add->fallthrough();
    std::string ra_file, ra_kind, ra_id, ra_description, ra_tier = "small", ra_endpoint;
    int ra_top_k = 5;
    registry_add->add_option("--registry", ra_file, "registry file to update")->required();
    registry_add->add_option("--kind", ra_kind, "graphrag | llm")->required();
    registry_add->add_option("--id", ra_id, "candidate id")->required();
    registry_add->add_option("--description", ra_description, "candidate description");
    registry_add->add_option("--tier", ra_tier, "llm tier: small | medium | large");
    registry_add->add_option("--endpoint", ra_endpoint, "HTTP endpoint");
    registry_add->add_option("--top-k", ra_top_k, "graphrag retrieval depth");

    std::vector<const char*> argv;
    argv.push_back("graphroute");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        AppConfig cfg = load_config(config_path);
        if (!seed_opt->empty()) cfg.seed = seed_flag;
        if (!world_flag.empty()) cfg.world_path = world_flag;
        if (!registry_flag.empty()) cfg.registry_path = registry_flag;
        if (http_flag) cfg.http = true;
        cfg.stage1.seed = cfg.seed;
        cfg.stage2.seed = cfg.seed;
        cfg.profiler.seed = cfg.seed;
        cfg.profiler.parallelism = cfg.parallelism;
        cfg.stage1.parallelism = cfg.parallelism;
        cfg.stage2.parallelism = cfg.parallelism;
        cfg.stage1.max_turns = cfg.max_turns;
        cfg.stage2.max_turns = cfg.max_turns;

        auto load_limited = [&](const std::string& path) {
            return load_dataset(path, limit ? std::optional<std::size_t>(limit) : std::nullopt,
                                cfg.seed);
        };

        if (make_world_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            SyntheticSpec spec;
            spec.question_count = mw_count;
            spec.easy_fraction = mw_easy;
            spec.medium_fraction = mw_medium;
            spec.noisy_fraction = mw_noisy;
            spec.seed = cfg.seed;
            SyntheticWorld world = make_synthetic_world(registry, spec);
            world.script.save(mw_world);
            save_dataset(mw_dataset, world.dataset);
            if (!mw_registry.empty()) registry.save(mw_registry);
            if (!quiet) {
                std::cout << "wrote " << mw_world << " and " << mw_dataset << " ("
                          << world.dataset.size() << " questions)\n";
            }
            return 0;
        }

        if (profile_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            auto world = make_world(cfg, registry);
            auto dataset = load_limited(pr_dataset);
            auto profiles = difficulty::profile_dataset(dataset, registry.llms(), *world,
                                                        registry, cfg.profiler, pr_store);
            std::map<std::string, int> by_label;
            for (const auto& p : profiles) ++by_label[reward::difficulty_name(p.difficulty)];
            std::cout << "profiled " << profiles.size() << " questions -> " << pr_store << "\n";
            for (const auto& [label, count] : by_label) {
                std::cout << "  " << label << ": " << count << "\n";
            }
            return 0;
        }

        if (train_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            auto world = make_world(cfg, registry);
            auto dataset = load_limited(tr_dataset);

            policy::PolicySnapshot start = policy::PolicySnapshot::make(registry);
            if (!tr_corpus.empty()) {
                std::vector<policy::TraceExample> examples;
                for (const auto& record : traces::load_corpus(tr_corpus)) {
                    QuestionRecord q;
                    q.id = "trace";
                    q.question = record.question;
                    q.gold_answers = record.gold_answers.empty()
                                         ? std::vector<std::string>{""}
                                         : record.gold_answers;
                    examples.push_back({q, protocol::parse_trajectory(record.trace_text)});
                }
                auto clone = policy::clone_from_traces(examples, registry);
                start = clone.policy;
                std::cout << "cloned from " << clone.used_traces << " traces ("
                          << clone.skipped_traces << " skipped)\n";
            }

            difficulty::ProfileStore profiles;
            if (!tr_profiles.empty()) profiles = difficulty::ProfileStore::load(tr_profiles);
            cfg.stage1.checkpoint_path = tr_out;
            cfg.stage2.checkpoint_path = tr_out;

            std::vector<policy::TrainLogEntry> log;
            policy::PolicySnapshot final_policy = start;
            if (stage_flag == 1) {
                final_policy = policy::train_stage(start, dataset, &profiles, registry, *world,
                                                   cfg.stage1, cfg.cost, log);
            } else if (stage_flag == 2) {
                final_policy = policy::train_stage(start, dataset, &profiles, registry, *world,
                                                   cfg.stage2, cfg.cost, log);
            } else {
                auto result = policy::train_two_stage(start, dataset, profiles, registry, *world,
                                                      cfg.stage1, cfg.stage2, cfg.cost);
                final_policy = result.after_stage2;
                log = std::move(result.log);
            }
            final_policy.save(tr_out);
            if (!tr_log.empty()) policy::save_train_log(tr_log, log);
            if (!log.empty()) {
                std::cout << "trained " << log.size() << " steps; final mean reward "
                          << log.back().mean_reward << ", em " << log.back().em << "\n";
            }
            std::cout << "checkpoint -> " << tr_out << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            auto world = make_world(cfg, registry);
            auto dataset = load_limited(ev_dataset);
            policy::PolicySnapshot snapshot = load_policy_or_uniform(ev_policy, registry);
            EvalOptions options;
            options.seed = cfg.seed;
            options.max_turns = cfg.max_turns;
            options.parallelism = cfg.parallelism;
            options.cost = cfg.cost;
            difficulty::ProfileStore profiles;
            const difficulty::ProfileStore* profiles_ptr = nullptr;
            if (!ev_profiles.empty()) {
                profiles = difficulty::ProfileStore::load(ev_profiles);
                profiles_ptr = &profiles;
                options.stage = reward::Stage::Stage2;
            }
            EvalReport report = evaluate(snapshot, dataset, registry, *world, options,
                                         profiles_ptr);
            if (!quiet) std::cout << report.to_table();
            if (!ev_out.empty()) write_file(ev_out, report.to_jsonl());
            return 0;
        }

        if (validate_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            auto report_json = [&](const traces::TraceReport& report) {
                ordered_json doc;
                doc["penalty"] = report.penalty;
                doc["fired"] = ordered_json::array();
                for (auto rule : report.fired) doc["fired"].push_back(reward::rule_name(rule));
                doc["turns"] = report.turn_count;
                doc["defects"] = report.defect_count;
                doc["actions"] = ordered_json::array();
                for (const auto& a : report.actions) {
                    doc["actions"].push_back(
                        {{"query", a.query}, {"llm", a.llm_id}, {"graphrag", a.graphrag_id}});
                }
                doc["lint"] = ordered_json::array();
                for (const auto& v : report.lint) {
                    doc["lint"].push_back({{"term", v.term}, {"segment", v.segment_index}});
                }
                return doc;
            };
            if (!vt_trace.empty()) {
                std::ifstream in(vt_trace);
                if (!in) throw Error(errkind::io_error, "cannot open trace file " + vt_trace);
                std::stringstream buffer;
                buffer << in.rdbuf();
                std::cout << report_json(traces::validate_trace(buffer.str(), registry)).dump(2)
                          << "\n";
            } else if (!vt_corpus.empty()) {
                auto records = traces::load_corpus(vt_corpus);
                auto manifest = traces::corpus_manifest(records);
                std::size_t clean = 0;
                for (const auto& record : records) {
                    auto report = traces::validate_trace(record.trace_text, registry);
                    if (report.clean()) {
                        ++clean;
                    } else {
                        std::cout << report_json(report).dump() << "\n";
                    }
                }
                std::cout << "corpus: " << manifest.general_count << " general, "
                          << manifest.reflection_count << " reflection; " << clean << "/"
                          << records.size() << " clean\n";
            } else {
                throw Error(errkind::bad_config, "validate-trace needs --trace or --corpus");
            }
            return 0;
        }

        if (simulate_cmd->parsed()) {
            BackendRegistry registry = load_registry_or_default(cfg);
            auto world = make_world(cfg, registry);
            auto dataset = load_limited(sm_dataset);
            const QuestionRecord* question = &dataset.front();
            if (!sm_id.empty()) {
                question = nullptr;
                for (const auto& q : dataset) {
                    if (q.id == sm_id) question = &q;
                }
                if (!question) {
                    throw Error(errkind::bad_config, "question id '" + sm_id + "' not found");
                }
            }
            policy::PolicySnapshot snapshot = load_policy_or_uniform(sm_policy, registry);
            EpisodeConfig ecfg;
            ecfg.max_turns = cfg.max_turns;
            ecfg.seed = derive_seed(cfg.seed, "eval", question->id);
            Episode episode = run_episode(snapshot, registry, *world, *question, ecfg);
            std::cout << "question: " << question->question << "\n";
            std::cout << "gold: " << question->gold_answers.front() << "\n";
            std::cout << "--- transcript ---\n";
            for (const auto& s : episode.trajectory.segments) {
                std::cout << "<" << protocol::kind_name(s.kind) << "> " << s.content << "\n";
            }
            std::cout << "--- result ---\n";
            std::cout << "turns: " << episode.trajectory.turns.size()
                      << ", valid calls: " << episode.actions.size() << "\n";
            std::cout << "em: " << episode.em << ", f1: " << episode.f1
                      << ", format: " << episode.reward.format
                      << ", total: " << episode.reward.total << "\n";
            std::cout << "wall time: " << episode.wall_time_ms << " ms\n";
            return 0;
        }

        if (registry_add->parsed()) {
            BackendRegistry registry = BackendRegistry::load(ra_file);
            if (ra_kind == "graphrag") {
                backends::GraphRagSpec spec;
                spec.id = ra_id;
                spec.description = ra_description;
                spec.top_k = ra_top_k;
                if (!ra_endpoint.empty()) spec.endpoint = ra_endpoint;
                registry.add(std::move(spec));
            } else if (ra_kind == "llm") {
                backends::LlmSpec spec;
                spec.id = ra_id;
                spec.description = ra_description;
                spec.tier = backends::tier_from_name(ra_tier);
                if (!ra_endpoint.empty()) spec.endpoint = ra_endpoint;
                registry.add(std::move(spec));
            } else {
                throw Error(errkind::bad_config, "--kind must be graphrag or llm");
            }
            registry.save(ra_file);
            std::cout << "added " << ra_kind << " '" << ra_id << "' to " << ra_file << "\n";
            return 0;
        }

        throw Error(errkind::bad_config, "no subcommand executed");
    } catch (const Error& e) {
        ordered_json err;
        err["error"] = e.kind();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = "Unhandled";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace graphroute::harness
