#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graphroute/backends.hpp"
#include "graphroute/cli.hpp"
#include "graphroute/difficulty.hpp"
#include "graphroute/evaluate.hpp"
#include "graphroute/synthetic.hpp"
#include "graphroute/traces.hpp"
#include "graphroute/trainer.hpp"

namespace py = pybind11;
using namespace graphroute;

namespace {

// The simulated world owns the registry it validates against, so bindings
// bundle world construction with its script.
struct PySimWorld {
    backends::SimBackend backend;
    PySimWorld(const backends::WorldScript& script, const backends::BackendRegistry& registry,
               std::uint64_t seed)
        : backend(script, registry, seed) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "hierarchical GraphRAG/LLM routing engine";

    py::register_exception<Error>(m, "EngineError");

    // ---- protocol ----
    py::enum_<protocol::SegmentKind>(m, "SegmentKind")
        .value("THINK", protocol::SegmentKind::Think)
        .value("GRAPHRAG", protocol::SegmentKind::GraphRag)
        .value("LLM", protocol::SegmentKind::Llm)
        .value("SEARCH", protocol::SegmentKind::Search)
        .value("INFORMATION", protocol::SegmentKind::Information)
        .value("ANSWER", protocol::SegmentKind::Answer)
        .value("FREE_TEXT", protocol::SegmentKind::FreeText);

    py::enum_<protocol::DefectKind>(m, "DefectKind")
        .value("NO_VALID_TAGS", protocol::DefectKind::NoValidTags)
        .value("UNCLOSED_TAG", protocol::DefectKind::UnclosedTag)
        .value("MISMATCHED_TAG", protocol::DefectKind::MismatchedTag)
        .value("NESTED_TAG", protocol::DefectKind::NestedTag);

    py::class_<protocol::Segment>(m, "Segment")
        .def(py::init([](protocol::SegmentKind kind, const std::string& content) {
                 return protocol::seg(kind, content);
             }),
             py::arg("kind"), py::arg("content"))
        .def_readonly("kind", &protocol::Segment::kind)
        .def_readonly("content", &protocol::Segment::content)
        .def_readonly("span", &protocol::Segment::span);

    py::class_<protocol::StructuralDefect>(m, "StructuralDefect")
        .def_readonly("kind", &protocol::StructuralDefect::kind)
        .def_readonly("span", &protocol::StructuralDefect::span);

    py::class_<protocol::Trajectory>(m, "Trajectory")
        .def_readonly("segments", &protocol::Trajectory::segments)
        .def_readonly("defects", &protocol::Trajectory::defects)
        .def_readonly("turns", &protocol::Trajectory::turns);

    py::class_<protocol::RoutingAction>(m, "RoutingAction")
        .def_readonly("query", &protocol::RoutingAction::query)
        .def_readonly("llm_id", &protocol::RoutingAction::llm_id)
        .def_readonly("graphrag_id", &protocol::RoutingAction::graphrag_id);

    m.def("tokenize", &protocol::tokenize, py::arg("text"));
    m.def("parse_trajectory", &protocol::parse_trajectory, py::arg("text"));
    m.def("parse_search_action", &protocol::parse_search_action, py::arg("content"));
    m.def(
        "render_turn",
        [](const std::vector<protocol::Segment>& plan) { return protocol::render_turn(plan); },
        py::arg("plan"));

    // ---- backends ----
    py::enum_<backends::Tier>(m, "Tier")
        .value("SMALL", backends::Tier::Small)
        .value("MEDIUM", backends::Tier::Medium)
        .value("LARGE", backends::Tier::Large);

    py::class_<backends::BackendRegistry>(m, "BackendRegistry")
        .def_static("default_registry", &backends::default_registry)
        .def_static("from_json", &backends::BackendRegistry::from_json, py::arg("text"))
        .def_static("load", &backends::BackendRegistry::load, py::arg("path"))
        .def("to_json", &backends::BackendRegistry::to_json)
        .def("save", &backends::BackendRegistry::save, py::arg("path"))
        .def("fingerprint", &backends::BackendRegistry::fingerprint)
        .def("has_graphrag", &backends::BackendRegistry::has_graphrag)
        .def("has_llm", &backends::BackendRegistry::has_llm)
        .def("llm_cost", &backends::BackendRegistry::llm_cost)
        .def("graphrag_ids",
             [](const backends::BackendRegistry& r) {
                 std::vector<std::string> ids;
                 for (const auto& g : r.graphrags()) ids.push_back(g.id);
                 return ids;
             })
        .def("llm_ids",
             [](const backends::BackendRegistry& r) {
                 std::vector<std::string> ids;
                 for (const auto& l : r.llms()) ids.push_back(l.id);
                 return ids;
             })
        .def(
            "add_graphrag",
            [](backends::BackendRegistry& r, const std::string& id,
               const std::string& description, int top_k) {
                backends::GraphRagSpec spec;
                spec.id = id;
                spec.description = description;
                spec.top_k = top_k;
                r.add(std::move(spec));
            },
            py::arg("id"), py::arg("description") = "", py::arg("top_k") = 5)
        .def(
            "add_llm",
            [](backends::BackendRegistry& r, const std::string& id, backends::Tier tier,
               const std::string& description) {
                backends::LlmSpec spec;
                spec.id = id;
                spec.tier = tier;
                spec.description = description;
                r.add(std::move(spec));
            },
            py::arg("id"), py::arg("tier"), py::arg("description") = "");

    py::class_<backends::WorldScript>(m, "WorldScript")
        .def_static("from_json", &backends::WorldScript::from_json, py::arg("text"))
        .def_static("load", &backends::WorldScript::load, py::arg("path"))
        .def("to_json", &backends::WorldScript::to_json)
        .def("save", &backends::WorldScript::save, py::arg("path"))
        .def_property_readonly("question_count", [](const backends::WorldScript& w) {
            return w.questions.size();
        });

    py::class_<PySimWorld>(m, "SimWorld")
        .def(py::init<const backends::WorldScript&, const backends::BackendRegistry&,
                      std::uint64_t>(),
             py::arg("script"), py::arg("registry"), py::arg("seed") = 0)
        .def("retrieve",
             [](PySimWorld& w, const std::string& graphrag_id, const std::string& query) {
                 return w.backend.retrieve(graphrag_id, query);
             })
        .def("generate", [](PySimWorld& w, const std::string& llm_id, const std::string& prompt,
                            std::uint64_t key) { return w.backend.generate(llm_id, prompt, key); })
        .def("execute_action",
             [](PySimWorld& w, const protocol::RoutingAction& action,
                const backends::BackendRegistry& registry, std::uint64_t key) {
                 return backends::execute_action(action, registry, w.backend, key);
             });

    // ---- reward ----
    py::enum_<reward::Stage>(m, "Stage")
        .value("STAGE1", reward::Stage::Stage1)
        .value("STAGE2", reward::Stage::Stage2);

    py::enum_<reward::Difficulty>(m, "Difficulty")
        .value("EASY", reward::Difficulty::Easy)
        .value("MEDIUM", reward::Difficulty::Medium)
        .value("HARD", reward::Difficulty::Hard);

    m.def(
        "format_reward",
        [](const protocol::Trajectory& trajectory, const backends::BackendRegistry& registry) {
            auto result = reward::format_reward(trajectory, registry);
            std::vector<std::string> fired;
            for (auto id : result.fired) fired.emplace_back(reward::rule_name(id));
            return py::make_tuple(result.penalty, fired);
        },
        py::arg("trajectory"), py::arg("registry"));
    m.def("exact_match", &reward::exact_match, py::arg("answer"), py::arg("golds"));
    m.def("f1_score", &reward::f1_score, py::arg("answer"), py::arg("golds"));
    m.def("normalize_answer", &reward::normalize_answer, py::arg("text"));
    m.def(
        "cost_reward",
        [](int invoked_cost, reward::Difficulty difficulty, int c_min, double cost_scale) {
            reward::CostConfig cfg;
            cfg.cost_scale = cost_scale;
            return reward::cost_reward(invoked_cost, {difficulty, c_min}, cfg);
        },
        py::arg("invoked_cost"), py::arg("difficulty"), py::arg("c_min"),
        py::arg("cost_scale") = 0.05);
    m.def("shape", &reward::shape, py::arg("format"), py::arg("outcome"), py::arg("cost"),
          py::arg("stage"));

    // ---- dataset / difficulty ----
    py::class_<harness::QuestionRecord>(m, "QuestionRecord")
        .def(py::init([](const std::string& id, const std::string& question,
                         const std::vector<std::string>& golds,
                         const std::map<std::string, std::string>& attrs) {
                 harness::QuestionRecord q;
                 q.id = id;
                 q.question = question;
                 q.gold_answers = golds;
                 q.attrs = attrs;
                 return q;
             }),
             py::arg("id"), py::arg("question"), py::arg("gold_answers"),
             py::arg("attrs") = std::map<std::string, std::string>{})
        .def_readonly("id", &harness::QuestionRecord::id)
        .def_readonly("question", &harness::QuestionRecord::question)
        .def_readonly("gold_answers", &harness::QuestionRecord::gold_answers)
        .def_readonly("source", &harness::QuestionRecord::source)
        .def_readonly("attrs", &harness::QuestionRecord::attrs);

    m.def(
        "load_dataset",
        [](const std::string& path, std::optional<std::size_t> limit, std::uint64_t seed) {
            return harness::load_dataset(path, limit, seed);
        },
        py::arg("path"), py::arg("limit") = std::nullopt, py::arg("seed") = 0);

    py::class_<difficulty::DifficultyProfile>(m, "DifficultyProfile")
        .def_readonly("question_id", &difficulty::DifficultyProfile::question_id)
        .def_readonly("trials", &difficulty::DifficultyProfile::trials)
        .def_readonly("successes", &difficulty::DifficultyProfile::successes)
        .def_readonly("sr", &difficulty::DifficultyProfile::sr)
        .def_readonly("difficulty", &difficulty::DifficultyProfile::difficulty)
        .def_readonly("c_min", &difficulty::DifficultyProfile::c_min);

    m.def(
        "profile_question",
        [](const harness::QuestionRecord& question, PySimWorld& world,
           const backends::BackendRegistry& registry, int n_trials, double tau,
           std::uint64_t seed) {
            difficulty::ProfilerConfig cfg;
            cfg.n_trials = n_trials;
            cfg.tau = tau;
            cfg.seed = seed;
            return difficulty::profile_question(question, registry.llms(), world.backend,
                                                registry, cfg);
        },
        py::arg("question"), py::arg("world"), py::arg("registry"), py::arg("n_trials") = 5,
        py::arg("tau") = 0.8, py::arg("seed") = 0);

    // ---- policy ----
    py::enum_<policy::PolicyKind>(m, "PolicyKind")
        .value("HIERARCHICAL", policy::PolicyKind::Hierarchical)
        .value("JOINT", policy::PolicyKind::Joint);

    py::class_<policy::PolicySnapshot>(m, "PolicySnapshot")
        .def_static("make", &policy::PolicySnapshot::make, py::arg("registry"),
                    py::arg("kind") = policy::PolicyKind::Hierarchical)
        .def_static("load", &policy::PolicySnapshot::load, py::arg("path"))
        .def("save", &policy::PolicySnapshot::save, py::arg("path"))
        .def("extended", &policy::PolicySnapshot::extended, py::arg("registry"))
        .def_readonly("params", &policy::PolicySnapshot::params)
        .def_property_readonly("param_count", [](const policy::PolicySnapshot& p) {
            return p.params.size();
        });

    m.def("featurize", &policy::featurize, py::arg("question"));
    m.def("group_advantages", &policy::group_advantages, py::arg("rewards"),
          py::arg("std_floor") = 1e-6);
    m.def(
        "action_probabilities",
        [](const policy::PolicySnapshot& snapshot, const std::vector<double>& features,
           double temperature) {
            auto dist = policy::action_distribution(snapshot, features, temperature);
            std::map<std::string, std::map<std::string, double>> conditional;
            for (const auto& [key, prob] : dist.llm_probs_given) {
                conditional[key.first][key.second] = prob;
            }
            return py::make_tuple(dist.graphrag_probs, conditional);
        },
        py::arg("policy"), py::arg("features"), py::arg("temperature") = 1.0);
    m.def(
        "sample_action",
        [](const policy::PolicySnapshot& snapshot, const std::vector<double>& features,
           const backends::BackendRegistry& registry, std::uint64_t seed, double temperature) {
            Rng rng(seed);
            auto action = policy::sample_action(snapshot, features, registry, rng, temperature);
            return py::make_tuple(action.graphrag_id, action.llm_id, action.log_prob);
        },
        py::arg("policy"), py::arg("features"), py::arg("registry"), py::arg("seed"),
        py::arg("temperature") = 1.0);

    // ---- traces ----
    py::class_<traces::GeneralTracePlan>(m, "GeneralTracePlan")
        .def(py::init<>())
        .def_readwrite("question", &traces::GeneralTracePlan::question)
        .def_readwrite("graphrag_id", &traces::GeneralTracePlan::graphrag_id)
        .def_readwrite("llm_id", &traces::GeneralTracePlan::llm_id)
        .def_readwrite("information", &traces::GeneralTracePlan::information)
        .def_readwrite("answer", &traces::GeneralTracePlan::answer)
        .def_readwrite("rationale_graphrag", &traces::GeneralTracePlan::rationale_graphrag)
        .def_readwrite("rationale_llm", &traces::GeneralTracePlan::rationale_llm)
        .def_readwrite("rationale_sufficiency", &traces::GeneralTracePlan::rationale_sufficiency);

    m.def("build_general_trace", &traces::build_general_trace, py::arg("plan"),
          py::arg("registry"));
    m.def(
        "validate_trace",
        [](const std::string& text, const backends::BackendRegistry& registry) {
            auto report = traces::validate_trace(text, registry);
            py::dict out;
            out["penalty"] = report.penalty;
            std::vector<std::string> fired;
            for (auto id : report.fired) fired.emplace_back(reward::rule_name(id));
            out["fired"] = fired;
            out["turns"] = report.turn_count;
            out["defects"] = report.defect_count;
            std::vector<std::string> lint;
            for (const auto& v : report.lint) lint.push_back(v.term);
            out["lint"] = lint;
            return out;
        },
        py::arg("text"), py::arg("registry"));

    // ---- harness ----
    py::class_<harness::Episode>(m, "Episode")
        .def_readonly("question_id", &harness::Episode::question_id)
        .def_readonly("transcript", &harness::Episode::transcript)
        .def_readonly("final_answer", &harness::Episode::final_answer)
        .def_readonly("em", &harness::Episode::em)
        .def_readonly("f1", &harness::Episode::f1)
        .def_property_readonly("valid_calls", [](const harness::Episode& e) {
            return e.actions.size();
        });

    m.def(
        "run_episode",
        [](const policy::PolicySnapshot& snapshot, const backends::BackendRegistry& registry,
           PySimWorld& world, const harness::QuestionRecord& question, int max_turns,
           std::uint64_t seed, double temperature) {
            harness::EpisodeConfig cfg;
            cfg.max_turns = max_turns;
            cfg.seed = seed;
            cfg.temperature = temperature;
            return harness::run_episode(snapshot, registry, world.backend, question, cfg);
        },
        py::arg("policy"), py::arg("registry"), py::arg("world"), py::arg("question"),
        py::arg("max_turns") = 4, py::arg("seed") = 0, py::arg("temperature") = 1.0);

    m.def(
        "evaluate",
        [](const policy::PolicySnapshot& snapshot,
           const std::vector<harness::QuestionRecord>& dataset,
           const backends::BackendRegistry& registry, PySimWorld& world, std::uint64_t seed,
           unsigned parallelism) {
            harness::EvalOptions options;
            options.seed = seed;
            options.parallelism = parallelism;
            auto report = harness::evaluate(snapshot, dataset, registry, world.backend, options);
            py::dict out;
            out["em"] = report.em;
            out["f1"] = report.f1;
            out["avg_valid_calls"] = report.avg_valid_calls;
            out["routing_share"] = report.routing_share;
            out["episodes"] = report.episode_count;
            return out;
        },
        py::arg("policy"), py::arg("dataset"), py::arg("registry"), py::arg("world"),
        py::arg("seed") = 0, py::arg("parallelism") = 1);

    // ---- synthetic world ----
    m.def(
        "make_synthetic_world",
        [](const backends::BackendRegistry& registry, int count, double easy, double medium,
           std::uint64_t seed) {
            harness::SyntheticSpec spec;
            spec.question_count = count;
            spec.easy_fraction = easy;
            spec.medium_fraction = medium;
            spec.seed = seed;
            auto world = harness::make_synthetic_world(registry, spec);
            return py::make_tuple(world.script, world.dataset);
        },
        py::arg("registry"), py::arg("count") = 50, py::arg("easy") = 0.6,
        py::arg("medium") = 0.25, py::arg("seed") = 0);

    m.def("run_cli", [](const std::vector<std::string>& args) { return harness::run_cli(args); });
}
