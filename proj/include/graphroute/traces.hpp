#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/protocol.hpp"
#include "graphroute/reward.hpp"

namespace graphroute::traces {

// Single-turn template: think, graphrag, think, llm, search, information,
// think, answer.
struct GeneralTracePlan {
    std::string question;
    std::string graphrag_id;
    std::string llm_id;
    std::string information;
    std::string answer;
    std::string rationale_graphrag;   // first think
    std::string rationale_llm;        // second think
    std::string rationale_sufficiency;  // final think
};

struct ReflectionRound {
    std::string graphrag_id;
    std::string llm_id;
    std::string information;
};

// Two-turn template with the bridge think between the rounds; 14 segments.
struct ReflectionTracePlan {
    std::string question;
    ReflectionRound round1;  // information must describe a failed attempt
    ReflectionRound round2;
    std::string answer;
    std::string rationale_graphrag1;
    std::string rationale_llm1;
    std::string rationale_bridge;  // diagnoses the failure, keeps or switches
    std::string rationale_llm2;
    std::string rationale_sufficiency;
};

// Renders the plan into trace text that parses back into the template segment
// order with a format penalty of exactly 0. InvalidPlan on empty rationales,
// unknown ids, reserved characters in the question, or tag tokens in any part.
std::string build_general_trace(const GeneralTracePlan& plan,
                                const backends::BackendRegistry& registry);
std::string build_reflection_trace(const ReflectionTracePlan& plan,
                                   const backends::BackendRegistry& registry);

struct LintViolation {
    std::string term;
    std::size_t segment_index;
};

struct TraceReport {
    double penalty = 0.0;
    std::vector<reward::RuleId> fired;
    std::size_t turn_count = 0;
    std::vector<protocol::RoutingAction> actions;  // parsed from search segments
    std::vector<LintViolation> lint;
    std::size_t defect_count = 0;

    bool clean() const { return penalty == 0.0 && lint.empty(); }
};

// Published-parts composition: protocol parse + format_reward + the fixed
// forbidden-language lint over authored segments (environment text exempt).
TraceReport validate_trace(const std::string& text, const backends::BackendRegistry& registry);

const std::vector<std::string>& forbidden_terms();

// Corpus records consumed by behavior cloning.
struct TraceRecord {
    std::string question;
    std::string trace_text;
    std::string kind;  // "general" | "reflection"
    std::vector<std::string> gold_answers;
};

struct CorpusManifest {
    std::size_t general_count = 0;
    std::size_t reflection_count = 0;
};

CorpusManifest corpus_manifest(const std::vector<TraceRecord>& records);

std::string corpus_to_jsonl(const std::vector<TraceRecord>& records);
std::vector<TraceRecord> corpus_from_jsonl(const std::string& text);
void save_corpus(const std::string& path, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> load_corpus(const std::string& path);

}  // namespace graphroute::traces
