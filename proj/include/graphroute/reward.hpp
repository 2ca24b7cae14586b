#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/protocol.hpp"

namespace graphroute::reward {

// The twelve structural rules, in ledger order. MissingGraphRag escalates from
// 0.4 to 0.6 when a search still proceeds (replacement, not addition).
enum class RuleId {
    Fatal,                       // 1.0  no valid / unclosed / mismatched / nested tags
    MissingThink,                // 0.4  no <think> present
    LlmBeforeGraphRag,           // 0.8  <llm> with no valid <graphrag> before it
    MissingGraphRag,             // 0.4 -> 0.6 with a search
    InvalidGraphRagName,         // 0.2
    MissingSecondStageReasoning, // 0.3  a search with fewer than two thinks before it
    MissingLlmBeforeSearch,      // 0.3
    InvalidLlmName,              // 0.1
    MissingSearch,               // 0.4
    InvalidSearchFormat,         // 0.3  not exactly one ':' and one ';'
    InvalidAnswerCardinality,    // 0.3  zero or more than one <answer>
    EmptyReasoning,              // 0.2  a <think> empty or a bare placeholder
};

struct FormatRule {
    RuleId id;
    double weight;
    bool fatal;
};

// The fixed rule ledger (escalated MissingGraphRag weight is reported by
// format_reward, the table holds the base 0.4).
const std::vector<FormatRule>& rule_ledger();
double rule_weight(RuleId id);
const char* rule_name(RuleId id);

inline constexpr double kMissingGraphRagEscalated = 0.6;

struct FormatResult {
    double penalty = 0.0;                // positive magnitude, clipped at 1.0
    std::vector<RuleId> fired;           // each rule at most once
    std::vector<double> fired_weights;   // effective weight per fired rule
};

// Fatal defects short-circuit to penalty 1.0; otherwise the fired rule weights
// sum and clip at 1.0.
FormatResult format_reward(const protocol::Trajectory& trajectory,
                           const backends::BackendRegistry& registry);

// Open-domain QA answer normalization: lowercase, strip punctuation, drop
// bare articles, collapse whitespace.
std::string normalize_answer(const std::string& text);

// 1 iff the normalized answer equals any normalized gold. Empty/absent
// answers score 0.
double exact_match(const std::string& answer, const std::vector<std::string>& golds);

// Max over golds of the token-level F1 on normalized whitespace tokens.
double f1_score(const std::string& answer, const std::vector<std::string>& golds);

enum class Stage { Stage1, Stage2 };

enum class CostAttribution { Max, Sum, Last };

struct CostConfig {
    double cost_scale = 0.05;  // beta
    double weight_easy = 1.0;
    double weight_medium = 0.6;
    double weight_hard = 0.2;
    CostAttribution attribution = CostAttribution::Max;
};

enum class Difficulty { Easy, Medium, Hard };

const char* difficulty_name(Difficulty difficulty);
Difficulty difficulty_from_name(const std::string& name);

// Minimal slice of a difficulty profile the reward needs.
struct CostProfile {
    Difficulty difficulty = Difficulty::Hard;
    int c_min = 4;
};

// beta * w_D * max(0, invoked_cost - c_min); zero when the invoked generator
// is not more expensive than required.
double cost_reward(int invoked_cost, const CostProfile& profile, const CostConfig& cfg);

// Combines the invoked generator costs of one episode per the configured
// attribution; empty invocations cost 0.
int attribute_cost(const std::vector<int>& invoked_costs, CostAttribution attribution);

// Stage1: format + outcome. Stage2: format + outcome - (outcome == 1 ? cost : 0).
double shape(double format, double outcome, double cost, Stage stage);

struct RewardBreakdown {
    double format = 0.0;  // in [-1, 0]
    std::vector<RuleId> fired_rules;
    double outcome = 0.0;
    double cost = 0.0;  // the gated-in cost term (0 at stage 1)
    double total = 0.0;
    Stage stage = Stage::Stage1;
};

// Full scoring of one finished episode trajectory. `profile` is required at
// Stage2 (MissingProfile otherwise); `invoked_costs` are the generator costs
// of the episode's executed actions.
RewardBreakdown score(const protocol::Trajectory& trajectory,
                      const std::optional<std::string>& final_answer,
                      const std::vector<std::string>& golds,
                      const backends::BackendRegistry& registry, Stage stage,
                      const std::vector<int>& invoked_costs,
                      const std::optional<CostProfile>& profile, const CostConfig& cfg);

}  // namespace graphroute::reward
