#include "graphroute/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "graphroute/util.hpp"

namespace graphroute::reward {

using protocol::Segment;
using protocol::SegmentKind;
using protocol::Trajectory;

const std::vector<FormatRule>& rule_ledger() {
    static const std::vector<FormatRule> ledger = {
        {RuleId::Fatal, 1.0, true},
        {RuleId::MissingThink, 0.4, false},
        {RuleId::LlmBeforeGraphRag, 0.8, false},
        {RuleId::MissingGraphRag, 0.4, false},
        {RuleId::InvalidGraphRagName, 0.2, false},
        {RuleId::MissingSecondStageReasoning, 0.3, false},
        {RuleId::MissingLlmBeforeSearch, 0.3, false},
        {RuleId::InvalidLlmName, 0.1, false},
        {RuleId::MissingSearch, 0.4, false},
        {RuleId::InvalidSearchFormat, 0.3, false},
        {RuleId::InvalidAnswerCardinality, 0.3, false},
        {RuleId::EmptyReasoning, 0.2, false},
    };
    return ledger;
}

double rule_weight(RuleId id) {
    for (const auto& rule : rule_ledger()) {
        if (rule.id == id) return rule.weight;
    }
    return 0.0;
}

const char* rule_name(RuleId id) {
    switch (id) {
        case RuleId::Fatal: return "fatal";
        case RuleId::MissingThink: return "missing-think";
        case RuleId::LlmBeforeGraphRag: return "llm-before-graphrag";
        case RuleId::MissingGraphRag: return "missing-graphrag";
        case RuleId::InvalidGraphRagName: return "invalid-graphrag-name";
        case RuleId::MissingSecondStageReasoning: return "missing-second-stage-reasoning";
        case RuleId::MissingLlmBeforeSearch: return "missing-llm-before-search";
        case RuleId::InvalidLlmName: return "invalid-llm-name";
        case RuleId::MissingSearch: return "missing-search";
        case RuleId::InvalidSearchFormat: return "invalid-search-format";
        case RuleId::InvalidAnswerCardinality: return "invalid-answer-cardinality";
        case RuleId::EmptyReasoning: return "empty-reasoning";
    }
    return "?";
}

namespace {

bool is_placeholder_reasoning(const std::string& content) {
    std::string t = trim(content);
    return t.empty() || t == "..." || t == "…";
}

bool search_format_ok(const std::string& content) {
    std::size_t colons = 0, semis = 0;
    for (char c : content) {
        if (c == ':') ++colons;
        if (c == ';') ++semis;
    }
    return colons == 1 && semis == 1;
}

}  // namespace

FormatResult format_reward(const Trajectory& trajectory,
                           const backends::BackendRegistry& registry) {
    FormatResult result;
    auto fire = [&](RuleId id, double weight) {
        result.fired.push_back(id);
        result.fired_weights.push_back(weight);
        result.penalty += weight;
    };

    // Fatal structural violations short-circuit every graded rule.
    if (trajectory.has_defects()) {
        fire(RuleId::Fatal, 1.0);
        result.penalty = 1.0;
        return result;
    }

    const auto& segments = trajectory.segments;

    std::size_t think_count = 0, search_count = 0, answer_count = 0, llm_count = 0,
                graphrag_count = 0;
    bool any_invalid_graphrag_name = false;
    bool any_invalid_llm_name = false;
    bool any_valid_graphrag = false;
    bool any_empty_think = false;
    bool any_bad_search_format = false;
    bool any_search_few_thinks = false;   // a search with < 2 thinks before it
    bool any_search_no_valid_llm = false; // a search with no valid llm before it
    bool any_llm_no_valid_graphrag_before = false;

    std::size_t thinks_so_far = 0;
    bool valid_llm_seen = false;
    bool valid_graphrag_seen = false;

    for (const Segment& s : segments) {
        switch (s.kind) {
            case SegmentKind::Think:
                ++think_count;
                ++thinks_so_far;
                if (is_placeholder_reasoning(s.content)) any_empty_think = true;
                break;
            case SegmentKind::GraphRag: {
                ++graphrag_count;
                bool valid = registry.has_graphrag(trim(s.content));
                if (valid) {
                    any_valid_graphrag = true;
                    valid_graphrag_seen = true;
                } else {
                    any_invalid_graphrag_name = true;
                }
                break;
            }
            case SegmentKind::Llm: {
                ++llm_count;
                bool valid = registry.has_llm(trim(s.content));
                if (valid) {
                    valid_llm_seen = true;
                } else {
                    any_invalid_llm_name = true;
                }
                if (!valid_graphrag_seen) any_llm_no_valid_graphrag_before = true;
                break;
            }
            case SegmentKind::Search:
                ++search_count;
                if (!search_format_ok(s.content)) any_bad_search_format = true;
                if (thinks_so_far < 2) any_search_few_thinks = true;
                if (!valid_llm_seen) any_search_no_valid_llm = true;
                break;
            case SegmentKind::Answer:
                ++answer_count;
                break;
            case SegmentKind::Information:
            case SegmentKind::FreeText:
                break;
        }
    }

    if (think_count == 0) fire(RuleId::MissingThink, rule_weight(RuleId::MissingThink));
    if (llm_count > 0 && any_llm_no_valid_graphrag_before) {
        fire(RuleId::LlmBeforeGraphRag, rule_weight(RuleId::LlmBeforeGraphRag));
    }
    if (!any_valid_graphrag) {
        double weight = search_count > 0 ? kMissingGraphRagEscalated
                                         : rule_weight(RuleId::MissingGraphRag);
        fire(RuleId::MissingGraphRag, weight);
    }
    if (any_invalid_graphrag_name) {
        fire(RuleId::InvalidGraphRagName, rule_weight(RuleId::InvalidGraphRagName));
    }
    if (any_search_few_thinks) {
        fire(RuleId::MissingSecondStageReasoning,
             rule_weight(RuleId::MissingSecondStageReasoning));
    }
    if (any_search_no_valid_llm) {
        fire(RuleId::MissingLlmBeforeSearch, rule_weight(RuleId::MissingLlmBeforeSearch));
    }
    if (any_invalid_llm_name) fire(RuleId::InvalidLlmName, rule_weight(RuleId::InvalidLlmName));
    if (search_count == 0) fire(RuleId::MissingSearch, rule_weight(RuleId::MissingSearch));
    if (any_bad_search_format) {
        fire(RuleId::InvalidSearchFormat, rule_weight(RuleId::InvalidSearchFormat));
    }
    if (answer_count != 1) {
        fire(RuleId::InvalidAnswerCardinality, rule_weight(RuleId::InvalidAnswerCardinality));
    }
    if (any_empty_think) fire(RuleId::EmptyReasoning, rule_weight(RuleId::EmptyReasoning));

    result.penalty = std::min(1.0, result.penalty);
    return result;
}

std::string normalize_answer(const std::string& text) {
    std::string lowered = to_lower(text);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (char c : lowered) {
        if (std::ispunct(static_cast<unsigned char>(c))) continue;
        no_punct.push_back(c);
    }
    std::string out;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (token != "a" && token != "an" && token != "the") {
            if (!out.empty()) out += ' ';
            out += token;
        }
        token.clear();
    };
    for (char c : no_punct) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            token.push_back(c);
        }
    }
    flush();
    return out;
}

namespace {

std::vector<std::string> normalized_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string normalized = normalize_answer(text);
    std::string token;
    for (char c : normalized) {
        if (c == ' ') {
            if (!token.empty()) tokens.push_back(token);
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    if (!token.empty()) tokens.push_back(token);
    return tokens;
}

}  // namespace

double exact_match(const std::string& answer, const std::vector<std::string>& golds) {
    std::string normalized = normalize_answer(answer);
    for (const auto& gold : golds) {
        if (normalized == normalize_answer(gold)) return 1.0;
    }
    return 0.0;
}

double f1_score(const std::string& answer, const std::vector<std::string>& golds) {
    std::vector<std::string> pred = normalized_tokens(answer);
    double best = 0.0;
    for (const auto& gold_text : golds) {
        std::vector<std::string> gold = normalized_tokens(gold_text);
        if (pred.empty() || gold.empty()) {
            best = std::max(best, pred == gold ? 1.0 : 0.0);
            continue;
        }
        std::map<std::string, int> counts;
        for (const auto& t : gold) counts[t] += 1;
        int overlap = 0;
        for (const auto& t : pred) {
            auto it = counts.find(t);
            if (it != counts.end() && it->second > 0) {
                --it->second;
                ++overlap;
            }
        }
        if (overlap == 0) continue;
        double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
        double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

const char* difficulty_name(Difficulty difficulty) {
    switch (difficulty) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Hard: return "hard";
    }
    return "?";
}

Difficulty difficulty_from_name(const std::string& name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "medium") return Difficulty::Medium;
    if (name == "hard") return Difficulty::Hard;
    throw Error(errkind::bad_config, "unknown difficulty '" + name + "'");
}

double cost_reward(int invoked_cost, const CostProfile& profile, const CostConfig& cfg) {
    double weight = 0.0;
    switch (profile.difficulty) {
        case Difficulty::Easy: weight = cfg.weight_easy; break;
        case Difficulty::Medium: weight = cfg.weight_medium; break;
        case Difficulty::Hard: weight = cfg.weight_hard; break;
    }
    double excess = std::max(0.0, static_cast<double>(invoked_cost - profile.c_min));
    return cfg.cost_scale * weight * excess;
}

int attribute_cost(const std::vector<int>& invoked_costs, CostAttribution attribution) {
    if (invoked_costs.empty()) return 0;
    switch (attribution) {
        case CostAttribution::Max:
            return *std::max_element(invoked_costs.begin(), invoked_costs.end());
        case CostAttribution::Sum: {
            int total = 0;
            for (int c : invoked_costs) total += c;
            return total;
        }
        case CostAttribution::Last:
            return invoked_costs.back();
    }
    return 0;
}

double shape(double format, double outcome, double cost, Stage stage) {
    if (stage == Stage::Stage1) return format + outcome;
    return format + outcome - (outcome == 1.0 ? cost : 0.0);
}

RewardBreakdown score(const Trajectory& trajectory,
                      const std::optional<std::string>& final_answer,
                      const std::vector<std::string>& golds,
                      const backends::BackendRegistry& registry, Stage stage,
                      const std::vector<int>& invoked_costs,
                      const std::optional<CostProfile>& profile, const CostConfig& cfg) {
    RewardBreakdown breakdown;
    breakdown.stage = stage;

    FormatResult format = format_reward(trajectory, registry);
    breakdown.format = format.penalty == 0.0 ? 0.0 : -format.penalty;
    breakdown.fired_rules = format.fired;

    breakdown.outcome = final_answer ? exact_match(*final_answer, golds) : 0.0;

    if (stage == Stage::Stage2) {
        if (!profile) {
            throw Error(errkind::missing_profile, "stage-2 scoring requires a difficulty profile");
        }
        int invoked = attribute_cost(invoked_costs, cfg.attribution);
        breakdown.cost = cost_reward(invoked, *profile, cfg);
    } else {
        breakdown.cost = 0.0;
    }

    breakdown.total = shape(breakdown.format, breakdown.outcome, breakdown.cost, stage);
    return breakdown;
}

}  // namespace graphroute::reward
