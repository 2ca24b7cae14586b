#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/dataset.hpp"
#include "graphroute/policy.hpp"
#include "graphroute/protocol.hpp"
#include "graphroute/reward.hpp"

namespace graphroute::harness {

struct Episode {
    std::string question_id;
    protocol::Trajectory trajectory;
    std::string transcript;
    std::optional<std::string> final_answer;
    std::vector<protocol::RoutingAction> actions;   // executed without error
    std::vector<backends::Tier> invoked_tiers;      // derived from actions
    std::vector<policy::Decision> decisions;        // every sampled routing action
    reward::RewardBreakdown reward;
    double em = 0.0;
    double f1 = 0.0;
    double wall_time_ms = 0.0;
};

struct EpisodeConfig {
    int max_turns = protocol::kDefaultMaxTurns;
    double temperature = 1.0;
    reward::Stage stage = reward::Stage::Stage1;
    reward::CostConfig cost;
    std::uint64_t seed = 0;
};

// Drives one episode: policy emits a search turn (rendered through the tag
// protocol), the backend reply is folded back in as information, and the
// episode answers once the information carries an extractable answer. Backend
// errors become in-band information text; the episode itself never aborts.
Episode run_episode(const policy::PolicySnapshot& policy,
                    const backends::BackendRegistry& registry, backends::Backend& world,
                    const QuestionRecord& question, const EpisodeConfig& cfg,
                    const std::optional<reward::CostProfile>& profile = std::nullopt);

}  // namespace graphroute::harness
