#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graphroute/difficulty.hpp"
#include "graphroute/episode.hpp"
#include "graphroute/evaluate.hpp"

namespace graphroute::policy {

struct TrainLogEntry {
    int stage = 1;
    int step = 0;
    double mean_reward = 0.0;
    double mean_kl = 0.0;
    double grad_norm = 0.0;
    double em = 0.0;
    double share_small = 0.0;
    double share_medium = 0.0;
    double share_large = 0.0;

    std::string to_json() const;
};

struct TrainResult {
    PolicySnapshot after_stage1;
    PolicySnapshot after_stage2;
    std::vector<TrainLogEntry> log;
};

// One RL stage: per step, a seeded batch of questions, group_size rollouts
// each, group-relative advantages, one gradient step. The reference snapshot
// is frozen on entry.
PolicySnapshot train_stage(const PolicySnapshot& start,
                           const std::vector<harness::QuestionRecord>& dataset,
                           const difficulty::ProfileStore* profiles,
                           const backends::BackendRegistry& registry, backends::Backend& world,
                           const TrainConfig& cfg, const reward::CostConfig& cost,
                           std::vector<TrainLogEntry>& log);

// Stage 1 shapes with format+outcome; stage 2 resets the reference and adds
// the gated cost term, requiring a profile for every dataset question.
TrainResult train_two_stage(const PolicySnapshot& start,
                            const std::vector<harness::QuestionRecord>& dataset,
                            const difficulty::ProfileStore& profiles,
                            const backends::BackendRegistry& registry, backends::Backend& world,
                            TrainConfig cfg1, TrainConfig cfg2,
                            const reward::CostConfig& cost = {});

void save_train_log(const std::string& path, const std::vector<TrainLogEntry>& log);

}  // namespace graphroute::policy
