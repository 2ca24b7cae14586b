#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphroute/difficulty.hpp"
#include "graphroute/episode.hpp"

namespace graphroute::harness {

struct EvalOptions {
    std::uint64_t seed = 0;
    double temperature = 1.0;
    int max_turns = protocol::kDefaultMaxTurns;
    unsigned parallelism = 1;
    reward::Stage stage = reward::Stage::Stage1;
    reward::CostConfig cost;
};

struct SliceMetrics {
    double em = 0.0;
    double f1 = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    double em = 0.0;
    double f1 = 0.0;
    double avg_valid_calls = 0.0;
    bool any_calls = false;  // false => routing_share is undefined
    std::map<std::string, double> routing_share;  // tier name -> fraction of calls
    std::map<std::string, SliceMetrics> per_dataset;
    std::size_t episode_count = 0;

    // stable line-delimited {metric, value, slice} records
    std::string to_jsonl() const;
    std::string to_table() const;
};

EvalReport evaluate(const policy::PolicySnapshot& policy,
                    const std::vector<QuestionRecord>& dataset,
                    const backends::BackendRegistry& registry, backends::Backend& world,
                    const EvalOptions& options,
                    const difficulty::ProfileStore* profiles = nullptr);

// Aggregation shared with the trainer's per-step statistics.
EvalReport aggregate_episodes(const std::vector<Episode>& episodes,
                              const std::vector<QuestionRecord>& dataset);

}  // namespace graphroute::harness
