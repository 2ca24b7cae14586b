#pragma once

#include <cstdint>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/dataset.hpp"

namespace graphroute::harness {

// Parameters for the scripted lookup-table worlds used by training and the
// acceptance runs. Each question has one solving framework (by topic) and is
// solvable by every generator tier at or above its difficulty class, both
// with retrieval and by direct inference.
struct SyntheticSpec {
    int question_count = 200;
    double easy_fraction = 0.60;
    double medium_fraction = 0.25;  // the rest is hard
    std::uint64_t seed = 0;
    // When > 0, this fraction of questions gets noisy (non 0/1) direct-inference
    // probabilities, exercising the trial sampling in the profiler.
    double noisy_fraction = 0.0;
};

struct SyntheticWorld {
    backends::WorldScript script;
    std::vector<QuestionRecord> dataset;
};

SyntheticWorld make_synthetic_world(const backends::BackendRegistry& registry,
                                    const SyntheticSpec& spec);

// Topic labels whose feature buckets are pairwise distinct, one per graphrag.
std::vector<std::string> synthetic_topics(std::size_t count);

}  // namespace graphroute::harness
