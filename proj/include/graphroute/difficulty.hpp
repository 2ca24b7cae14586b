#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/dataset.hpp"
#include "graphroute/reward.hpp"

namespace graphroute::difficulty {

struct ProfilerConfig {
    int n_trials = 5;
    double tau = 0.8;
    std::uint64_t seed = 0;
    unsigned parallelism = 1;
};

struct DifficultyProfile {
    std::string question_id;
    int trials = 0;
    std::map<std::string, int> successes;  // model_id -> successful trials
    std::map<std::string, double> sr;      // model_id -> successes / trials
    reward::Difficulty difficulty = reward::Difficulty::Hard;
    int c_min = 4;

    reward::CostProfile cost_profile() const { return {difficulty, c_min}; }
    bool operator==(const DifficultyProfile&) const = default;
};

// Pure classification step: given per-model success rates, derive the label
// and minimum required cost. When no model reaches tau the question is Hard
// with c_min = the largest tier cost (the penalty then vanishes everywhere).
std::pair<reward::Difficulty, int> classify(const std::map<std::string, double>& sr,
                                            const backends::BackendRegistry& registry,
                                            double tau);

// Runs n_trials direct-inference generations per model, scores each with
// exact match, and fills the profile. Deterministic given cfg.seed.
DifficultyProfile profile_question(const harness::QuestionRecord& question,
                                   const std::vector<backends::LlmSpec>& models,
                                   backends::Backend& world,
                                   const backends::BackendRegistry& registry,
                                   const ProfilerConfig& cfg);

// Line-delimited profile store; append-only, last write wins per question id.
class ProfileStore {
public:
    void put(DifficultyProfile profile);
    const DifficultyProfile* find(const std::string& question_id) const;
    const DifficultyProfile& require(const std::string& question_id) const;  // MissingProfile
    std::size_t size() const { return order_.size(); }
    const std::vector<std::string>& ids() const { return order_; }
    std::vector<DifficultyProfile> all() const;

    void save(const std::string& path) const;
    void append_to(const std::string& path, const DifficultyProfile& profile) const;
    static ProfileStore load(const std::string& path);

private:
    std::map<std::string, DifficultyProfile> by_id_;
    std::vector<std::string> order_;
};

std::string profile_to_json(const DifficultyProfile& profile);
DifficultyProfile profile_from_json(const std::string& line);

// Profiles every question, persisting to store_path when given. Duplicate ids
// raise DuplicateQuestionId; per-question backend failures are collected into
// PartialProfileSet after the survivors are persisted.
std::vector<DifficultyProfile> profile_dataset(const std::vector<harness::QuestionRecord>& dataset,
                                               const std::vector<backends::LlmSpec>& models,
                                               backends::Backend& world,
                                               const backends::BackendRegistry& registry,
                                               const ProfilerConfig& cfg,
                                               const std::optional<std::string>& store_path);

}  // namespace graphroute::difficulty
