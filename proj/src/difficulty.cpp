#include "graphroute/difficulty.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "graphroute/util.hpp"

namespace graphroute::difficulty {

using nlohmann::json;
using nlohmann::ordered_json;

std::pair<reward::Difficulty, int> classify(const std::map<std::string, double>& sr,
                                            const backends::BackendRegistry& registry,
                                            double tau) {
    bool small_ok = false, medium_ok = false;
    int c_min = std::numeric_limits<int>::max();
    for (const auto& [model_id, rate] : sr) {
        if (rate < tau) continue;
        const auto& spec = registry.llm(model_id);
        if (spec.tier == backends::Tier::Small) small_ok = true;
        if (spec.tier == backends::Tier::Medium) medium_ok = true;
        c_min = std::min(c_min, registry.llm_cost(model_id));
    }
    reward::Difficulty label = small_ok    ? reward::Difficulty::Easy
                               : medium_ok ? reward::Difficulty::Medium
                                           : reward::Difficulty::Hard;
    if (c_min == std::numeric_limits<int>::max()) {
        // nothing reliably solves it: Hard, and the cost penalty vanishes
        c_min = registry.costs().max_cost();
    }
    return {label, c_min};
}

DifficultyProfile profile_question(const harness::QuestionRecord& question,
                                   const std::vector<backends::LlmSpec>& models,
                                   backends::Backend& world,
                                   const backends::BackendRegistry& registry,
                                   const ProfilerConfig& cfg) {
    if (models.empty()) {
        throw Error(errkind::empty_model_pool, "no generator models to profile with");
    }
    if (cfg.n_trials < 1) {
        throw Error(errkind::bad_config, "n_trials must be >= 1");
    }
    DifficultyProfile profile;
    profile.question_id = question.id;
    profile.trials = cfg.n_trials;
    // Direct inference: the prompt carries no retrieved evidence.
    std::string prompt = "Question: " + question.question + "\nAnswer the question directly.";
    for (const auto& model : models) {
        int successes = 0;
        for (int trial = 0; trial < cfg.n_trials; ++trial) {
            std::uint64_t key =
                derive_seed(cfg.seed, "profile", question.id, model.id, trial);
            std::string response = world.generate(model.id, prompt, key);
            auto answer = backends::extract_answer(response);
            if (answer && reward::exact_match(*answer, question.gold_answers) == 1.0) {
                ++successes;
            }
        }
        profile.successes[model.id] = successes;
        profile.sr[model.id] =
            static_cast<double>(successes) / static_cast<double>(cfg.n_trials);
    }
    auto [label, c_min] = classify(profile.sr, registry, cfg.tau);
    profile.difficulty = label;
    profile.c_min = c_min;
    return profile;
}

void ProfileStore::put(DifficultyProfile profile) {
    if (!by_id_.count(profile.question_id)) order_.push_back(profile.question_id);
    by_id_[profile.question_id] = std::move(profile);
}

const DifficultyProfile* ProfileStore::find(const std::string& question_id) const {
    auto it = by_id_.find(question_id);
    return it == by_id_.end() ? nullptr : &it->second;
}

const DifficultyProfile& ProfileStore::require(const std::string& question_id) const {
    const DifficultyProfile* profile = find(question_id);
    if (!profile) {
        throw Error(errkind::missing_profile, "question '" + question_id + "' was never profiled");
    }
    return *profile;
}

std::vector<DifficultyProfile> ProfileStore::all() const {
    std::vector<DifficultyProfile> out;
    out.reserve(order_.size());
    for (const auto& id : order_) out.push_back(by_id_.at(id));
    return out;
}

std::string profile_to_json(const DifficultyProfile& profile) {
    ordered_json doc;
    doc["question_id"] = profile.question_id;
    doc["trials"] = profile.trials;
    doc["successes"] = profile.successes;
    doc["sr"] = profile.sr;
    doc["difficulty"] = reward::difficulty_name(profile.difficulty);
    doc["c_min"] = profile.c_min;
    return doc.dump();
}

DifficultyProfile profile_from_json(const std::string& line) {
    json doc = json::parse(line);
    DifficultyProfile profile;
    profile.question_id = doc.at("question_id").get<std::string>();
    profile.trials = doc.at("trials").get<int>();
    profile.successes = doc.at("successes").get<std::map<std::string, int>>();
    profile.sr = doc.at("sr").get<std::map<std::string, double>>();
    profile.difficulty = reward::difficulty_from_name(doc.at("difficulty").get<std::string>());
    profile.c_min = doc.at("c_min").get<int>();
    return profile;
}

void ProfileStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write profile store " + path);
    for (const auto& id : order_) {
        out << profile_to_json(by_id_.at(id)) << '\n';
    }
}

void ProfileStore::append_to(const std::string& path, const DifficultyProfile& profile) const {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(errkind::io_error, "cannot append to profile store " + path);
    out << profile_to_json(profile) << '\n';
}

ProfileStore ProfileStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errkind::io_error, "cannot open profile store " + path);
    ProfileStore store;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        store.put(profile_from_json(line));  // last write wins
    }
    return store;
}

std::vector<DifficultyProfile> profile_dataset(const std::vector<harness::QuestionRecord>& dataset,
                                               const std::vector<backends::LlmSpec>& models,
                                               backends::Backend& world,
                                               const backends::BackendRegistry& registry,
                                               const ProfilerConfig& cfg,
                                               const std::optional<std::string>& store_path) {
    {
        std::map<std::string, bool> seen;
        for (const auto& q : dataset) {
            if (seen.count(q.id)) {
                throw Error(errkind::duplicate_question_id, "duplicate id '" + q.id + "'");
            }
            seen[q.id] = true;
        }
    }
    std::vector<std::optional<DifficultyProfile>> slots(dataset.size());
    std::vector<std::string> failures(dataset.size());
    parallel_for(dataset.size(), cfg.parallelism, [&](std::size_t i) {
        try {
            slots[i] = profile_question(dataset[i], models, world, registry, cfg);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    std::vector<DifficultyProfile> profiles;
    std::vector<std::string> failed_ids;
    ProfileStore store;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (slots[i]) {
            profiles.push_back(*slots[i]);
            store.put(*slots[i]);
        } else {
            failed_ids.push_back(dataset[i].id);
        }
    }
    if (store_path) store.save(*store_path);
    if (!failed_ids.empty()) throw PartialProfileSet(std::move(failed_ids));
    return profiles;
}

}  // namespace graphroute::difficulty
