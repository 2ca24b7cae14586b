#include "graphroute/synthetic.hpp"

#include <set>

#include "graphroute/policy.hpp"
#include "graphroute/reward.hpp"
#include "graphroute/util.hpp"

namespace graphroute::harness {

std::vector<std::string> synthetic_topics(std::size_t count) {
    // candidates are filtered so each lands in its own topic feature bucket
    static const char* kCandidates[] = {
        "geography", "history",  "music",    "physics", "cinema",  "botany",
        "astronomy", "cuisine",  "commerce", "sports",  "geology", "medicine",
        "folklore",  "aviation", "painting", "rivers",  "chess",   "poetry",
    };
    std::vector<std::string> topics;
    std::set<std::size_t> used;
    for (const char* candidate : kCandidates) {
        std::size_t bucket = fnv1a64(candidate) % policy::kTopicBuckets;
        if (used.count(bucket)) continue;
        used.insert(bucket);
        topics.push_back(candidate);
        if (topics.size() == count) return topics;
    }
    // more topics than buckets: reuse, buckets will collide
    while (topics.size() < count) {
        topics.push_back(kCandidates[topics.size() % std::size(kCandidates)]);
    }
    return topics;
}

namespace {

backends::Tier class_tier(reward::Difficulty difficulty) {
    switch (difficulty) {
        case reward::Difficulty::Easy: return backends::Tier::Small;
        case reward::Difficulty::Medium: return backends::Tier::Medium;
        case reward::Difficulty::Hard: return backends::Tier::Large;
    }
    return backends::Tier::Large;
}

}  // namespace

SyntheticWorld make_synthetic_world(const backends::BackendRegistry& registry,
                                    const SyntheticSpec& spec) {
    SyntheticWorld world;
    const auto& graphrags = registry.graphrags();
    std::vector<std::string> topics = synthetic_topics(graphrags.size());

    int n = spec.question_count;
    int easy_n = static_cast<int>(n * spec.easy_fraction + 0.5);
    int medium_n = static_cast<int>(n * spec.medium_fraction + 0.5);

    std::vector<reward::Difficulty> classes(static_cast<std::size_t>(n),
                                            reward::Difficulty::Hard);
    for (int i = 0; i < easy_n && i < n; ++i) classes[i] = reward::Difficulty::Easy;
    for (int i = easy_n; i < easy_n + medium_n && i < n; ++i) {
        classes[i] = reward::Difficulty::Medium;
    }
    Rng rng(derive_seed(spec.seed, "synthetic-classes"));
    rng.shuffle(classes);

    Rng noise_rng(derive_seed(spec.seed, "synthetic-noise"));
    for (int i = 0; i < n; ++i) {
        std::size_t topic_idx = static_cast<std::size_t>(i) % topics.size();
        const std::string& topic = topics[topic_idx];
        const std::string& solver = graphrags[topic_idx].id;
        reward::Difficulty difficulty = classes[static_cast<std::size_t>(i)];
        backends::Tier floor = class_tier(difficulty);

        backends::QuestionScript q;
        q.id = "q" + std::to_string(i);
        q.question = "Which entry does the " + topic + " table assign to key " +
                     std::to_string(i) + "?";
        q.answers = {topic + " entry " + std::to_string(i)};
        q.evidence = "The " + topic + " table assigns key " + std::to_string(i) + " to " +
                     q.answers.front() + ".";
        // failed generations hedge rather than guess, so episodes reroute
        q.attrs["topic"] = topic;
        int hops = difficulty == reward::Difficulty::Easy     ? 1
                   : difficulty == reward::Difficulty::Medium ? 2
                                                              : 3;
        q.attrs["hops"] = std::to_string(hops);

        bool noisy =
            spec.noisy_fraction > 0.0 && noise_rng.next_double() < spec.noisy_fraction;
        for (auto tier : {backends::Tier::Small, backends::Tier::Medium, backends::Tier::Large}) {
            if (static_cast<int>(tier) < static_cast<int>(floor)) continue;
            double prob = 1.0;
            if (noisy && tier == floor) {
                // straddles the profiler threshold; still solvable above floor
                prob = noise_rng.bernoulli(0.5) ? 0.9 : 0.55;
            }
            q.pairs.push_back({solver, tier, prob});   // retrieval-backed
            q.pairs.push_back({"", tier, prob});       // direct inference
        }

        QuestionRecord record;
        record.id = q.id;
        record.question = q.question;
        record.gold_answers = q.answers;
        record.source = "synthetic";
        record.attrs = q.attrs;

        world.script.questions.push_back(std::move(q));
        world.dataset.push_back(std::move(record));
    }
    return world;
}

}  // namespace graphroute::harness
