#include "graphroute/evaluate.hpp"

#include <sstream>

#include <json.hpp>

#include "graphroute/util.hpp"

namespace graphroute::harness {

using nlohmann::ordered_json;

EvalReport aggregate_episodes(const std::vector<Episode>& episodes,
                              const std::vector<QuestionRecord>& dataset) {
    EvalReport report;
    report.episode_count = episodes.size();
    if (episodes.empty()) return report;

    std::map<std::string, std::string> source_of;
    for (const auto& q : dataset) source_of[q.id] = q.source;

    std::map<std::string, std::size_t> tier_calls;
    std::size_t total_calls = 0;
    for (const auto& episode : episodes) {
        report.em += episode.em;
        report.f1 += episode.f1;
        report.avg_valid_calls += static_cast<double>(episode.actions.size());
        for (auto tier : episode.invoked_tiers) {
            tier_calls[backends::tier_name(tier)] += 1;
            ++total_calls;
        }
        auto& slice = report.per_dataset[source_of[episode.question_id]];
        slice.em += episode.em;
        slice.f1 += episode.f1;
        slice.count += 1;
    }
    double n = static_cast<double>(episodes.size());
    report.em /= n;
    report.f1 /= n;
    report.avg_valid_calls /= n;
    for (auto& [source, slice] : report.per_dataset) {
        slice.em /= static_cast<double>(slice.count);
        slice.f1 /= static_cast<double>(slice.count);
    }
    report.any_calls = total_calls > 0;
    if (report.any_calls) {
        for (const char* tier : {"small", "medium", "large"}) {
            report.routing_share[tier] =
                static_cast<double>(tier_calls[tier]) / static_cast<double>(total_calls);
        }
    }
    return report;
}

EvalReport evaluate(const policy::PolicySnapshot& policy,
                    const std::vector<QuestionRecord>& dataset,
                    const backends::BackendRegistry& registry, backends::Backend& world,
                    const EvalOptions& options, const difficulty::ProfileStore* profiles) {
    std::vector<Episode> episodes(dataset.size());
    parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
        EpisodeConfig cfg;
        cfg.max_turns = options.max_turns;
        cfg.temperature = options.temperature;
        cfg.stage = options.stage;
        cfg.cost = options.cost;
        cfg.seed = derive_seed(options.seed, "eval", dataset[i].id);
        std::optional<reward::CostProfile> profile;
        if (profiles) {
            if (const auto* p = profiles->find(dataset[i].id)) profile = p->cost_profile();
        }
        episodes[i] = run_episode(policy, registry, world, dataset[i], cfg, profile);
    });
    return aggregate_episodes(episodes, dataset);
}

std::string EvalReport::to_jsonl() const {
    std::string out;
    auto emit = [&](const std::string& metric, double value, const std::string& slice) {
        ordered_json doc;
        doc["metric"] = metric;
        doc["value"] = value;
        doc["slice"] = slice;
        out += doc.dump();
        out += '\n';
    };
    emit("episodes", static_cast<double>(episode_count), "all");
    emit("em", em, "all");
    emit("f1", f1, "all");
    emit("avg_valid_calls", avg_valid_calls, "all");
    if (any_calls) {
        for (const auto& [tier, share] : routing_share) {
            emit("routing_share", share, "tier:" + tier);
        }
    } else {
        ordered_json doc;
        doc["metric"] = "routing_share";
        doc["value"] = nullptr;
        doc["slice"] = "undefined:no_calls";
        out += doc.dump();
        out += '\n';
    }
    for (const auto& [source, slice] : per_dataset) {
        std::string name = source.empty() ? "(untagged)" : source;
        emit("em", slice.em, "dataset:" + name);
        emit("f1", slice.f1, "dataset:" + name);
        emit("count", static_cast<double>(slice.count), "dataset:" + name);
    }
    return out;
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << "episodes          " << episode_count << "\n";
    out << "em                " << em << "\n";
    out << "f1                " << f1 << "\n";
    out << "avg valid calls   " << avg_valid_calls << "\n";
    if (any_calls) {
        for (const auto& [tier, share] : routing_share) {
            out << "share " << tier;
            for (std::size_t i = tier.size(); i < 12; ++i) out << ' ';
            out << share << "\n";
        }
    } else {
        out << "share             (no calls)\n";
    }
    for (const auto& [source, slice] : per_dataset) {
        out << "dataset " << (source.empty() ? "(untagged)" : source) << ": em=" << slice.em
            << " f1=" << slice.f1 << " n=" << slice.count << "\n";
    }
    return out.str();
}

}  // namespace graphroute::harness
