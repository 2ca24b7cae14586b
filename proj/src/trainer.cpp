#include "graphroute/trainer.hpp"

#include <fstream>
#include <numeric>

#include <json.hpp>

#include "graphroute/util.hpp"

namespace graphroute::policy {

using nlohmann::ordered_json;

std::string TrainLogEntry::to_json() const {
    ordered_json doc;
    doc["stage"] = stage;
    doc["step"] = step;
    doc["mean_reward"] = mean_reward;
    doc["mean_kl"] = mean_kl;
    doc["grad_norm"] = grad_norm;
    doc["em"] = em;
    doc["share_small"] = share_small;
    doc["share_medium"] = share_medium;
    doc["share_large"] = share_large;
    return doc.dump();
}

void save_train_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write training log " + path);
    for (const auto& entry : log) out << entry.to_json() << '\n';
}

PolicySnapshot train_stage(const PolicySnapshot& start,
                           const std::vector<harness::QuestionRecord>& dataset,
                           const difficulty::ProfileStore* profiles,
                           const backends::BackendRegistry& registry, backends::Backend& world,
                           const TrainConfig& cfg, const reward::CostConfig& cost,
                           std::vector<TrainLogEntry>& log) {
    if (dataset.empty()) {
        throw Error(errkind::empty_dataset, "cannot train on an empty dataset");
    }
    int stage_no = cfg.stage == reward::Stage::Stage2 ? 2 : 1;
    if (cfg.stage == reward::Stage::Stage2) {
        if (!profiles) {
            throw Error(errkind::missing_profile, "stage 2 requires difficulty profiles");
        }
        for (const auto& q : dataset) profiles->require(q.id);
    }

    PolicySnapshot policy = start;
    policy.reset_reference();

    for (int step = 0; step < cfg.max_steps; ++step) {
        // seeded batch of question indices
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        Rng batch_rng(derive_seed(cfg.seed, "batch", stage_no, step));
        batch_rng.shuffle(order);
        std::size_t batch =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.questions_per_step), order.size());
        order.resize(batch);

        std::vector<RolloutGroup> groups(batch);
        std::vector<std::vector<harness::Episode>> episodes(batch);
        parallel_for(batch, cfg.parallelism, [&](std::size_t bi) {
            const auto& question = dataset[order[bi]];
            std::optional<reward::CostProfile> profile;
            if (profiles) {
                if (const auto* p = profiles->find(question.id)) profile = p->cost_profile();
            }
            RolloutGroup group;
            group.question_id = question.id;
            group.features = featurize(question);
            episodes[bi].resize(cfg.group_size);
            for (int k = 0; k < cfg.group_size; ++k) {
                harness::EpisodeConfig ecfg;
                ecfg.max_turns = cfg.max_turns;
                ecfg.temperature = cfg.temperature;
                ecfg.stage = cfg.stage;
                ecfg.cost = cost;
                ecfg.seed = derive_seed(cfg.seed, "rollout", stage_no, step, question.id, k);
                episodes[bi][k] = harness::run_episode(policy, registry, world, question, ecfg,
                                                       profile);
                group.rewards.push_back(episodes[bi][k].reward.total);
                group.episode_decisions.push_back(episodes[bi][k].decisions);
            }
            group.advantages = group_advantages(group.rewards, cfg.std_floor);
            groups[bi] = std::move(group);
        });

        auto [next, stats] = update_step(policy, groups, cfg);
        policy = std::move(next);

        TrainLogEntry entry;
        entry.stage = stage_no;
        entry.step = step;
        entry.mean_reward = stats.mean_reward;
        entry.mean_kl = stats.mean_kl;
        entry.grad_norm = stats.grad_norm;
        std::size_t episode_total = 0;
        std::map<backends::Tier, std::size_t> tier_calls;
        std::size_t calls = 0;
        for (const auto& group_episodes : episodes) {
            for (const auto& episode : group_episodes) {
                entry.em += episode.em;
                ++episode_total;
                for (auto tier : episode.invoked_tiers) {
                    tier_calls[tier] += 1;
                    ++calls;
                }
            }
        }
        if (episode_total > 0) entry.em /= static_cast<double>(episode_total);
        if (calls > 0) {
            entry.share_small =
                static_cast<double>(tier_calls[backends::Tier::Small]) / static_cast<double>(calls);
            entry.share_medium = static_cast<double>(tier_calls[backends::Tier::Medium]) /
                                 static_cast<double>(calls);
            entry.share_large =
                static_cast<double>(tier_calls[backends::Tier::Large]) / static_cast<double>(calls);
        }
        log.push_back(entry);

        policy.stage = stage_no;
        policy.step = step + 1;
        policy.seed = cfg.seed;
        if (cfg.checkpoint_path && cfg.checkpoint_every > 0 &&
            (step + 1) % cfg.checkpoint_every == 0) {
            policy.save(*cfg.checkpoint_path);
        }
    }
    if (cfg.checkpoint_path) policy.save(*cfg.checkpoint_path);
    return policy;
}

TrainResult train_two_stage(const PolicySnapshot& start,
                            const std::vector<harness::QuestionRecord>& dataset,
                            const difficulty::ProfileStore& profiles,
                            const backends::BackendRegistry& registry, backends::Backend& world,
                            TrainConfig cfg1, TrainConfig cfg2, const reward::CostConfig& cost) {
    TrainResult result;
    cfg1.stage = reward::Stage::Stage1;
    cfg2.stage = reward::Stage::Stage2;
    result.after_stage1 =
        train_stage(start, dataset, &profiles, registry, world, cfg1, cost, result.log);
    result.after_stage2 = train_stage(result.after_stage1, dataset, &profiles, registry, world,
                                      cfg2, cost, result.log);
    return result;
}

}  // namespace graphroute::policy
