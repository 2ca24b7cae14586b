#include "graphroute/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graphroute/reward.hpp"

namespace graphroute::policy {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<double> featurize(const harness::QuestionRecord& question) {
    std::vector<double> features(kFeatureDim, 0.0);
    features[0] = 1.0;  // bias

    auto topic = question.attrs.find("topic");
    auto hops = question.attrs.find("hops");
    bool scripted = topic != question.attrs.end() || hops != question.attrs.end();

    if (topic != question.attrs.end()) {
        std::size_t bucket = fnv1a64(topic->second) % kTopicBuckets;
        features[1 + bucket] = 1.0;
    }
    if (hops != question.attrs.end()) {
        double count = std::atof(hops->second.c_str());
        features[1 + kTopicBuckets] = count / 4.0;
        int bucket = std::max(0, std::min(kHopBuckets - 1, static_cast<int>(count) - 1));
        features[1 + kTopicBuckets + 1 + bucket] = 1.0;
    }
    if (!scripted) {
        // fallback: hashed unigram frequencies of the question text
        std::string token;
        std::vector<double> counts(kTextBuckets, 0.0);
        double total = 0.0;
        auto flush = [&] {
            if (token.empty()) return;
            counts[fnv1a64(token) % kTextBuckets] += 1.0;
            total += 1.0;
            token.clear();
        };
        for (char c : to_lower(question.question)) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                token.push_back(c);
            } else {
                flush();
            }
        }
        flush();
        if (total > 0.0) {
            for (int b = 0; b < kTextBuckets; ++b) {
                features[1 + kTopicBuckets + 1 + kHopBuckets + b] = counts[b] / total;
            }
        }
    }
    return features;
}

PolicySnapshot PolicySnapshot::make(const backends::BackendRegistry& registry, PolicyKind kind) {
    PolicySnapshot snapshot;
    snapshot.shape.kind = kind;
    snapshot.shape.feature_dim = kFeatureDim;
    for (const auto& g : registry.graphrags()) snapshot.graphrag_ids.push_back(g.id);
    for (const auto& l : registry.llms()) snapshot.llm_ids.push_back(l.id);
    snapshot.shape.graphrag_count = static_cast<int>(snapshot.graphrag_ids.size());
    snapshot.shape.llm_count = static_cast<int>(snapshot.llm_ids.size());
    snapshot.registry_fingerprint = registry.fingerprint();
    snapshot.params.assign(snapshot.shape.param_count(), 0.0);
    snapshot.reference_params = snapshot.params;
    return snapshot;
}

int PolicySnapshot::graphrag_index(const std::string& id) const {
    for (std::size_t i = 0; i < graphrag_ids.size(); ++i) {
        if (graphrag_ids[i] == id) return static_cast<int>(i);
    }
    return -1;
}

int PolicySnapshot::llm_index(const std::string& id) const {
    for (std::size_t i = 0; i < llm_ids.size(); ++i) {
        if (llm_ids[i] == id) return static_cast<int>(i);
    }
    return -1;
}

PolicySnapshot PolicySnapshot::extended(const backends::BackendRegistry& registry) const {
    PolicySnapshot next = PolicySnapshot::make(registry, shape.kind);
    auto copy_blocks = [&](const std::vector<double>& src, std::vector<double>& dst) {
        for (int g = 0; g < shape.graphrag_count; ++g) {
            int ng = next.graphrag_index(graphrag_ids[g]);
            if (ng < 0) continue;
            if (shape.kind == PolicyKind::Joint) continue;
            for (int j = 0; j < shape.feature_dim; ++j) {
                dst[next.shape.graphrag_block(ng) + j] = src[shape.graphrag_block(g) + j];
            }
        }
        if (shape.kind == PolicyKind::Hierarchical) {
            for (int l = 0; l < shape.llm_count; ++l) {
                int nl = next.llm_index(llm_ids[l]);
                if (nl < 0) continue;
                for (int j = 0; j < shape.feature_dim; ++j) {
                    dst[next.shape.llm_block(nl) + j] = src[shape.llm_block(l) + j];
                }
            }
            for (int g = 0; g < shape.graphrag_count; ++g) {
                int ng = next.graphrag_index(graphrag_ids[g]);
                if (ng < 0) continue;
                for (int l = 0; l < shape.llm_count; ++l) {
                    int nl = next.llm_index(llm_ids[l]);
                    if (nl < 0) continue;
                    dst[next.shape.pair_bias(ng, nl)] = src[shape.pair_bias(g, l)];
                }
            }
        } else {
            for (int g = 0; g < shape.graphrag_count; ++g) {
                int ng = next.graphrag_index(graphrag_ids[g]);
                if (ng < 0) continue;
                for (int l = 0; l < shape.llm_count; ++l) {
                    int nl = next.llm_index(llm_ids[l]);
                    if (nl < 0) continue;
                    for (int j = 0; j < shape.feature_dim; ++j) {
                        dst[next.shape.joint_block(ng, nl) + j] =
                            src[shape.joint_block(g, l) + j];
                    }
                }
            }
        }
    };
    copy_blocks(params, next.params);
    copy_blocks(reference_params, next.reference_params);
    return next;
}

namespace {

double dot(std::span<const double> params, std::size_t offset, std::span<const double> features) {
    double sum = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) sum += params[offset + j] * features[j];
    return sum;
}

// log-softmax in place; returns nothing, logits become log-probabilities
void log_softmax(std::vector<double>& logits) {
    double max_logit = logits[0];
    for (double z : logits) max_logit = std::max(max_logit, z);
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max_logit);
    double log_z = max_logit + std::log(sum);
    for (double& z : logits) z -= log_z;
}

std::vector<double> graphrag_log_probs(const PolicyShape& shape, std::span<const double> params,
                                       std::span<const double> features, double temperature) {
    std::vector<double> logits(shape.graphrag_count);
    for (int g = 0; g < shape.graphrag_count; ++g) {
        logits[g] = dot(params, shape.graphrag_block(g), features) / temperature;
    }
    log_softmax(logits);
    return logits;
}

std::vector<double> llm_log_probs_given(const PolicyShape& shape, std::span<const double> params,
                                        std::span<const double> features, int g,
                                        double temperature) {
    std::vector<double> logits(shape.llm_count);
    for (int l = 0; l < shape.llm_count; ++l) {
        logits[l] = (dot(params, shape.llm_block(l), features) + params[shape.pair_bias(g, l)]) /
                    temperature;
    }
    log_softmax(logits);
    return logits;
}

std::vector<double> joint_log_probs(const PolicyShape& shape, std::span<const double> params,
                                    std::span<const double> features, double temperature) {
    std::vector<double> logits(static_cast<std::size_t>(shape.graphrag_count) * shape.llm_count);
    for (int g = 0; g < shape.graphrag_count; ++g) {
        for (int l = 0; l < shape.llm_count; ++l) {
            logits[static_cast<std::size_t>(g) * shape.llm_count + l] =
                dot(params, shape.joint_block(g, l), features) / temperature;
        }
    }
    log_softmax(logits);
    return logits;
}

}  // namespace

double log_prob_on(const PolicyShape& shape, std::span<const double> params,
                   std::span<const double> features, int g, int l, double temperature) {
    if (shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(shape, params, features, temperature);
        return lp[static_cast<std::size_t>(g) * shape.llm_count + l];
    }
    auto lp_g = graphrag_log_probs(shape, params, features, temperature);
    auto lp_l = llm_log_probs_given(shape, params, features, g, temperature);
    return lp_g[g] + lp_l[l];
}

void add_log_prob_grad(const PolicyShape& shape, std::span<const double> params,
                       std::span<const double> features, int g, int l, double temperature,
                       double coeff, std::vector<double>& grad) {
    double inv_t = 1.0 / temperature;
    if (shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(shape, params, features, temperature);
        for (int gg = 0; gg < shape.graphrag_count; ++gg) {
            for (int ll = 0; ll < shape.llm_count; ++ll) {
                double p = std::exp(lp[static_cast<std::size_t>(gg) * shape.llm_count + ll]);
                double c = coeff * (((gg == g && ll == l) ? 1.0 : 0.0) - p) * inv_t;
                std::size_t off = shape.joint_block(gg, ll);
                for (std::size_t j = 0; j < features.size(); ++j) {
                    grad[off + j] += c * features[j];
                }
            }
        }
        return;
    }
    auto lp_g = graphrag_log_probs(shape, params, features, temperature);
    for (int gg = 0; gg < shape.graphrag_count; ++gg) {
        double c = coeff * ((gg == g ? 1.0 : 0.0) - std::exp(lp_g[gg])) * inv_t;
        std::size_t off = shape.graphrag_block(gg);
        for (std::size_t j = 0; j < features.size(); ++j) grad[off + j] += c * features[j];
    }
    auto lp_l = llm_log_probs_given(shape, params, features, g, temperature);
    for (int ll = 0; ll < shape.llm_count; ++ll) {
        double c = coeff * ((ll == l ? 1.0 : 0.0) - std::exp(lp_l[ll])) * inv_t;
        std::size_t off = shape.llm_block(ll);
        for (std::size_t j = 0; j < features.size(); ++j) grad[off + j] += c * features[j];
        grad[shape.pair_bias(g, ll)] += c;
    }
}

double kl_on(const PolicyShape& shape, std::span<const double> params,
             std::span<const double> reference, std::span<const double> features,
             double temperature) {
    if (shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(shape, params, features, temperature);
        auto lq = joint_log_probs(shape, reference, features, temperature);
        double kl = 0.0;
        for (std::size_t k = 0; k < lp.size(); ++k) kl += std::exp(lp[k]) * (lp[k] - lq[k]);
        return kl;
    }
    auto lp_g = graphrag_log_probs(shape, params, features, temperature);
    auto lq_g = graphrag_log_probs(shape, reference, features, temperature);
    double kl = 0.0;
    for (int g = 0; g < shape.graphrag_count; ++g) {
        double p_g = std::exp(lp_g[g]);
        kl += p_g * (lp_g[g] - lq_g[g]);
        auto lp_l = llm_log_probs_given(shape, params, features, g, temperature);
        auto lq_l = llm_log_probs_given(shape, reference, features, g, temperature);
        double inner = 0.0;
        for (int l = 0; l < shape.llm_count; ++l) {
            inner += std::exp(lp_l[l]) * (lp_l[l] - lq_l[l]);
        }
        kl += p_g * inner;
    }
    return kl;
}

void add_kl_grad(const PolicyShape& shape, std::span<const double> params,
                 std::span<const double> reference, std::span<const double> features,
                 double temperature, double coeff, std::vector<double>& grad) {
    double inv_t = 1.0 / temperature;
    if (shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(shape, params, features, temperature);
        auto lq = joint_log_probs(shape, reference, features, temperature);
        double kl = 0.0;
        for (std::size_t k = 0; k < lp.size(); ++k) kl += std::exp(lp[k]) * (lp[k] - lq[k]);
        for (int g = 0; g < shape.graphrag_count; ++g) {
            for (int l = 0; l < shape.llm_count; ++l) {
                std::size_t k = static_cast<std::size_t>(g) * shape.llm_count + l;
                double p = std::exp(lp[k]);
                double c = coeff * p * (lp[k] - lq[k] - kl) * inv_t;
                std::size_t off = shape.joint_block(g, l);
                for (std::size_t j = 0; j < features.size(); ++j) {
                    grad[off + j] += c * features[j];
                }
            }
        }
        return;
    }

    auto lp_g = graphrag_log_probs(shape, params, features, temperature);
    auto lq_g = graphrag_log_probs(shape, reference, features, temperature);

    // Second-stage KL per graphrag, and its probability-weighted mean.
    std::vector<double> inner_kl(shape.graphrag_count, 0.0);
    double kl_g = 0.0, mean_inner = 0.0;
    std::vector<std::vector<double>> lp_l(shape.graphrag_count), lq_l(shape.graphrag_count);
    for (int g = 0; g < shape.graphrag_count; ++g) {
        lp_l[g] = llm_log_probs_given(shape, params, features, g, temperature);
        lq_l[g] = llm_log_probs_given(shape, reference, features, g, temperature);
        for (int l = 0; l < shape.llm_count; ++l) {
            inner_kl[g] += std::exp(lp_l[g][l]) * (lp_l[g][l] - lq_l[g][l]);
        }
        double p_g = std::exp(lp_g[g]);
        kl_g += p_g * (lp_g[g] - lq_g[g]);
        mean_inner += p_g * inner_kl[g];
    }

    // d/dz_g [KL_G + sum_g p_g K_B(g)] = p_g (delta_g - KL_G + K_B(g) - mean_inner)
    for (int g = 0; g < shape.graphrag_count; ++g) {
        double p_g = std::exp(lp_g[g]);
        double c = coeff * p_g * ((lp_g[g] - lq_g[g]) - kl_g + inner_kl[g] - mean_inner) * inv_t;
        std::size_t off = shape.graphrag_block(g);
        for (std::size_t j = 0; j < features.size(); ++j) grad[off + j] += c * features[j];
    }
    // d/dy_{g,l} = p_g p_{l|g} (delta_{g,l} - K_B(g))
    for (int g = 0; g < shape.graphrag_count; ++g) {
        double p_g = std::exp(lp_g[g]);
        for (int l = 0; l < shape.llm_count; ++l) {
            double p_l = std::exp(lp_l[g][l]);
            double c = coeff * p_g * p_l * ((lp_l[g][l] - lq_l[g][l]) - inner_kl[g]) * inv_t;
            std::size_t off = shape.llm_block(l);
            for (std::size_t j = 0; j < features.size(); ++j) grad[off + j] += c * features[j];
            grad[shape.pair_bias(g, l)] += c;
        }
    }
}

ActionDistribution action_distribution(const PolicySnapshot& policy,
                                       std::span<const double> features, double temperature) {
    ActionDistribution dist;
    if (policy.shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(policy.shape, policy.params, features, temperature);
        std::vector<double> marginal(policy.shape.graphrag_count, 0.0);
        for (int g = 0; g < policy.shape.graphrag_count; ++g) {
            for (int l = 0; l < policy.shape.llm_count; ++l) {
                marginal[g] += std::exp(lp[static_cast<std::size_t>(g) * policy.shape.llm_count + l]);
            }
        }
        for (int g = 0; g < policy.shape.graphrag_count; ++g) {
            dist.graphrag_probs[policy.graphrag_ids[g]] = marginal[g];
            for (int l = 0; l < policy.shape.llm_count; ++l) {
                double joint =
                    std::exp(lp[static_cast<std::size_t>(g) * policy.shape.llm_count + l]);
                dist.llm_probs_given[{policy.graphrag_ids[g], policy.llm_ids[l]}] =
                    marginal[g] > 0.0 ? joint / marginal[g] : 0.0;
            }
        }
        return dist;
    }
    auto lp_g = graphrag_log_probs(policy.shape, policy.params, features, temperature);
    for (int g = 0; g < policy.shape.graphrag_count; ++g) {
        dist.graphrag_probs[policy.graphrag_ids[g]] = std::exp(lp_g[g]);
        auto lp_l = llm_log_probs_given(policy.shape, policy.params, features, g, temperature);
        for (int l = 0; l < policy.shape.llm_count; ++l) {
            dist.llm_probs_given[{policy.graphrag_ids[g], policy.llm_ids[l]}] =
                std::exp(lp_l[l]);
        }
    }
    return dist;
}

SampledAction sample_action(const PolicySnapshot& policy, std::span<const double> features,
                            const backends::BackendRegistry& registry, Rng& rng,
                            double temperature) {
    if (registry.graphrags().empty() || registry.llms().empty()) {
        throw Error(errkind::empty_pool, "registry has an empty candidate pool");
    }
    if (policy.registry_fingerprint != registry.fingerprint()) {
        throw Error(errkind::policy_registry_mismatch,
                    "policy was built against a different registry; extend it first");
    }
    SampledAction action;
    if (policy.shape.kind == PolicyKind::Joint) {
        auto lp = joint_log_probs(policy.shape, policy.params, features, temperature);
        std::vector<double> probs(lp.size());
        for (std::size_t k = 0; k < lp.size(); ++k) probs[k] = std::exp(lp[k]);
        std::size_t k = rng.categorical(probs);
        action.graphrag_index = static_cast<int>(k) / policy.shape.llm_count;
        action.llm_index = static_cast<int>(k) % policy.shape.llm_count;
        action.log_prob = lp[k];
    } else {
        auto lp_g = graphrag_log_probs(policy.shape, policy.params, features, temperature);
        std::vector<double> probs_g(lp_g.size());
        for (std::size_t g = 0; g < lp_g.size(); ++g) probs_g[g] = std::exp(lp_g[g]);
        action.graphrag_index = static_cast<int>(rng.categorical(probs_g));
        auto lp_l = llm_log_probs_given(policy.shape, policy.params, features,
                                        action.graphrag_index, temperature);
        std::vector<double> probs_l(lp_l.size());
        for (std::size_t l = 0; l < lp_l.size(); ++l) probs_l[l] = std::exp(lp_l[l]);
        action.llm_index = static_cast<int>(rng.categorical(probs_l));
        action.log_prob = lp_g[action.graphrag_index] + lp_l[action.llm_index];
    }
    action.graphrag_id = policy.graphrag_ids[action.graphrag_index];
    action.llm_id = policy.llm_ids[action.llm_index];
    return action;
}

double action_log_prob(const PolicySnapshot& policy, std::span<const double> features, int g,
                       int l, double temperature) {
    return log_prob_on(policy.shape, policy.params, features, g, l, temperature);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string PolicySnapshot::to_json() const {
    ordered_json doc;
    doc["kind"] = shape.kind == PolicyKind::Joint ? "joint" : "hierarchical";
    doc["feature_dim"] = shape.feature_dim;
    doc["graphrag_ids"] = graphrag_ids;
    doc["llm_ids"] = llm_ids;
    doc["registry_fingerprint"] = registry_fingerprint;
    doc["stage"] = stage;
    doc["step"] = step;
    doc["seed"] = seed;
    doc["params"] = params;
    doc["reference_params"] = reference_params;
    return doc.dump();
}

PolicySnapshot PolicySnapshot::from_json(const std::string& text) {
    json doc = json::parse(text);
    PolicySnapshot snapshot;
    snapshot.shape.kind =
        doc.value("kind", "hierarchical") == "joint" ? PolicyKind::Joint : PolicyKind::Hierarchical;
    snapshot.shape.feature_dim = doc.at("feature_dim").get<int>();
    snapshot.graphrag_ids = doc.at("graphrag_ids").get<std::vector<std::string>>();
    snapshot.llm_ids = doc.at("llm_ids").get<std::vector<std::string>>();
    snapshot.shape.graphrag_count = static_cast<int>(snapshot.graphrag_ids.size());
    snapshot.shape.llm_count = static_cast<int>(snapshot.llm_ids.size());
    snapshot.registry_fingerprint = doc.value("registry_fingerprint", "");
    snapshot.stage = doc.value("stage", 0);
    snapshot.step = doc.value("step", 0);
    snapshot.seed = doc.value("seed", std::uint64_t{0});
    snapshot.params = doc.at("params").get<std::vector<double>>();
    snapshot.reference_params = doc.at("reference_params").get<std::vector<double>>();
    if (snapshot.params.size() != snapshot.shape.param_count() ||
        snapshot.reference_params.size() != snapshot.shape.param_count()) {
        throw Error(errkind::bad_config, "checkpoint parameter count does not match its shape");
    }
    return snapshot;
}

void PolicySnapshot::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write checkpoint " + path);
    out << to_json() << '\n';
}

PolicySnapshot PolicySnapshot::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errkind::io_error, "cannot open checkpoint " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

// ---------------------------------------------------------------------------
// Behavior cloning
// ---------------------------------------------------------------------------

CloneResult clone_from_traces(const std::vector<TraceExample>& traces,
                              const backends::BackendRegistry& registry,
                              const CloneOptions& options) {
    CloneResult result;
    result.policy = PolicySnapshot::make(registry, options.kind);
    const PolicyShape& shape = result.policy.shape;

    struct Sample {
        std::vector<double> features;
        int g;
        int l;
    };
    std::vector<Sample> samples;

    for (const auto& example : traces) {
        auto format = reward::format_reward(example.trajectory, registry);
        if (format.penalty != 0.0) {
            ++result.skipped_traces;
            continue;
        }
        std::vector<double> features = featurize(example.question);
        bool used = false;
        for (const auto& [begin, end] : example.trajectory.turns) {
            int g = -1, l = -1;
            bool has_search = false;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = example.trajectory.segments[i];
                if (s.kind == protocol::SegmentKind::GraphRag) {
                    int idx = result.policy.graphrag_index(trim(s.content));
                    if (idx >= 0) g = idx;
                } else if (s.kind == protocol::SegmentKind::Llm) {
                    int idx = result.policy.llm_index(trim(s.content));
                    if (idx >= 0) l = idx;
                } else if (s.kind == protocol::SegmentKind::Search) {
                    has_search = true;
                }
            }
            if (has_search && g >= 0 && l >= 0) {
                samples.push_back({features, g, l});
                used = true;
            }
        }
        if (used) {
            ++result.used_traces;
        } else {
            ++result.skipped_traces;
        }
    }
    result.actions = samples.size();
    if (samples.empty()) {
        throw Error(errkind::no_valid_traces, "no clean routed turns to clone from");
    }

    // Full-batch gradient ascent on the mean log-likelihood; logits are linear
    // in the parameters so this is a concave fit.
    for (int it = 0; it < options.iterations; ++it) {
        std::vector<double> grad(result.policy.params.size(), 0.0);
        double coeff = 1.0 / static_cast<double>(samples.size());
        for (const auto& s : samples) {
            add_log_prob_grad(shape, result.policy.params, s.features, s.g, s.l, 1.0, coeff,
                              grad);
        }
        for (std::size_t k = 0; k < grad.size(); ++k) {
            result.policy.params[k] += options.learning_rate * grad[k];
        }
    }
    result.policy.reset_reference();
    return result;
}

// ---------------------------------------------------------------------------
// Group-relative updates
// ---------------------------------------------------------------------------

std::vector<double> group_advantages(const std::vector<double>& rewards, double std_floor) {
    if (rewards.size() < 2) {
        throw Error(errkind::group_too_small, "need at least 2 rollouts per group");
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    double denom = std::max(std::sqrt(var), std_floor);
    std::vector<double> advantages(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        advantages[i] = (rewards[i] - mean) / denom;
    }
    return advantages;
}

std::pair<PolicySnapshot, StepStats> update_step(const PolicySnapshot& policy,
                                                 const std::vector<RolloutGroup>& groups,
                                                 const TrainConfig& cfg) {
    if (groups.empty()) {
        throw Error(errkind::bad_config, "update_step needs at least one rollout group");
    }
    StepStats stats;
    std::vector<double> grad(policy.params.size(), 0.0);

    std::size_t episode_count = 0;
    for (const auto& group : groups) episode_count += group.rewards.size();

    for (const auto& group : groups) {
        for (std::size_t i = 0; i < group.episode_decisions.size(); ++i) {
            double coeff = group.advantages[i] / static_cast<double>(episode_count);
            for (const auto& d : group.episode_decisions[i]) {
                add_log_prob_grad(policy.shape, policy.params, d.features, d.graphrag_index,
                                  d.llm_index, cfg.temperature, coeff, grad);
            }
        }
        for (double r : group.rewards) stats.mean_reward += r;
        stats.mean_kl += kl_on(policy.shape, policy.params, policy.reference_params,
                               group.features, cfg.temperature);
        add_kl_grad(policy.shape, policy.params, policy.reference_params, group.features,
                    cfg.temperature, -cfg.kl_coeff / static_cast<double>(groups.size()), grad);
    }
    stats.mean_reward /= static_cast<double>(episode_count);
    stats.mean_kl /= static_cast<double>(groups.size());

    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    if (!std::isfinite(norm_sq)) {
        throw Error(errkind::non_finite_gradient,
                    "gradient is not finite; check learning rate and reward scale");
    }
    stats.grad_norm = std::sqrt(norm_sq);

    PolicySnapshot next = policy;
    for (std::size_t k = 0; k < grad.size(); ++k) {
        next.params[k] += cfg.learning_rate * grad[k];
    }
    return {std::move(next), stats};
}

}  // namespace graphroute::policy
