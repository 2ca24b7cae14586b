#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphroute/backends.hpp"
#include "graphroute/dataset.hpp"
#include "graphroute/protocol.hpp"
#include "graphroute/reward.hpp"
#include "graphroute/util.hpp"

namespace graphroute::policy {

// Fixed question feature layout: bias, topic one-hot, hop count (scaled and
// one-hot), and a hashed-token fallback block used only when no scripted
// attributes exist.
inline constexpr int kFeatureDim = 20;
inline constexpr int kTopicBuckets = 8;
inline constexpr int kHopBuckets = 4;
inline constexpr int kTextBuckets = 6;

std::vector<double> featurize(const harness::QuestionRecord& question);

// Hierarchical: graphrag softmax, then an llm softmax conditioned on the
// chosen graphrag (shared llm weights + per-pair bias). Joint: one flat
// softmax over all (graphrag, llm) pairs; kept as the ablation baseline.
enum class PolicyKind { Hierarchical, Joint };

struct PolicyShape {
    PolicyKind kind = PolicyKind::Hierarchical;
    int graphrag_count = 0;
    int llm_count = 0;
    int feature_dim = kFeatureDim;

    std::size_t param_count() const {
        std::size_t g = static_cast<std::size_t>(graphrag_count);
        std::size_t l = static_cast<std::size_t>(llm_count);
        std::size_t d = static_cast<std::size_t>(feature_dim);
        if (kind == PolicyKind::Joint) return g * l * d;
        return (g + l) * d + g * l;
    }
    // parameter offsets (hierarchical layout)
    std::size_t graphrag_block(int g) const { return static_cast<std::size_t>(g) * feature_dim; }
    std::size_t llm_block(int l) const {
        return (static_cast<std::size_t>(graphrag_count) + l) * feature_dim;
    }
    std::size_t pair_bias(int g, int l) const {
        return (static_cast<std::size_t>(graphrag_count) + llm_count) * feature_dim +
               static_cast<std::size_t>(g) * llm_count + l;
    }
    std::size_t joint_block(int g, int l) const {
        return (static_cast<std::size_t>(g) * llm_count + l) * feature_dim;
    }
};

struct PolicySnapshot {
    PolicyShape shape;
    std::vector<std::string> graphrag_ids;
    std::vector<std::string> llm_ids;
    std::string registry_fingerprint;
    std::vector<double> params;            // all zeros = uniform at both stages
    std::vector<double> reference_params;  // frozen at stage entry
    // checkpoint provenance
    int stage = 0;
    int step = 0;
    std::uint64_t seed = 0;

    static PolicySnapshot make(const backends::BackendRegistry& registry,
                               PolicyKind kind = PolicyKind::Hierarchical);

    int graphrag_index(const std::string& id) const;
    int llm_index(const std::string& id) const;

    // Rebuilds against an extended registry: existing weights carry over, new
    // candidates start at zero (a neutral logit share).
    PolicySnapshot extended(const backends::BackendRegistry& registry) const;

    void reset_reference() { reference_params = params; }

    std::string to_json() const;
    static PolicySnapshot from_json(const std::string& text);
    void save(const std::string& path) const;
    static PolicySnapshot load(const std::string& path);
};

struct ActionDistribution {
    std::map<std::string, double> graphrag_probs;
    std::map<std::pair<std::string, std::string>, double> llm_probs_given;
};

ActionDistribution action_distribution(const PolicySnapshot& policy,
                                       std::span<const double> features,
                                       double temperature = 1.0);

struct SampledAction {
    std::string graphrag_id;
    std::string llm_id;
    int graphrag_index = 0;
    int llm_index = 0;
    double log_prob = 0.0;
};

SampledAction sample_action(const PolicySnapshot& policy, std::span<const double> features,
                            const backends::BackendRegistry& registry, Rng& rng,
                            double temperature = 1.0);

// log pi(g, l | features); the sum of the two stage log-probabilities.
double action_log_prob(const PolicySnapshot& policy, std::span<const double> features, int g,
                       int l, double temperature = 1.0);

// ---------------------------------------------------------------------------
// Raw parameter-vector math, shared by the trainer and by gradient tests.
// ---------------------------------------------------------------------------

double log_prob_on(const PolicyShape& shape, std::span<const double> params,
                   std::span<const double> features, int g, int l, double temperature);

void add_log_prob_grad(const PolicyShape& shape, std::span<const double> params,
                       std::span<const double> features, int g, int l, double temperature,
                       double coeff, std::vector<double>& grad);

// Joint KL(current || reference) at one feature vector; for the hierarchical
// policy this is the first-stage KL plus the expected second-stage KL.
double kl_on(const PolicyShape& shape, std::span<const double> params,
             std::span<const double> reference, std::span<const double> features,
             double temperature);

void add_kl_grad(const PolicyShape& shape, std::span<const double> params,
                 std::span<const double> reference, std::span<const double> features,
                 double temperature, double coeff, std::vector<double>& grad);

// ---------------------------------------------------------------------------
// Behavior cloning
// ---------------------------------------------------------------------------

struct TraceExample {
    harness::QuestionRecord question;
    protocol::Trajectory trajectory;
};

struct CloneOptions {
    PolicyKind kind = PolicyKind::Hierarchical;
    int iterations = 300;
    double learning_rate = 0.5;
};

struct CloneResult {
    PolicySnapshot policy;
    std::size_t used_traces = 0;
    std::size_t skipped_traces = 0;  // nonzero format penalty or no usable turn
    std::size_t actions = 0;
};

// Maximum-likelihood fit of the staged softmax to the (graphrag, llm) choices
// of clean traces. Traces with a nonzero format penalty are skipped and
// counted; throws NoValidTraces when nothing usable remains.
CloneResult clone_from_traces(const std::vector<TraceExample>& traces,
                              const backends::BackendRegistry& registry,
                              const CloneOptions& options = {});

// ---------------------------------------------------------------------------
// Group-relative training
// ---------------------------------------------------------------------------

struct TrainConfig {
    reward::Stage stage = reward::Stage::Stage1;
    int group_size = 5;
    double kl_coeff = 0.001;
    double learning_rate = 0.5;
    int max_steps = 80;
    double std_floor = 1e-6;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    int questions_per_step = 16;
    int max_turns = protocol::kDefaultMaxTurns;
    unsigned parallelism = 1;
    int checkpoint_every = 0;  // 0 = only at stage end
    std::optional<std::string> checkpoint_path;
};

// a_i = (r_i - mean) / max(population std, std_floor)
std::vector<double> group_advantages(const std::vector<double>& rewards, double std_floor);

struct Decision {
    std::vector<double> features;
    int graphrag_index = 0;
    int llm_index = 0;
    double log_prob = 0.0;
};

struct RolloutGroup {
    std::string question_id;
    std::vector<double> features;
    std::vector<std::vector<Decision>> episode_decisions;  // G entries
    std::vector<double> rewards;                           // G entries
    std::vector<double> advantages;                        // G entries
};

struct StepStats {
    double mean_reward = 0.0;
    double mean_kl = 0.0;
    double grad_norm = 0.0;
};

// One gradient-ascent step on  E[advantage * log pi] - kl_coeff * KL(pi||ref).
std::pair<PolicySnapshot, StepStats> update_step(const PolicySnapshot& policy,
                                                 const std::vector<RolloutGroup>& groups,
                                                 const TrainConfig& cfg);

}  // namespace graphroute::policy
