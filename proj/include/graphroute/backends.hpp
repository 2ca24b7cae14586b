#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphroute/errors.hpp"
#include "graphroute/protocol.hpp"
#include "graphroute/util.hpp"

namespace graphroute::backends {

enum class Tier { Small, Medium, Large };

const char* tier_name(Tier tier);
Tier tier_from_name(const std::string& name);

// Routing cost units per generator scale.
struct TierCosts {
    int small = 1;
    int medium = 2;
    int large = 4;

    int cost(Tier tier) const {
        switch (tier) {
            case Tier::Small: return small;
            case Tier::Medium: return medium;
            case Tier::Large: return large;
        }
        return large;
    }
    int max_cost() const { return std::max({small, medium, large}); }
};

struct LlmSpec {
    std::string id;
    std::string description;
    Tier tier = Tier::Small;
    std::optional<int> cost;  // overrides the tier default when set
    std::optional<std::string> endpoint;
};

struct GraphRagSpec {
    std::string id;
    std::string description;
    std::optional<std::string> endpoint;
    int top_k = 5;
};

class BackendRegistry {
public:
    BackendRegistry() = default;
    BackendRegistry(std::vector<GraphRagSpec> graphrags, std::vector<LlmSpec> llms,
                    TierCosts costs = {});

    const std::vector<GraphRagSpec>& graphrags() const { return graphrags_; }
    const std::vector<LlmSpec>& llms() const { return llms_; }
    const TierCosts& costs() const { return costs_; }

    bool has_graphrag(const std::string& id) const;
    bool has_llm(const std::string& id) const;
    const GraphRagSpec& graphrag(const std::string& id) const;
    const LlmSpec& llm(const std::string& id) const;

    int llm_cost(const std::string& id) const;

    // Runtime pool extension; throws DuplicateCandidate on an existing id.
    void add(GraphRagSpec spec);
    void add(LlmSpec spec);

    // Stable digest of the candidate id lists, stored in checkpoints so a
    // policy can detect a registry it was not built against.
    std::string fingerprint() const;

    std::string to_json() const;
    static BackendRegistry from_json(const std::string& text);
    static BackendRegistry load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<GraphRagSpec> graphrags_;
    std::vector<LlmSpec> llms_;
    TierCosts costs_;
};

// The five retrieval frameworks and five generators used throughout the test
// worlds, with the published scale classes (3 small, 1 medium, 1 large).
BackendRegistry default_registry();

// Abstract execution surface for routing actions. retrieve() is the g(q) half
// and generate() the l(q, evidence) half of one information exchange.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string retrieve(const std::string& graphrag_id, const std::string& query) = 0;

    // `key` seeds any stochasticity; equal keys must yield equal text.
    virtual std::string generate(const std::string& llm_id, const std::string& prompt,
                                 std::uint64_t key) = 0;
};

// ---------------------------------------------------------------------------
// Scripted simulation world
// ---------------------------------------------------------------------------

struct PairScript {
    std::string graphrag_id;  // empty = direct inference (no retrieval)
    Tier tier = Tier::Small;
    double prob = 1.0;  // per-trial success probability
};

struct QuestionScript {
    std::string id;
    std::string question;
    std::vector<std::string> answers;  // canonical answer first
    std::string evidence;              // canonical supporting text
    std::string wrong_answer;          // emitted on failed generations
    std::map<std::string, std::string> attrs;  // e.g. topic, hops
    std::vector<PairScript> pairs;
};

struct WorldScript {
    bool distractor_evidence = true;  // false: failed retrieval returns empty text
    std::vector<QuestionScript> questions;

    std::string to_json() const;
    static WorldScript from_json(const std::string& text);
    static WorldScript load(const std::string& path);
    void save(const std::string& path) const;
};

// Deterministic world: success of one generation is Bernoulli on the scripted
// (question, graphrag, tier) probability, with randomness fully derived from
// the seed and the caller's key.
class SimBackend : public Backend {
public:
    SimBackend(WorldScript script, BackendRegistry registry, std::uint64_t seed);

    std::string retrieve(const std::string& graphrag_id, const std::string& query) override;
    std::string generate(const std::string& llm_id, const std::string& prompt,
                         std::uint64_t key) override;

    // Scripted success probability for (question, graphrag-or-direct, tier).
    double success_prob(const std::string& question_id, const std::string& graphrag_id,
                        Tier tier) const;
    const WorldScript& script() const { return script_; }
    std::uint64_t seed() const { return seed_; }

    static std::string success_text(const QuestionScript& q);
    static std::string failure_text(const QuestionScript& q);

private:
    const QuestionScript* find_by_query(const std::string& text) const;
    const QuestionScript* find_in_prompt(const std::string& prompt) const;
    std::string evidence_text(const QuestionScript& q, const std::string& graphrag_id,
                              bool answerable) const;

    WorldScript script_;
    BackendRegistry registry_;
    std::uint64_t seed_;
    std::map<std::string, std::size_t> by_question_text_;
};

// ---------------------------------------------------------------------------

// Validates ids, then composes retrieve + generate into the information text
// the protocol module wraps into an <information> segment.
std::string execute_action(const protocol::RoutingAction& action, const BackendRegistry& registry,
                           Backend& world, std::uint64_t key);

// First line after an "Answer:" marker in environment text, if present. The
// simulated world always prefixes successful generations this way.
std::optional<std::string> extract_answer(const std::string& information);

// ---------------------------------------------------------------------------
// HTTP backend (chat-completion style endpoints); request/response bodies are
// documented in docs/interfaces.md.
// ---------------------------------------------------------------------------

struct HttpConfig {
    int max_retries = 3;        // attempts per request, idempotent requests only
    int timeout_seconds = 30;
    int max_response_chars = 600;
    std::string credential_env = "GRAPHROUTE_API_KEY";
};

class HttpBackend : public Backend {
public:
    HttpBackend(BackendRegistry registry, HttpConfig config);

    std::string retrieve(const std::string& graphrag_id, const std::string& query) override;
    std::string generate(const std::string& llm_id, const std::string& prompt,
                         std::uint64_t key) override;

    // true when the last generate() had to truncate the response
    bool last_response_truncated() const { return last_truncated_; }

private:
    std::string post_json(const std::string& endpoint, const std::string& body);

    BackendRegistry registry_;
    HttpConfig config_;
    bool last_truncated_ = false;
};

}  // namespace graphroute::backends
