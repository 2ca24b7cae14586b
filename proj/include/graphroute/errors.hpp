#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace graphroute {

// All engine errors carry a stable machine-readable kind string next to the
// human message; the CLI serializes the kind into its error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

namespace errkind {
inline constexpr const char* invalid_search_format = "InvalidSearchFormat";
inline constexpr const char* episode_terminated = "EpisodeAlreadyTerminated";
inline constexpr const char* unrenderable_kind = "UnrenderableKind";
inline constexpr const char* missing_profile = "MissingProfile";
inline constexpr const char* empty_model_pool = "EmptyModelPool";
inline constexpr const char* duplicate_question_id = "DuplicateQuestionId";
inline constexpr const char* partial_profile_set = "PartialProfileSet";
inline constexpr const char* no_valid_traces = "NoValidTraces";
inline constexpr const char* group_too_small = "GroupTooSmall";
inline constexpr const char* empty_pool = "EmptyPool";
inline constexpr const char* non_finite_gradient = "NonFiniteGradient";
inline constexpr const char* unknown_graphrag = "UnknownGraphRag";
inline constexpr const char* unknown_llm = "UnknownLlm";
inline constexpr const char* backend_unavailable = "BackendUnavailable";
inline constexpr const char* duplicate_candidate = "DuplicateCandidate";
inline constexpr const char* malformed_record = "MalformedRecord";
inline constexpr const char* empty_dataset = "EmptyDataset";
inline constexpr const char* invalid_plan = "InvalidPlan";
inline constexpr const char* policy_registry_mismatch = "PolicyRegistryMismatch";
inline constexpr const char* bad_config = "BadConfig";
inline constexpr const char* io_error = "IoError";
}  // namespace errkind

// Raised by profile_dataset when some questions could not be profiled;
// successfully profiled questions have already been persisted.
class PartialProfileSet : public Error {
public:
    explicit PartialProfileSet(std::vector<std::string> failed)
        : Error(errkind::partial_profile_set,
                std::to_string(failed.size()) + " question(s) failed"),
          failed_ids(std::move(failed)) {}

    std::vector<std::string> failed_ids;
};

// Raised by the HTTP backend once retries are exhausted; keeps the per-attempt
// status log so callers can surface the final status verbatim.
class BackendUnavailable : public Error {
public:
    BackendUnavailable(const std::string& message, std::vector<std::string> attempts)
        : Error(errkind::backend_unavailable, message), attempt_log(std::move(attempts)) {}

    std::vector<std::string> attempt_log;
};

}  // namespace graphroute
