#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "graphroute/backends.hpp"

namespace graphroute::backends {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reserved tag tokens are stripped from remote text so environment replies can
// never inject protocol structure into a rollout.
std::string strip_tag_tokens(std::string text) {
    static const char* kTokens[] = {
        "<think>", "</think>", "<graphrag>", "</graphrag>", "<llm>", "</llm>",
        "<search>", "</search>", "<information>", "</information>", "<answer>", "</answer>"};
    for (const char* token : kTokens) {
        std::size_t pos = 0;
        while ((pos = text.find(token, pos)) != std::string::npos) {
            text.erase(pos, std::strlen(token));
        }
    }
    return text;
}

// splits "http://host:port/path" into (scheme://host:port, /path)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    std::size_t scheme = endpoint.find("://");
    std::size_t path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(BackendRegistry registry, HttpConfig config)
    : registry_(std::move(registry)), config_(std::move(config)) {}

std::string HttpBackend::post_json(const std::string& endpoint, const std::string& body) {
    auto [base, path] = split_endpoint(endpoint);
    std::vector<std::string> attempts;
    for (int attempt = 1; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.credential_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            return res->body;
        }
        if (res) {
            attempts.push_back("attempt " + std::to_string(attempt) + ": HTTP " +
                               std::to_string(res->status));
            // 4xx will not improve on retry; surface the final status now
            if (res->status >= 400 && res->status < 500) {
                throw BackendUnavailable("endpoint " + endpoint + " returned HTTP " +
                                             std::to_string(res->status),
                                         std::move(attempts));
            }
        } else {
            attempts.push_back("attempt " + std::to_string(attempt) + ": " +
                               httplib::to_string(res.error()));
        }
    }
    throw BackendUnavailable("endpoint " + endpoint + " failed after " +
                                 std::to_string(config_.max_retries) + " attempts",
                             std::move(attempts));
}

std::string HttpBackend::retrieve(const std::string& graphrag_id, const std::string& query) {
    const GraphRagSpec& spec = registry_.graphrag(graphrag_id);
    if (!spec.endpoint) {
        throw Error(errkind::bad_config, "GraphRAG '" + graphrag_id + "' has no endpoint");
    }
    ordered_json body;
    body["graphrag"] = graphrag_id;
    body["query"] = query;
    body["top_k"] = spec.top_k;
    json reply = json::parse(post_json(*spec.endpoint, body.dump()));
    std::string joined;
    for (const auto& passage : reply.value("passages", json::array())) {
        if (!joined.empty()) joined += "\n";
        joined += passage.get<std::string>();
    }
    return strip_tag_tokens(joined);
}

std::string HttpBackend::generate(const std::string& llm_id, const std::string& prompt,
                                  std::uint64_t /*key*/) {
    const LlmSpec& spec = registry_.llm(llm_id);
    if (!spec.endpoint) {
        throw Error(errkind::bad_config, "LLM '" + llm_id + "' has no endpoint");
    }
    ordered_json body;
    body["model"] = llm_id;
    body["messages"] = ordered_json::array({ordered_json{{"role", "user"}, {"content", prompt}}});
    body["max_tokens"] = config_.max_response_chars;
    json reply = json::parse(post_json(*spec.endpoint, body.dump()));
    std::string text;
    const auto& choices = reply.value("choices", json::array());
    if (!choices.empty()) {
        text = choices[0].value("message", json::object()).value("content", "");
    }
    last_truncated_ = false;
    if (static_cast<int>(text.size()) > config_.max_response_chars) {
        text.resize(static_cast<std::size_t>(config_.max_response_chars));
        last_truncated_ = true;  // soft-truncated, flagged
    }
    return strip_tag_tokens(text);
}

}  // namespace graphroute::backends
