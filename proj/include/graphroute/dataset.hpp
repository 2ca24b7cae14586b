#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace graphroute::harness {

struct QuestionRecord {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
    std::string source;                        // dataset tag
    std::map<std::string, std::string> attrs;  // optional scripted attributes (topic, hops)

    bool operator==(const QuestionRecord&) const = default;
};

// Line-delimited records {id, question, golden_answers, [source], [attrs]}.
// MalformedRecord carries the offending line number; EmptyDataset when no
// record survives. `limit` subsamples with a seeded shuffle, stable per
// (limit, seed).
std::vector<QuestionRecord> load_dataset(const std::string& path,
                                         std::optional<std::size_t> limit = std::nullopt,
                                         std::uint64_t seed = 0);

std::vector<QuestionRecord> parse_dataset(const std::string& text,
                                          std::optional<std::size_t> limit = std::nullopt,
                                          std::uint64_t seed = 0);

void save_dataset(const std::string& path, const std::vector<QuestionRecord>& records);
std::string dataset_to_jsonl(const std::vector<QuestionRecord>& records);

}  // namespace graphroute::harness
