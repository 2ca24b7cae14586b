#include "graphroute/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graphroute/errors.hpp"
#include "graphroute/util.hpp"

namespace graphroute::harness {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<QuestionRecord> parse_dataset(const std::string& text,
                                          std::optional<std::size_t> limit, std::uint64_t seed) {
    std::vector<QuestionRecord> records;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(errkind::malformed_record,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        QuestionRecord record;
        if (!doc.contains("id") || !doc.contains("question")) {
            throw Error(errkind::malformed_record,
                        "line " + std::to_string(line_no) + ": missing id or question");
        }
        record.id = doc["id"].get<std::string>();
        record.question = doc["question"].get<std::string>();
        if (doc.contains("golden_answers") && doc["golden_answers"].is_array() &&
            !doc["golden_answers"].empty()) {
            record.gold_answers = doc["golden_answers"].get<std::vector<std::string>>();
        } else {
            throw Error(errkind::malformed_record,
                        "line " + std::to_string(line_no) + ": golden_answers missing or empty");
        }
        record.source = doc.value("source", "");
        if (doc.contains("attrs")) {
            record.attrs = doc["attrs"].get<std::map<std::string, std::string>>();
        }
        records.push_back(std::move(record));
    }
    if (records.empty()) {
        throw Error(errkind::empty_dataset, "no records found");
    }
    {
        std::map<std::string, bool> seen;
        for (const auto& r : records) {
            if (seen.count(r.id)) {
                throw Error(errkind::duplicate_question_id, "duplicate id '" + r.id + "'");
            }
            seen[r.id] = true;
        }
    }
    if (limit && *limit < records.size()) {
        Rng rng(derive_seed(seed, "dataset-subsample"));
        rng.shuffle(records);
        records.resize(*limit);
    }
    return records;
}

std::vector<QuestionRecord> load_dataset(const std::string& path,
                                         std::optional<std::size_t> limit, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw Error(errkind::io_error, "cannot open dataset file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_dataset(buffer.str(), limit, seed);
}

std::string dataset_to_jsonl(const std::vector<QuestionRecord>& records) {
    std::string out;
    for (const auto& record : records) {
        ordered_json doc;
        doc["id"] = record.id;
        doc["question"] = record.question;
        doc["golden_answers"] = record.gold_answers;
        if (!record.source.empty()) doc["source"] = record.source;
        if (!record.attrs.empty()) doc["attrs"] = record.attrs;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<QuestionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write dataset file " + path);
    out << dataset_to_jsonl(records);
}

}  // namespace graphroute::harness
