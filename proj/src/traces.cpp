#include "graphroute/traces.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graphroute/util.hpp"

namespace graphroute::traces {

using nlohmann::json;
using nlohmann::ordered_json;
using protocol::Segment;
using protocol::SegmentKind;
using protocol::seg;

namespace {

bool contains_tag_token(const std::string& text) {
    static const char* kTokens[] = {
        "<think>", "</think>", "<graphrag>", "</graphrag>", "<llm>", "</llm>",
        "<search>", "</search>", "<information>", "</information>", "<answer>", "</answer>"};
    for (const char* token : kTokens) {
        if (text.find(token) != std::string::npos) return true;
    }
    return false;
}

void require_rationale(const std::string& text, const char* which) {
    if (trim(text).empty() || trim(text) == "..." || trim(text) == "…") {
        throw Error(errkind::invalid_plan, std::string("empty ") + which + " rationale");
    }
    if (contains_tag_token(text)) {
        throw Error(errkind::invalid_plan, std::string(which) + " rationale contains a tag token");
    }
}

void require_ids(const std::string& graphrag_id, const std::string& llm_id,
                 const backends::BackendRegistry& registry) {
    if (!registry.has_graphrag(graphrag_id)) {
        throw Error(errkind::invalid_plan, "unknown GraphRAG '" + graphrag_id + "'");
    }
    if (!registry.has_llm(llm_id)) {
        throw Error(errkind::invalid_plan, "unknown LLM '" + llm_id + "'");
    }
}

void require_question(const std::string& question) {
    if (trim(question).empty()) {
        throw Error(errkind::invalid_plan, "empty question");
    }
    // the question is embedded into the search content, where these two
    // characters are the field separators
    if (question.find(':') != std::string::npos || question.find(';') != std::string::npos) {
        throw Error(errkind::invalid_plan, "question may not contain ':' or ';'");
    }
    if (contains_tag_token(question)) {
        throw Error(errkind::invalid_plan, "question contains a tag token");
    }
}

void require_text(const std::string& text, const char* which) {
    if (trim(text).empty()) {
        throw Error(errkind::invalid_plan, std::string("empty ") + which);
    }
    if (contains_tag_token(text)) {
        throw Error(errkind::invalid_plan, std::string(which) + " contains a tag token");
    }
}

std::string search_content(const std::string& question, const std::string& llm_id,
                           const std::string& graphrag_id) {
    return question + ":" + llm_id + ";" + graphrag_id;
}

}  // namespace

std::string build_general_trace(const GeneralTracePlan& plan,
                                const backends::BackendRegistry& registry) {
    require_question(plan.question);
    require_ids(plan.graphrag_id, plan.llm_id, registry);
    require_rationale(plan.rationale_graphrag, "graphrag");
    require_rationale(plan.rationale_llm, "llm");
    require_rationale(plan.rationale_sufficiency, "sufficiency");
    require_text(plan.information, "information");
    require_text(plan.answer, "answer");

    return protocol::render_turn({
        seg(SegmentKind::Think, plan.rationale_graphrag),
        seg(SegmentKind::GraphRag, plan.graphrag_id),
        seg(SegmentKind::Think, plan.rationale_llm),
        seg(SegmentKind::Llm, plan.llm_id),
        seg(SegmentKind::Search, search_content(plan.question, plan.llm_id, plan.graphrag_id)),
        seg(SegmentKind::Information, plan.information),
        seg(SegmentKind::Think, plan.rationale_sufficiency),
        seg(SegmentKind::Answer, plan.answer),
    });
}

std::string build_reflection_trace(const ReflectionTracePlan& plan,
                                   const backends::BackendRegistry& registry) {
    require_question(plan.question);
    require_ids(plan.round1.graphrag_id, plan.round1.llm_id, registry);
    require_ids(plan.round2.graphrag_id, plan.round2.llm_id, registry);
    require_rationale(plan.rationale_graphrag1, "first graphrag");
    require_rationale(plan.rationale_llm1, "first llm");
    require_rationale(plan.rationale_bridge, "bridge");
    require_rationale(plan.rationale_llm2, "second llm");
    require_rationale(plan.rationale_sufficiency, "sufficiency");
    require_text(plan.round1.information, "first information");
    require_text(plan.round2.information, "second information");
    require_text(plan.answer, "answer");

    return protocol::render_turn({
        seg(SegmentKind::Think, plan.rationale_graphrag1),
        seg(SegmentKind::GraphRag, plan.round1.graphrag_id),
        seg(SegmentKind::Think, plan.rationale_llm1),
        seg(SegmentKind::Llm, plan.round1.llm_id),
        seg(SegmentKind::Search,
            search_content(plan.question, plan.round1.llm_id, plan.round1.graphrag_id)),
        seg(SegmentKind::Information, plan.round1.information),
        seg(SegmentKind::Think, plan.rationale_bridge),
        seg(SegmentKind::GraphRag, plan.round2.graphrag_id),
        seg(SegmentKind::Think, plan.rationale_llm2),
        seg(SegmentKind::Llm, plan.round2.llm_id),
        seg(SegmentKind::Search,
            search_content(plan.question, plan.round2.llm_id, plan.round2.graphrag_id)),
        seg(SegmentKind::Information, plan.round2.information),
        seg(SegmentKind::Think, plan.rationale_sufficiency),
        seg(SegmentKind::Answer, plan.answer),
    });
}

const std::vector<std::string>& forbidden_terms() {
    static const std::vector<std::string> terms = {
        "better", "best", "more suitable", "preferred", "ideal", "optimal",
        "superior", "worse", "outperform", "more accurate", "more efficient",
    };
    return terms;
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// case-insensitive whole-word match of `term` (which may contain spaces)
bool contains_term(const std::string& lowered, const std::string& term) {
    std::size_t pos = 0;
    while ((pos = lowered.find(term, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(lowered[pos - 1]);
        std::size_t end = pos + term.size();
        bool right_ok = end >= lowered.size() || !is_word_char(lowered[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

TraceReport validate_trace(const std::string& text, const backends::BackendRegistry& registry) {
    TraceReport report;
    protocol::Trajectory trajectory = protocol::parse_trajectory(text);
    report.defect_count = trajectory.defects.size();
    report.turn_count = trajectory.turns.size();

    auto format = reward::format_reward(trajectory, registry);
    report.penalty = format.penalty;
    report.fired = format.fired;

    for (std::size_t i = 0; i < trajectory.segments.size(); ++i) {
        const Segment& s = trajectory.segments[i];
        if (s.kind == SegmentKind::Search) {
            if (auto action = protocol::try_parse_search_action(s.content)) {
                report.actions.push_back(*action);
            }
        }
        if (s.kind == SegmentKind::Information) continue;  // environment text
        std::string lowered = to_lower(s.content);
        for (const auto& term : forbidden_terms()) {
            if (contains_term(lowered, term)) {
                report.lint.push_back({term, i});
            }
        }
    }
    return report;
}

CorpusManifest corpus_manifest(const std::vector<TraceRecord>& records) {
    CorpusManifest manifest;
    for (const auto& record : records) {
        if (record.kind == "reflection") {
            ++manifest.reflection_count;
        } else {
            ++manifest.general_count;
        }
    }
    return manifest;
}

std::string corpus_to_jsonl(const std::vector<TraceRecord>& records) {
    std::string out;
    for (const auto& record : records) {
        ordered_json doc;
        doc["question"] = record.question;
        doc["trace_text"] = record.trace_text;
        doc["kind"] = record.kind;
        doc["gold_answers"] = record.gold_answers;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

std::vector<TraceRecord> corpus_from_jsonl(const std::string& text) {
    std::vector<TraceRecord> records;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json doc = json::parse(line);
            TraceRecord record;
            record.question = doc.at("question").get<std::string>();
            record.trace_text = doc.at("trace_text").get<std::string>();
            record.kind = doc.value("kind", "general");
            record.gold_answers = doc.value("gold_answers", std::vector<std::string>{});
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw Error(errkind::malformed_record,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void save_corpus(const std::string& path, const std::vector<TraceRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error(errkind::io_error, "cannot write corpus file " + path);
    out << corpus_to_jsonl(records);
}

std::vector<TraceRecord> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errkind::io_error, "cannot open corpus file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return corpus_from_jsonl(buffer.str());
}

}  // namespace graphroute::traces
