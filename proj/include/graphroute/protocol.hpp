#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graphroute/errors.hpp"

namespace graphroute::protocol {

inline constexpr int kDefaultMaxTurns = 4;

enum class SegmentKind { Think, GraphRag, Llm, Search, Information, Answer, FreeText };

enum class DefectKind { NoValidTags, UnclosedTag, MismatchedTag, NestedTag };

using Span = std::pair<std::size_t, std::size_t>;  // [start, end) byte offsets

struct Segment {
    SegmentKind kind;
    std::string content;  // inner text; tag markers excluded
    Span span;            // covers the whole tagged region, markers included

    bool operator==(const Segment& other) const {
        return kind == other.kind && content == other.content;
    }
};

struct StructuralDefect {
    DefectKind kind;
    Span span;
};

// One turn = a contiguous range of segment indices [begin, end). A turn closes
// at an Information segment or at the trailing Answer.
using TurnRange = std::pair<std::size_t, std::size_t>;

struct Trajectory {
    std::vector<Segment> segments;
    std::vector<StructuralDefect> defects;
    std::vector<TurnRange> turns;

    bool has_defects() const { return !defects.empty(); }
};

// Parsed content of a <search> segment: Query:LLM;GraphRAG.
struct RoutingAction {
    std::string query;
    std::string llm_id;
    std::string graphrag_id;
};

struct EpisodeState {
    std::string question;
    Trajectory history;
    std::string transcript;  // full episode text the history was parsed from
    int turn_index = 0;
    int max_turns = kDefaultMaxTurns;
    bool terminated = false;
    std::optional<std::string> final_answer;
};

const char* kind_name(SegmentKind kind);
const char* defect_name(DefectKind kind);

// Lenient lexer: never throws, every malformation becomes a StructuralDefect.
// Non-empty spans of segments + defects partition the input byte-for-byte;
// NoValidTags carries the empty span (0,0).
std::pair<std::vector<Segment>, std::vector<StructuralDefect>> tokenize(std::string_view text);

Trajectory parse_trajectory(std::string_view text);

// Splits on the single ':' then the single ';', trimming all three parts.
// Throws InvalidSearchFormat when the separators are not exactly one each (in
// that order) or any part trims to empty.
RoutingAction parse_search_action(std::string_view content);
std::optional<RoutingAction> try_parse_search_action(std::string_view content);

// Appends tool_result (previous turn's environment reply) as an Information
// segment, then the parsed model_output. Every non-answer exchange consumes
// one turn; hitting max_turns forces termination with no final answer.
EpisodeState advance(const EpisodeState& state, std::string_view model_output,
                     const std::optional<std::string>& tool_result = std::nullopt);

// Inverse of tokenize for defect-free plans: FreeText is emitted raw, tagged
// kinds are wrapped in their markers. Throws UnrenderableKind on an
// out-of-range kind value.
std::string render_turn(std::span<const Segment> plan);
std::string render_turn(std::initializer_list<Segment> plan);

inline Segment seg(SegmentKind kind, std::string content) {
    return Segment{kind, std::move(content), {0, 0}};
}

// Content of the last Search segment, if any.
std::optional<std::string> last_search_content(const Trajectory& trajectory);

}  // namespace graphroute::protocol
