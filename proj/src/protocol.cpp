#include "graphroute/protocol.hpp"

#include <array>

#include "graphroute/util.hpp"

namespace graphroute::protocol {

namespace {

struct TagToken {
    SegmentKind kind;
    bool closing;
    std::size_t begin;  // offset of '<'
    std::size_t end;    // offset past '>'
};

constexpr std::array<std::pair<SegmentKind, std::string_view>, 6> kTagNames = {{
    {SegmentKind::Think, "think"},
    {SegmentKind::GraphRag, "graphrag"},
    {SegmentKind::Llm, "llm"},
    {SegmentKind::Search, "search"},
    {SegmentKind::Information, "information"},
    {SegmentKind::Answer, "answer"},
}};

std::string_view tag_name(SegmentKind kind) {
    for (const auto& [k, name] : kTagNames) {
        if (k == kind) return name;
    }
    return {};
}

// Scans the whole input once for the 12 recognized tag tokens. Unknown tags
// such as <foo> are plain text.
std::vector<TagToken> scan_tokens(std::string_view text) {
    std::vector<TagToken> tokens;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) break;
        std::string_view rest = text.substr(lt);
        bool matched = false;
        for (const auto& [kind, name] : kTagNames) {
            // opening form: <name>
            if (rest.size() >= name.size() + 2 && rest[0] == '<' &&
                rest.substr(1, name.size()) == name && rest[name.size() + 1] == '>') {
                tokens.push_back({kind, false, lt, lt + name.size() + 2});
                pos = lt + name.size() + 2;
                matched = true;
                break;
            }
            // closing form: </name>
            if (rest.size() >= name.size() + 3 && rest.substr(0, 2) == "</" &&
                rest.substr(2, name.size()) == name && rest[name.size() + 2] == '>') {
                tokens.push_back({kind, true, lt, lt + name.size() + 3});
                pos = lt + name.size() + 3;
                matched = true;
                break;
            }
        }
        if (!matched) pos = lt + 1;
    }
    return tokens;
}

}  // namespace

const char* kind_name(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Think: return "think";
        case SegmentKind::GraphRag: return "graphrag";
        case SegmentKind::Llm: return "llm";
        case SegmentKind::Search: return "search";
        case SegmentKind::Information: return "information";
        case SegmentKind::Answer: return "answer";
        case SegmentKind::FreeText: return "free_text";
    }
    return "?";
}

const char* defect_name(DefectKind kind) {
    switch (kind) {
        case DefectKind::NoValidTags: return "no_valid_tags";
        case DefectKind::UnclosedTag: return "unclosed_tag";
        case DefectKind::MismatchedTag: return "mismatched_tag";
        case DefectKind::NestedTag: return "nested_tag";
    }
    return "?";
}

std::pair<std::vector<Segment>, std::vector<StructuralDefect>> tokenize(std::string_view text) {
    std::vector<Segment> segments;
    std::vector<StructuralDefect> defects;

    if (text.empty()) {
        defects.push_back({DefectKind::NoValidTags, {0, 0}});
        return {segments, defects};
    }

    const std::vector<TagToken> tokens = scan_tokens(text);

    auto emit_free_text = [&](std::size_t begin, std::size_t end) {
        if (end > begin) {
            segments.push_back({SegmentKind::FreeText,
                                std::string(text.substr(begin, end - begin)),
                                {begin, end}});
        }
    };

    std::size_t cursor = 0;  // next uncovered byte
    std::size_t t = 0;       // next token index
    while (t < tokens.size()) {
        const TagToken& open = tokens[t];
        emit_free_text(cursor, open.begin);

        if (open.closing) {
            // stray closer at top level
            defects.push_back({DefectKind::MismatchedTag, {open.begin, open.end}});
            cursor = open.end;
            ++t;
            continue;
        }

        // Find the matching closer; note whether other tag tokens intervene.
        std::size_t match = 0;
        bool has_match = false;
        for (std::size_t j = t + 1; j < tokens.size(); ++j) {
            if (tokens[j].closing && tokens[j].kind == open.kind) {
                match = j;
                has_match = true;
                break;
            }
        }

        if (has_match && match == t + 1) {
            const TagToken& close = tokens[match];
            segments.push_back({open.kind,
                                std::string(text.substr(open.end, close.begin - open.end)),
                                {open.begin, close.end}});
            cursor = close.end;
            t = match + 1;
        } else if (has_match) {
            // Other tag tokens inside the pair. An inner opener means nesting;
            // an inner stray closer means a mismatched structure.
            DefectKind kind = tokens[t + 1].closing ? DefectKind::MismatchedTag
                                                    : DefectKind::NestedTag;
            defects.push_back({kind, {open.begin, tokens[match].end}});
            cursor = tokens[match].end;
            t = match + 1;
        } else {
            // No closer for this kind anywhere later.
            if (t + 1 < tokens.size() && tokens[t + 1].closing) {
                // closed by the wrong tag: consume through it
                defects.push_back({DefectKind::MismatchedTag, {open.begin, tokens[t + 1].end}});
                cursor = tokens[t + 1].end;
                t += 2;
            } else {
                // dangling opener; salvage whatever follows
                defects.push_back({DefectKind::UnclosedTag, {open.begin, open.end}});
                cursor = open.end;
                ++t;
            }
        }
    }
    emit_free_text(cursor, text.size());

    bool any_tagged = false;
    for (const auto& s : segments) {
        if (s.kind != SegmentKind::FreeText) any_tagged = true;
    }
    if (!any_tagged && defects.empty()) {
        defects.push_back({DefectKind::NoValidTags, {0, 0}});
    }
    return {segments, defects};
}

namespace {

std::vector<TurnRange> delimit_turns(const std::vector<Segment>& segments) {
    std::vector<TurnRange> turns;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].kind == SegmentKind::Information ||
            segments[i].kind == SegmentKind::Answer) {
            turns.push_back({begin, i + 1});
            begin = i + 1;
        }
    }
    if (begin < segments.size()) turns.push_back({begin, segments.size()});
    return turns;
}

}  // namespace

Trajectory parse_trajectory(std::string_view text) {
    Trajectory trajectory;
    auto [segments, defects] = tokenize(text);
    trajectory.segments = std::move(segments);
    trajectory.defects = std::move(defects);
    trajectory.turns = delimit_turns(trajectory.segments);
    return trajectory;
}

std::optional<RoutingAction> try_parse_search_action(std::string_view content) {
    std::size_t colons = 0, semis = 0;
    for (char c : content) {
        if (c == ':') ++colons;
        if (c == ';') ++semis;
    }
    if (colons != 1 || semis != 1) return std::nullopt;
    std::size_t colon = content.find(':');
    std::size_t semi = content.find(';');
    if (semi < colon) return std::nullopt;
    RoutingAction action;
    action.query = trim(content.substr(0, colon));
    action.llm_id = trim(content.substr(colon + 1, semi - colon - 1));
    action.graphrag_id = trim(content.substr(semi + 1));
    if (action.query.empty() || action.llm_id.empty() || action.graphrag_id.empty()) {
        return std::nullopt;
    }
    return action;
}

RoutingAction parse_search_action(std::string_view content) {
    auto action = try_parse_search_action(content);
    if (!action) {
        throw Error(errkind::invalid_search_format,
                    "search content must be Query:LLM;GraphRAG with exactly one ':' and one ';'");
    }
    return *action;
}

std::string render_turn(std::span<const Segment> plan) {
    std::string out;
    for (const Segment& part : plan) {
        if (part.kind == SegmentKind::FreeText) {
            out += part.content;
            continue;
        }
        std::string_view name = tag_name(part.kind);
        if (name.empty()) {
            throw Error(errkind::unrenderable_kind, "segment kind is not renderable");
        }
        out += '<';
        out += name;
        out += '>';
        out += part.content;
        out += "</";
        out += name;
        out += '>';
    }
    return out;
}

std::string render_turn(std::initializer_list<Segment> plan) {
    return render_turn(std::span<const Segment>(plan.begin(), plan.size()));
}

EpisodeState advance(const EpisodeState& state, std::string_view model_output,
                     const std::optional<std::string>& tool_result) {
    if (state.terminated) {
        throw Error(errkind::episode_terminated, "advance called on a terminated episode");
    }
    EpisodeState next = state;

    // The environment reply is appended structurally: its text never re-enters
    // the lexer, so tag-looking fragments inside it cannot corrupt the history.
    if (tool_result) {
        std::size_t begin = next.transcript.size();
        next.transcript += "<information>";
        next.transcript += *tool_result;
        next.transcript += "</information>";
        next.history.segments.push_back(
            {SegmentKind::Information, *tool_result, {begin, next.transcript.size()}});
    }

    std::size_t base = next.transcript.size();
    next.transcript += model_output;
    auto [segments, defects] = tokenize(model_output);
    for (Segment& s : segments) {
        s.span.first += base;
        s.span.second += base;
        next.history.segments.push_back(std::move(s));
    }
    for (StructuralDefect& d : defects) {
        d.span.first += base;
        d.span.second += base;
        next.history.defects.push_back(d);
    }
    next.history.turns = delimit_turns(next.history.segments);

    std::optional<std::string> answer;
    for (const Segment& s : next.history.segments) {
        if (s.kind == SegmentKind::Answer) {
            answer = trim(s.content);
            break;
        }
    }
    if (answer) {
        next.final_answer = answer;
        next.terminated = true;
    } else {
        next.turn_index += 1;
        if (next.turn_index >= next.max_turns) {
            next.terminated = true;  // forced stop, no final answer
        }
    }
    return next;
}

std::optional<std::string> last_search_content(const Trajectory& trajectory) {
    for (auto it = trajectory.segments.rbegin(); it != trajectory.segments.rend(); ++it) {
        if (it->kind == SegmentKind::Search) return it->content;
    }
    return std::nullopt;
}

}  // namespace graphroute::protocol
