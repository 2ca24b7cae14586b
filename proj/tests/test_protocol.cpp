#include <doctest.h>

#include <algorithm>

#include "graphroute/protocol.hpp"
#include "graphroute/util.hpp"

using namespace graphroute;
using protocol::DefectKind;
using protocol::Segment;
using protocol::SegmentKind;
using protocol::seg;

namespace {

bool has_defect(const std::vector<protocol::StructuralDefect>& defects, DefectKind kind) {
    return std::any_of(defects.begin(), defects.end(),
                       [&](const auto& d) { return d.kind == kind; });
}

// Coverage oracle: non-empty spans of segments + defects partition the input.
void check_coverage(const std::string& text) {
    auto [segments, defects] = protocol::tokenize(text);
    std::vector<protocol::Span> spans;
    for (const auto& s : segments) spans.push_back(s.span);
    for (const auto& d : defects) {
        if (d.span.second > d.span.first) spans.push_back(d.span);
    }
    std::sort(spans.begin(), spans.end());
    std::size_t cursor = 0;
    for (const auto& [begin, end] : spans) {
        REQUIRE(begin == cursor);
        REQUIRE(end > begin);
        cursor = end;
    }
    REQUIRE(cursor == text.size());
}

std::string random_soup(Rng& rng) {
    static const std::vector<std::string> pieces = {
        "<think>", "</think>", "<graphrag>", "</graphrag>", "<llm>", "</llm>",
        "<search>", "</search>", "<information>", "</information>", "<answer>", "</answer>",
        "<foo>", "</foo>", "text", "a:b;c", "<", ">", "</", " ", "\n", "...", "<think",
        "RAPTOR", "q", "<<answer>>",
    };
    std::string out;
    std::size_t parts = rng.next_index(12);
    for (std::size_t i = 0; i < parts; ++i) {
        out += pieces[rng.next_index(pieces.size())];
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize: minimal well-formed input") {
    auto [segments, defects] = protocol::tokenize("<think>a</think><answer>b</answer>");
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].kind == SegmentKind::Think);
    CHECK(segments[0].content == "a");
    CHECK(segments[1].kind == SegmentKind::Answer);
    CHECK(segments[1].content == "b");
    CHECK(defects.empty());
}

TEST_CASE("tokenize: nested tags are a fatal defect") {
    auto [segments, defects] = protocol::tokenize("<think>a<answer>b</answer></think>");
    CHECK(has_defect(defects, DefectKind::NestedTag));
}

TEST_CASE("tokenize: no tags at all") {
    auto [segments, defects] = protocol::tokenize("no tags here at all");
    REQUIRE(defects.size() == 1);
    CHECK(defects[0].kind == DefectKind::NoValidTags);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].kind == SegmentKind::FreeText);
}

TEST_CASE("tokenize: empty input yields one NoValidTags defect") {
    auto [segments, defects] = protocol::tokenize("");
    CHECK(segments.empty());
    REQUIRE(defects.size() == 1);
    CHECK(defects[0].kind == DefectKind::NoValidTags);
}

TEST_CASE("tokenize: unclosed and mismatched tags") {
    SUBCASE("dangling opener") {
        auto [segments, defects] = protocol::tokenize("<think>abc");
        CHECK(has_defect(defects, DefectKind::UnclosedTag));
    }
    SUBCASE("wrong closer") {
        auto [segments, defects] = protocol::tokenize("<think>a</answer>");
        CHECK(has_defect(defects, DefectKind::MismatchedTag));
    }
    SUBCASE("stray closer") {
        auto [segments, defects] = protocol::tokenize("</think>");
        CHECK(has_defect(defects, DefectKind::MismatchedTag));
    }
    SUBCASE("unclosed opener before a clean pair") {
        auto [segments, defects] = protocol::tokenize("<think>a<answer>b</answer>");
        CHECK(has_defect(defects, DefectKind::UnclosedTag));
        bool salvaged = std::any_of(segments.begin(), segments.end(), [](const Segment& s) {
            return s.kind == SegmentKind::Answer && s.content == "b";
        });
        CHECK(salvaged);
    }
}

TEST_CASE("tokenize: unknown tags are free text, not defects") {
    auto [segments, defects] = protocol::tokenize("<foo>x</foo><think>y</think>");
    CHECK(defects.empty());
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].kind == SegmentKind::FreeText);
    CHECK(segments[0].content == "<foo>x</foo>");
    CHECK(segments[1].kind == SegmentKind::Think);
}

TEST_CASE("tokenize: spans cover the input byte-for-byte") {
    check_coverage("<think>a</think> gap <answer>b</answer> tail");
    check_coverage("<think>a<answer>b</answer></think>");
    check_coverage("junk </llm> more <search>q</search>");
    check_coverage("no tags");
}

TEST_CASE("tokenize: totality and coverage on 10000 fuzzed strings") {
    Rng rng(20240811);
    for (int i = 0; i < 10000; ++i) {
        std::string text = random_soup(rng);
        auto [segments, defects] = protocol::tokenize(text);  // must not throw
        if (text.empty()) {
            CHECK(defects.size() == 1);
        } else {
            CHECK((!segments.empty() || !defects.empty()));
        }
        check_coverage(text);
    }
}

TEST_CASE("parse_trajectory: two-turn rollout with final answer") {
    // shape of the two-round corrected rollout: 14 segments, 2 search turns
    // plus one answer turn
    std::string text = protocol::render_turn({
        seg(SegmentKind::Think, "needs explicit factual retrieval"),
        seg(SegmentKind::GraphRag, "HippoRAG2"),
        seg(SegmentKind::Think, "a capable reader for the triples"),
        seg(SegmentKind::Llm, "LLaMA-3.1-70B-Instruct"),
        seg(SegmentKind::Search,
            "When did the the Antonine who was known as the third of the five good emperors "
            "live?: LLaMA-3.1-70B-Instruct; HippoRAG2"),
        seg(SegmentKind::Information, "I cannot confidently answer this question."),
        seg(SegmentKind::Think, "insufficient; switch the knowledge base"),
        seg(SegmentKind::GraphRag, "RAPTOR"),
        seg(SegmentKind::Think, "same reader, new retrieval"),
        seg(SegmentKind::Llm, "LLaMA-3.1-70B-Instruct"),
        seg(SegmentKind::Search,
            "When did the the Antonine who was known as the third of the five good emperors "
            "live?: LLaMA-3.1-70B-Instruct; RAPTOR"),
        seg(SegmentKind::Information, "Answer: 24 January 76 – 10 July 138."),
        seg(SegmentKind::Think, "the lifespan is stated, sufficient"),
        seg(SegmentKind::Answer, "24 January 76 – 10 July 138"),
    });
    auto trajectory = protocol::parse_trajectory(text);
    CHECK(trajectory.segments.size() == 14);
    CHECK(trajectory.defects.empty());
    REQUIRE(trajectory.turns.size() == 3);
    CHECK(trajectory.turns[0] == protocol::TurnRange{0, 6});
    CHECK(trajectory.turns[1] == protocol::TurnRange{6, 12});
    CHECK(trajectory.turns[2] == protocol::TurnRange{12, 14});
}

TEST_CASE("parse_trajectory: empty input") {
    auto trajectory = protocol::parse_trajectory("");
    CHECK(trajectory.segments.empty());
    REQUIRE(trajectory.defects.size() == 1);
    CHECK(trajectory.defects[0].kind == DefectKind::NoValidTags);
    CHECK(trajectory.turns.empty());
}

TEST_CASE("parse_trajectory: single-turn template order") {
    std::string text =
        "<think>r1</think><graphrag>HippoRAG2</graphrag><think>r2</think>"
        "<llm>Qwen2.5-7B-Instruct</llm>"
        "<search>what is bermuda competing in the winter olympics?:Qwen2.5-7B-Instruct;HippoRAG2"
        "</search><information>Answer: Cross-country skiing.</information>"
        "<think>sufficient</think><answer>Cross-country skiing</answer>";
    auto trajectory = protocol::parse_trajectory(text);
    REQUIRE(trajectory.segments.size() == 8);
    const SegmentKind expected[] = {
        SegmentKind::Think, SegmentKind::GraphRag, SegmentKind::Think, SegmentKind::Llm,
        SegmentKind::Search, SegmentKind::Information, SegmentKind::Think, SegmentKind::Answer};
    for (std::size_t i = 0; i < 8; ++i) CHECK(trajectory.segments[i].kind == expected[i]);
    CHECK(trajectory.turns.size() == 2);
}

TEST_CASE("parse_search_action: case-study content") {
    auto action = protocol::parse_search_action(
        "When did the the Antonine who was known as the third of the five good emperors live?: "
        "LLaMA-3.1-70B-Instruct; RAPTOR");
    CHECK(action.query ==
          "When did the the Antonine who was known as the third of the five good emperors live?");
    CHECK(action.llm_id == "LLaMA-3.1-70B-Instruct");
    CHECK(action.graphrag_id == "RAPTOR");
}

TEST_CASE("parse_search_action: separator rule boundaries") {
    CHECK_THROWS_AS(protocol::parse_search_action("q:onlyllm"), Error);       // zero ';'
    CHECK_THROWS_AS(protocol::parse_search_action("a:b;c;d"), Error);         // two ';'
    CHECK_THROWS_AS(protocol::parse_search_action("a:b:c;d"), Error);         // two ':'
    CHECK_THROWS_AS(protocol::parse_search_action("a;b:c"), Error);           // ';' before ':'
    CHECK_THROWS_AS(protocol::parse_search_action(" :b;c"), Error);           // empty query
    CHECK_THROWS_AS(protocol::parse_search_action("a: ;c"), Error);           // empty llm
    CHECK_THROWS_AS(protocol::parse_search_action("a:b; "), Error);           // empty graphrag
    try {
        protocol::parse_search_action("q:onlyllm");
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == errkind::invalid_search_format);
    }
}

TEST_CASE("advance: search turn increments, answer terminates, turn cap forces stop") {
    protocol::EpisodeState state;
    state.question = "q";
    state.max_turns = 4;

    std::string search_turn =
        "<think>t1</think><graphrag>RAPTOR</graphrag><think>t2</think>"
        "<llm>Qwen2.5-7B-Instruct</llm><search>q:Qwen2.5-7B-Instruct;RAPTOR</search>";

    auto s1 = protocol::advance(state, search_turn);
    CHECK(s1.turn_index == 1);
    CHECK_FALSE(s1.terminated);

    auto s2 = protocol::advance(s1, "<think>done</think><answer>Beijing</answer>",
                                std::string("Answer: Beijing"));
    CHECK(s2.terminated);
    REQUIRE(s2.final_answer.has_value());
    CHECK(*s2.final_answer == "Beijing");
    bool saw_info = false;
    for (const auto& s : s2.history.segments) {
        if (s.kind == SegmentKind::Information) saw_info = true;
    }
    CHECK(saw_info);

    // four searches with no answer force termination without a final answer
    protocol::EpisodeState looping;
    looping.question = "q";
    looping.max_turns = 4;
    for (int i = 0; i < 4; ++i) {
        CHECK_FALSE(looping.terminated);
        looping = protocol::advance(looping, search_turn,
                                    i == 0 ? std::nullopt
                                           : std::optional<std::string>("nothing useful"));
    }
    CHECK(looping.terminated);
    CHECK(looping.turn_index == 4);
    CHECK_FALSE(looping.final_answer.has_value());
    CHECK_THROWS_AS(protocol::advance(looping, search_turn), Error);
}

TEST_CASE("advance: turn bound property") {
    Rng rng(7);
    std::string search_turn = "<think>a</think><search>q:b;c</search>";
    for (int trial = 0; trial < 50; ++trial) {
        protocol::EpisodeState state;
        state.max_turns = 4;
        int steps = 0;
        while (!state.terminated && steps < 20) {
            bool answer = rng.bernoulli(0.2);
            state = protocol::advance(state, answer ? "<answer>x</answer>" : search_turn);
            ++steps;
            CHECK(state.turn_index <= 4);
        }
    }
}

TEST_CASE("render_turn: examples and errors") {
    CHECK(protocol::render_turn({seg(SegmentKind::Think, "x"),
                                 seg(SegmentKind::Answer, "Beijing")}) ==
          "<think>x</think><answer>Beijing</answer>");
    CHECK(protocol::render_turn(std::initializer_list<Segment>{}) == "");

    Segment bad{static_cast<SegmentKind>(99), "x", {0, 0}};
    CHECK_THROWS_AS(protocol::render_turn({bad}), Error);
}

TEST_CASE("render/tokenize round trip on random defect-free plans") {
    Rng rng(99);
    const SegmentKind kinds[] = {SegmentKind::Think,  SegmentKind::GraphRag,
                                 SegmentKind::Llm,    SegmentKind::Search,
                                 SegmentKind::Information, SegmentKind::Answer};
    const std::string contents[] = {"", "a", "some words", "q:l;g", "1 2 3", "x y"};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Segment> plan;
        std::size_t parts = rng.next_index(8);
        for (std::size_t i = 0; i < parts; ++i) {
            plan.push_back(seg(kinds[rng.next_index(6)], contents[rng.next_index(6)]));
        }
        std::string text = protocol::render_turn(plan);
        auto [segments, defects] = protocol::tokenize(text);
        if (plan.empty()) {
            CHECK(segments.empty());
            continue;
        }
        CHECK(defects.empty());
        REQUIRE(segments.size() == plan.size());
        for (std::size_t i = 0; i < plan.size(); ++i) {
            CHECK(segments[i].kind == plan[i].kind);
            CHECK(segments[i].content == plan[i].content);
        }
    }
}
