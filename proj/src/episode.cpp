#include "graphroute/episode.hpp"

#include <chrono>

#include "graphroute/util.hpp"

namespace graphroute::harness {

using protocol::SegmentKind;
using protocol::seg;

namespace {

std::string sanitize_query(std::string question) {
    // ':' and ';' are the search-content field separators
    for (char& c : question) {
        if (c == ':' || c == ';') c = ' ';
    }
    return question;
}

std::string render_search_turn(const QuestionRecord& question,
                               const policy::SampledAction& action, bool first_turn) {
    std::string think1 =
        first_turn
            ? "The question needs external evidence; selecting a knowledge base that matches "
              "its retrieval need."
            : "The previous information was insufficient to answer; selecting a knowledge base "
              "for another attempt.";
    return protocol::render_turn({
        seg(SegmentKind::Think, think1),
        seg(SegmentKind::GraphRag, action.graphrag_id),
        seg(SegmentKind::Think,
            "Selecting a generator that can read the retrieved context and produce the answer."),
        seg(SegmentKind::Llm, action.llm_id),
        seg(SegmentKind::Search, sanitize_query(question.question) + ":" + action.llm_id + ";" +
                                     action.graphrag_id),
    });
}

std::string render_answer_turn(const std::string& answer) {
    return protocol::render_turn({
        seg(SegmentKind::Think,
            "The retrieved information states the answer, so it is sufficient."),
        seg(SegmentKind::Answer, answer),
    });
}

}  // namespace

Episode run_episode(const policy::PolicySnapshot& policy,
                    const backends::BackendRegistry& registry, backends::Backend& world,
                    const QuestionRecord& question, const EpisodeConfig& cfg,
                    const std::optional<reward::CostProfile>& profile) {
    auto started = std::chrono::steady_clock::now();

    Episode episode;
    episode.question_id = question.id;
    std::vector<double> features = policy::featurize(question);

    protocol::EpisodeState state;
    state.question = question.question;
    state.max_turns = cfg.max_turns;

    std::optional<std::string> pending_info;
    int exchange = 0;
    while (!state.terminated) {
        std::string output;
        auto answer = pending_info ? backends::extract_answer(*pending_info) : std::nullopt;
        if (answer) {
            output = render_answer_turn(*answer);
        } else {
            Rng rng(derive_seed(cfg.seed, "action", question.id, exchange));
            policy::SampledAction action =
                policy::sample_action(policy, features, registry, rng, cfg.temperature);
            episode.decisions.push_back(
                {features, action.graphrag_index, action.llm_index, action.log_prob});
            output = render_search_turn(question, action, exchange == 0);
        }

        state = protocol::advance(state, output, pending_info);
        pending_info = std::nullopt;
        if (state.terminated) break;

        auto search = protocol::last_search_content(protocol::parse_trajectory(output));
        if (search) {
            if (auto action = protocol::try_parse_search_action(*search)) {
                try {
                    pending_info = backends::execute_action(
                        *action, registry, world,
                        derive_seed(cfg.seed, "exec", question.id, exchange));
                    episode.actions.push_back(*action);
                    episode.invoked_tiers.push_back(registry.llm(action->llm_id).tier);
                } catch (const Error& e) {
                    // surfaced in-band so the router can reroute next turn
                    pending_info = "backend error: " + std::string(e.what());
                }
            }
        }
        ++exchange;
    }

    episode.trajectory = state.history;
    episode.transcript = state.transcript;
    episode.final_answer = state.final_answer;

    std::vector<int> invoked_costs;
    for (const auto& action : episode.actions) {
        invoked_costs.push_back(registry.llm_cost(action.llm_id));
    }
    episode.reward = reward::score(episode.trajectory, episode.final_answer,
                                   question.gold_answers, registry, cfg.stage, invoked_costs,
                                   profile, cfg.cost);
    episode.em = episode.reward.outcome;
    episode.f1 = episode.final_answer
                     ? reward::f1_score(*episode.final_answer, question.gold_answers)
                     : 0.0;

    episode.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    return episode;
}

}  // namespace graphroute::harness
