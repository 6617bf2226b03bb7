#include "rebase/search.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "rebase/answers.hpp"
#include "rebase/errors.hpp"

namespace rebase {

namespace {

// prompt, then the steps so far, newline-joined.
std::string build_context(const std::string& prompt,
                          const std::string& solution_text) {
  std::string context = prompt;
  context += '\n';
  if (!solution_text.empty()) {
    context += solution_text;
    context += '\n';
  }
  return context;
}

double checked_reward(double reward, const SearchNode& child) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw ProtocolError("reward " + std::to_string(reward) +
                        " outside [0, 1] for node " +
                        std::to_string(child.node_id) + " at depth " +
                        std::to_string(child.depth));
  }
  return reward;
}

}  // namespace

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::weighted_vote:
      return "weighted_vote";
    case Aggregation::majority_vote:
      return "majority_vote";
    case Aggregation::best_of_n:
      return "best_of_n";
  }
  return "weighted_vote";
}

std::optional<Aggregation> parse_aggregation(std::string_view name) {
  if (name == "weighted_vote") return Aggregation::weighted_vote;
  if (name == "majority_vote") return Aggregation::majority_vote;
  if (name == "best_of_n") return Aggregation::best_of_n;
  return std::nullopt;
}

void SearchConfig::validate() const {
  if (width < 1) throw ConfigError("search: width must be >= 1");
  if (!(temperature > 0.0)) {
    throw ConfigError("search: temperature must be > 0");
  }
  if (max_depth < 1) throw ConfigError("search: max_depth must be >= 1");
  if (!(quality_threshold >= 0.0 && quality_threshold <= 1.0)) {
    throw ConfigError("search: quality_threshold must lie in [0, 1]");
  }
  if (max_step_tokens < 1) {
    throw ConfigError("search: max_step_tokens must be >= 1");
  }
}

std::vector<std::uint64_t> softmax_allocation(std::span<const double> rewards,
                                              double temperature,
                                              std::uint64_t budget) {
  if (rewards.empty()) {
    throw DomainError("softmax_allocation: rewards must be nonempty");
  }
  if (!(temperature > 0.0)) {
    throw DomainError("softmax_allocation: temperature must be > 0");
  }
  if (budget < 1) {
    throw DomainError("softmax_allocation: budget must be >= 1");
  }
  for (double r : rewards) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw DomainError("softmax_allocation: rewards must lie in [0, 1]");
    }
  }

  std::size_t n = rewards.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = rewards[i] / temperature;
  double max_score = *std::max_element(scores.begin(), scores.end());

  // Shifted exponentials: the largest term is exp(0), so nothing overflows
  // no matter how small the temperature is.
  std::vector<double> weights(n);
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = std::exp(scores[i] - max_score);
    weight_sum += weights[i];
  }

  std::vector<double> quotas(n);
  std::vector<std::uint64_t> counts(n);
  std::uint64_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    quotas[i] = static_cast<double>(budget) * (weights[i] / weight_sum);
    counts[i] = static_cast<std::uint64_t>(quotas[i]);
    used += counts[i];
  }
  assert(used <= budget);

  // Largest remainder, ties toward the lower index.
  std::uint64_t remaining = budget - used;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double fa = quotas[a] - static_cast<double>(counts[a]);
    double fb = quotas[b] - static_cast<double>(counts[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  for (std::size_t k = 0; k < remaining && k < n; ++k) {
    ++counts[order[k]];
  }
  return counts;
}

std::vector<SearchNode> expand_level(std::span<const SearchNode> frontier,
                                     StepGenerator& generator,
                                     RewardModel& reward_model,
                                     const SearchConfig& config,
                                     FlopsLedger& ledger, ExpandState& state) {
  config.validate();
  if (frontier.empty()) {
    throw DomainError("expand_level: frontier must be nonempty");
  }

  std::vector<double> rewards;
  rewards.reserve(frontier.size());
  for (const SearchNode& node : frontier) {
    if (node.terminal) {
      throw DomainError("expand_level: frontier node " +
                        std::to_string(node.node_id) + " is terminal");
    }
    rewards.push_back(node.reward);
  }

  std::vector<std::uint64_t> counts =
      softmax_allocation(rewards, config.temperature, config.width);

  std::vector<SearchNode> children;
  children.reserve(config.width);
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    const SearchNode& parent = frontier[i];
    for (std::uint64_t slot = 0; slot < counts[i]; ++slot) {
      SearchNode child;
      child.path = parent.path;
      child.path.push_back(slot);
      child.depth = parent.depth + 1;
      child.parent_id = parent.node_id;
      child.node_id = state.next_node_id++;

      StepQuery query;
      query.request = state.request_template;
      query.request.prompt = build_context(state.prompt, parent.solution_text);
      query.request.max_tokens = config.max_step_tokens;
      query.path = child.path;
      query.context_tokens = parent.context_tokens;
      query.depth = child.depth;

      GenerationStep step;
      try {
        step = generator.generate(query);
      } catch (const BackendUnavailable& e) {
        throw BackendUnavailable("expanding node " +
                                 std::to_string(parent.node_id) + " at depth " +
                                 std::to_string(child.depth) + ": " + e.what());
      } catch (const ProtocolError& e) {
        throw ProtocolError("expanding node " + std::to_string(parent.node_id) +
                            " at depth " + std::to_string(child.depth) + ": " +
                            e.what());
      }

      ledger.record_generation(kGenerateLabel, parent.context_tokens,
                               step.token_count, step.token_count_estimated);

      child.step_text = step.text;
      child.solution_text = parent.solution_text.empty()
                                ? step.text
                                : parent.solution_text + "\n" + step.text;
      child.context_tokens = parent.context_tokens + step.token_count;
      child.answer = extract_answer(step.text);
      child.terminal = step.terminal || contains_answer_marker(step.text);

      RewardQuery reward_query;
      reward_query.prompt = query.request.prompt;
      reward_query.completion = step.text;
      reward_query.path = child.path;
      child.reward = checked_reward(reward_model.score(reward_query), child);
      ledger.record_scoring(child.context_tokens);

      if (!child.terminal && config.quality_threshold > 0.0 &&
          child.reward < config.quality_threshold) {
        child.terminal = true;
        child.pruned = true;
      }

      children.push_back(std::move(child));
    }
  }
  return children;
}

SearchResult rebase_search(const std::string& prompt, StepGenerator& generator,
                           RewardModel& reward_model,
                           const SearchConfig& config, FlopsLedger& ledger,
                           const GenerationRequest& request_template) {
  config.validate();

  SearchResult result;
  std::uint64_t prompt_tokens = estimate_tokens(prompt);
  ledger.note_prompt(prompt_tokens);

  SearchNode root;
  root.node_id = 0;
  root.depth = 0;
  root.context_tokens = prompt_tokens;
  {
    RewardQuery query;
    query.prompt = build_context(prompt, "");
    root.reward = reward_model.score(query);
    if (!(root.reward >= 0.0 && root.reward <= 1.0)) {
      throw ProtocolError("root reward outside [0, 1]");
    }
    ledger.record_scoring(prompt_tokens);
  }
  result.nodes.push_back(root);

  ExpandState state;
  state.request_template = request_template;
  state.prompt = prompt;
  state.next_node_id = 1;

  std::vector<SearchNode> frontier{root};
  for (std::uint64_t depth = 1; depth <= config.max_depth && !frontier.empty();
       ++depth) {
    std::vector<SearchNode> children = expand_level(
        frontier, generator, reward_model, config, ledger, state);

    frontier.clear();
    for (SearchNode& child : children) {
      if (child.terminal && !child.pruned) {
        result.candidates.push_back(CandidateSolution{
            extract_answer(child.solution_text), child.solution_text,
            child.reward});
      } else if (!child.terminal) {
        frontier.push_back(child);
      }
      result.nodes.push_back(std::move(child));
    }
  }

  // Paths still open at the depth limit never produced an answer.
  for (const SearchNode& node : frontier) {
    result.candidates.push_back(
        CandidateSolution{std::nullopt, node.solution_text, 0.0});
  }
  return result;
}

std::vector<CandidateSolution> sample_baseline(
    const std::string& prompt, StepGenerator& generator, std::uint64_t n_votes,
    FlopsLedger& ledger, const GenerationRequest& request_template,
    std::uint64_t max_steps) {
  if (n_votes < 1) {
    throw DomainError("sample_baseline: n_votes must be >= 1");
  }
  if (max_steps < 1) {
    throw DomainError("sample_baseline: max_steps must be >= 1");
  }

  std::uint64_t prompt_tokens = estimate_tokens(prompt);
  ledger.note_prompt(prompt_tokens);

  std::vector<CandidateSolution> candidates;
  candidates.reserve(n_votes);
  for (std::uint64_t vote = 0; vote < n_votes; ++vote) {
    std::string solution;
    std::uint64_t context_tokens = prompt_tokens;
    PathKey path;
    path.reserve(max_steps);

    for (std::uint64_t depth = 1; depth <= max_steps; ++depth) {
      path.push_back(depth == 1 ? vote : 0);

      StepQuery query;
      query.request = request_template;
      query.request.prompt = build_context(prompt, solution);
      query.path = path;
      query.context_tokens = context_tokens;
      query.depth = depth;

      GenerationStep step = generator.generate(query);
      ledger.record_generation(kGenerateLabel, context_tokens,
                               step.token_count, step.token_count_estimated);

      if (!solution.empty()) solution += "\n";
      solution += step.text;
      context_tokens += step.token_count;

      if (step.terminal || contains_answer_marker(step.text)) break;
    }

    candidates.push_back(
        CandidateSolution{extract_answer(solution), solution, 1.0});
  }
  return candidates;
}

namespace {

struct VoteBucket {
  std::string answer;
  double weight_sum = 0.0;
  std::size_t first_index = 0;
};

std::optional<std::string> tally(std::span<const CandidateSolution> candidates,
                                 bool unit_weights) {
  std::vector<VoteBucket> buckets;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CandidateSolution& c = candidates[i];
    if (!c.answer) continue;  // no-answer candidates never vote
    double w = unit_weights ? 1.0 : c.weight;
    auto it = std::find_if(buckets.begin(), buckets.end(),
                           [&](const VoteBucket& b) {
                             return b.answer == *c.answer;
                           });
    if (it == buckets.end()) {
      buckets.push_back(VoteBucket{*c.answer, w, i});
    } else {
      it->weight_sum += w;
    }
  }
  if (buckets.empty()) return std::nullopt;

  const VoteBucket* best = &buckets.front();
  for (const VoteBucket& b : buckets) {
    if (b.weight_sum > best->weight_sum ||
        (b.weight_sum == best->weight_sum && b.first_index < best->first_index)) {
      best = &b;
    }
  }
  return best->answer;
}

}  // namespace

std::optional<std::string> weighted_vote(
    std::span<const CandidateSolution> candidates) {
  return tally(candidates, /*unit_weights=*/false);
}

std::optional<std::string> majority_vote(
    std::span<const CandidateSolution> candidates) {
  return tally(candidates, /*unit_weights=*/true);
}

std::optional<std::string> best_of_n(
    std::span<const CandidateSolution> candidates) {
  const CandidateSolution* best = nullptr;
  for (const CandidateSolution& c : candidates) {
    if (!c.answer) continue;
    if (best == nullptr || c.weight > best->weight) best = &c;
  }
  if (best == nullptr) return std::nullopt;
  return best->answer;
}

std::optional<std::string> aggregate(
    std::span<const CandidateSolution> candidates, Aggregation mode) {
  switch (mode) {
    case Aggregation::weighted_vote:
      return weighted_vote(candidates);
    case Aggregation::majority_vote:
      return majority_vote(candidates);
    case Aggregation::best_of_n:
      return best_of_n(candidates);
  }
  return std::nullopt;
}

}  // namespace rebase
