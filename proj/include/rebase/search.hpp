#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rebase/backends.hpp"
#include "rebase/scaling.hpp"

namespace rebase {

enum class Aggregation { weighted_vote, majority_vote, best_of_n };

std::string_view aggregation_name(Aggregation a);
std::optional<Aggregation> parse_aggregation(std::string_view name);

struct SearchConfig {
  std::uint64_t width = 1;       // per-level expansion budget, >= 1
  double temperature = 0.2;      // softmax selection temperature, > 0
  std::uint64_t max_depth = 1;   // >= 1
  double quality_threshold = 0.0;  // prune children scoring below; 0 disables
  Aggregation aggregation = Aggregation::weighted_vote;
  std::uint64_t max_step_tokens = 256;  // request budget per step, >= 1

  void validate() const;
};

struct SearchNode {
  std::uint64_t node_id = 0;
  std::optional<std::uint64_t> parent_id;
  std::uint64_t depth = 0;
  std::string step_text;
  double reward = 0.0;
  bool terminal = false;
  bool pruned = false;           // terminal-failed via quality_threshold
  PathKey path;                  // child-slot indices from the root
  std::string solution_text;     // newline-joined steps up to this node
  std::uint64_t context_tokens = 0;  // prompt tokens + step tokens so far
  std::optional<std::string> answer; // canonical answer if this step has one
};

struct CandidateSolution {
  std::optional<std::string> answer;  // nullopt = no parseable answer
  std::string full_text;
  double weight = 0.0;
};

struct SearchResult {
  std::vector<CandidateSolution> candidates;
  std::vector<SearchNode> nodes;  // root followed by children level by level
};

// Splits an integer budget across frontier nodes proportionally to
// softmax(reward / temperature), using largest-remainder rounding with ties
// broken toward the lower index. Computed with shifted exponentials, so
// extreme reward/temperature ratios cannot overflow. Counts always sum to
// the budget.
std::vector<std::uint64_t> softmax_allocation(std::span<const double> rewards,
                                              double temperature,
                                              std::uint64_t budget);

// Mutable plumbing threaded through repeated expand_level calls.
struct ExpandState {
  GenerationRequest request_template;  // prompt is overwritten per node
  std::string prompt;                  // root problem statement
  std::uint64_t next_node_id = 1;
};

// Expands one level: allocates config.width continuations across the
// frontier, requests each step, scores every child, prunes children whose
// reward falls below quality_threshold, and charges all generated and
// scored tokens to the ledger. Frontier nodes must be non-terminal with
// rewards already assigned. Backend failures propagate annotated with the
// node they hit.
std::vector<SearchNode> expand_level(std::span<const SearchNode> frontier,
                                     StepGenerator& generator,
                                     RewardModel& reward_model,
                                     const SearchConfig& config,
                                     FlopsLedger& ledger, ExpandState& state);

// Reward-balanced tree search: per level, score expandable nodes, allocate
// the width budget by softmax over rewards, expand, and collect terminal
// nodes as candidates weighted by their terminal reward. Nodes still open
// at max_depth become no-answer candidates with weight 0.
SearchResult rebase_search(const std::string& prompt, StepGenerator& generator,
                           RewardModel& reward_model,
                           const SearchConfig& config, FlopsLedger& ledger,
                           const GenerationRequest& request_template);

// n_votes independent full completions from the backend; no tree, no reward
// model. Vote v explores the chain [v], [v,0], [v,0,0], ... and carries
// weight 1. max_steps bounds runaway generations.
std::vector<CandidateSolution> sample_baseline(
    const std::string& prompt, StepGenerator& generator, std::uint64_t n_votes,
    FlopsLedger& ledger, const GenerationRequest& request_template,
    std::uint64_t max_steps);

// Groups candidates by canonical answer (no-answer candidates are excluded)
// and returns the answer with the largest summed weight; ties go to the
// answer whose first candidate appears earliest. nullopt when no candidate
// carries an answer.
std::optional<std::string> weighted_vote(
    std::span<const CandidateSolution> candidates);

// weighted_vote with every weight replaced by 1.
std::optional<std::string> majority_vote(
    std::span<const CandidateSolution> candidates);

// Answer of the single highest-weight answered candidate, ties earliest.
std::optional<std::string> best_of_n(
    std::span<const CandidateSolution> candidates);

std::optional<std::string> aggregate(std::span<const CandidateSolution> candidates,
                                     Aggregation mode);

}  // namespace rebase
