#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebase/scaling.hpp"

namespace rebase {

// Structural identity of a node: child-slot indices from the root. The
// first sampled step of a problem is [0], its second child is [0, 1], and
// so on. All simulated-backend draws key off (seed, path), which makes
// expansions order-independent.
using PathKey = std::vector<std::uint64_t>;

struct GenerationRequest {
  std::string prompt;
  std::uint64_t max_tokens = 1;  // >= 1
  std::vector<std::string> stop_sequences;
  double sample_temperature = 0.0;  // >= 0
  std::uint64_t seed = 0;
};

struct GenerationStep {
  std::string text;
  std::uint64_t token_count = 1;  // >= 1
  // Set when the step carries the final-answer marker or generation was
  // truncated; terminal steps are never expanded further.
  bool terminal = false;
  // Token count was estimated client-side rather than reported by the
  // backend; propagated into the ledger record.
  bool token_count_estimated = false;
};

/// Closed-world task description for the simulated backend. Together with a
/// path key it fully determines every step, reward, and answer.
struct SimulatedTaskSpec {
  std::uint64_t seed = 0;
  double step_success_prob = 0.5;  // in [0, 1]
  double reward_fidelity = 1.0;    // in [0, 1]
  std::uint64_t steps_to_solution = 1;  // >= 1
  std::int64_t gold_answer = 0;
  std::uint64_t tokens_per_step = 1;  // >= 1

  void validate() const;
};

/// Inference-time thought wrapping: before each visible step the model
/// spends a rationale budget that is charged to the ledger but never appears
/// in solution text. mixing_weight w shifts the simulated per-step success
/// probability toward thought_success_prob.
struct ThoughtConfig {
  std::uint64_t thought_budget = 16;
  // Optional linear budget schedule: budget at depth d is
  // thought_budget + budget_per_depth * d.
  std::uint64_t budget_per_depth = 0;
  double mixing_weight = 0.0;        // in [0, 1]
  double thought_success_prob = 0.5; // in [0, 1]

  void validate() const;
  std::uint64_t budget_at(std::uint64_t depth) const;
};

// Everything a backend needs to produce one continuation step.
struct StepQuery {
  GenerationRequest request;
  PathKey path;                    // identity of the step being generated
  std::uint64_t context_tokens = 0;  // prompt + steps generated so far
  std::uint64_t depth = 1;           // 1-based depth of the new step
};

class StepGenerator {
 public:
  virtual ~StepGenerator() = default;
  virtual GenerationStep generate(const StepQuery& query) = 0;
  // True when the backend applies thought mixing to its own success
  // probability (simulated world); false means a wrapper must realize
  // thought via two-phase rationale prompting.
  virtual bool native_thought_mixing() const { return false; }
};

struct RewardQuery {
  std::string prompt;      // context the completion extends
  std::string completion;  // the newly generated step
  PathKey path;            // identity of the scored node
};

class RewardModel {
 public:
  virtual ~RewardModel() = default;
  // Process-reward score in [0, 1].
  virtual double score(const RewardQuery& query) = 0;
};

// p_eff = p + w * (p_think - p), clamped to [min(p, p_think), max(...)].
// Exact at the endpoints: w = 0 returns p bit-for-bit, w = 1 returns
// p_think bit-for-bit.
double mixed_success_prob(double p, double p_think, double w);

// ceil(chars / 4), the crude token estimate used when a backend does not
// report counts (and for prompt accounting).
std::uint64_t estimate_tokens(std::string_view text);

// Pure simulated-world primitives. Fully deterministic given (spec, path).
//
// The step drawn at `path` is correct iff its uniform draw is below the
// success probability. A path is on the gold track iff every draw along it
// is correct; at depth steps_to_solution every path terminates, emitting
// "#### <gold_answer>" on the gold track and a path-hash-derived wrong
// answer otherwise.
GenerationStep sim_generate_step(const SimulatedTaskSpec& spec,
                                 std::span<const std::uint64_t> path,
                                 const GenerationRequest& request);
GenerationStep sim_generate_step_with_prob(const SimulatedTaskSpec& spec,
                                           std::span<const std::uint64_t> path,
                                           const GenerationRequest& request,
                                           double success_prob);

// With probability reward_fidelity returns the true signal (0.9 on the gold
// track, 0.1 off it); otherwise a uniform value derived from the path hash.
double sim_reward(const SimulatedTaskSpec& spec, bool node_on_correct_path,
                  std::span<const std::uint64_t> path);

// True iff every step draw along the path is below success_prob.
bool sim_path_on_gold_track(const SimulatedTaskSpec& spec,
                            std::span<const std::uint64_t> path,
                            double success_prob);

/// Deterministic closed-world backend: generator and process-reward model
/// over the same task spec. Pure given (spec, path), so instances are freely
/// shareable across threads. When thought mixing parameters are supplied at
/// construction, both generation draws and reward-side gold-track
/// recomputation use the mixed success probability, keeping the two views
/// consistent.
class SimulatedBackend final : public StepGenerator, public RewardModel {
 public:
  explicit SimulatedBackend(SimulatedTaskSpec spec,
                            std::optional<ThoughtConfig> thought = std::nullopt);

  GenerationStep generate(const StepQuery& query) override;
  double score(const RewardQuery& query) override;
  bool native_thought_mixing() const override { return true; }

  // Success probability actually in effect (mixed when thought is set).
  double effective_success_prob() const { return success_prob_; }
  const SimulatedTaskSpec& spec() const { return spec_; }

 private:
  SimulatedTaskSpec spec_;
  double success_prob_;
};

/// Wraps a step generator with inference-time thought. Each generate() call
/// charges the depth-dependent rationale budget to the ledger; with
/// mixing_weight 0 the wrapped trajectory is identical to the inner
/// backend's. Stateless apart from ledger writes, which follow the
/// one-writer-per-run rule.
class ThoughtWrapper final : public StepGenerator {
 public:
  ThoughtWrapper(StepGenerator& inner, ThoughtConfig config,
                 FlopsLedger& ledger);

  GenerationStep generate(const StepQuery& query) override;
  bool native_thought_mixing() const override {
    return inner_.native_thought_mixing();
  }

 private:
  StepGenerator& inner_;
  ThoughtConfig config_;
  FlopsLedger& ledger_;
};

}  // namespace rebase
