#include "rebase/backends.hpp"

#include <algorithm>
#include <cstdio>

#include "rebase/answers.hpp"
#include "rebase/errors.hpp"
#include "rebase/rng.hpp"

namespace rebase {

namespace {

// Independent draw streams over the same path.
constexpr std::uint64_t kStepSalt = 0xA0761D6478BD642FULL;
constexpr std::uint64_t kWrongAnswerSalt = 0xE7037ED1A0B428DBULL;
constexpr std::uint64_t kFidelitySalt = 0x8EBC6AF09C88C6E3ULL;
constexpr std::uint64_t kNoiseSalt = 0x589965CC75374CC3ULL;

double step_draw(const SimulatedTaskSpec& spec,
                 std::span<const std::uint64_t> path) {
  return unit_uniform(path_hash(spec.seed, path, kStepSalt));
}

void check_prob(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

void SimulatedTaskSpec::validate() const {
  check_prob(step_success_prob, "step_success_prob");
  check_prob(reward_fidelity, "reward_fidelity");
  if (steps_to_solution < 1) {
    throw ConfigError("steps_to_solution must be >= 1");
  }
  if (tokens_per_step < 1) {
    throw ConfigError("tokens_per_step must be >= 1");
  }
}

void ThoughtConfig::validate() const {
  check_prob(mixing_weight, "mixing_weight");
  check_prob(thought_success_prob, "thought_success_prob");
}

std::uint64_t ThoughtConfig::budget_at(std::uint64_t depth) const {
  return thought_budget + budget_per_depth * depth;
}

double mixed_success_prob(double p, double p_think, double w) {
  check_prob(p, "step_success_prob");
  check_prob(p_think, "thought_success_prob");
  check_prob(w, "mixing_weight");
  if (w == 0.0) return p;
  if (w == 1.0) return p_think;
  double p_eff = p + w * (p_think - p);
  return std::clamp(p_eff, std::min(p, p_think), std::max(p, p_think));
}

std::uint64_t estimate_tokens(std::string_view text) {
  return (static_cast<std::uint64_t>(text.size()) + 3) / 4;
}

bool sim_path_on_gold_track(const SimulatedTaskSpec& spec,
                            std::span<const std::uint64_t> path,
                            double success_prob) {
  for (std::size_t len = 1; len <= path.size(); ++len) {
    if (!(step_draw(spec, path.subspan(0, len)) < success_prob)) {
      return false;
    }
  }
  return true;
}

GenerationStep sim_generate_step(const SimulatedTaskSpec& spec,
                                 std::span<const std::uint64_t> path,
                                 const GenerationRequest& request) {
  return sim_generate_step_with_prob(spec, path, request,
                                     spec.step_success_prob);
}

GenerationStep sim_generate_step_with_prob(const SimulatedTaskSpec& spec,
                                           std::span<const std::uint64_t> path,
                                           const GenerationRequest& request,
                                           double success_prob) {
  (void)request;  // the simulated world is keyed on (seed, path) alone
  spec.validate();
  if (path.empty()) {
    throw DomainError("sim_generate_step: path must be nonempty");
  }

  GenerationStep step;
  step.token_count = spec.tokens_per_step;

  std::uint64_t depth = path.size();
  char buf[96];
  if (depth < spec.steps_to_solution) {
    std::uint64_t tag = path_hash(spec.seed, path, kStepSalt);
    std::snprintf(buf, sizeof(buf), "Step %llu: partial progress (%08llx).",
                  static_cast<unsigned long long>(depth),
                  static_cast<unsigned long long>(tag & 0xFFFFFFFFULL));
    step.text = buf;
    step.terminal = false;
    return step;
  }

  // Every path terminates once it is steps_to_solution deep.
  step.terminal = true;
  if (sim_path_on_gold_track(spec, path, success_prob)) {
    std::snprintf(buf, sizeof(buf),
                  "Step %llu: the final answer is #### %lld",
                  static_cast<unsigned long long>(depth),
                  static_cast<long long>(spec.gold_answer));
  } else {
    std::uint64_t wrong_bits = path_hash(spec.seed, path, kWrongAnswerSalt);
    long long wrong = static_cast<long long>(spec.gold_answer) + 1 +
                      static_cast<long long>(wrong_bits % 9973);
    std::snprintf(buf, sizeof(buf),
                  "Step %llu: the final answer is #### %lld",
                  static_cast<unsigned long long>(depth), wrong);
  }
  step.text = buf;
  return step;
}

double sim_reward(const SimulatedTaskSpec& spec, bool node_on_correct_path,
                  std::span<const std::uint64_t> path) {
  spec.validate();
  double fidelity_draw = unit_uniform(path_hash(spec.seed, path, kFidelitySalt));
  if (fidelity_draw < spec.reward_fidelity) {
    return node_on_correct_path ? 0.9 : 0.1;
  }
  return unit_uniform(path_hash(spec.seed, path, kNoiseSalt));
}

SimulatedBackend::SimulatedBackend(SimulatedTaskSpec spec,
                                   std::optional<ThoughtConfig> thought)
    : spec_(spec), success_prob_(spec.step_success_prob) {
  spec_.validate();
  if (thought) {
    thought->validate();
    success_prob_ = mixed_success_prob(spec_.step_success_prob,
                                       thought->thought_success_prob,
                                       thought->mixing_weight);
  }
}

GenerationStep SimulatedBackend::generate(const StepQuery& query) {
  return sim_generate_step_with_prob(spec_, query.path, query.request,
                                     success_prob_);
}

double SimulatedBackend::score(const RewardQuery& query) {
  bool on_track = sim_path_on_gold_track(spec_, query.path, success_prob_);
  return sim_reward(spec_, on_track, query.path);
}

ThoughtWrapper::ThoughtWrapper(StepGenerator& inner, ThoughtConfig config,
                               FlopsLedger& ledger)
    : inner_(inner), config_(config), ledger_(ledger) {
  config_.validate();
}

GenerationStep ThoughtWrapper::generate(const StepQuery& query) {
  std::uint64_t budget = config_.budget_at(query.depth);
  if (budget == 0) {
    return inner_.generate(query);
  }

  if (inner_.native_thought_mixing()) {
    // The inner backend realizes the probability shift itself; the wrapper
    // only pays for the rationale tokens.
    ledger_.record_thought(query.context_tokens, budget);
    return inner_.generate(query);
  }

  // Two-phase prompting: request a rationale first, then the visible step
  // conditioned on it. The rationale never enters the solution text.
  StepQuery rationale_query = query;
  rationale_query.request.prompt += "<thought>\n";
  rationale_query.request.max_tokens = budget;
  rationale_query.request.stop_sequences = {"</thought>"};
  GenerationStep rationale = inner_.generate(rationale_query);
  ledger_.record_thought(query.context_tokens, budget);

  StepQuery step_query = query;
  step_query.request.prompt +=
      "<thought>\n" + rationale.text + "\n</thought>\n";
  return inner_.generate(step_query);
}

}  // namespace rebase
