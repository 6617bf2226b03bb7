#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "rebase/answers.hpp"
#include "rebase/backends.hpp"
#include "rebase/errors.hpp"
#include "rebase/rng.hpp"
#include "support/reference_rng.hpp"

using namespace rebase;
using doctest::Approx;

TEST_CASE("splitmix64 matches an independent implementation") {
  for (std::uint64_t seed : {UINT64_C(0), UINT64_C(1), UINT64_C(42),
                             UINT64_C(0xDEADBEEF), UINT64_C(1) << 63}) {
    CHECK(splitmix64(seed) == reference::splitmix64_once(seed));
  }
}

TEST_CASE("unit uniform stays inside the half-open interval") {
  CHECK(unit_uniform(0) == 0.0);
  // The largest raw value must still map strictly below 1, otherwise a
  // success probability of exactly 1 could fail.
  CHECK(unit_uniform(std::numeric_limits<std::uint64_t>::max()) < 1.0);
  CHECK(unit_uniform(std::numeric_limits<std::uint64_t>::max()) > 0.999);
}

TEST_CASE("path hashes separate by prefix, slot, salt, and seed") {
  std::vector<std::uint64_t> a{0, 1};
  std::vector<std::uint64_t> b{0, 2};
  std::vector<std::uint64_t> c{1, 1};
  CHECK(path_hash(1, a, 7) == path_hash(1, a, 7));
  CHECK(path_hash(1, a, 7) != path_hash(1, b, 7));
  CHECK(path_hash(1, a, 7) != path_hash(1, c, 7));
  CHECK(path_hash(1, a, 7) != path_hash(1, a, 8));
  CHECK(path_hash(1, a, 7) != path_hash(2, a, 7));
  std::vector<std::uint64_t> prefix{0};
  CHECK(path_hash(1, a, 7) != path_hash(1, prefix, 7));
}

TEST_CASE("mixed success probability is exact at its endpoints") {
  double p = 0.55;
  double p_think = 0.8300000000000001;
  CHECK(mixed_success_prob(p, p_think, 0.0) == p);
  CHECK(mixed_success_prob(p, p_think, 1.0) == p_think);
  double mid = mixed_success_prob(p, p_think, 0.5);
  CHECK(mid == Approx(0.69));
  CHECK(mid >= std::min(p, p_think));
  CHECK(mid <= std::max(p, p_think));
  // Decreasing direction works too.
  CHECK(mixed_success_prob(0.9, 0.1, 1.0) == 0.1);
  CHECK_THROWS_AS(mixed_success_prob(1.5, 0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(mixed_success_prob(0.5, 0.5, -0.1), ConfigError);
}

TEST_CASE("token estimation rounds up") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("a") == 1);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("thought budgets follow the linear schedule") {
  ThoughtConfig config;
  config.thought_budget = 16;
  config.budget_per_depth = 4;
  CHECK(config.budget_at(0) == 16);
  CHECK(config.budget_at(1) == 20);
  CHECK(config.budget_at(3) == 28);
  CHECK_THROWS_AS((ThoughtConfig{16, 0, 1.5, 0.5}.validate()), ConfigError);
}

namespace {

SimulatedTaskSpec basic_spec() {
  SimulatedTaskSpec spec;
  spec.seed = 1234;
  spec.step_success_prob = 0.5;
  spec.reward_fidelity = 1.0;
  spec.steps_to_solution = 3;
  spec.gold_answer = 417;
  spec.tokens_per_step = 32;
  return spec;
}

}  // namespace

TEST_CASE("simulated steps are deterministic in (seed, path)") {
  SimulatedTaskSpec spec = basic_spec();
  GenerationRequest request;
  std::vector<std::uint64_t> path{0, 1};
  GenerationStep first = sim_generate_step(spec, path, request);
  GenerationStep second = sim_generate_step(spec, path, request);
  CHECK(first.text == second.text);
  CHECK(first.token_count == spec.tokens_per_step);
  CHECK_FALSE(first.terminal);  // depth 2 of 3
  CHECK_FALSE(extract_answer(first.text).has_value());

  spec.seed = 555;
  GenerationStep reseeded = sim_generate_step(spec, path, request);
  CHECK(reseeded.text != first.text);
}

TEST_CASE("simulated paths terminate exactly at the solution depth") {
  SimulatedTaskSpec spec = basic_spec();
  GenerationRequest request;
  for (std::uint64_t slot = 0; slot < 20; ++slot) {
    std::vector<std::uint64_t> path{slot};
    CHECK_FALSE(sim_generate_step(spec, path, request).terminal);
    path = {slot, 0};
    CHECK_FALSE(sim_generate_step(spec, path, request).terminal);
    path = {slot, 0, 0};
    GenerationStep last = sim_generate_step(spec, path, request);
    CHECK(last.terminal);
    CHECK(extract_answer(last.text).has_value());
  }
}

TEST_CASE("empty paths are rejected") {
  GenerationRequest request;
  CHECK_THROWS_AS(
      sim_generate_step(basic_spec(), std::vector<std::uint64_t>{}, request),
      DomainError);
}

TEST_CASE("certain success always lands on the gold answer") {
  SimulatedTaskSpec spec = basic_spec();
  spec.step_success_prob = 1.0;
  GenerationRequest request;
  for (std::uint64_t slot = 0; slot < 50; ++slot) {
    std::vector<std::uint64_t> path{slot, 0, 0};
    GenerationStep step = sim_generate_step(spec, path, request);
    CHECK(extract_answer(step.text) == std::to_string(spec.gold_answer));
  }
}

TEST_CASE("certain failure never lands on the gold answer") {
  SimulatedTaskSpec spec = basic_spec();
  spec.step_success_prob = 0.0;
  GenerationRequest request;
  for (std::uint64_t slot = 0; slot < 50; ++slot) {
    std::vector<std::uint64_t> path{slot, 0, 0};
    GenerationStep step = sim_generate_step(spec, path, request);
    auto answer = extract_answer(step.text);
    REQUIRE(answer.has_value());
    CHECK(*answer != std::to_string(spec.gold_answer));
  }
}

TEST_CASE("gold-track predicate requires every step to succeed") {
  SimulatedTaskSpec spec = basic_spec();
  std::vector<std::uint64_t> path{3, 1, 4};
  CHECK(sim_path_on_gold_track(spec, path, 1.0));
  CHECK_FALSE(sim_path_on_gold_track(spec, path, 0.0));
  // A gold track at some probability stays gold at any higher probability.
  for (double lo : {0.2, 0.4, 0.6, 0.8}) {
    if (sim_path_on_gold_track(spec, path, lo)) {
      CHECK(sim_path_on_gold_track(spec, path, lo + 0.1));
    }
  }
}

TEST_CASE("faithful rewards report exactly the two signal levels") {
  SimulatedTaskSpec spec = basic_spec();
  std::vector<std::uint64_t> path{2, 0};
  CHECK(sim_reward(spec, true, path) == 0.9);
  CHECK(sim_reward(spec, false, path) == 0.1);
}

TEST_CASE("unfaithful rewards are path-keyed noise in the unit interval") {
  SimulatedTaskSpec spec = basic_spec();
  spec.reward_fidelity = 0.0;
  std::set<double> seen;
  for (std::uint64_t slot = 0; slot < 20; ++slot) {
    std::vector<std::uint64_t> path{slot};
    double noisy = sim_reward(spec, true, path);
    CHECK(noisy >= 0.0);
    CHECK(noisy < 1.0);
    // Independent of the correctness bit when fidelity is zero.
    CHECK(sim_reward(spec, false, path) == noisy);
    seen.insert(noisy);
  }
  CHECK(seen.size() > 10);  // actually varies by path
}

TEST_CASE("simulated backend scores agree with its own generations") {
  SimulatedTaskSpec spec = basic_spec();
  SimulatedBackend backend(spec);
  GenerationRequest request;
  for (std::uint64_t slot = 0; slot < 30; ++slot) {
    StepQuery query;
    query.request = request;
    query.path = {slot, 0, 0};
    query.depth = 3;
    GenerationStep step = backend.generate(query);
    RewardQuery reward_query;
    reward_query.path = query.path;
    double reward = backend.score(reward_query);
    bool is_gold = extract_answer(step.text) == std::to_string(spec.gold_answer);
    CHECK(reward == (is_gold ? 0.9 : 0.1));
  }
}

TEST_CASE("thought mixing shifts the simulated success probability") {
  SimulatedTaskSpec spec = basic_spec();
  ThoughtConfig thought;
  thought.mixing_weight = 1.0;
  thought.thought_success_prob = 1.0;
  SimulatedBackend boosted(spec, thought);
  CHECK(boosted.effective_success_prob() == 1.0);
  CHECK(boosted.native_thought_mixing());

  GenerationRequest request;
  StepQuery query;
  query.request = request;
  query.path = {9, 0, 0};
  query.depth = 3;
  CHECK(extract_answer(boosted.generate(query).text) ==
        std::to_string(spec.gold_answer));
  RewardQuery reward_query;
  reward_query.path = query.path;
  CHECK(boosted.score(reward_query) == 0.9);

  ThoughtConfig neutral;
  neutral.mixing_weight = 0.0;
  SimulatedBackend plain(spec);
  SimulatedBackend wrapped(spec, neutral);
  CHECK(wrapped.effective_success_prob() == plain.effective_success_prob());
}

namespace {

// Recording fake without native mixing, for exercising two-phase prompting.
class RecordingGenerator final : public StepGenerator {
 public:
  GenerationStep generate(const StepQuery& query) override {
    queries.push_back(query);
    GenerationStep step;
    step.text = "echo:" + std::to_string(queries.size());
    step.token_count = 5;
    return step;
  }
  std::vector<StepQuery> queries;
};

}  // namespace

TEST_CASE("thought wrapper with zero budget is a passthrough") {
  RecordingGenerator inner;
  FlopsLedger ledger(ModelShape{1, 4, 1, 8});
  ThoughtConfig config;
  config.thought_budget = 0;
  ThoughtWrapper wrapper(inner, config, ledger);
  StepQuery query;
  query.depth = 1;
  wrapper.generate(query);
  CHECK(inner.queries.size() == 1);
  CHECK(ledger.flops_for_label(kThoughtLabel) == 0);
  CHECK(ledger.total_flops() == 0);
}

TEST_CASE("thought wrapper charges the rationale budget natively") {
  SimulatedBackend inner(basic_spec());
  FlopsLedger ledger(ModelShape{1, 4, 1, 8});
  ThoughtConfig config;
  config.thought_budget = 16;
  ThoughtWrapper wrapper(inner, config, ledger);

  StepQuery query;
  query.path = {0};
  query.depth = 1;
  query.context_tokens = 10;
  GenerationStep wrapped_step = wrapper.generate(query);
  GenerationStep inner_step = inner.generate(query);
  CHECK(wrapped_step.text == inner_step.text);  // trajectory unchanged
  CHECK(ledger.flops_for_label(kThoughtLabel) > 0);
  std::uint64_t thought_tokens = 0;
  for (const CallRecord& record : ledger.records()) {
    if (record.label == kThoughtLabel) thought_tokens += record.tokens;
  }
  CHECK(thought_tokens == 16);
}

TEST_CASE("thought wrapper falls back to two-phase prompting") {
  RecordingGenerator inner;
  FlopsLedger ledger(ModelShape{1, 4, 1, 8});
  ThoughtConfig config;
  config.thought_budget = 24;
  ThoughtWrapper wrapper(inner, config, ledger);

  StepQuery query;
  query.request.prompt = "Q1";
  query.request.max_tokens = 256;
  query.depth = 1;
  wrapper.generate(query);

  REQUIRE(inner.queries.size() == 2);
  const StepQuery& rationale = inner.queries[0];
  CHECK(rationale.request.prompt == "Q1<thought>\n");
  CHECK(rationale.request.max_tokens == 24);
  REQUIRE(rationale.request.stop_sequences.size() == 1);
  CHECK(rationale.request.stop_sequences[0] == "</thought>");

  const StepQuery& visible = inner.queries[1];
  CHECK(visible.request.prompt == "Q1<thought>\necho:1\n</thought>\n");
  CHECK(visible.request.max_tokens == 256);
  CHECK(ledger.flops_for_label(kThoughtLabel) > 0);
}
