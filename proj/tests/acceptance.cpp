// Acceptance gate: one line per criterion, PASS/FAIL, with runtimes.
// Criterion 6 drives the CLI binary end to end; pass its path as argv[1].

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rebase/answers.hpp"
#include "rebase/backends.hpp"
#include "rebase/harness.hpp"
#include "rebase/metrics.hpp"
#include "rebase/scaling.hpp"
#include "rebase/search.hpp"

using namespace rebase;

namespace {

struct Failure {
  std::string message;
};

void expect(bool condition, const std::string& message) {
  if (!condition) throw Failure{message};
}

class Gate {
 public:
  // limit_seconds <= 0 means no enforced budget (runtime still reported).
  void criterion(int number, const std::string& title, double limit_seconds,
                 const std::function<void()>& body) {
    auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
      body();
    } catch (const Failure& f) {
      failure = f.message;
    } catch (const std::exception& e) {
      failure = std::string("unexpected exception: ") + e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (failure.empty() && limit_seconds > 0.0 && elapsed >= limit_seconds) {
      failure = "runtime " + std::to_string(elapsed) + " s exceeded the " +
                std::to_string(limit_seconds) + " s budget";
    }
    if (failure.empty()) {
      std::printf("PASS  %d  %s  (%.2f s)\n", number, title.c_str(), elapsed);
    } else {
      std::printf("FAIL  %d  %s  (%.2f s)\n        %s\n", number,
                  title.c_str(), elapsed, failure.c_str());
      all_passed_ = false;
    }
  }

  bool all_passed() const { return all_passed_; }

 private:
  bool all_passed_ = true;
};

std::string format_cell(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Golden efficiency table.

void golden_table() {
  struct Row {
    const char* label;
    double acc, tflops, seconds;          // published inputs
    double per_tflop, per_second, score;  // published derived cells
  };
  const Row rows[] = {
      {"base-6", 10.16, 11.22, 52.47, 0.91, 0.19, 17.29},
      {"quietstar-6", 32.03, 12.73, 554.66, 2.52, 0.06, 15.12},
      {"rebase-3", 10.94, 2.35, 8.47, 4.66, 1.29, 601.14},
      {"rebase-6", 10.16, 4.96, 17.82, 2.05, 0.57, 116.85},
      {"rebase-16", 12.50, 13.57, 46.90, 0.92, 0.27, 24.84},
      {"integration-3", 9.38, 4.25, 143.66, 2.21, 0.07, 15.47},
  };
  const double tol = 0.005;
  for (const Row& row : rows) {
    EfficiencyReport report =
        efficiency_report(row.acc, row.tflops, row.seconds, Convention::table1);
    auto check_cell = [&](const char* name, double got, double want) {
      expect(std::fabs(got - want) <= tol,
             std::string(row.label) + " " + name + ": got " +
                 format_cell(got) + ", want " + format_cell(want));
    };
    check_cell("acc/TFLOP", report.acc_per_tflop, row.per_tflop);
    check_cell("acc/sec", report.acc_per_second, row.per_second);
    check_cell("efficiency score", report.efficiency_score, row.score);
  }
}

// ---------------------------------------------------------------------------
// 2. Cost-formula oracle.

void cost_formula_oracle() {
  std::mt19937_64 rng(20250819);
  for (int trial = 0; trial < 100; ++trial) {
    std::uint64_t heads = 1 + rng() % 8;
    ModelShape shape{1 + rng() % 48, heads * (1 + rng() % 96), heads,
                     1 + rng() % 1024};

    unsigned __int128 d_attn = shape.d_model / shape.n_heads;
    unsigned __int128 params_oracle =
        2 * static_cast<unsigned __int128>(shape.d_model) * shape.n_layers *
        (2 * d_attn + shape.d_ff);
    expect(nonembedding_params(shape) ==
               static_cast<std::uint64_t>(params_oracle),
           "parameter count diverged from the wide-integer oracle");

    std::uint64_t ctx = rng() % 4096;
    unsigned __int128 forward_oracle =
        2 * params_oracle +
        2 * static_cast<unsigned __int128>(shape.n_layers) * ctx *
            shape.d_model;
    expect(forward_flops_per_token(shape, ctx) ==
               static_cast<std::uint64_t>(forward_oracle),
           "forward cost diverged from the wide-integer oracle");

    // Cost is affine in context length: exact intercept and slope.
    std::uint64_t c1 = rng() % 2048;
    std::uint64_t c2 = c1 + 1 + rng() % 2048;
    std::uint64_t slope = 2 * shape.n_layers * shape.d_model;
    expect(forward_flops_per_token(shape, 0) ==
               2 * nonembedding_params(shape),
           "zero-context cost must be exactly twice the parameter count");
    expect(forward_flops_per_token(shape, c2) -
                   forward_flops_per_token(shape, c1) ==
               slope * (c2 - c1),
           "context-length slope must be exactly 2 * n_layers * d_model");
  }
}

// ---------------------------------------------------------------------------
// 3. Allocation properties.

void allocation_properties() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng() % 8;
    std::vector<double> rewards(n);
    for (double& r : rewards) {
      do {
        r = unit(rng);
      } while (std::count(rewards.begin(), rewards.end(), r) > 1);
    }
    double temperature = 0.05 + 1.95 * unit(rng);
    std::uint64_t budget = 1 + rng() % 64;

    std::vector<std::uint64_t> counts =
        softmax_allocation(rewards, temperature, budget);

    expect(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) ==
               budget,
           "counts must sum to the budget");

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (rewards[i] > rewards[j]) {
          expect(counts[i] >= counts[j],
                 "higher reward must never receive fewer expansions");
        }
      }
    }

    // Equivariance under permutation (rewards are distinct by construction).
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = rewards[perm[i]];
    std::vector<std::uint64_t> shuffled_counts =
        softmax_allocation(shuffled, temperature, budget);
    for (std::size_t i = 0; i < n; ++i) {
      expect(shuffled_counts[i] == counts[perm[i]],
             "permuting rewards must permute counts identically");
    }

    // Vanishing temperature concentrates the whole budget on the argmax.
    std::size_t argmax = static_cast<std::size_t>(
        std::max_element(rewards.begin(), rewards.end()) - rewards.begin());
    std::vector<std::uint64_t> cold =
        softmax_allocation(rewards, 1e-6, budget);
    expect(cold[argmax] == budget,
           "near-zero temperature must concentrate on the unique argmax");

    // Symmetric case: equal rewards with a divisible budget split evenly.
    std::uint64_t per = 1 + rng() % 8;
    std::vector<double> equal(n, 0.6);
    std::vector<std::uint64_t> even =
        softmax_allocation(equal, temperature, per * n);
    for (std::uint64_t c : even) {
      expect(c == per, "equal rewards with a divisible budget must split "
                       "evenly");
    }
  }
}

// ---------------------------------------------------------------------------
// 4. Voting oracle.

void voting_oracle() {
  std::mt19937_64 rng(777);
  const char* pool[] = {"1", "2", "3", "4"};

  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng() % 8;
    std::vector<CandidateSolution> candidates(n);
    // Quarter-integer weights are exact in binary, so ties really happen
    // and float summation order cannot blur them.
    std::vector<int> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 5 == 0) {
        candidates[i].answer = std::nullopt;
      } else {
        candidates[i].answer = pool[rng() % 4];
      }
      scaled[i] = static_cast<int>(1 + rng() % 4);
      candidates[i].weight = scaled[i] * 0.25;
    }

    // Brute-force oracle in integer arithmetic.
    auto oracle = [&](bool unit_weights) -> std::optional<std::string> {
      std::vector<std::string> order;
      std::map<std::string, long> sums;
      std::map<std::string, std::size_t> first;
      for (std::size_t i = 0; i < n; ++i) {
        if (!candidates[i].answer) continue;
        const std::string& a = *candidates[i].answer;
        if (!sums.count(a)) {
          order.push_back(a);
          first[a] = i;
        }
        sums[a] += unit_weights ? 4 : scaled[i];
      }
      if (order.empty()) return std::nullopt;
      std::string best = order.front();
      for (const std::string& a : order) {
        if (sums[a] > sums[best] ||
            (sums[a] == sums[best] && first[a] < first[best])) {
          best = a;
        }
      }
      return best;
    };

    expect(weighted_vote(candidates) == oracle(false),
           "weighted_vote diverged from the brute-force oracle");
    expect(majority_vote(candidates) == oracle(true),
           "majority_vote diverged from the brute-force oracle");
  }
}

// ---------------------------------------------------------------------------
// 5. Search dominance.

RunConfig dominance_config(Method method, std::uint64_t fanout) {
  RunConfig config;
  config.method = method;
  config.backend = BackendKind::simulated;
  config.seed = 1702;
  config.shape = ModelShape::tiny();
  config.sim.step_success_prob = 0.55;
  config.sim.reward_fidelity = 1.0;
  config.sim.steps_to_solution = 3;
  config.sim.tokens_per_step = 32;
  config.search.max_depth = 4;
  config.jobs = 4;
  if (method == Method::rebase) {
    config.width = fanout;
  } else {
    config.votes = fanout;
  }
  return config;
}

void search_dominance() {
  auto problems = synthetic_problems(200, 424242);

  auto accuracy = [&](Method method, std::uint64_t fanout) {
    RunOutput output = run_benchmark(dominance_config(method, fanout), problems);
    return accuracy_pct(output.metrics);
  };

  double base3 = accuracy(Method::base, 3);
  double rebase3 = accuracy(Method::rebase, 3);
  double rebase16 = accuracy(Method::rebase, 16);

  expect(rebase3 >= base3,
         "width-3 weighted-vote search (" + format_cell(rebase3) +
             "%) must not trail the 3-vote baseline (" + format_cell(base3) +
             "%)");
  expect(rebase16 >= rebase3 - 2.0,
         "width-16 (" + format_cell(rebase16) +
             "%) must hold within 2 points of width-3 (" +
             format_cell(rebase3) + "%)");
}

// ---------------------------------------------------------------------------
// 6. CLI determinism.

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(static_cast<bool>(in), "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void cli_determinism(const std::string& cli) {
  expect(!cli.empty(), "pass the CLI binary path as argv[1]");
  namespace fs = std::filesystem;
  fs::path dir = fs::path("/tmp") /
                 ("rebase_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::string dataset = (dir / "dataset.jsonl").string();
  std::string out = (dir / "results.jsonl").string();

  auto shell = [&](const std::string& command) {
    int rc = std::system(command.c_str());
    expect(rc == 0, "command failed (" + std::to_string(rc) + "): " + command);
  };

  shell(cli + " synth --count 12 --seed 7 --out " + dataset + " > /dev/null");

  std::string run = cli + " run --method rebase --width 3 --backend simulated" +
                    " --seed 42 --max-depth 4 --sim-steps 3 --dataset " +
                    dataset + " --out " + out;
  shell(run + " > /dev/null");
  std::string first = read_bytes(out);
  shell(run + " > /dev/null");
  expect(read_bytes(out) == first,
         "rerunning the same configuration changed the results file");
  shell(run + " --jobs 4 > /dev/null");
  expect(read_bytes(out) == first,
         "running with --jobs 4 changed the results file");

  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 7. FLOPs scale with width.

void flops_width_scaling() {
  auto problems = synthetic_problems(40, 99);
  double per_width_at_3 = 0.0;
  for (std::uint64_t width : {3, 6, 16}) {
    RunOutput output =
        run_benchmark(dominance_config(Method::rebase, width), problems);
    double per_width =
        static_cast<double>(output.generation_flops) / static_cast<double>(width);
    if (width == 3) {
      per_width_at_3 = per_width;
      continue;
    }
    double deviation = std::fabs(per_width - per_width_at_3) / per_width_at_3;
    expect(deviation <= 0.05,
           "generated-token FLOPs at width " + std::to_string(width) +
               " deviate " + format_cell(deviation * 100) +
               "% from width-proportionality");
  }
}

// ---------------------------------------------------------------------------
// 8. Thought-wrapper contracts.

void thought_contracts() {
  SimulatedTaskSpec spec;
  spec.seed = 88;
  spec.step_success_prob = 0.55;
  spec.reward_fidelity = 1.0;
  spec.steps_to_solution = 3;
  spec.gold_answer = 321;
  spec.tokens_per_step = 8;

  ThoughtConfig identity;
  identity.thought_budget = 16;
  identity.mixing_weight = 0.0;
  identity.thought_success_prob = 0.9;

  // Identity mixing never changes a trajectory, only its cost.
  SimulatedBackend plain(spec);
  SimulatedBackend mixed(spec, identity);
  FlopsLedger wrapper_ledger(ModelShape::tiny());
  ThoughtWrapper wrapper(mixed, identity, wrapper_ledger);
  GenerationRequest request;
  request.max_tokens = 64;
  for (std::uint64_t slot = 0; slot < 8; ++slot) {
    for (std::uint64_t depth = 1; depth <= 3; ++depth) {
      StepQuery query;
      query.request = request;
      query.path.assign(depth, 0);
      query.path[0] = slot;
      query.depth = depth;
      expect(wrapper.generate(query).text == plain.generate(query).text,
             "zero mixing weight must leave trajectories unchanged");
    }
  }

  SearchConfig search;
  search.width = 4;
  search.max_depth = 4;
  FlopsLedger ledger_a(ModelShape::tiny());
  FlopsLedger ledger_b(ModelShape::tiny());
  FlopsLedger ledger_c(ModelShape::tiny());
  ThoughtWrapper search_wrapper(mixed, identity, ledger_b);
  SearchResult bare =
      rebase_search("Q", plain, plain, search, ledger_a, request);
  SearchResult wrapped =
      rebase_search("Q", search_wrapper, mixed, search, ledger_b, request);
  expect(bare.candidates.size() == wrapped.candidates.size(),
         "identity mixing changed the candidate count");
  for (std::size_t i = 0; i < bare.candidates.size(); ++i) {
    expect(bare.candidates[i].answer == wrapped.candidates[i].answer &&
               bare.candidates[i].full_text == wrapped.candidates[i].full_text,
           "identity mixing changed a candidate");
  }

  // Ledger charge: exactly budget x steps rationale tokens.
  ThoughtWrapper chain_wrapper(mixed, identity, ledger_c);
  sample_baseline("Q", chain_wrapper, 1, ledger_c, request, 10);
  expect(ledger_c.thought_tokens() ==
             identity.thought_budget * spec.steps_to_solution,
         "thought tokens must equal budget x steps (got " +
             std::to_string(ledger_c.thought_tokens()) + ")");

  // Interpolation grid, endpoints exact.
  const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (double p : grid) {
    for (double p_think : grid) {
      for (double w : grid) {
        double got = mixed_success_prob(p, p_think, w);
        double want = p + w * (p_think - p);
        expect(std::fabs(got - want) <= 1e-12,
               "mixing interpolation drifted at p=" + format_cell(p) +
                   " p_think=" + format_cell(p_think) + " w=" + format_cell(w));
      }
    }
    expect(mixed_success_prob(p, 1.0 - p, 0.0) == p,
           "w=0 must return the base probability bit-for-bit");
    expect(mixed_success_prob(p, 1.0 - p, 1.0) == 1.0 - p,
           "w=1 must return the thought probability bit-for-bit");
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";

  Gate gate;
  gate.criterion(1,
                 "golden efficiency table: six reference rows reproduce all "
                 "18 derived cells within 0.005",
                 1.0, golden_table);
  gate.criterion(2,
                 "parameter and forward-cost formulas match a 128-bit oracle "
                 "on 100 random shapes",
                 1.0, cost_formula_oracle);
  gate.criterion(3,
                 "softmax budget allocation properties hold on 1000 random "
                 "inputs",
                 5.0, allocation_properties);
  gate.criterion(4,
                 "weighted and majority voting agree with a brute-force "
                 "oracle on 1000 candidate sets",
                 1.0, voting_oracle);
  gate.criterion(5,
                 "on 200 synthetic problems width-3 search beats the 3-vote "
                 "baseline and width-16 holds within 2 points",
                 30.0, search_dominance);
  gate.criterion(6,
                 "CLI reruns and worker counts produce byte-identical "
                 "results files",
                 30.0, [&] { cli_determinism(cli); });
  gate.criterion(7,
                 "generated-token FLOPs stay within 5% of proportional to "
                 "width across {3, 6, 16}",
                 0.0, flops_width_scaling);
  gate.criterion(8,
                 "thought wrapper: identity mixing, exact budget charging, "
                 "interpolation grid",
                 0.0, thought_contracts);
  gate.criterion(9,
                 "scope statement: absolute reference accuracies and "
                 "wall-clock times are out of desk-scale reach",
                 0.0, [] {
                   std::printf(
                       "        The reference rows' absolute numbers (e.g. "
                       "32.03%% accuracy, 554.66 s) come from a Mistral-7B "
                       "checkpoint on datacenter GPUs; this repository does "
                       "not reproduce them. Criteria 1-8 validate the "
                       "formulas, search behavior, and derived-metric "
                       "pipeline at desk scale instead.\n");
                 });

  if (!gate.all_passed()) {
    std::printf("acceptance: FAILURES PRESENT\n");
    return 1;
  }
  std::printf("acceptance: all criteria passed\n");
  return 0;
}
