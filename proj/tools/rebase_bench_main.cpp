// rebase-bench: reward-balanced search benchmark harness.
//
// Subcommands:
//   run     execute a benchmark configuration over a JSONL dataset
//   report  tabulate one or more results files and derive efficiency numbers
//   flops   print exact parameter and forward-pass counts for a model shape
//   synth   emit a deterministic synthetic dataset
//
// Exit codes: 0 success, 1 configuration error, 2 dataset error,
// 3 backend unreachable.

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rebase/errors.hpp"
#include "rebase/harness.hpp"
#include "rebase/http_backend.hpp"
#include "rebase/metrics.hpp"
#include "rebase/scaling.hpp"

namespace {

using namespace rebase;

struct ShapeFlags {
  std::string preset;
  std::uint64_t n_layers = 0;
  std::uint64_t d_model = 0;
  std::uint64_t n_heads = 0;
  std::uint64_t d_ff = 0;
};

void add_shape_flags(CLI::App* cmd, ShapeFlags& flags) {
  cmd->add_option("--shape", flags.preset,
                  "Model shape preset (mistral-7b-paper, tiny)");
  cmd->add_option("--layers", flags.n_layers, "Number of transformer layers");
  cmd->add_option("--dmodel", flags.d_model, "Residual stream width");
  cmd->add_option("--heads", flags.n_heads, "Attention head count");
  cmd->add_option("--dff", flags.d_ff, "Feed-forward inner width");
}

ModelShape resolve_shape(const ShapeFlags& flags, const ModelShape& fallback) {
  bool has_dims = flags.n_layers || flags.d_model || flags.n_heads || flags.d_ff;
  if (!flags.preset.empty()) {
    if (has_dims) {
      throw ConfigError("--shape conflicts with explicit dimension flags");
    }
    auto preset = shape_preset(flags.preset);
    if (!preset) {
      throw ConfigError("unknown shape preset: " + flags.preset);
    }
    return *preset;
  }
  if (!has_dims) return fallback;
  ModelShape shape{flags.n_layers, flags.d_model, flags.n_heads, flags.d_ff};
  shape.validate();
  return shape;
}

void print_report_table(const std::vector<std::pair<std::string, EfficiencyReport>>& rows,
                        const std::vector<std::pair<double, double>>& resources) {
  std::printf("%-16s %8s %9s %9s %10s %8s %11s\n", "Config", "Acc %",
              "FLOPs T", "Time s", "Acc/TFLOP", "Acc/Sec", "Eff. Score");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [label, report] = rows[i];
    const auto& [tflops, seconds] = resources[i];
    std::printf("%-16s %8.2f %9.2f %9.2f %10.2f %8.2f %11.2f\n", label.c_str(),
                report.accuracy_pct, tflops, seconds, report.acc_per_tflop,
                report.acc_per_second, report.efficiency_score);
  }
}

int cmd_flops(const ShapeFlags& shape_flags, std::uint64_t n_ctx) {
  ModelShape shape = resolve_shape(shape_flags, ModelShape::mistral_7b_paper());
  std::uint64_t params = nonembedding_params(shape);
  std::uint64_t flops = forward_flops_per_token(shape, n_ctx);
  std::printf("shape: layers=%llu dmodel=%llu heads=%llu dff=%llu (dattn=%llu)\n",
              static_cast<unsigned long long>(shape.n_layers),
              static_cast<unsigned long long>(shape.d_model),
              static_cast<unsigned long long>(shape.n_heads),
              static_cast<unsigned long long>(shape.d_ff),
              static_cast<unsigned long long>(derived_attn_dim(shape)));
  std::printf("non-embedding params: %llu (%.4g T)\n",
              static_cast<unsigned long long>(params),
              static_cast<double>(params) / 1e12);
  std::printf("forward FLOPs per token at n_ctx=%llu: %llu (%.4g TFLOP)\n",
              static_cast<unsigned long long>(n_ctx),
              static_cast<unsigned long long>(flops),
              static_cast<double>(flops) / 1e12);
  return 0;
}

int cmd_run(RunConfig& config, const ShapeFlags& shape_flags,
            const std::optional<std::string>& base_url_flag) {
  config.shape = resolve_shape(shape_flags, ModelShape::mistral_7b_paper());
  if (config.backend == BackendKind::http) {
    config.base_url = resolve_backend_url(base_url_flag);
  }
  config.validate();

  RunOutput output = run_benchmark(config);
  write_results(output, config, config.output_path);

  if (output.all_backend_unavailable) {
    std::fprintf(stderr, "error: backend unreachable for every problem\n");
    std::fprintf(stderr, "diagnostic results written to %s\n",
                 config.output_path.c_str());
    return 3;
  }

  EfficiencyReport report = efficiency_report(output.metrics, Convention::exact);
  std::printf("%s: %llu/%llu correct (%.2f%%), %.4g TFLOPs, %.4g s\n",
              config.label().c_str(),
              static_cast<unsigned long long>(output.metrics.correct_count),
              static_cast<unsigned long long>(output.metrics.total_count),
              report.accuracy_pct, output.metrics.tflops,
              output.metrics.seconds);
  std::printf("acc/TFLOP %.4g, acc/sec %.4g, efficiency score %.4g\n",
              report.acc_per_tflop, report.acc_per_second,
              report.efficiency_score);
  std::printf("results written to %s\n", config.output_path.c_str());
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs,
               const std::string& convention_flag,
               const std::string& out_path) {
  auto convention = parse_convention(convention_flag);
  if (!convention) {
    throw ConfigError("unknown convention: " + convention_flag +
                      " (expected exact or table1)");
  }

  std::vector<std::pair<std::string, EfficiencyReport>> rows;
  std::vector<std::pair<double, double>> resources;
  nlohmann::json out_lines = nlohmann::json::array();
  for (const std::string& path : inputs) {
    ResultsFile file = read_results(path);
    RunMetrics metrics{file.summary.correct_count, file.summary.total_count,
                       file.summary.tflops, file.summary.seconds};
    EfficiencyReport report = efficiency_report(metrics, *convention);
    rows.emplace_back(file.label, report);
    resources.emplace_back(metrics.tflops, metrics.seconds);

    nlohmann::json j;
    j["label"] = file.label;
    j["correct_count"] = metrics.correct_count;
    j["total_count"] = metrics.total_count;
    j["tflops"] = metrics.tflops;
    j["seconds"] = metrics.seconds;
    j["convention"] = std::string(convention_name(*convention));
    j["accuracy_pct"] = report.accuracy_pct;
    j["acc_per_tflop"] = report.acc_per_tflop;
    j["acc_per_second"] = report.acc_per_second;
    j["efficiency_score"] = report.efficiency_score;
    j["config_digest"] = file.config_digest;
    out_lines.push_back(std::move(j));
  }

  print_report_table(rows, resources);

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DatasetError("cannot open summary file for writing: " + out_path);
    }
    for (const nlohmann::json& j : out_lines) out << j.dump() << "\n";
  }
  return 0;
}

int cmd_synth(std::size_t count, std::uint64_t seed, const std::string& out) {
  std::vector<ProblemInstance> problems = synthetic_problems(count, seed);
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw DatasetError("cannot open dataset file for writing: " + out);
  }
  for (const ProblemInstance& p : problems) {
    nlohmann::json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["answer"] = "Deterministic synthetic worked solution.\n#### " +
                  p.gold_answer;
    file << j.dump() << "\n";
  }
  std::printf("wrote %zu problems to %s\n", problems.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-balanced search benchmark harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a benchmark configuration");
  RunConfig config;
  std::string method_flag = "base";
  std::string backend_flag = "simulated";
  std::string aggregation_flag = "weighted_vote";
  std::optional<std::string> base_url_flag;
  ShapeFlags run_shape;
  bool thought_requested = false;
  ThoughtConfig thought;

  run->add_option("--method", method_flag,
                  "base | quietstar | rebase | integration")
      ->required();
  run->add_option("--dataset", config.dataset_path, "JSONL dataset path")
      ->required();
  run->add_option("--out", config.output_path, "Results JSONL path")
      ->required();
  run->add_option("--backend", backend_flag, "simulated | http");
  run->add_option("--width", config.width,
                  "Per-level expansion budget (rebase/integration)");
  run->add_option("--votes", config.votes, "Sample count (base/quietstar)");
  run->add_option("--temperature", config.search.temperature,
                  "Softmax selection temperature");
  run->add_option("--max-depth", config.search.max_depth,
                  "Maximum solution depth");
  run->add_option("--quality-threshold", config.search.quality_threshold,
                  "Prune children scoring below this reward (0 disables)");
  run->add_option("--aggregation", aggregation_flag,
                  "weighted_vote | majority_vote | best_of_n");
  run->add_option("--max-step-tokens", config.search.max_step_tokens,
                  "Token budget requested per step");
  run->add_option("--seed", config.seed, "Run seed");
  run->add_option("--jobs", config.jobs, "Worker thread count");
  run->add_option("--base-url", base_url_flag,
                  std::string("Backend endpoint (overrides ") +
                      kBackendUrlEnvVar + ")");
  run->add_option("--sim-p", config.sim.step_success_prob,
                  "Simulated per-step success probability");
  run->add_option("--sim-fidelity", config.sim.reward_fidelity,
                  "Simulated reward fidelity");
  run->add_option("--sim-steps", config.sim.steps_to_solution,
                  "Simulated steps per solution");
  run->add_option("--sim-tokens-per-step", config.sim.tokens_per_step,
                  "Simulated tokens per step");
  run->add_option("--sec-per-token", config.seconds_per_token,
                  "Simulated seconds per token (time proxy)");
  run->add_option("--gen-temperature", config.gen_temperature,
                  "Sampling temperature sent to the backend");
  auto* budget_opt = run->add_option("--thought-budget", thought.thought_budget,
                                     "Rationale tokens per step");
  auto* per_depth_opt =
      run->add_option("--thought-budget-per-depth", thought.budget_per_depth,
                      "Extra rationale tokens per unit depth");
  auto* mix_opt = run->add_option("--mixing-weight", thought.mixing_weight,
                                  "Thought mixing weight in [0,1]");
  auto* psucc_opt =
      run->add_option("--thought-success-prob", thought.thought_success_prob,
                      "Simulated success probability of a pure thought step");
  add_shape_flags(run, run_shape);

  // report
  auto* report = app.add_subcommand("report", "Tabulate results files");
  std::vector<std::string> report_inputs;
  std::string report_convention = "exact";
  std::string report_out;
  report->add_option("--in", report_inputs, "Results JSONL file(s)")
      ->required()
      ->expected(-1);
  report->add_option("--convention", report_convention, "exact | table1");
  report->add_option("--out", report_out, "Machine-readable summary path");

  // flops
  auto* flops = app.add_subcommand("flops", "Exact parameter/FLOP counts");
  ShapeFlags flops_shape;
  std::uint64_t flops_ctx = 0;
  add_shape_flags(flops, flops_shape);
  flops->add_option("--ctx", flops_ctx, "Context length for per-token cost");

  // synth
  auto* synth = app.add_subcommand("synth", "Emit a synthetic dataset");
  std::size_t synth_count = 16;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--count", synth_count, "Number of problems");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output JSONL path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  try {
    if (run->parsed()) {
      auto method = parse_method(method_flag);
      if (!method) throw ConfigError("unknown method: " + method_flag);
      config.method = *method;
      auto backend = parse_backend(backend_flag);
      if (!backend) throw ConfigError("unknown backend: " + backend_flag);
      config.backend = *backend;
      auto aggregation = parse_aggregation(aggregation_flag);
      if (!aggregation) {
        throw ConfigError("unknown aggregation: " + aggregation_flag);
      }
      config.search.aggregation = *aggregation;
      thought_requested = budget_opt->count() || per_depth_opt->count() ||
                          mix_opt->count() || psucc_opt->count();
      bool thought_method = config.method == Method::quietstar ||
                            config.method == Method::integration;
      if (thought_requested || thought_method) config.thought = thought;
      return cmd_run(config, run_shape, base_url_flag);
    }
    if (report->parsed()) {
      return cmd_report(report_inputs, report_convention, report_out);
    }
    if (flops->parsed()) {
      return cmd_flops(flops_shape, flops_ctx);
    }
    if (synth->parsed()) {
      return cmd_synth(synth_count, synth_seed, synth_out);
    }
  } catch (const DatasetError& e) {
    std::fprintf(stderr, "dataset error: %s\n", e.what());
    return 2;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "results error: %s\n", e.what());
    return 2;
  } catch (const BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
