#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rebase/backends.hpp"
#include "rebase/http_backend.hpp"
#include "rebase/metrics.hpp"
#include "rebase/scaling.hpp"
#include "rebase/search.hpp"

namespace rebase {

inline constexpr int kResultsSchemaVersion = 1;

struct ProblemInstance {
  std::string id;
  std::string question;
  std::string gold_answer;  // canonical numeral
};

enum class Method { base, quietstar, rebase, integration };
enum class BackendKind { simulated, http };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
std::string_view backend_name(BackendKind b);
std::optional<BackendKind> parse_backend(std::string_view name);

// Simulated-world knobs shared by every problem in a run; the per-problem
// seed and gold answer come from the dataset.
struct SimParams {
  double step_success_prob = 0.55;
  double reward_fidelity = 1.0;
  std::uint64_t steps_to_solution = 3;
  std::uint64_t tokens_per_step = 32;
};

struct RunConfig {
  Method method = Method::base;
  std::uint64_t width = 0;  // required for rebase / integration
  std::uint64_t votes = 6;  // used by base / quietstar
  BackendKind backend = BackendKind::simulated;
  std::optional<ThoughtConfig> thought;  // quietstar / integration
  std::uint64_t seed = 0;
  ModelShape shape = ModelShape::mistral_7b_paper();
  std::string dataset_path;
  std::string output_path;
  SearchConfig search;
  SimParams sim;
  double gen_temperature = 0.7;   // sampling temperature sent to backends
  double seconds_per_token = 0.001;  // simulated time proxy
  std::string base_url;           // http backend endpoint
  // Worker count. Execution knob only: never serialized, never digested,
  // and results are merged in dataset order, so jobs=1 and jobs=4 produce
  // byte-identical files.
  unsigned jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Stable FNV-1a hash over the canonical serialization, hex-encoded.
  // Pins every semantic field so mixed-config result files are detectable.
  std::string digest() const;

  // "rebase-3", "base-6", "quietstar-6", "integration-3", ...
  std::string label() const;
};

struct RunRecord {
  std::string problem_id;
  std::optional<std::string> predicted;
  bool correct = false;
  std::uint64_t flops = 0;
  double seconds = 0.0;
  std::vector<CandidateSolution> candidates;  // (answer, weight) pairs kept
  std::string config_digest;
  std::optional<std::string> error;  // backend failure, problem scored wrong
};

struct RunOutput {
  std::vector<RunRecord> records;
  RunMetrics metrics;
  std::uint64_t total_flops = 0;
  std::uint64_t generation_flops = 0;
  std::uint64_t thought_flops = 0;
  std::uint64_t scoring_flops = 0;
  // Every problem failed with a backend-unavailable error; the CLI maps
  // this to exit code 3.
  bool all_backend_unavailable = false;
};

// Reads a JSONL dataset: one {"question", "answer"(, "id")} object per line,
// blank lines skipped. The gold answer is extracted from the answer field's
// final-answer marker. Errors name the offending line. An empty file yields
// an empty list.
std::vector<ProblemInstance> load_dataset(const std::string& path);

// Deterministic synthetic problem set for closed-world benchmarking.
std::vector<ProblemInstance> synthetic_problems(std::size_t count,
                                                std::uint64_t seed);

// Per-problem seed: stable fold of the run seed with the problem id.
std::uint64_t derive_problem_seed(std::uint64_t run_seed,
                                  std::string_view problem_id);

// Runs every problem under the configured method/backend. Per-problem
// backend failures are recorded (problem scored incorrect) rather than
// aborting; configuration and dataset errors abort before any problem runs.
RunOutput run_benchmark(const RunConfig& config);
RunOutput run_benchmark(const RunConfig& config,
                        const std::vector<ProblemInstance>& problems);

// JSONL results file: header (schema version, config, digest), one record
// per problem in dataset order, then a summary (counts, exact FLOPs total,
// TFLOPs, seconds, efficiency under the exact convention).
void write_results(const RunOutput& output, const RunConfig& config,
                   const std::string& path);

struct ResultsSummary {
  std::uint64_t correct_count = 0;
  std::uint64_t total_count = 0;
  std::uint64_t flops_total = 0;
  std::uint64_t generation_flops = 0;
  std::uint64_t thought_flops = 0;
  std::uint64_t scoring_flops = 0;
  double tflops = 0.0;
  double seconds = 0.0;
  Convention convention = Convention::exact;
  EfficiencyReport efficiency;
  std::string config_digest;
};

struct ResultsFile {
  int schema_version = 0;
  nlohmann::json config;
  std::string config_digest;
  std::string label;
  std::vector<RunRecord> records;
  ResultsSummary summary;
};

// Inverse of write_results. Unknown schema versions raise SchemaError.
ResultsFile read_results(const std::string& path);

}  // namespace rebase
