#include "rebase/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <thread>

#include "rebase/answers.hpp"
#include "rebase/errors.hpp"
#include "rebase/rng.hpp"

namespace rebase {

namespace {

using nlohmann::json;

constexpr std::uint64_t kSyntheticSalt = 0x53594E5448455449ULL;

std::int64_t parse_gold_integer(const ProblemInstance& problem) {
  try {
    std::size_t consumed = 0;
    long long value = std::stoll(problem.gold_answer, &consumed);
    if (consumed != problem.gold_answer.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return value;
  } catch (const std::exception&) {
    throw DatasetError("problem " + problem.id + ": gold answer '" +
                       problem.gold_answer +
                       "' is not an integer (required by the simulated "
                       "backend)");
  }
}

json thought_to_json(const ThoughtConfig& t) {
  return json{{"thought_budget", t.thought_budget},
              {"budget_per_depth", t.budget_per_depth},
              {"mixing_weight", t.mixing_weight},
              {"thought_success_prob", t.thought_success_prob}};
}

ThoughtConfig thought_from_json(const json& j) {
  ThoughtConfig t;
  t.thought_budget = j.at("thought_budget").get<std::uint64_t>();
  t.budget_per_depth = j.at("budget_per_depth").get<std::uint64_t>();
  t.mixing_weight = j.at("mixing_weight").get<double>();
  t.thought_success_prob = j.at("thought_success_prob").get<double>();
  return t;
}

json candidates_to_json(const std::vector<CandidateSolution>& candidates) {
  json arr = json::array();
  for (const CandidateSolution& c : candidates) {
    json item;
    item["answer"] = c.answer ? json(*c.answer) : json(nullptr);
    item["weight"] = c.weight;
    arr.push_back(std::move(item));
  }
  return arr;
}

std::vector<CandidateSolution> candidates_from_json(const json& arr) {
  std::vector<CandidateSolution> out;
  for (const json& item : arr) {
    CandidateSolution c;
    if (!item.at("answer").is_null()) {
      c.answer = item.at("answer").get<std::string>();
    }
    c.weight = item.at("weight").get<double>();
    out.push_back(std::move(c));
  }
  return out;
}

struct ProblemResult {
  RunRecord record;
  std::uint64_t total_flops = 0;
  std::uint64_t generation_flops = 0;
  std::uint64_t thought_flops = 0;
  std::uint64_t scoring_flops = 0;
  bool backend_unavailable = false;
};

ProblemResult process_problem(const RunConfig& config,
                              const ProblemInstance& problem) {
  ProblemResult result;
  result.record.problem_id = problem.id;
  result.record.config_digest = config.digest();

  FlopsLedger ledger(config.shape);
  std::uint64_t problem_seed = derive_problem_seed(config.seed, problem.id);

  GenerationRequest request_template;
  request_template.max_tokens = config.search.max_step_tokens;
  request_template.stop_sequences = {"\n"};
  request_template.sample_temperature = config.gen_temperature;
  request_template.seed = problem_seed;

  bool uses_thought =
      config.method == Method::quietstar || config.method == Method::integration;
  std::optional<ThoughtConfig> thought;
  if (uses_thought) {
    thought = config.thought.value_or(ThoughtConfig{});
  }

  std::unique_ptr<SimulatedBackend> simulated;
  std::unique_ptr<HttpBackend> http;
  StepGenerator* generator = nullptr;
  RewardModel* reward_model = nullptr;
  if (config.backend == BackendKind::simulated) {
    SimulatedTaskSpec spec;
    spec.seed = problem_seed;
    spec.step_success_prob = config.sim.step_success_prob;
    spec.reward_fidelity = config.sim.reward_fidelity;
    spec.steps_to_solution = config.sim.steps_to_solution;
    spec.tokens_per_step = config.sim.tokens_per_step;
    spec.gold_answer = parse_gold_integer(problem);
    simulated = std::make_unique<SimulatedBackend>(spec, thought);
    generator = simulated.get();
    reward_model = simulated.get();
  } else {
    HttpEndpointConfig endpoint;
    endpoint.base_url = config.base_url;
    http = std::make_unique<HttpBackend>(endpoint);
    generator = http.get();
    reward_model = http.get();
  }

  std::optional<ThoughtWrapper> wrapper;
  if (thought) {
    wrapper.emplace(*generator, *thought, ledger);
    generator = &*wrapper;
  }

  auto wall_start = std::chrono::steady_clock::now();
  try {
    std::vector<CandidateSolution> candidates;
    std::optional<std::string> predicted;
    if (config.method == Method::base || config.method == Method::quietstar) {
      candidates =
          sample_baseline(problem.question, *generator, config.votes, ledger,
                          request_template, config.search.max_depth);
      predicted = majority_vote(candidates);
    } else {
      SearchConfig search = config.search;
      search.width = config.width;
      SearchResult search_result =
          rebase_search(problem.question, *generator, *reward_model, search,
                        ledger, request_template);
      candidates = std::move(search_result.candidates);
      predicted = aggregate(candidates, search.aggregation);
    }
    result.record.candidates = std::move(candidates);
    result.record.predicted = predicted;
    result.record.correct =
        predicted.has_value() && *predicted == problem.gold_answer;
  } catch (const BackendUnavailable& e) {
    result.record.error = e.what();
    result.backend_unavailable = true;
  } catch (const std::exception& e) {
    result.record.error = e.what();
  }
  auto wall_end = std::chrono::steady_clock::now();

  if (config.backend == BackendKind::simulated) {
    // Deterministic time proxy; wall time would break byte-identical reruns.
    result.record.seconds =
        static_cast<double>(ledger.total_tokens()) * config.seconds_per_token;
  } else {
    result.record.seconds =
        std::chrono::duration<double>(wall_end - wall_start).count();
  }

  result.record.flops = ledger.total_flops();
  result.total_flops = ledger.total_flops();
  result.generation_flops = ledger.flops_for_label(kGenerateLabel);
  result.thought_flops = ledger.flops_for_label(kThoughtLabel);
  result.scoring_flops = ledger.flops_for_label(kScoreLabel);
  return result;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::base:
      return "base";
    case Method::quietstar:
      return "quietstar";
    case Method::rebase:
      return "rebase";
    case Method::integration:
      return "integration";
  }
  return "base";
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "base") return Method::base;
  if (name == "quietstar") return Method::quietstar;
  if (name == "rebase") return Method::rebase;
  if (name == "integration") return Method::integration;
  return std::nullopt;
}

std::string_view backend_name(BackendKind b) {
  return b == BackendKind::simulated ? "simulated" : "http";
}

std::optional<BackendKind> parse_backend(std::string_view name) {
  if (name == "simulated") return BackendKind::simulated;
  if (name == "http") return BackendKind::http;
  return std::nullopt;
}

void RunConfig::validate() const {
  shape.validate();
  bool tree_method = method == Method::rebase || method == Method::integration;
  if (tree_method) {
    if (width < 1) {
      throw ConfigError("method " + std::string(method_name(method)) +
                        " requires --width >= 1");
    }
    SearchConfig effective = search;
    effective.width = width;
    effective.validate();
  } else {
    if (votes < 1) {
      throw ConfigError("method " + std::string(method_name(method)) +
                        " requires --votes >= 1");
    }
    SearchConfig effective = search;
    effective.width = 1;
    effective.validate();
  }
  if (thought) thought->validate();
  SimulatedTaskSpec probe;
  probe.step_success_prob = sim.step_success_prob;
  probe.reward_fidelity = sim.reward_fidelity;
  probe.steps_to_solution = sim.steps_to_solution;
  probe.tokens_per_step = sim.tokens_per_step;
  probe.validate();
  if (!(gen_temperature >= 0.0)) {
    throw ConfigError("gen_temperature must be >= 0");
  }
  if (backend == BackendKind::simulated && !(seconds_per_token > 0.0)) {
    throw ConfigError("seconds_per_token must be > 0 for simulated runs");
  }
  if (backend == BackendKind::http && base_url.empty()) {
    throw ConfigError(std::string("http backend requires --base-url or ") +
                      kBackendUrlEnvVar);
  }
  if (jobs < 1) {
    throw ConfigError("jobs must be >= 1");
  }
}

json RunConfig::to_json() const {
  json j;
  j["method"] = std::string(method_name(method));
  j["width"] = width;
  j["votes"] = votes;
  j["backend"] = std::string(backend_name(backend));
  j["thought"] = thought ? thought_to_json(*thought) : json(nullptr);
  j["seed"] = seed;
  j["shape"] = json{{"n_layers", shape.n_layers},
                    {"d_model", shape.d_model},
                    {"n_heads", shape.n_heads},
                    {"d_ff", shape.d_ff}};
  j["dataset_path"] = dataset_path;
  j["output_path"] = output_path;
  j["search"] = json{{"temperature", search.temperature},
                     {"max_depth", search.max_depth},
                     {"quality_threshold", search.quality_threshold},
                     {"aggregation", std::string(aggregation_name(
                                         search.aggregation))},
                     {"max_step_tokens", search.max_step_tokens}};
  j["sim"] = json{{"step_success_prob", sim.step_success_prob},
                  {"reward_fidelity", sim.reward_fidelity},
                  {"steps_to_solution", sim.steps_to_solution},
                  {"tokens_per_step", sim.tokens_per_step}};
  j["gen_temperature"] = gen_temperature;
  j["seconds_per_token"] = seconds_per_token;
  j["base_url"] = base_url;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  auto method = parse_method(j.at("method").get<std::string>());
  if (!method) throw SchemaError("unknown method in stored config");
  c.method = *method;
  c.width = j.at("width").get<std::uint64_t>();
  c.votes = j.at("votes").get<std::uint64_t>();
  auto backend = parse_backend(j.at("backend").get<std::string>());
  if (!backend) throw SchemaError("unknown backend in stored config");
  c.backend = *backend;
  if (!j.at("thought").is_null()) {
    c.thought = thought_from_json(j.at("thought"));
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  const json& shape = j.at("shape");
  c.shape = ModelShape{shape.at("n_layers").get<std::uint64_t>(),
                       shape.at("d_model").get<std::uint64_t>(),
                       shape.at("n_heads").get<std::uint64_t>(),
                       shape.at("d_ff").get<std::uint64_t>()};
  c.dataset_path = j.at("dataset_path").get<std::string>();
  c.output_path = j.at("output_path").get<std::string>();
  const json& search = j.at("search");
  c.search.temperature = search.at("temperature").get<double>();
  c.search.max_depth = search.at("max_depth").get<std::uint64_t>();
  c.search.quality_threshold = search.at("quality_threshold").get<double>();
  auto aggregation =
      parse_aggregation(search.at("aggregation").get<std::string>());
  if (!aggregation) throw SchemaError("unknown aggregation in stored config");
  c.search.aggregation = *aggregation;
  c.search.max_step_tokens = search.at("max_step_tokens").get<std::uint64_t>();
  const json& sim = j.at("sim");
  c.sim.step_success_prob = sim.at("step_success_prob").get<double>();
  c.sim.reward_fidelity = sim.at("reward_fidelity").get<double>();
  c.sim.steps_to_solution = sim.at("steps_to_solution").get<std::uint64_t>();
  c.sim.tokens_per_step = sim.at("tokens_per_step").get<std::uint64_t>();
  c.gen_temperature = j.at("gen_temperature").get<double>();
  c.seconds_per_token = j.at("seconds_per_token").get<double>();
  c.base_url = j.at("base_url").get<std::string>();
  return c;
}

std::string RunConfig::digest() const {
  std::uint64_t h = fnv1a64(to_json().dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::label() const {
  bool tree_method = method == Method::rebase || method == Method::integration;
  std::uint64_t fanout = tree_method ? width : votes;
  return std::string(method_name(method)) + "-" + std::to_string(fanout);
}

std::vector<ProblemInstance> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetError("cannot open dataset file: " + path);
  }

  std::vector<ProblemInstance> problems;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;

    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw DatasetError(path + ":" + std::to_string(line_number) +
                         ": malformed JSON record");
    }
    if (!record.contains("question") || !record["question"].is_string()) {
      throw DatasetError(path + ":" + std::to_string(line_number) +
                         ": missing string field 'question'");
    }
    if (!record.contains("answer") || !record["answer"].is_string()) {
      throw DatasetError(path + ":" + std::to_string(line_number) +
                         ": missing string field 'answer'");
    }

    ProblemInstance problem;
    problem.question = record["question"].get<std::string>();
    if (record.contains("id")) {
      const json& id = record["id"];
      if (id.is_string()) {
        problem.id = id.get<std::string>();
      } else if (id.is_number_integer()) {
        problem.id = std::to_string(id.get<std::int64_t>());
      } else {
        throw DatasetError(path + ":" + std::to_string(line_number) +
                           ": field 'id' must be a string or integer");
      }
    } else {
      problem.id = std::to_string(problems.size());
    }

    std::optional<std::string> gold =
        extract_answer(record["answer"].get<std::string>());
    if (!gold) {
      throw DatasetError(path + ":" + std::to_string(line_number) +
                         ": answer field has no '" + std::string(kAnswerMarker) +
                         "' final-answer marker");
    }
    problem.gold_answer = *gold;
    problems.push_back(std::move(problem));
  }
  return problems;
}

std::vector<ProblemInstance> synthetic_problems(std::size_t count,
                                                std::uint64_t seed) {
  std::vector<ProblemInstance> problems;
  problems.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits =
        splitmix64(splitmix64(seed ^ kSyntheticSalt) ^ static_cast<std::uint64_t>(i));
    std::uint64_t gold = bits % 10000;
    ProblemInstance p;
    p.id = "synthetic-" + std::to_string(i);
    p.question = "Synthetic benchmark task " + std::to_string(i) +
                 ": work through the steps and report the final integer.";
    p.gold_answer = std::to_string(gold);
    problems.push_back(std::move(p));
  }
  return problems;
}

std::uint64_t derive_problem_seed(std::uint64_t run_seed,
                                  std::string_view problem_id) {
  return splitmix64(run_seed ^ fnv1a64(problem_id));
}

RunOutput run_benchmark(const RunConfig& config) {
  return run_benchmark(config, load_dataset(config.dataset_path));
}

RunOutput run_benchmark(const RunConfig& config,
                        const std::vector<ProblemInstance>& problems) {
  config.validate();
  if (problems.empty()) {
    throw DatasetError("dataset is empty: nothing to run");
  }
  if (config.backend == BackendKind::simulated) {
    // Fail before any problem runs, not in the middle of a worker.
    for (const ProblemInstance& p : problems) parse_gold_integer(p);
  }

  std::vector<ProblemResult> results(problems.size());
  std::atomic<std::size_t> next{0};
  unsigned workers = std::min<unsigned>(
      config.jobs, static_cast<unsigned>(problems.size()));

  auto work = [&]() {
    while (true) {
      std::size_t index = next.fetch_add(1);
      if (index >= problems.size()) break;
      results[index] = process_problem(config, problems[index]);
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  RunOutput output;
  output.records.reserve(results.size());
  double seconds = 0.0;
  std::size_t unavailable = 0;
  for (ProblemResult& r : results) {
    output.metrics.correct_count += r.record.correct ? 1 : 0;
    output.total_flops += r.total_flops;
    output.generation_flops += r.generation_flops;
    output.thought_flops += r.thought_flops;
    output.scoring_flops += r.scoring_flops;
    seconds += r.record.seconds;
    if (r.backend_unavailable) ++unavailable;
    output.records.push_back(std::move(r.record));
  }
  output.metrics.total_count = problems.size();
  output.metrics.tflops = static_cast<double>(output.total_flops) / 1e12;
  output.metrics.seconds = seconds;
  output.all_backend_unavailable = unavailable == problems.size();
  return output;
}

void write_results(const RunOutput& output, const RunConfig& config,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DatasetError("cannot open results file for writing: " + path);
  }

  std::string digest = config.digest();
  json header;
  header["type"] = "header";
  header["schema_version"] = kResultsSchemaVersion;
  header["label"] = config.label();
  header["config"] = config.to_json();
  header["config_digest"] = digest;
  out << header.dump() << "\n";

  for (const RunRecord& record : output.records) {
    json j;
    j["type"] = "record";
    j["problem_id"] = record.problem_id;
    j["predicted"] = record.predicted ? json(*record.predicted) : json(nullptr);
    j["correct"] = record.correct;
    j["flops"] = record.flops;
    j["seconds"] = record.seconds;
    j["candidates"] = candidates_to_json(record.candidates);
    j["config_digest"] = record.config_digest;
    if (record.error) j["error"] = *record.error;
    out << j.dump() << "\n";
  }

  json summary;
  summary["type"] = "summary";
  summary["correct_count"] = output.metrics.correct_count;
  summary["total_count"] = output.metrics.total_count;
  summary["flops_total"] = output.total_flops;
  summary["generation_flops"] = output.generation_flops;
  summary["thought_flops"] = output.thought_flops;
  summary["scoring_flops"] = output.scoring_flops;
  summary["tflops"] = output.metrics.tflops;
  summary["seconds"] = output.metrics.seconds;
  summary["convention"] = std::string(convention_name(Convention::exact));
  summary["accuracy_pct"] = accuracy_pct(output.metrics);
  if (output.metrics.tflops > 0.0 && output.metrics.seconds > 0.0) {
    EfficiencyReport report =
        efficiency_report(output.metrics, Convention::exact);
    summary["acc_per_tflop"] = report.acc_per_tflop;
    summary["acc_per_second"] = report.acc_per_second;
    summary["efficiency_score"] = report.efficiency_score;
  } else {
    // A run where every problem failed records no compute; the ratios are
    // undefined rather than zero, so the summary carries nulls.
    summary["acc_per_tflop"] = nullptr;
    summary["acc_per_second"] = nullptr;
    summary["efficiency_score"] = nullptr;
  }
  summary["config_digest"] = digest;
  out << summary.dump() << "\n";

  if (!out) {
    throw DatasetError("failed writing results file: " + path);
  }
}

ResultsFile read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DatasetError("cannot open results file: " + path);
  }

  ResultsFile file;
  bool seen_header = false;
  bool seen_summary = false;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
      throw SchemaError(path + ":" + std::to_string(line_number) +
                        ": malformed results line");
    }
    std::string type = j["type"].get<std::string>();
    if (type == "header") {
      file.schema_version = j.at("schema_version").get<int>();
      if (file.schema_version != kResultsSchemaVersion) {
        throw SchemaError(path + ": unsupported schema_version " +
                          std::to_string(file.schema_version) + " (expected " +
                          std::to_string(kResultsSchemaVersion) + ")");
      }
      file.config = j.at("config");
      file.config_digest = j.at("config_digest").get<std::string>();
      file.label = j.at("label").get<std::string>();
      seen_header = true;
    } else if (type == "record") {
      RunRecord record;
      record.problem_id = j.at("problem_id").get<std::string>();
      if (!j.at("predicted").is_null()) {
        record.predicted = j.at("predicted").get<std::string>();
      }
      record.correct = j.at("correct").get<bool>();
      record.flops = j.at("flops").get<std::uint64_t>();
      record.seconds = j.at("seconds").get<double>();
      record.candidates = candidates_from_json(j.at("candidates"));
      record.config_digest = j.at("config_digest").get<std::string>();
      if (j.contains("error")) record.error = j["error"].get<std::string>();
      file.records.push_back(std::move(record));
    } else if (type == "summary") {
      ResultsSummary& s = file.summary;
      s.correct_count = j.at("correct_count").get<std::uint64_t>();
      s.total_count = j.at("total_count").get<std::uint64_t>();
      s.flops_total = j.at("flops_total").get<std::uint64_t>();
      s.generation_flops = j.at("generation_flops").get<std::uint64_t>();
      s.thought_flops = j.at("thought_flops").get<std::uint64_t>();
      s.scoring_flops = j.at("scoring_flops").get<std::uint64_t>();
      s.tflops = j.at("tflops").get<double>();
      s.seconds = j.at("seconds").get<double>();
      auto convention =
          parse_convention(j.at("convention").get<std::string>());
      if (!convention) {
        throw SchemaError(path + ": unknown convention in summary");
      }
      s.convention = *convention;
      s.efficiency.convention = *convention;
      auto ratio_or_nan = [](const json& value) {
        return value.is_null() ? std::numeric_limits<double>::quiet_NaN()
                               : value.get<double>();
      };
      s.efficiency.accuracy_pct = j.at("accuracy_pct").get<double>();
      s.efficiency.acc_per_tflop = ratio_or_nan(j.at("acc_per_tflop"));
      s.efficiency.acc_per_second = ratio_or_nan(j.at("acc_per_second"));
      s.efficiency.efficiency_score = ratio_or_nan(j.at("efficiency_score"));
      s.config_digest = j.at("config_digest").get<std::string>();
      seen_summary = true;
    } else {
      throw SchemaError(path + ":" + std::to_string(line_number) +
                        ": unknown record type '" + type + "'");
    }
  }
  if (!seen_header) {
    throw SchemaError(path + ": missing header record");
  }
  if (!seen_summary) {
    throw SchemaError(path + ": missing summary record");
  }
  return file;
}

}  // namespace rebase
