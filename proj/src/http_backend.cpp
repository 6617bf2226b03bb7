#include "rebase/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "rebase/answers.hpp"
#include "rebase/errors.hpp"

namespace rebase {

namespace {

using nlohmann::json;

bool retryable(httplib::Error err) {
  switch (err) {
    case httplib::Error::Connection:
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
    case httplib::Error::Write:
      return true;
    default:
      return false;
  }
}

json parse_body(const std::string& body, const std::string& route) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ProtocolError("backend returned malformed JSON from " + route);
  }
  return parsed;
}

}  // namespace

std::string resolve_backend_url(const std::optional<std::string>& flag_value) {
  if (flag_value && !flag_value->empty()) return *flag_value;
  if (const char* env = std::getenv(kBackendUrlEnvVar); env && *env) {
    return env;
  }
  throw ConfigError(std::string("no backend URL: pass --base-url or set ") +
                    kBackendUrlEnvVar);
}

HttpBackend::HttpBackend(HttpEndpointConfig config)
    : config_(std::move(config)),
      backoff_([](std::chrono::milliseconds delay) {
        std::this_thread::sleep_for(delay);
      }) {
  if (config_.base_url.empty()) {
    throw ConfigError("http backend: base_url must not be empty");
  }
}

void HttpBackend::set_backoff_hook(
    std::function<void(std::chrono::milliseconds)> hook) {
  backoff_ = std::move(hook);
}

std::string HttpBackend::post_json(const std::string& route,
                                   const std::string& body) {
  int delay_ms = config_.backoff_base_ms;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000,
                            (config_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(config_.timeout_ms / 1000,
                             (config_.timeout_ms % 1000) * 1000);

    auto result = client.Post(route, body, "application/json");
    if (result) {
      if (result->status < 200 || result->status >= 300) {
        // HTTP-level errors are never retried, 4xx in particular.
        throw BackendUnavailable("backend returned status " +
                                 std::to_string(result->status) + " for " +
                                 route);
      }
      return result->body;
    }

    if (retryable(result.error()) && attempt < config_.max_retries) {
      backoff_(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
      continue;
    }
    throw BackendUnavailable("backend unreachable at " + config_.base_url +
                             route + " (" + httplib::to_string(result.error()) +
                             ")");
  }
}

GenerationStep HttpBackend::generate(const StepQuery& query) {
  const GenerationRequest& req = query.request;
  json body = {
      {"prompt", req.prompt},
      {"max_tokens", req.max_tokens},
      {"temperature", req.sample_temperature},
      {"stop", req.stop_sequences},
      {"seed", req.seed},
  };
  json parsed = parse_body(post_json("/completions", body.dump()),
                           "/completions");

  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    throw ProtocolError("completion response carries no choices");
  }
  const json& choice = parsed["choices"][0];
  if (!choice.contains("text") || !choice["text"].is_string()) {
    throw ProtocolError("completion choice carries no text");
  }

  GenerationStep step;
  step.text = choice["text"].get<std::string>();

  // Trim at the earliest stop sequence the server left in.
  bool trimmed = false;
  for (const std::string& stop : req.stop_sequences) {
    if (stop.empty()) continue;
    if (std::size_t pos = step.text.find(stop); pos != std::string::npos) {
      step.text.resize(pos);
      trimmed = true;
    }
  }

  if (!trimmed && choice.contains("token_count") &&
      choice["token_count"].is_number()) {
    step.token_count = choice["token_count"].get<std::uint64_t>();
  } else {
    step.token_count = estimate_tokens(step.text);
    step.token_count_estimated = true;
  }
  if (step.token_count < 1) step.token_count = 1;

  step.terminal = contains_answer_marker(step.text);
  return step;
}

double HttpBackend::score(const RewardQuery& query) {
  json body = {
      {"prompt", query.prompt},
      {"completion", query.completion},
  };
  json parsed = parse_body(post_json("/reward", body.dump()), "/reward");
  if (!parsed.contains("reward") || !parsed["reward"].is_number()) {
    throw ProtocolError("reward response carries no numeric reward");
  }
  double reward = parsed["reward"].get<double>();
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw ProtocolError("reward " + std::to_string(reward) +
                        " outside [0, 1]");
  }
  return reward;
}

GenerationStep http_generate(const GenerationRequest& request,
                             const HttpEndpointConfig& config) {
  HttpBackend backend(config);
  StepQuery query;
  query.request = request;
  return backend.generate(query);
}

}  // namespace rebase
