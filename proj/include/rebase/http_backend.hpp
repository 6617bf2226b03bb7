#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>

#include "rebase/backends.hpp"

namespace rebase {

// Environment variable consulted when no base URL is given explicitly.
inline constexpr const char* kBackendUrlEnvVar = "REBASE_BACKEND_URL";

struct HttpEndpointConfig {
  std::string base_url;      // e.g. "http://127.0.0.1:8080"
  int timeout_ms = 30000;
  int max_retries = 2;       // on timeout / connect failure only
  int backoff_base_ms = 250; // doubles per retry: 250 ms, 500 ms
};

// Resolves the backend base URL: explicit flag wins, then the
// REBASE_BACKEND_URL environment variable. ConfigError when neither is set.
std::string resolve_backend_url(const std::optional<std::string>& flag_value);

/// Completion-endpoint client.
///
/// POST /completions {prompt, max_tokens, temperature, stop, seed}
///   -> {choices: [{text, token_count?}]}
/// POST /reward {prompt, completion} -> {reward}
///
/// Timeouts and connection failures are retried max_retries times with
/// exponential backoff; HTTP error statuses (4xx/5xx) fail immediately as
/// BackendUnavailable. Malformed responses raise ProtocolError. Stop
/// sequences the server did not honor are trimmed client-side; a missing
/// token_count is estimated as ceil(chars/4) and flagged.
class HttpBackend final : public StepGenerator, public RewardModel {
 public:
  explicit HttpBackend(HttpEndpointConfig config);

  GenerationStep generate(const StepQuery& query) override;
  double score(const RewardQuery& query) override;

  // Test seam: replaces the inter-retry sleep. Defaults to a real sleep.
  void set_backoff_hook(std::function<void(std::chrono::milliseconds)> hook);

  const HttpEndpointConfig& config() const { return config_; }

 private:
  std::string post_json(const std::string& route, const std::string& body);

  HttpEndpointConfig config_;
  std::function<void(std::chrono::milliseconds)> backoff_;
};

// One-shot form of the completion call.
GenerationStep http_generate(const GenerationRequest& request,
                             const HttpEndpointConfig& config);

}  // namespace rebase
