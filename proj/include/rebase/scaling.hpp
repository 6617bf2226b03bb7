#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rebase {

/// Transformer dimensions for the forward-pass cost model.
///
/// The per-head attention dimension is d_model / n_heads, so d_model must be
/// divisible by n_heads. All counts are exact integers; arithmetic that would
/// overflow 64 bits raises OverflowError instead of wrapping.
struct ModelShape {
  std::uint64_t n_layers = 0;
  std::uint64_t d_model = 0;
  std::uint64_t n_heads = 0;
  std::uint64_t d_ff = 0;

  // Throws ConfigError unless all dimensions are >= 1 and d_model is a
  // multiple of n_heads.
  void validate() const;

  /// Mistral-7B dimensions (32 layers, d_model 4096, 32 heads, d_ff 14336).
  /// Under the per-head attention convention this counts ~3.83B
  /// non-embedding parameters, not 7B; see README for the discrepancy note.
  static ModelShape mistral_7b_paper();

  /// Two layers, d_model 8, two heads, d_ff 32. Handy for exact arithmetic
  /// in docs and tests.
  static ModelShape tiny();
};

// Looks up a named preset ("mistral-7b-paper", "tiny"). nullopt if unknown.
std::optional<ModelShape> shape_preset(std::string_view name);
const std::vector<std::string>& shape_preset_names();

// d_model / n_heads.
std::uint64_t derived_attn_dim(const ModelShape& shape);

// Non-embedding parameter count:
//   N = 2 * d_model * n_layers * (2 * d_attn + d_ff).
std::uint64_t nonembedding_params(const ModelShape& shape);

// Cost of generating one token with n_ctx tokens already in context:
//   C = 2 * N + 2 * n_layers * n_ctx * d_model.
std::uint64_t forward_flops_per_token(const ModelShape& shape,
                                      std::uint64_t n_ctx);

// Cost of generating gen_len tokens after a prompt_len-token prompt; the
// token at position t (0-based in the full sequence) costs
// forward_flops_per_token(shape, t). include_prompt adds the cost of the
// prompt positions themselves (off by default everywhere in the harness).
// Closed form, exact: computing token-by-token gives bit-identical results.
std::uint64_t sequence_flops(const ModelShape& shape, std::uint64_t prompt_len,
                             std::uint64_t gen_len, bool include_prompt);

// Ledger record labels.
inline constexpr std::string_view kGenerateLabel = "generate";
inline constexpr std::string_view kThoughtLabel = "thought";
inline constexpr std::string_view kScoreLabel = "score";

struct CallRecord {
  std::string label;
  std::uint64_t tokens = 0;
  std::uint64_t flops = 0;
  // True when the token count was estimated client-side (ceil(chars/4))
  // because the backend did not report one.
  bool estimated_tokens = false;
};

/// Exact per-run FLOPs bookkeeping.
///
/// One ledger per problem run, written by a single thread; the harness sums
/// totals across ledgers after workers finish. All counters are cumulative
/// and never decrease. total_flops() always equals the sum of flops over
/// records(); conversion to TFLOPs happens only at reporting boundaries.
class FlopsLedger {
 public:
  explicit FlopsLedger(const ModelShape& shape);

  // Prompt ingestion. Counted in tokens but charged zero FLOPs: prompt
  // processing is excluded from the cost model by default.
  void note_prompt(std::uint64_t tokens);

  // tokens generated on top of context_tokens of existing context.
  void record_generation(std::string_view label, std::uint64_t context_tokens,
                         std::uint64_t tokens, bool estimated = false);

  // Thought/rationale tokens: same cost model as generation, charged to the
  // thought counter and never part of any solution text.
  void record_thought(std::uint64_t context_tokens, std::uint64_t tokens);

  // One reward-model call scoring a tokens-long sequence, charged as one
  // forward pass over every position.
  void record_scoring(std::uint64_t tokens);

  std::uint64_t generated_tokens() const { return generated_tokens_; }
  std::uint64_t prompt_tokens() const { return prompt_tokens_; }
  std::uint64_t thought_tokens() const { return thought_tokens_; }
  std::uint64_t total_flops() const { return total_flops_; }

  // prompt tokens + every recorded call's tokens. Basis for the simulated
  // time proxy.
  std::uint64_t total_tokens() const;

  // Sum of flops over records carrying the given label.
  std::uint64_t flops_for_label(std::string_view label) const;

  const std::vector<CallRecord>& records() const { return records_; }
  const ModelShape& shape() const { return shape_; }

 private:
  void push(std::string_view label, std::uint64_t tokens, std::uint64_t flops,
            bool estimated);

  ModelShape shape_;
  std::uint64_t generated_tokens_ = 0;
  std::uint64_t prompt_tokens_ = 0;
  std::uint64_t thought_tokens_ = 0;
  std::uint64_t total_flops_ = 0;
  std::vector<CallRecord> records_;
};

}  // namespace rebase
