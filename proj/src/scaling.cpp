#include "rebase/scaling.hpp"

#include <string>

#include "rebase/errors.hpp"

namespace rebase {

namespace {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) {
    throw OverflowError("integer overflow in FLOPs arithmetic (add)");
  }
  return r;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw OverflowError("integer overflow in FLOPs arithmetic (multiply)");
  }
  return r;
}

// n * (n - 1) / 2 without intermediate overflow; one factor is even.
std::uint64_t triangular(std::uint64_t n) {
  if (n == 0) return 0;
  return (n % 2 == 0) ? checked_mul(n / 2, n - 1) : checked_mul(n, (n - 1) / 2);
}

// Sum of forward_flops_per_token over positions [first, first + count):
//   count * 2N + 2 * n_layers * d_model * (count * first + count*(count-1)/2)
std::uint64_t span_flops(const ModelShape& shape, std::uint64_t first,
                         std::uint64_t count) {
  if (count == 0) return 0;
  std::uint64_t two_n = checked_mul(2, nonembedding_params(shape));
  std::uint64_t ld2 = checked_mul(2, checked_mul(shape.n_layers, shape.d_model));
  std::uint64_t ctx_sum =
      checked_add(checked_mul(count, first), triangular(count));
  return checked_add(checked_mul(count, two_n), checked_mul(ld2, ctx_sum));
}

}  // namespace

void ModelShape::validate() const {
  if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1) {
    throw ConfigError("model shape: all dimensions must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model shape: d_model (" + std::to_string(d_model) +
                      ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
}

ModelShape ModelShape::mistral_7b_paper() {
  return ModelShape{32, 4096, 32, 14336};
}

ModelShape ModelShape::tiny() { return ModelShape{2, 8, 2, 32}; }

std::optional<ModelShape> shape_preset(std::string_view name) {
  if (name == "mistral-7b-paper") return ModelShape::mistral_7b_paper();
  if (name == "tiny") return ModelShape::tiny();
  return std::nullopt;
}

const std::vector<std::string>& shape_preset_names() {
  static const std::vector<std::string> names = {"mistral-7b-paper", "tiny"};
  return names;
}

std::uint64_t derived_attn_dim(const ModelShape& shape) {
  shape.validate();
  return shape.d_model / shape.n_heads;
}

std::uint64_t nonembedding_params(const ModelShape& shape) {
  std::uint64_t d_attn = derived_attn_dim(shape);
  std::uint64_t inner = checked_add(checked_mul(2, d_attn), shape.d_ff);
  return checked_mul(checked_mul(2, shape.d_model),
                     checked_mul(shape.n_layers, inner));
}

std::uint64_t forward_flops_per_token(const ModelShape& shape,
                                      std::uint64_t n_ctx) {
  std::uint64_t two_n = checked_mul(2, nonembedding_params(shape));
  std::uint64_t attn = checked_mul(
      checked_mul(2, shape.n_layers), checked_mul(n_ctx, shape.d_model));
  return checked_add(two_n, attn);
}

std::uint64_t sequence_flops(const ModelShape& shape, std::uint64_t prompt_len,
                             std::uint64_t gen_len, bool include_prompt) {
  shape.validate();
  std::uint64_t total = span_flops(shape, prompt_len, gen_len);
  if (include_prompt) {
    total = checked_add(total, span_flops(shape, 0, prompt_len));
  }
  return total;
}

FlopsLedger::FlopsLedger(const ModelShape& shape) : shape_(shape) {
  shape_.validate();
}

void FlopsLedger::push(std::string_view label, std::uint64_t tokens,
                       std::uint64_t flops, bool estimated) {
  records_.push_back(CallRecord{std::string(label), tokens, flops, estimated});
  total_flops_ = checked_add(total_flops_, flops);
}

void FlopsLedger::note_prompt(std::uint64_t tokens) {
  prompt_tokens_ = checked_add(prompt_tokens_, tokens);
}

void FlopsLedger::record_generation(std::string_view label,
                                    std::uint64_t context_tokens,
                                    std::uint64_t tokens, bool estimated) {
  std::uint64_t flops = sequence_flops(shape_, context_tokens, tokens, false);
  push(label, tokens, flops, estimated);
  generated_tokens_ = checked_add(generated_tokens_, tokens);
}

void FlopsLedger::record_thought(std::uint64_t context_tokens,
                                 std::uint64_t tokens) {
  std::uint64_t flops = sequence_flops(shape_, context_tokens, tokens, false);
  push(kThoughtLabel, tokens, flops, false);
  thought_tokens_ = checked_add(thought_tokens_, tokens);
}

void FlopsLedger::record_scoring(std::uint64_t tokens) {
  std::uint64_t flops = sequence_flops(shape_, 0, tokens, false);
  push(kScoreLabel, tokens, flops, false);
}

std::uint64_t FlopsLedger::total_tokens() const {
  std::uint64_t total = prompt_tokens_;
  for (const CallRecord& r : records_) {
    total = checked_add(total, r.tokens);
  }
  return total;
}

std::uint64_t FlopsLedger::flops_for_label(std::string_view label) const {
  std::uint64_t total = 0;
  for (const CallRecord& r : records_) {
    if (r.label == label) total = checked_add(total, r.flops);
  }
  return total;
}

}  // namespace rebase
