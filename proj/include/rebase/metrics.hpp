#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rebase {

// How derived efficiency numbers are rounded.
//
// exact:  ratios taken on unrounded values.
// table1: accuracy and both ratios are rounded half-away-from-zero to two
//         decimals before the score is formed, matching how the published
//         reference table derives its Acc/TFLOP, Acc/Sec, and Efficiency
//         Score columns from the displayed two-decimal figures.
enum class Convention { exact, table1 };

std::string_view convention_name(Convention c);
std::optional<Convention> parse_convention(std::string_view name);

struct RunMetrics {
  std::uint64_t correct_count = 0;
  std::uint64_t total_count = 0;
  double tflops = 0.0;
  double seconds = 0.0;
};

struct EfficiencyReport {
  double accuracy_pct = 0.0;
  double acc_per_tflop = 0.0;
  double acc_per_second = 0.0;
  double efficiency_score = 0.0;
  Convention convention = Convention::exact;
};

// Round half away from zero at the given number of decimals.
double round_half_away(double x, int decimals);

// 100 * correct / total. Requires total_count >= 1 and
// correct_count <= total_count (DomainError otherwise).
double accuracy_pct(const RunMetrics& m);

// accuracy_pct / tflops; requires tflops > 0.
double acc_per_tflop(const RunMetrics& m);

// accuracy_pct / seconds; requires seconds > 0.
double acc_per_second(const RunMetrics& m);

// (Acc/TFLOP) * (Acc/Sec) * 100 under the given convention.
double efficiency_score(const RunMetrics& m, Convention convention);

// Assembles all four derived numbers from an accuracy percentage plus
// resource totals. Under table1 the stored accuracy and ratios are the
// rounded values, so efficiency_score always equals
// acc_per_tflop * acc_per_second * 100 on the stored fields.
EfficiencyReport efficiency_report(double accuracy_pct_value, double tflops,
                                   double seconds, Convention convention);
EfficiencyReport efficiency_report(const RunMetrics& m, Convention convention);

}  // namespace rebase
