#include "rebase/metrics.hpp"

#include <cmath>

#include "rebase/errors.hpp"

namespace rebase {

std::string_view convention_name(Convention c) {
  return c == Convention::exact ? "exact" : "table1";
}

std::optional<Convention> parse_convention(std::string_view name) {
  if (name == "exact") return Convention::exact;
  if (name == "table1") return Convention::table1;
  return std::nullopt;
}

double round_half_away(double x, int decimals) {
  double scale = std::pow(10.0, decimals);
  return std::copysign(std::floor(std::abs(x) * scale + 0.5), x) / scale;
}

double accuracy_pct(const RunMetrics& m) {
  if (m.total_count < 1) {
    throw DomainError("accuracy: total_count must be >= 1");
  }
  if (m.correct_count > m.total_count) {
    throw DomainError("accuracy: correct_count exceeds total_count");
  }
  return 100.0 * static_cast<double>(m.correct_count) /
         static_cast<double>(m.total_count);
}

double acc_per_tflop(const RunMetrics& m) {
  if (!(m.tflops > 0.0)) {
    throw DomainError("acc_per_tflop: tflops must be > 0");
  }
  return accuracy_pct(m) / m.tflops;
}

double acc_per_second(const RunMetrics& m) {
  if (!(m.seconds > 0.0)) {
    throw DomainError("acc_per_second: seconds must be > 0");
  }
  return accuracy_pct(m) / m.seconds;
}

double efficiency_score(const RunMetrics& m, Convention convention) {
  return efficiency_report(m, convention).efficiency_score;
}

EfficiencyReport efficiency_report(double accuracy_pct_value, double tflops,
                                   double seconds, Convention convention) {
  if (!(accuracy_pct_value >= 0.0)) {
    throw DomainError("efficiency: accuracy percentage must be >= 0");
  }
  if (!(tflops > 0.0)) {
    throw DomainError("efficiency: tflops must be > 0");
  }
  if (!(seconds > 0.0)) {
    throw DomainError("efficiency: seconds must be > 0");
  }
  EfficiencyReport report;
  report.convention = convention;
  if (convention == Convention::exact) {
    report.accuracy_pct = accuracy_pct_value;
    report.acc_per_tflop = accuracy_pct_value / tflops;
    report.acc_per_second = accuracy_pct_value / seconds;
  } else {
    double acc = round_half_away(accuracy_pct_value, 2);
    report.accuracy_pct = acc;
    report.acc_per_tflop = round_half_away(acc / tflops, 2);
    report.acc_per_second = round_half_away(acc / seconds, 2);
  }
  report.efficiency_score =
      report.acc_per_tflop * report.acc_per_second * 100.0;
  return report;
}

EfficiencyReport efficiency_report(const RunMetrics& m, Convention convention) {
  return efficiency_report(accuracy_pct(m), m.tflops, m.seconds, convention);
}

}  // namespace rebase
