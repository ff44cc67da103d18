#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peakprice/equilibrium_peak.hpp"

namespace peakprice {

/// One (scenario, mechanism, delta) result.
struct ResultRow {
  std::string scenario;
  Mechanism mechanism = Mechanism::CP;
  double delta = 1.0;
  double peak = 0.0;
  Method method = Method::ClosedForm;
  double epsilon_final = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::optional<double> peak_stderr;
  bool lower_bound = false;
  std::optional<bool> nash_holds;
  std::optional<double> worst_gain;
  std::optional<double> wall_time_s;
};

/// Column order:
/// scenario,mechanism,delta,peak,method,epsilon_final,samples,seed,
/// peak_stderr,lower_bound,nash_holds,worst_gain[,wall_time_s]
class ResultTable {
 public:
  void add(ResultRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ResultRow>& rows() const { return rows_; }

  /// UTF-8, LF endings, header row, reals with 12 significant digits.
  std::string to_csv(bool include_wall_time = false) const;

 private:
  std::vector<ResultRow> rows_;
};

/// %.12g
std::string format_real(double v);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

}  // namespace peakprice
