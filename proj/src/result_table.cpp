#include "peakprice/result_table.hpp"

#include <cstdio>
#include <sstream>

namespace peakprice {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string ResultTable::to_csv(bool include_wall_time) const {
  std::ostringstream os;
  os << "scenario,mechanism,delta,peak,method,epsilon_final,samples,seed,"
        "peak_stderr,lower_bound,nash_holds,worst_gain";
  if (include_wall_time) os << ",wall_time_s";
  os << '\n';
  for (const auto& r : rows_) {
    os << csv_field(r.scenario) << ',' << to_string(r.mechanism) << ',' << format_real(r.delta)
       << ',' << format_real(r.peak) << ',' << to_string(r.method) << ','
       << format_real(r.epsilon_final) << ',' << r.samples << ',' << r.seed << ','
       << (r.peak_stderr ? format_real(*r.peak_stderr) : "") << ','
       << (r.lower_bound ? "true" : "false") << ','
       << (r.nash_holds ? (*r.nash_holds ? "true" : "false") : "") << ','
       << (r.worst_gain ? format_real(*r.worst_gain) : "");
    if (include_wall_time) os << ',' << (r.wall_time_s ? format_real(*r.wall_time_s) : "");
    os << '\n';
  }
  return os.str();
}

}  // namespace peakprice
