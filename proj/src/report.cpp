#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "tlab/error.hpp"
#include "tlab/eval.hpp"
#include "tlab/io.hpp"

namespace tlab {

std::string display1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string display_delta(double v) {
  const auto s = display1(v);
  return s[0] == '-' || s == "0.0" ? s : "+" + s;
}

EvalReport aggregate_report(const SystemScores& system, const SystemScores& base) {
  if (system.scores.size() != base.scores.size())
    throw ConfigError("report: benchmark lists differ in length");
  if (system.scores.empty()) throw ConfigError("report: no benchmarks");
  if (!system.mean_lens.empty() && system.mean_lens.size() != system.scores.size())
    throw ConfigError("report: mean lengths do not match benchmarks");
  EvalReport r;
  r.system = system.system;
  double sum = 0, base_sum = 0;
  for (std::size_t i = 0; i < system.scores.size(); ++i) {
    const auto& [name, score] = system.scores[i];
    if (name != base.scores[i].first)
      throw ConfigError("report: benchmark '" + name + "' does not match base benchmark '" +
                        base.scores[i].first + "'");
    ReportRow row{name, score, score - base.scores[i].second,
                  system.mean_lens.empty() ? 0.0 : system.mean_lens[i]};
    r.rows.push_back(row);
    sum += score;
    base_sum += base.scores[i].second;
  }
  const double n = static_cast<double>(r.rows.size());
  r.average = sum / n;
  r.average_delta = r.average - base_sum / n;
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream o;
  o << "benchmark,score,delta_vs_base,mean_len\n";
  for (const auto& row : r.rows)
    o << row.benchmark << ',' << display1(row.score) << ',' << display_delta(row.delta) << ','
      << display1(row.mean_len) << '\n';
  o << "average," << display1(r.average) << ',' << display_delta(r.average_delta) << ",\n";
  return o.str();
}

std::string report_json(const EvalReport& r) {
  std::ostringstream o;
  o << "{\"system\":" << nlohmann::json(r.system).dump() << ",\"rows\":[";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    o << (i ? "," : "") << "{\"benchmark\":" << nlohmann::json(row.benchmark).dump()
      << ",\"score\":" << format_double(row.score) << ",\"delta_vs_base\":"
      << format_double(row.delta) << ",\"mean_len\":" << format_double(row.mean_len) << '}';
  }
  o << "],\"average\":" << format_double(r.average)
    << ",\"average_delta\":" << format_double(r.average_delta) << "}\n";
  return o.str();
}

EvalReport parse_report_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.system = j.at("system").get<std::string>();
    for (const auto& row : j.at("rows"))
      r.rows.push_back({row.at("benchmark").get<std::string>(), row.at("score").get<double>(),
                        row.at("delta_vs_base").get<double>(), row.at("mean_len").get<double>()});
    r.average = j.at("average").get<double>();
    r.average_delta = j.at("average_delta").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace tlab
