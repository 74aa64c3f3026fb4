#pragma once

// Command-line plumbing: key = value configuration files, named presets,
// grid/kind parsing and CSV/JSON emission. Requires nlohmann/json.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wlp/asymptotic.hpp"
#include "wlp/errors.hpp"
#include "wlp/precoding.hpp"
#include "wlp/sim.hpp"

namespace wlp::io {

#ifdef WLP_VERSION
inline constexpr const char* kToolVersion = WLP_VERSION;
#else
inline constexpr const char* kToolVersion = "0.0.0";
#endif

/// Bad user input; `field` names the offending setting.
class UsageError : public Error {
 public:
  UsageError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(std::string_view field, std::string_view text) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(value))
    throw UsageError(std::string(field), "expected a number, got '" + t + "'");
  return value;
}

template <class Int>
Int parse_int(std::string_view field, std::string_view text) {
  const std::string t = trim(text);
  Int value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw UsageError(std::string(field), "expected an integer, got '" + t + "'");
  return value;
}

/// "start:step:stop" (inclusive) or a comma list. Result sorted ascending.
inline std::vector<double> parse_beta_grid(std::string_view text) {
  const std::string t = trim(text);
  std::vector<double> grid;
  if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("beta_grid", "expected start:step:stop, got '" + t + "'");
    const double start = parse_double("beta_grid", parts[0]);
    const double step = parse_double("beta_grid", parts[1]);
    const double stop = parse_double("beta_grid", parts[2]);
    if (!(step > 0.0) || stop < start)
      throw UsageError("beta_grid", "need step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) {
      // Round away accumulated binary noise so 0.25 + 7*0.05 prints as 0.6.
      grid.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
    }
  } else {
    std::stringstream ss(t);
    for (std::string part; std::getline(ss, part, ',');) grid.push_back(parse_double("beta_grid", part));
  }
  if (grid.empty()) throw UsageError("beta_grid", "empty grid");
  for (double b : grid)
    if (!(b > 0.0)) throw UsageError("beta_grid", "load factors must be positive");
  std::sort(grid.begin(), grid.end());
  return grid;
}

inline std::vector<PrecoderKind> fig3_kinds() {
  return {PrecoderKind::mmse(), PrecoderKind::zf(), PrecoderKind::conjugate_bf(),
          PrecoderKind::wl_mmse(), PrecoderKind::wl_zf()};
}

/// Comma list of kind names; "all" expands to the benchmark set.
inline std::vector<PrecoderKind> parse_kinds(std::string_view text) {
  std::vector<PrecoderKind> kinds;
  std::stringstream ss{std::string(text)};
  for (std::string part; std::getline(ss, part, ',');) {
    const std::string name = trim(part);
    if (name == "all") {
      for (auto k : fig3_kinds()) kinds.push_back(k);
      continue;
    }
    const auto kind = PrecoderKind::parse(name);
    if (!kind) throw UsageError("kinds", "unknown precoder '" + name + "'");
    if (kind->family == PrecoderFamily::PeWlMmse && kind->order > kMaxPeOrder)
      throw UsageError("kinds", "PE order above " + std::to_string(kMaxPeOrder));
    kinds.push_back(*kind);
  }
  if (kinds.empty()) throw UsageError("kinds", "no precoders given");
  return kinds;
}

inline std::string kinds_to_string(const std::vector<PrecoderKind>& kinds) {
  std::string out;
  for (const auto& k : kinds) out += (out.empty() ? "" : ",") + k.name();
  return out;
}

/// Parses `key = value` lines; '#' starts a comment. Later keys win.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError("config", "line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

struct SweepSettings {
  SweepSpec spec;
  int threads = 1;
  std::string out;  // empty: stdout
  std::string format = "csv";
  std::string preset;

  SweepSettings() {
    spec.beta_grid = {0.5, 1.0, 1.5};
    spec.kinds = {PrecoderKind::mmse(), PrecoderKind::wl_mmse()};
  }
};

inline void apply_setting(SweepSettings& s, const std::string& key, const std::string& value) {
  if (key == "n_antennas") {
    s.spec.n_antennas = parse_int<int>(key, value);
    if (s.spec.n_antennas < 1) throw UsageError(key, "must be >= 1");
  } else if (key == "beta_grid") {
    s.spec.beta_grid = parse_beta_grid(value);
  } else if (key == "snr_db") {
    s.spec.snr_db = parse_double(key, value);
  } else if (key == "kinds") {
    s.spec.kinds = parse_kinds(value);
  } else if (key == "trials") {
    s.spec.n_trials = parse_int<int>(key, value);
    if (s.spec.n_trials < 1) throw UsageError(key, "must be >= 1");
  } else if (key == "seed") {
    s.spec.master_seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "threads") {
    s.threads = parse_int<int>(key, value);
    if (s.threads < 1) throw UsageError(key, "must be >= 1");
  } else if (key == "noise_variance") {
    s.spec.noise_variance = parse_double(key, value);
    if (!(s.spec.noise_variance > 0.0)) throw UsageError(key, "must be positive");
  } else if (key == "out") {
    s.out = value;
  } else if (key == "format") {
    if (value != "csv" && value != "json") throw UsageError(key, "expected csv or json");
    s.format = value;
  } else if (key == "preset") {
    // handled before other keys by resolve_settings
  } else {
    throw UsageError(key, "unknown setting");
  }
}

/// Built-in experiment presets, in the same key = value form as config files.
inline std::string preset_text(std::string_view name) {
  if (name == "fig3")
    return "n_antennas = 100\n"
           "snr_db = 20\n"
           "beta_grid = 0.25:0.05:1.9\n"
           "kinds = mmse,zf,bf,wl_mmse,wl_zf\n"
           "trials = 500\n";
  if (name == "fig4")
    return "n_antennas = 50\n"
           "snr_db = 15\n"
           "beta_grid = 0.25:0.05:1.9\n"
           "kinds = bf,wl_mmse,pe:1,pe:2,pe:3,pe:4\n"
           "trials = 500\n";
  throw UsageError("preset", "unknown preset '" + std::string(name) + "' (fig3, fig4)");
}

/// Layers preset < config file < flags.
inline SweepSettings resolve_settings(const std::map<std::string, std::string>& file_kv,
                                      const std::map<std::string, std::string>& flag_kv) {
  SweepSettings s;
  std::string preset;
  if (auto it = file_kv.find("preset"); it != file_kv.end()) preset = it->second;
  if (auto it = flag_kv.find("preset"); it != flag_kv.end()) preset = it->second;
  if (!preset.empty()) {
    std::istringstream in(preset_text(preset));
    for (const auto& [k, v] : parse_key_values(in)) apply_setting(s, k, v);
    s.preset = preset;
  }
  for (const auto& [k, v] : file_kv) apply_setting(s, k, v);
  for (const auto& [k, v] : flag_kv) apply_setting(s, k, v);
  return s;
}

/// Nine significant digits, the fixed precision of every emitted number.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr const char* kSweepCsvHeader =
    "beta,kind,mean_sum_rate,std_err,analytic_sum_rate,n_ok_trials,n_infeasible";

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << kSweepCsvHeader << '\n';
  for (const auto& p : r.points) {
    os << format_number(p.beta) << ',' << p.kind.name() << ',';
    if (p.n_ok > 0) os << format_number(p.mean_sum_rate) << ',' << format_number(p.std_err);
    else os << ',';
    os << ',';
    if (p.analytic_sum_rate) os << format_number(*p.analytic_sum_rate);
    os << ',' << p.n_ok << ',' << p.n_infeasible << '\n';
  }
}

inline nlohmann::ordered_json number_or_null(bool present, double v) {
  if (!present || !std::isfinite(v)) return nullptr;
  // Round-trip through the fixed-precision text so CSV and JSON agree.
  return std::stod(format_number(v));
}

inline nlohmann::ordered_json sweep_json(const SweepResult& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& p : r.points) {
    rows.push_back({{"beta", number_or_null(true, p.beta)},
                    {"kind", p.kind.name()},
                    {"mean_sum_rate", number_or_null(p.n_ok > 0, p.mean_sum_rate)},
                    {"std_err", number_or_null(p.n_ok > 0, p.std_err)},
                    {"analytic_sum_rate", number_or_null(p.analytic_sum_rate.has_value(),
                                                         p.analytic_sum_rate.value_or(0.0))},
                    {"n_ok_trials", p.n_ok},
                    {"n_infeasible", p.n_infeasible}});
  }
  return rows;
}

inline nlohmann::ordered_json spec_json(const SweepSpec& spec) {
  return {{"n_antennas", spec.n_antennas},
          {"beta_grid", spec.beta_grid},
          {"snr_db", spec.snr_db},
          {"kinds", kinds_to_string(spec.kinds)},
          {"trials", spec.n_trials},
          {"seed", spec.master_seed},
          {"noise_variance", spec.noise_variance}};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json sweep_manifest(const SweepSettings& s, const SweepResult& r,
                                     const std::string& data_file) {
  nlohmann::ordered_json infeasible = nlohmann::ordered_json::array();
  for (const auto& p : r.points)
    infeasible.push_back({{"beta", number_or_null(true, p.beta)},
                          {"kind", p.kind.name()},
                          {"n_infeasible", p.n_infeasible}});
  return {{"tool", "wlprecode"},
          {"version", kToolVersion},
          {"command", "sweep"},
          {"data_file", data_file},
          {"format", s.format},
          {"preset", s.preset},
          {"config", spec_json(r.spec)},
          {"master_seed", r.spec.master_seed},
          {"timestamp", utc_timestamp()},
          {"infeasible_counts", infeasible}};
}

// ---------------------------------------------------------------------------
// Analytic tabulation

struct AnalyticRow {
  double beta = 0.0;
  int n_users = 0;
  double gamma = 0.0;
  double sinr_mmse = 0.0;
  double sinr_wl_mmse = 0.0;
  double sum_rate_mmse = 0.0;
  double sum_rate_wl_mmse = 0.0;
};

inline constexpr const char* kAnalyzeCsvHeader =
    "beta,n_users,gamma,sinr_mmse,sinr_wl_mmse,sum_rate_mmse,sum_rate_wl_mmse";

/// Closed-form curves over a grid; K = round(beta N) for the sum rates.
inline std::vector<AnalyticRow> tabulate_analytic(std::vector<double> beta_grid, double snr_db,
                                                  int n_antennas) {
  if (n_antennas < 1) throw UsageError("n_antennas", "must be >= 1");
  std::sort(beta_grid.begin(), beta_grid.end());
  const double snr = db_to_linear(snr_db);
  std::vector<AnalyticRow> rows;
  for (double beta : beta_grid) {
    AnalyticRow row;
    row.beta = beta;
    row.n_users = static_cast<int>(std::lround(beta * n_antennas));
    row.gamma = beta / snr;
    try {
      row.sinr_mmse = asymptotic_sinr_mmse(beta, row.gamma);
      row.sinr_wl_mmse = asymptotic_sinr_wl_mmse(beta, row.gamma);
    } catch (const DomainError& e) {
      throw DomainError("grid point beta=" + format_number(beta) + ": " + e.what());
    }
    row.sum_rate_mmse = row.n_users * std::log2(1.0 + row.sinr_mmse);
    row.sum_rate_wl_mmse = 0.5 * row.n_users * std::log2(1.0 + row.sinr_wl_mmse);
    rows.push_back(row);
  }
  return rows;
}

inline void write_analyze_csv(std::ostream& os, const std::vector<AnalyticRow>& rows) {
  os << kAnalyzeCsvHeader << '\n';
  for (const auto& r : rows) {
    os << format_number(r.beta) << ',' << r.n_users << ',' << format_number(r.gamma) << ','
       << format_number(r.sinr_mmse) << ',' << format_number(r.sinr_wl_mmse) << ','
       << format_number(r.sum_rate_mmse) << ',' << format_number(r.sum_rate_wl_mmse) << '\n';
  }
}

inline nlohmann::ordered_json analyze_json(const std::vector<AnalyticRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    out.push_back({{"beta", number_or_null(true, r.beta)},
                   {"n_users", r.n_users},
                   {"gamma", number_or_null(true, r.gamma)},
                   {"sinr_mmse", number_or_null(true, r.sinr_mmse)},
                   {"sinr_wl_mmse", number_or_null(true, r.sinr_wl_mmse)},
                   {"sum_rate_mmse", number_or_null(true, r.sum_rate_mmse)},
                   {"sum_rate_wl_mmse", number_or_null(true, r.sum_rate_wl_mmse)}});
  return out;
}

}  // namespace wlp::io
