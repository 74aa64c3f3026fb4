// wlprecode: sum-rate sweeps, closed-form curves and invariant checks for
// widely-linear downlink precoding.
//
// Exit status: 0 success, 1 validation failure, 2 usage error, 3 I/O error.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "wlp/io.hpp"
#include "wlp/wlp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes `body` to `path`, or to stdout when the path is empty.
template <class Writer>
void emit(const std::string& path, Writer&& body) {
  if (path.empty()) {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  body(f);
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

struct SharedFlags {
  std::optional<std::string> preset, config, beta_grid, kinds, out, format;
  std::optional<int> n_antennas, trials, threads;
  std::optional<double> snr_db;
  std::optional<std::uint64_t> seed;
};

std::map<std::string, std::string> flag_map(const SharedFlags& f) {
  std::map<std::string, std::string> kv;
  if (f.preset) kv["preset"] = *f.preset;
  if (f.n_antennas) kv["n_antennas"] = std::to_string(*f.n_antennas);
  if (f.beta_grid) kv["beta_grid"] = *f.beta_grid;
  if (f.snr_db) kv["snr_db"] = wlp::io::format_number(*f.snr_db);
  if (f.kinds) kv["kinds"] = *f.kinds;
  if (f.trials) kv["trials"] = std::to_string(*f.trials);
  if (f.seed) kv["seed"] = std::to_string(*f.seed);
  if (f.threads) kv["threads"] = std::to_string(*f.threads);
  if (f.out) kv["out"] = *f.out;
  if (f.format) kv["format"] = *f.format;
  return kv;
}

std::map<std::string, std::string> read_config(const std::optional<std::string>& path) {
  if (!path) return {};
  std::ifstream in(*path);
  if (!in) throw IoError("cannot read config '" + *path + "'");
  return wlp::io::parse_key_values(in);
}

int cmd_sweep(const SharedFlags& flags) {
  const wlp::io::SweepSettings s = wlp::io::resolve_settings(read_config(flags.config), flag_map(flags));
  const wlp::SweepResult result = wlp::run_sweep(s.spec, s.threads);
  emit(s.out, [&](std::ostream& os) {
    if (s.format == "json") os << wlp::io::sweep_json(result).dump(2) << '\n';
    else wlp::io::write_sweep_csv(os, result);
  });
  if (!s.out.empty()) {
    emit(s.out + ".manifest", [&](std::ostream& os) {
      os << wlp::io::sweep_manifest(s, result, s.out).dump(2) << '\n';
    });
  }
  return kExitOk;
}

int cmd_analyze(const SharedFlags& flags) {
  const wlp::io::SweepSettings s = wlp::io::resolve_settings(read_config(flags.config), flag_map(flags));
  const auto rows = wlp::io::tabulate_analytic(s.spec.beta_grid, s.spec.snr_db, s.spec.n_antennas);
  emit(s.out, [&](std::ostream& os) {
    if (s.format == "json") os << wlp::io::analyze_json(rows).dump(2) << '\n';
    else wlp::io::write_analyze_csv(os, rows);
  });
  return kExitOk;
}

int cmd_validate(const wlp::ValidationOptions& opt) {
  const auto checks = wlp::run_validation(opt);
  bool all_ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " observed=" << wlp::io::format_number(c.observed)
              << " tolerance=" << wlp::io::format_number(c.tolerance) << '\n';
    all_ok = all_ok && c.passed;
  }
  std::cout << (all_ok ? "all " : "some ") << checks.size() << " checks "
            << (all_ok ? "passed" : "did not pass") << '\n';
  return all_ok ? kExitOk : kExitValidation;
}

void add_grid_flags(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--n-antennas", f.n_antennas, "base-station antennas N");
  cmd->add_option("--beta-grid", f.beta_grid, "load factors K/N as start:step:stop or a comma list");
  cmd->add_option("--snr-db", f.snr_db, "SNR = P_TX / sigma^2 in dB");
  cmd->add_option("--out", f.out, "output file (default: stdout)");
  cmd->add_option("--format", f.format, "csv or json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Widely-linear precoding sum-rate simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(wlp::io::kToolVersion));

  SharedFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sum rate over a load-factor grid");
  add_grid_flags(sweep, sweep_flags);
  sweep->add_option("--preset", sweep_flags.preset, "fig3 or fig4");
  sweep->add_option("--kinds", sweep_flags.kinds, "comma list: wl_mmse,wl_zf,mmse,zf,bf,pe:L,all");
  sweep->add_option("--trials", sweep_flags.trials, "channel realizations per grid point");
  sweep->add_option("--seed", sweep_flags.seed, "master seed");
  sweep->add_option("--threads", sweep_flags.threads, "worker threads (results do not depend on it)");

  SharedFlags analyze_flags;
  CLI::App* analyze = app.add_subcommand("analyze", "Closed-form SINR and sum rate for MMSE and WL-MMSE");
  add_grid_flags(analyze, analyze_flags);

  wlp::ValidationOptions vopt;
  CLI::App* validate = app.add_subcommand("validate", "Run the invariant checks of every module");
  validate->add_option("--n-antennas", vopt.n_antennas, "antennas for the algebraic checks");
  validate->add_option("--n-users", vopt.n_users, "users for the algebraic checks");
  validate->add_option("--channels", vopt.n_channels, "random channels per algebraic check");
  validate->add_option("--seed", vopt.seed, "master seed");
  validate->add_option("--moment-antennas", vopt.moment_antennas, "N for the moment oracle");
  validate->add_option("--oracle-antennas", vopt.oracle_antennas, "N for the PE coefficient oracle");
  validate->add_option("--oracle-order", vopt.oracle_max_order, "highest PE order fed to the oracle");
  validate->add_flag("--inject-fault", vopt.inject_duality_fault,
                     "test hook: flip a sign in the duality power allocation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*analyze) return cmd_analyze(analyze_flags);
    if (*validate) {
      if (vopt.n_antennas < 1 || vopt.n_users < 1 || vopt.n_channels < 1)
        throw wlp::io::UsageError("validate", "sizes must be positive");
      return cmd_validate(vopt);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const wlp::io::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const wlp::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const wlp::DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const wlp::InfeasibleError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const wlp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitUsage;
}
