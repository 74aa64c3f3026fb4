#pragma once

// Monte-Carlo harness: per-trial downlink SINR and rate measurement, ergodic
// sum-rate sweeps, and empirical oracles for the eigenvalue moments and the
// polynomial-expansion coefficients.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "wlp/asymptotic.hpp"
#include "wlp/errors.hpp"
#include "wlp/model.hpp"
#include "wlp/pe.hpp"
#include "wlp/precoding.hpp"

namespace wlp {

struct TrialResult {
  Eigen::VectorXd sinr_dl;
  Eigen::VectorXd rates;
  double sum_rate = 0.0;
};

/// SINR_k = p_k |g_kk|^2 / (sum_{j != k} p_j |g_kj|^2 + eta sigma^2) with
/// G = H~ V~ (widely-linear) or G = H V (complex). The receive scaling
/// delta_k / sqrt(p_k) cancels and does not appear.
inline Eigen::VectorXd measure_downlink_sinr(const PrecoderSolution& sol,
                                             const ComplexChannel& h,
                                             const SystemConfig& cfg) {
  Eigen::MatrixXd gain;
  if (sol.kind.widely_linear()) {
    const Eigen::MatrixXd& v = sol.augmented();
    if (v.rows() != 2 * h.n_antennas() || v.cols() != h.n_users())
      throw DimensionError("measure_downlink_sinr: augmented precoder shape mismatch");
    gain = (augment_channel(h).entries * v).cwiseAbs2();
  } else {
    const Eigen::MatrixXcd& v = sol.complex();
    if (v.rows() != h.n_antennas() || v.cols() != h.n_users())
      throw DimensionError("measure_downlink_sinr: precoder shape mismatch");
    gain = (h.entries * v).cwiseAbs2();
  }
  const double noise = sol.kind.noise_factor() * cfg.noise_variance;
  const Eigen::VectorXd received = gain * sol.p;  // sum_j p_j |g_kj|^2
  Eigen::VectorXd sinr(h.n_users());
  for (Eigen::Index k = 0; k < sinr.size(); ++k) {
    const double signal = sol.p(k) * gain(k, k);
    // Clamp rounding noise; interference is a sum of nonnegative terms.
    const double interference = std::max(received(k) - signal, 0.0);
    sinr(k) = signal / (interference + noise);
  }
  return sinr;
}

/// Real-valued symbols carry half a complex dimension: 0.5 log2(1 + SINR).
inline TrialResult rates_from_sinr(PrecoderKind kind, Eigen::VectorXd sinr) {
  TrialResult r;
  const double scale = kind.widely_linear() ? 0.5 : 1.0;
  r.rates = sinr.unaryExpr([scale](double s) { return scale * std::log2(1.0 + s); });
  r.sum_rate = r.rates.sum();
  r.sinr_dl = std::move(sinr);
  return r;
}

inline TrialResult evaluate_precoder(PrecoderKind kind, const ComplexChannel& h,
                                     const SystemConfig& cfg, const BuildOptions& opts = {}) {
  const PrecoderSolution sol = build_precoder(kind, h, cfg, opts);
  return rates_from_sinr(kind, measure_downlink_sinr(sol, h, cfg));
}

/// One channel draw, one precoder. Deterministic in `seed`.
inline TrialResult run_trial(PrecoderKind kind, const SystemConfig& cfg, std::uint64_t seed,
                             const BuildOptions& opts = {}) {
  return evaluate_precoder(kind, generate_channel(cfg, seed), cfg, opts);
}

inline bool is_infeasibility(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const InfeasibleError&) {
    return true;
  } catch (const DualityInfeasibleError&) {
    return true;
  } catch (const DegenerateUserError&) {
    return true;
  } catch (...) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Sweeps

inline constexpr int kDefaultSumRateTrials = 500;
inline constexpr int kDefaultOracleTrials = 100;

struct SweepSpec {
  int n_antennas = 100;
  std::vector<double> beta_grid;
  double snr_db = 20.0;
  std::vector<PrecoderKind> kinds;
  int n_trials = kDefaultSumRateTrials;
  std::uint64_t master_seed = 1;
  double noise_variance = 1.0;

  int users_for(double beta) const {
    return static_cast<int>(std::lround(beta * n_antennas));
  }

  SystemConfig config_for(double beta) const {
    return SystemConfig::from_snr_db(n_antennas, users_for(beta), snr_db, noise_variance);
  }

  void validate() const {
    if (n_antennas < 1) throw ConfigError("n_antennas must be >= 1");
    if (n_trials < 1) throw ConfigError("trials must be >= 1");
    if (beta_grid.empty()) throw ConfigError("beta_grid must not be empty");
    if (kinds.empty()) throw ConfigError("kinds must not be empty");
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    if (!(noise_variance > 0.0)) throw ConfigError("noise_variance must be positive");
    for (double beta : beta_grid)
      if (!(beta > 0.0) || users_for(beta) < 1)
        throw ConfigError("beta " + std::to_string(beta) + " gives fewer than one user");
    for (const auto& kind : kinds)
      if (kind.family == PrecoderFamily::PeWlMmse && kind.order > kMaxPeOrder)
        throw ConfigError("PE order above " + std::to_string(kMaxPeOrder) + " in kinds");
  }
};

struct SweepPoint {
  double beta = 0.0;
  int n_users = 0;
  PrecoderKind kind;
  double mean_sum_rate = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> analytic_sum_rate;
  int n_ok = 0;
  int n_infeasible = 0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepPoint> points;  // beta-major, kinds in spec order
};

/// Mean and standard error (sample std / sqrt(n)) folded in index order.
struct MeanStdErr {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

inline MeanStdErr ordered_mean(const std::vector<double>& values) {
  MeanStdErr out;
  double sum = 0.0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++out.count;
    }
  if (out.count == 0) return out;
  out.mean = sum / out.count;
  if (out.count == 1) {
    out.std_err = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - out.mean) * (v - out.mean);
  out.std_err = std::sqrt(ss / (out.count - 1)) / std::sqrt(static_cast<double>(out.count));
  return out;
}

/// Run `jobs` independent tasks on up to `threads` workers. Tasks write to
/// their own slots, so the outcome is independent of the schedule.
template <class Fn>
void parallel_for(std::size_t jobs, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(jobs, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Every trial of a grid point draws one channel from
/// derive_seed(master, K, trial) and evaluates all kinds on it, so kinds are
/// compared on common channel realizations.
inline SweepResult run_sweep(const SweepSpec& spec, int threads = 1) {
  spec.validate();
  const std::size_t n_beta = spec.beta_grid.size();
  const std::size_t n_kinds = spec.kinds.size();
  const std::size_t n_trials = static_cast<std::size_t>(spec.n_trials);

  // Channel-independent PE coefficients, one table per (beta, order).
  std::vector<std::vector<std::optional<PeCoefficients>>> pe_tables(
      n_beta, std::vector<std::optional<PeCoefficients>>(n_kinds));
  for (std::size_t b = 0; b < n_beta; ++b) {
    const SystemConfig cfg = spec.config_for(spec.beta_grid[b]);
    for (std::size_t q = 0; q < n_kinds; ++q) {
      if (spec.kinds[q].family != PrecoderFamily::PeWlMmse) continue;
      try {
        pe_tables[b][q] = pe_coefficients(spec.kinds[q].order, cfg);
      } catch (const OrderTooHighError&) {
        // left empty: every trial of this point counts as infeasible
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  // sum_rates[b][q][t], NaN marks an infeasible trial
  std::vector<double> sum_rates(n_beta * n_kinds * n_trials, nan);
  auto slot = [&](std::size_t b, std::size_t q, std::size_t t) -> double& {
    return sum_rates[(b * n_kinds + q) * n_trials + t];
  };

  parallel_for(n_beta * n_trials, threads, [&](std::size_t job) {
    const std::size_t b = job / n_trials;
    const std::size_t t = job % n_trials;
    const SystemConfig cfg = spec.config_for(spec.beta_grid[b]);
    const std::uint64_t seed = derive_seed(spec.master_seed, static_cast<std::uint64_t>(cfg.n_users), t);
    const ComplexChannel h = generate_channel(cfg, seed);
    for (std::size_t q = 0; q < n_kinds; ++q) {
      const PrecoderKind kind = spec.kinds[q];
      BuildOptions opts;
      if (kind.family == PrecoderFamily::PeWlMmse) {
        if (!pe_tables[b][q]) continue;
        opts.pe = &*pe_tables[b][q];
      }
      try {
        slot(b, q, t) = evaluate_precoder(kind, h, cfg, opts).sum_rate;
      } catch (...) {
        if (!is_infeasibility(std::current_exception())) throw;
      }
    }
  });

  SweepResult result{spec, {}};
  result.points.reserve(n_beta * n_kinds);
  int total_ok = 0;
  for (std::size_t b = 0; b < n_beta; ++b) {
    const SystemConfig cfg = spec.config_for(spec.beta_grid[b]);
    for (std::size_t q = 0; q < n_kinds; ++q) {
      std::vector<double> values(n_trials);
      for (std::size_t t = 0; t < n_trials; ++t) values[t] = slot(b, q, t);
      const MeanStdErr stats = ordered_mean(values);
      SweepPoint pt;
      pt.beta = spec.beta_grid[b];
      pt.n_users = cfg.n_users;
      pt.kind = spec.kinds[q];
      pt.mean_sum_rate = stats.mean;
      pt.std_err = stats.std_err;
      pt.n_ok = stats.count;
      pt.n_infeasible = spec.n_trials - stats.count;
      if (has_asymptotic_rate(pt.kind)) pt.analytic_sum_rate = asymptotic_sum_rate(pt.kind, cfg);
      total_ok += stats.count;
      result.points.push_back(pt);
    }
  }
  if (total_ok == 0) throw InfeasibleError("every grid point of the sweep is infeasible");
  return result;
}

// ---------------------------------------------------------------------------
// Empirical oracles

inline constexpr int kMaxEmpiricalMoment = 6;
inline constexpr int kMaxOracleOrder = 6;

/// Monte-Carlo mean of (1/K) tr(((1/N) H~ H~^T)^m).
inline double empirical_moment(int m, const SystemConfig& cfg, int n_trials, std::uint64_t seed) {
  cfg.validate();
  if (m < 0 || m > kMaxEmpiricalMoment)
    throw DomainError("empirical_moment supports 0 <= m <= " + std::to_string(kMaxEmpiricalMoment));
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (m == 0) return 1.0;
  double sum = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const ComplexChannel h = generate_channel(cfg, derive_seed(seed, 0x6d6f6d656e74ULL, t));
    const Eigen::MatrixXd& ha = augment_channel(h).entries;
    const Eigen::MatrixXd gram = (ha * ha.transpose()) / static_cast<double>(cfg.n_antennas);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    sum += eig.eigenvalues().array().pow(m).sum() / cfg.n_users;
  }
  return sum / n_trials;
}

/// Sample least-squares fit of the PE coefficients against the exact WL-MMSE
/// detector. The fitted quantity is the difference of the two detectors'
/// outputs on the received uplink signal, whose covariance is proportional to
/// A + c I; the objective is therefore
///   sum_trials tr((U - U_PE(omega)) (A + c I) (U - U_PE(omega))^T) / trials.
struct PeOracle {
  Eigen::MatrixXd gram;  // normal-equation matrix
  Eigen::VectorXd rhs;
  double offset = 0.0;   // objective at omega = 0
  Eigen::VectorXd omega;

  double objective(const Eigen::VectorXd& w) const {
    return offset - 2.0 * w.dot(rhs) + w.dot(gram * w);
  }
};

inline PeOracle empirical_pe_oracle(int order, const SystemConfig& cfg, int n_trials,
                                    std::uint64_t seed) {
  cfg.validate();
  if (order < 0 || order > kMaxOracleOrder)
    throw DomainError("empirical_pe_oracle supports 0 <= L <= " + std::to_string(kMaxOracleOrder));
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  const int size = order + 1;
  const double inv_n = 1.0 / cfg.n_antennas;
  const double c = pe_regularizer(cfg);

  PeOracle out{Eigen::MatrixXd::Zero(size, size), Eigen::VectorXd::Zero(size), 0.0, {}};
  std::vector<Eigen::MatrixXd> basis(static_cast<std::size_t>(size));
  std::vector<Eigen::MatrixXd> weighted(static_cast<std::size_t>(size));
  for (int t = 0; t < n_trials; ++t) {
    const AugmentedChannel ha =
        augment_channel(generate_channel(cfg, derive_seed(seed, 0x6f7261636c65ULL, t)));
    const Eigen::MatrixXd& ht = ha.entries;
    Eigen::MatrixXd a = inv_n * (ht.transpose() * ht);
    Eigen::MatrixXd w = a;
    w.diagonal().array() += c;
    const Eigen::MatrixXd target = wl_mmse_detector(ha, cfg);

    basis[0] = inv_n * ht;
    for (int l = 1; l < size; ++l) basis[l] = basis[l - 1] * a;
    for (int l = 0; l < size; ++l) weighted[l] = basis[l] * w;

    const Eigen::MatrixXd target_w = target * w;
    out.offset += (target_w.cwiseProduct(target)).sum();
    for (int i = 0; i < size; ++i) {
      out.rhs(i) += weighted[i].cwiseProduct(target).sum();
      for (int j = 0; j < size; ++j) out.gram(i, j) += weighted[i].cwiseProduct(basis[j]).sum();
    }
  }
  out.gram /= n_trials;
  out.rhs /= n_trials;
  out.offset /= n_trials;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(out.gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15))
    throw Error("sample normal equations are singular; increase n_trials");
  out.omega = ldlt.solve(out.rhs);
  return out;
}

}  // namespace wlp
