#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "wlp/errors.hpp"

namespace wlp {

using cplx = std::complex<double>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Single-cell downlink configuration.
///
/// `snr` is linear (P_TX / noise variance). The transmit power is derived
/// from it so that the two can never disagree.
struct SystemConfig {
  int n_antennas = 1;
  int n_users = 1;
  double snr = 1.0;
  double noise_variance = 1.0;

  static SystemConfig from_snr_db(int n_antennas, int n_users, double snr_db,
                                  double noise_variance = 1.0) {
    return SystemConfig{n_antennas, n_users, db_to_linear(snr_db),
                        noise_variance};
  }

  double beta() const {
    return static_cast<double>(n_users) / static_cast<double>(n_antennas);
  }
  double tx_power() const { return snr * noise_variance; }
  /// Noise variance of the real part of the receiver noise.
  double real_noise_variance() const { return 0.5 * noise_variance; }
  /// Per-user power under a uniform split of the budget.
  double rho() const { return tx_power() / n_users; }
  /// Effective noise-to-power ratio sigma^2 / (rho N), identical to beta/snr.
  double gamma() const { return beta() / snr; }
  double gamma_from_noise() const {
    return noise_variance / (rho() * n_antennas);
  }

  void validate() const {
    if (n_antennas < 1) throw ConfigError("n_antennas must be >= 1");
    if (n_users < 1) throw ConfigError("n_users must be >= 1");
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
      throw ConfigError("noise_variance must be positive and finite");
    if (!(snr > 0.0) || !std::isfinite(snr))
      throw ConfigError("snr must be positive and finite");
  }
};

/// K x N complex channel, one row per user.
struct ComplexChannel {
  Eigen::MatrixXcd entries;
  std::uint64_t seed = 0;

  Eigen::Index n_users() const { return entries.rows(); }
  Eigen::Index n_antennas() const { return entries.cols(); }
};

/// K x 2N real channel [Re(H)  -Im(H)].
struct AugmentedChannel {
  Eigen::MatrixXd entries;

  Eigen::Index n_users() const { return entries.rows(); }
  Eigen::Index n_antennas() const { return entries.cols() / 2; }
};

/// 2N x K real precoder [V_R ; V_I].
struct AugmentedPrecoder {
  Eigen::MatrixXd entries;
};

/// SplitMix64 finalizer; used to derive independent per-trial seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for trial `trial` of stream `stream` under `master`. Depends only on
/// its arguments, never on the order in which trials are executed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t trial) {
  return mix64(mix64(master ^ mix64(stream)) ^ mix64(trial + 0x632be59bd9b4e019ULL));
}

/// I.i.d. CN(0,1) Rayleigh channel: each entry gets two independent
/// N(0, 1/2) draws, real part first, filled user by user.
inline ComplexChannel generate_channel(int n_users, int n_antennas,
                                       std::uint64_t seed) {
  if (n_users < 1 || n_antennas < 1)
    throw ConfigError("channel dimensions must be positive");
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  ComplexChannel h{Eigen::MatrixXcd(n_users, n_antennas), seed};
  for (int k = 0; k < n_users; ++k) {
    for (int n = 0; n < n_antennas; ++n) {
      const double re = normal(engine);
      const double im = normal(engine);
      h.entries(k, n) = cplx(re, im);
    }
  }
  return h;
}

inline ComplexChannel generate_channel(const SystemConfig& cfg,
                                       std::uint64_t seed) {
  cfg.validate();
  return generate_channel(cfg.n_users, cfg.n_antennas, seed);
}

inline AugmentedChannel augment_channel(const Eigen::MatrixXcd& h) {
  const Eigen::Index n = h.cols();
  AugmentedChannel out{Eigen::MatrixXd(h.rows(), 2 * n)};
  out.entries.leftCols(n) = h.real();
  out.entries.rightCols(n) = -h.imag();
  return out;
}

inline AugmentedChannel augment_channel(const ComplexChannel& h) {
  return augment_channel(h.entries);
}

inline AugmentedPrecoder augment_precoder(const Eigen::MatrixXcd& v) {
  const Eigen::Index n = v.rows();
  AugmentedPrecoder out{Eigen::MatrixXd(2 * n, v.cols())};
  out.entries.topRows(n) = v.real();
  out.entries.bottomRows(n) = v.imag();
  return out;
}

/// V = V_R + i V_I from the stacked [V_R ; V_I] layout.
inline Eigen::MatrixXcd deaugment_precoder(const Eigen::MatrixXd& v_aug) {
  if (v_aug.rows() % 2 != 0)
    throw DimensionError("augmented precoder needs an even row count, got " +
                         std::to_string(v_aug.rows()));
  const Eigen::Index n = v_aug.rows() / 2;
  Eigen::MatrixXcd v(n, v_aug.cols());
  v.real() = v_aug.topRows(n);
  v.imag() = v_aug.bottomRows(n);
  return v;
}

inline Eigen::MatrixXcd deaugment_precoder(const AugmentedPrecoder& v_aug) {
  return deaugment_precoder(v_aug.entries);
}

/// || Re{H V s} - H~ V~ s || for a real symbol vector s. Zero up to rounding
/// whenever the augmented model is consistent with the complex one.
inline double real_equivalence_check(const ComplexChannel& h,
                                     const AugmentedPrecoder& v_aug,
                                     const Eigen::VectorXd& s) {
  const Eigen::MatrixXcd v = deaugment_precoder(v_aug);
  if (v.rows() != h.n_antennas() || v.cols() != s.size())
    throw DimensionError("real_equivalence_check: shape mismatch");
  const Eigen::VectorXd complex_route =
      (h.entries * (v * s.cast<cplx>())).real();
  const Eigen::VectorXd real_route =
      augment_channel(h).entries * (v_aug.entries * s);
  return (complex_route - real_route).norm();
}

}  // namespace wlp
