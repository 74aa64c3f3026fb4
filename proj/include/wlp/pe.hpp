#pragma once

// Polynomial expansion of the widely-linear MMSE detector: asymptotic
// eigenvalue moments, moment-matched coefficients and Horner evaluation.

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wlp/errors.hpp"
#include "wlp/model.hpp"

namespace wlp {

/// Highest supported polynomial order. The moment matrix is Hankel-like and
/// loses rank quickly beyond this.
inline constexpr int kMaxPeOrder = 8;
/// Reciprocal condition estimate below which the moment system is rejected.
inline constexpr double kMinMomentRcond = 1e-13;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  std::uint64_t acc = 1;
  for (int i = 1; i <= k; ++i) acc = acc * static_cast<std::uint64_t>(n - k + i) / i;
  return static_cast<double>(acc);
}

/// Limit of (1/K) tr(W^m) for a K x K Wishart-type Gram W = (1/n) X X^T
/// with K/n -> beta_eff. For the augmented Gram (1/N) H~ H~^T pass beta/2.
inline double asymptotic_moment(int m, double beta_eff) {
  if (m < 0) throw DomainError("moment order must be >= 0");
  if (!(beta_eff > 0.0)) throw DomainError("moment ratio must be positive");
  if (m == 0) return 1.0;
  double sum = 0.0;
  double power = 1.0;
  for (int i = 0; i < m; ++i) {
    sum += binomial(m, i) * binomial(m, i + 1) * power;
    power *= beta_eff;
  }
  return sum / m;
}

struct MomentTable {
  double beta_eff = 0.0;
  std::vector<double> moments;  // moments[m], m = 0..max_order

  static MomentTable build(double beta_eff, int max_order) {
    MomentTable t{beta_eff, {}};
    t.moments.reserve(static_cast<std::size_t>(max_order) + 1);
    for (int m = 0; m <= max_order; ++m)
      t.moments.push_back(asymptotic_moment(m, beta_eff));
    return t;
  }

  double operator[](int m) const { return moments.at(static_cast<std::size_t>(m)); }
};

struct PeCoefficients {
  int order = 0;
  Eigen::VectorXd omega;  // omega_0 .. omega_L
  double reg_c = 0.0;
};

/// (sigma_R^2 / P_TX)(K / N), the regularizer of the widely-linear Gram.
inline double pe_regularizer(const SystemConfig& cfg) {
  return cfg.real_noise_variance() / cfg.tx_power() * cfg.beta();
}

/// Moment matrix and right-hand side of the coefficient system. Row/column
/// j = 0..L pairs coefficient omega_j with moment index j + 1, so every
/// moment order involved is at least 1.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> moment_system(
    int order, const MomentTable& table, double reg_c) {
  const int size = order + 1;
  Eigen::MatrixXd xi(size, size);
  Eigen::VectorXd phi(size);
  for (int i = 0; i < size; ++i) {
    const int m = i + 1;
    phi(i) = table[m];
    for (int j = 0; j < size; ++j) {
      const int n = j + 1;
      xi(i, j) = table[m + n] + reg_c * table[m + n - 1];
    }
  }
  return {xi, phi};
}

/// Channel-independent PE coefficients for the configuration's load and SNR.
inline PeCoefficients pe_coefficients(int order, const SystemConfig& cfg) {
  cfg.validate();
  if (order < 0) throw OrderTooHighError("PE order must be >= 0");
  if (order > kMaxPeOrder)
    throw OrderTooHighError("PE order " + std::to_string(order) +
                            " exceeds the supported maximum " +
                            std::to_string(kMaxPeOrder));
  const double c = pe_regularizer(cfg);
  const MomentTable table = MomentTable::build(cfg.beta() / 2.0, 2 * order + 2);
  auto [xi, phi] = moment_system(order, table, c);

  // The moment matrix is a Gram matrix of monomials under a positive
  // measure, hence SPD.
  Eigen::LLT<Eigen::MatrixXd> llt(xi);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinMomentRcond)
    throw OrderTooHighError("moment matrix of order " + std::to_string(order) +
                            " is numerically singular");
  PeCoefficients out{order, llt.solve(phi), c};
  if ((xi * out.omega - phi).norm() > 1e-8 * phi.norm())
    throw OrderTooHighError("moment system solve lost accuracy at order " +
                            std::to_string(order));
  return out;
}

/// U_PE = (1/N) H~ sum_l omega_l A^l with A = (1/N) H~^T H~, by Horner's
/// scheme on the K x 2N iterate (right-multiplying by A as two thin
/// products through H~).
inline Eigen::MatrixXd pe_detector_matrix(const AugmentedChannel& h,
                                          const PeCoefficients& coeffs) {
  const Eigen::MatrixXd& ht = h.entries;
  const double inv_n = 1.0 / static_cast<double>(h.n_antennas());
  const Eigen::MatrixXd base = inv_n * ht;
  const int order = static_cast<int>(coeffs.omega.size()) - 1;
  if (order < 0) throw DimensionError("empty PE coefficient vector");

  Eigen::MatrixXd acc = coeffs.omega(order) * base;
  for (int l = order - 1; l >= 0; --l) {
    const Eigen::MatrixXd gram = acc * ht.transpose();  // K x K
    acc = inv_n * (gram * ht) + coeffs.omega(l) * base;
  }
  return acc;
}

/// Matrix-free V~_PE z = sum_l omega_l A^l ((1/N) H~^T Delta^{-1} z).
/// Only matrix-vector products with H~ and H~^T: O(L K N) per vector.
inline Eigen::VectorXd pe_apply(const AugmentedChannel& h,
                                const PeCoefficients& coeffs,
                                const Eigen::VectorXd& delta,
                                const Eigen::VectorXd& z) {
  const Eigen::MatrixXd& ht = h.entries;
  if (delta.size() != ht.rows() || z.size() != ht.rows())
    throw DimensionError("pe_apply: delta and z must have K entries");
  const int order = static_cast<int>(coeffs.omega.size()) - 1;
  if (order < 0) throw DimensionError("empty PE coefficient vector");
  const double inv_n = 1.0 / static_cast<double>(h.n_antennas());

  const Eigen::VectorXd x = inv_n * (ht.transpose() * z.cwiseQuotient(delta));
  Eigen::VectorXd acc = coeffs.omega(order) * x;
  Eigen::VectorXd tmp(ht.rows());
  for (int l = order - 1; l >= 0; --l) {
    tmp.noalias() = ht * acc;
    acc.noalias() = inv_n * (ht.transpose() * tmp);
    acc += coeffs.omega(l) * x;
  }
  return acc;
}

}  // namespace wlp
