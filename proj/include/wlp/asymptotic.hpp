#pragma once

// Large-system (K, N -> infinity, K/N = beta) SINR and sum-rate predictions
// for MMSE and widely-linear MMSE precoding.

#include <cmath>
#include <string>

#include "wlp/errors.hpp"
#include "wlp/model.hpp"
#include "wlp/precoding.hpp"

namespace wlp {

struct AsymptoticPoint {
  double beta = 0.0;
  double gamma = 0.0;
  double xi = 0.0;    // useful-signal amplitude
  double psi = 0.0;   // noise gain (gamma * psi is the noise power)
  double zeta = 0.0;  // interference power
  double sinr = 0.0;
};

namespace detail {

inline void check_domain(double beta, double gamma) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw DomainError("beta must be positive, got " + std::to_string(beta));
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DomainError("gamma must be positive, got " + std::to_string(gamma));
}

// Pieces shared by the transform and its derivative. With
// a = (1 - beta)/(2 gamma) and R = a^2 + (1 + beta)/(2 gamma) + 1/4 the
// transform is sqrt(R) + a - 1/2 = 1 / (gamma (sqrt(R) - a + 1/2)); the second
// form has no cancellation for either sign of a.
struct StieltjesTerms {
  double root;       // sqrt(R)
  double value;      // H(beta, -gamma)
  double half_gain;  // ((1 + beta)/(4 gamma) + 1/4) / sqrt(R)
};

inline StieltjesTerms stieltjes_terms(double beta, double gamma) {
  check_domain(beta, gamma);
  const double a = (1.0 - beta) / (2.0 * gamma);
  const double lin = (1.0 + beta) / (2.0 * gamma) + 0.25;  // R - a^2
  const double root = std::sqrt(a * a + lin);
  const double root_minus_a = a > 0.0 ? lin / (root + a) : root - a;
  const double value = 1.0 / (gamma * (root_minus_a + 0.5));
  return {root, value, (0.5 * lin) / root + 0.125 / root};
}

}  // namespace detail

/// Stieltjes transform of the limiting eigenvalue law of (1/N) H^H H
/// evaluated at -gamma, i.e. lim (1/N) tr((1/N) H^H H + gamma I)^{-1}.
inline double stieltjes(double beta, double gamma) {
  return detail::stieltjes_terms(beta, gamma).value;
}

/// d/dgamma of stieltjes(beta, gamma); strictly negative.
inline double stieltjes_derivative(double beta, double gamma) {
  const auto t = detail::stieltjes_terms(beta, gamma);
  return -t.value * t.value * (0.5 + t.half_gain);
}

inline AsymptoticPoint asymptotic_point(double beta, double gamma) {
  AsymptoticPoint pt;
  pt.beta = beta;
  pt.gamma = gamma;
  pt.xi = stieltjes(beta, gamma);
  const double d = stieltjes_derivative(beta, gamma);
  pt.psi = -d;
  pt.zeta = pt.xi + gamma * d;
  pt.sinr = pt.xi * pt.xi / (pt.zeta + gamma * pt.psi);
  return pt;
}

inline double asymptotic_sinr_mmse(double beta, double gamma) {
  return asymptotic_point(beta, gamma).sinr;
}

/// Real-valued symbols with widely-linear MMSE processing behave like
/// complex MMSE with half the load and half the noise.
inline double asymptotic_sinr_wl_mmse(double beta, double gamma) {
  return asymptotic_sinr_mmse(beta / 2.0, gamma / 2.0);
}

/// True for the kinds that have a closed-form large-system sum rate.
inline bool has_asymptotic_rate(PrecoderKind kind) {
  return kind.family == PrecoderFamily::Mmse || kind.family == PrecoderFamily::WlMmse;
}

/// Sum rate in bits/s/Hz: K log2(1 + SINR) for MMSE, half of that with the
/// widely-linear SINR for WL-MMSE.
inline double asymptotic_sum_rate(PrecoderKind kind, const SystemConfig& cfg) {
  if (!has_asymptotic_rate(kind))
    throw DomainError("no closed-form sum rate for " + kind.name());
  if (cfg.n_users == 0) return 0.0;
  cfg.validate();
  const double k_users = cfg.n_users;
  const double beta = cfg.beta();
  const double gamma = cfg.gamma();
  if (kind.family == PrecoderFamily::Mmse)
    return k_users * std::log2(1.0 + asymptotic_sinr_mmse(beta, gamma));
  return 0.5 * k_users * std::log2(1.0 + asymptotic_sinr_wl_mmse(beta, gamma));
}

}  // namespace wlp
