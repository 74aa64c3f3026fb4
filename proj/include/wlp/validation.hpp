#pragma once

// Self-check harness: the algebraic and statistical invariants of every
// module, run on small random instances and reported one line per check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wlp/asymptotic.hpp"
#include "wlp/model.hpp"
#include "wlp/pe.hpp"
#include "wlp/precoding.hpp"
#include "wlp/sim.hpp"

namespace wlp {

struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool passed = false;
};

struct ValidationOptions {
  int n_antennas = 16;
  int n_users = 12;
  int n_channels = 20;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  int moment_antennas = 256;
  int moment_trials = 16;
  int oracle_antennas = 64;
  int oracle_trials = kDefaultOracleTrials;
  int oracle_max_order = 2;
  /// Test hook: corrupt the downlink power allocation.
  bool inject_duality_fault = false;
};

/// Largest relative deviation |a_l - b_l| / |b_l| over the coefficients
/// whose oracle magnitude is at least `floor` times the largest one.
inline double dominant_coefficient_error(const Eigen::VectorXd& model,
                                         const Eigen::VectorXd& oracle, double floor = 0.05) {
  const double cutoff = floor * oracle.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index l = 0; l < oracle.size(); ++l)
    if (std::abs(oracle(l)) >= cutoff)
      worst = std::max(worst, std::abs(model(l) - oracle(l)) / std::abs(oracle(l)));
  return worst;
}

/// Explicit power-sum PE precoder applied to z: forms A and its powers, then
/// normalizes rows and transposes. Independent of the Horner routines.
inline Eigen::VectorXd explicit_pe_precode(const AugmentedChannel& h, const Eigen::VectorXd& omega,
                                           const Eigen::VectorXd& z, Eigen::VectorXd* delta_out) {
  const Eigen::MatrixXd& ht = h.entries;
  const double inv_n = 1.0 / static_cast<double>(h.n_antennas());
  const Eigen::MatrixXd a = inv_n * (ht.transpose() * ht);
  Eigen::MatrixXd poly = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (Eigen::Index l = 0; l < omega.size(); ++l) {
    poly += omega(l) * power;
    power = power * a;
  }
  const Eigen::MatrixXd u_check = inv_n * ht * poly;
  const NormalizedDetector<double> nd = normalize_rows<double>(u_check);
  if (delta_out) *delta_out = nd.delta;
  return nd.u.transpose() * z;
}

inline std::vector<CheckResult> run_validation(const ValidationOptions& opt) {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, double tol, double observed) {
    const bool ok = std::isfinite(observed) && observed <= tol;
    out.push_back({std::move(name), tol, observed, ok});
  };
  const SystemConfig cfg =
      SystemConfig::from_snr_db(opt.n_antennas, opt.n_users, opt.snr_db);

  // Augmented model against the complex model.
  {
    double worst = 0.0;
    for (int t = 0; t < opt.n_channels; ++t) {
      const ComplexChannel h = generate_channel(cfg, derive_seed(opt.seed, 1, t));
      const ComplexChannel v = generate_channel(cfg.n_antennas, cfg.n_users, derive_seed(opt.seed, 2, t));
      const Eigen::VectorXd s = generate_channel(cfg.n_users, 1, derive_seed(opt.seed, 3, t)).entries.real();
      worst = std::max(worst, real_equivalence_check(h, augment_precoder(v.entries), s));
    }
    record("real_part_equivalence", 1e-10, worst);
  }

  // Duality: downlink SINR equals dual-uplink SINR; powers sum to P_TX.
  {
    double sinr_gap = 0.0;
    double power_gap = 0.0;
    const PrecoderKind kinds[] = {PrecoderKind::wl_mmse(), PrecoderKind::wl_zf(),
                                  PrecoderKind::mmse(), PrecoderKind::zf()};
    BuildOptions bopt;
    bopt.inject_duality_fault = opt.inject_duality_fault;
    for (int t = 0; t < opt.n_channels; ++t) {
      const ComplexChannel h = generate_channel(cfg, derive_seed(opt.seed, 4, t));
      for (const PrecoderKind kind : kinds) {
        if (kind.family == PrecoderFamily::Zf && cfg.n_users > cfg.n_antennas) continue;
        if (kind.family == PrecoderFamily::WlZf && cfg.n_users > 2 * cfg.n_antennas) continue;
        try {
          const PrecoderSolution sol = build_precoder(kind, h, cfg, bopt);
          const Eigen::VectorXd dl = measure_downlink_sinr(sol, h, cfg);
          const Eigen::VectorXd& ul = sol.report->sinr_ul;
          sinr_gap = std::max(sinr_gap, ((dl - ul).cwiseAbs().array() / ul.array()).maxCoeff());
          power_gap = std::max(power_gap, std::abs(sol.p.sum() - cfg.tx_power()) / cfg.tx_power());
        } catch (const DualityInfeasibleError&) {
          sinr_gap = power_gap = std::numeric_limits<double>::infinity();
        }
      }
    }
    record("duality_equality", 1e-8, sinr_gap);
    record("power_conservation", 1e-8, power_gap);
  }

  // Matrix-free Horner application against the explicit power sum.
  {
    double worst = 0.0;
    for (int order = 0; order <= kMaxPeOrder; ++order) {
      const ComplexChannel h = generate_channel(cfg, derive_seed(opt.seed, 5, order));
      const AugmentedChannel ha = augment_channel(h);
      PeCoefficients coeffs;
      try {
        coeffs = pe_coefficients(order, cfg);
      } catch (const OrderTooHighError&) {
        // Conditioning cap reached; the equivalence is algebraic, so any
        // coefficients exercise it.
        coeffs = PeCoefficients{order, Eigen::VectorXd::LinSpaced(order + 1, 1.0, -0.5), 0.0};
      }
      const Eigen::VectorXd z =
          generate_channel(cfg.n_users, 1, derive_seed(opt.seed, 6, order)).entries.real();
      Eigen::VectorXd delta;
      const Eigen::VectorXd reference = explicit_pe_precode(ha, coeffs.omega, z, &delta);
      const Eigen::VectorXd horner = pe_apply(ha, coeffs, delta, z);
      worst = std::max(worst, (horner - reference).norm() / std::max(reference.norm(), 1e-300));
    }
    record("horner_equivalence", 1e-10, worst);
  }

  // Eigenvalue moments of the augmented Gram.
  {
    const SystemConfig mcfg = SystemConfig::from_snr_db(opt.moment_antennas, opt.moment_antennas, opt.snr_db);
    double worst = 0.0;
    for (int m = 1; m <= 4; ++m) {
      const double emp = empirical_moment(m, mcfg, opt.moment_trials, derive_seed(opt.seed, 7, m));
      const double ref = asymptotic_moment(m, mcfg.beta() / 2.0);
      worst = std::max(worst, std::abs(emp - ref) / ref);
    }
    record("moment_oracle", 0.02, worst);
  }

  // Moment-based PE coefficients against the sample least-squares fit.
  {
    const int k_users = static_cast<int>(std::lround(1.5 * opt.oracle_antennas));
    const SystemConfig ocfg = SystemConfig::from_snr_db(opt.oracle_antennas, k_users, 15.0);
    double worst = 0.0;
    for (int order = 0; order <= opt.oracle_max_order; ++order) {
      const PeOracle oracle =
          empirical_pe_oracle(order, ocfg, opt.oracle_trials, derive_seed(opt.seed, 8, order));
      worst = std::max(worst, dominant_coefficient_error(pe_coefficients(order, ocfg).omega, oracle.omega));
    }
    record("pe_coefficient_oracle", 0.05, worst);
  }

  // Closed-form large-system identities over a (beta, gamma) grid.
  {
    double deriv = 0.0;
    double collapse = 0.0;
    double mapping = 0.0;
    for (double beta : {0.1, 0.5, 1.0, 1.5, 2.0}) {
      for (double gamma : {1e-3, 1e-2, 0.1, 1.0, 10.0}) {
        const double step = 1e-6 * gamma;
        const double fd = (stieltjes(beta, gamma + step) - stieltjes(beta, gamma - step)) / (2 * step);
        const double an = stieltjes_derivative(beta, gamma);
        deriv = std::max(deriv, std::abs(fd - an) / std::abs(an));
        const AsymptoticPoint pt = asymptotic_point(beta, gamma);
        collapse = std::max(collapse, std::abs(pt.zeta + pt.gamma * pt.psi - pt.xi) / pt.xi);
        collapse = std::max(collapse, std::abs(pt.sinr - pt.xi) / pt.xi);
        mapping = std::max(mapping, std::abs(asymptotic_sinr_wl_mmse(beta, gamma) -
                                             asymptotic_sinr_mmse(beta / 2, gamma / 2)));
      }
    }
    record("derivative_finite_difference", 1e-5, deriv);
    record("sinr_collapse_identity", 1e-12, collapse);
    record("wl_mapping_identity", 0.0, mapping);
  }
  return out;
}

}  // namespace wlp
