#pragma once

// Precoders built through the dual uplink: detector -> row normalization ->
// (conjugate) transpose -> SINR-preserving downlink power allocation.
//
// The same template pipeline serves the augmented real-valued model
// (Scalar = double, widely-linear kinds) and the complex model
// (Scalar = std::complex<double>, conventional kinds).

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "wlp/errors.hpp"
#include "wlp/model.hpp"
#include "wlp/pe.hpp"

namespace wlp {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Receiver noise power relative to sigma_n^2 seen by a real-part receiver.
inline constexpr double kRealNoiseFactor = 0.5;
inline constexpr double kComplexNoiseFactor = 1.0;

/// Reciprocal condition estimate below which a zero-forcing Gram is treated
/// as singular.
inline constexpr double kMinGramRcond = 1e-12;
/// Relative slack (times P_TX) under which negative powers are rounded to 0.
inline constexpr double kNegativePowerSlack = 1e-12;

enum class PrecoderFamily { WlMmse, WlZf, PeWlMmse, Mmse, Zf, ConjugateBf };

struct PrecoderKind {
  PrecoderFamily family = PrecoderFamily::WlMmse;
  int order = 0;  // polynomial order, PE only

  static constexpr PrecoderKind wl_mmse() { return {PrecoderFamily::WlMmse, 0}; }
  static constexpr PrecoderKind wl_zf() { return {PrecoderFamily::WlZf, 0}; }
  static constexpr PrecoderKind pe(int order) { return {PrecoderFamily::PeWlMmse, order}; }
  static constexpr PrecoderKind mmse() { return {PrecoderFamily::Mmse, 0}; }
  static constexpr PrecoderKind zf() { return {PrecoderFamily::Zf, 0}; }
  static constexpr PrecoderKind conjugate_bf() { return {PrecoderFamily::ConjugateBf, 0}; }

  bool widely_linear() const {
    return family == PrecoderFamily::WlMmse || family == PrecoderFamily::WlZf ||
           family == PrecoderFamily::PeWlMmse;
  }
  double noise_factor() const {
    return widely_linear() ? kRealNoiseFactor : kComplexNoiseFactor;
  }

  std::string name() const {
    switch (family) {
      case PrecoderFamily::WlMmse: return "wl_mmse";
      case PrecoderFamily::WlZf: return "wl_zf";
      case PrecoderFamily::PeWlMmse: return "pe:" + std::to_string(order);
      case PrecoderFamily::Mmse: return "mmse";
      case PrecoderFamily::Zf: return "zf";
      case PrecoderFamily::ConjugateBf: return "bf";
    }
    return "?";
  }

  /// Inverse of name(); accepts "pe:L" for polynomial orders.
  static std::optional<PrecoderKind> parse(std::string_view text) {
    if (text == "wl_mmse") return wl_mmse();
    if (text == "wl_zf") return wl_zf();
    if (text == "mmse") return mmse();
    if (text == "zf") return zf();
    if (text == "bf") return conjugate_bf();
    if (text.substr(0, 3) == "pe:") {
      int order = -1;
      const auto digits = text.substr(3);
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), order);
      if (ec == std::errc() && ptr == digits.data() + digits.size() && order >= 0)
        return pe(order);
    }
    return std::nullopt;
  }

  friend bool operator==(const PrecoderKind&, const PrecoderKind&) = default;
};

/// Dual-uplink quantities. big_b(m, n) = |[H]_{n,:} [V]_{:,m}|^2, the power
/// gain from precoder column m to user n.
struct DualUplinkReport {
  Eigen::VectorXd sinr_ul;
  Eigen::VectorXd b;
  Eigen::MatrixXd big_b;
};

/// Precoding matrix with unit-norm columns, downlink powers and the row norms
/// of the unnormalized detector. `v` is 2N x K real for widely-linear kinds
/// and N x K complex otherwise.
struct PrecoderSolution {
  PrecoderKind kind;
  std::variant<Eigen::MatrixXd, Eigen::MatrixXcd> v;
  Eigen::VectorXd p;
  Eigen::VectorXd delta;
  std::optional<DualUplinkReport> report;  // empty for conjugate BF

  const Eigen::MatrixXd& augmented() const { return std::get<Eigen::MatrixXd>(v); }
  const Eigen::MatrixXcd& complex() const { return std::get<Eigen::MatrixXcd>(v); }
};

template <class Scalar>
struct NormalizedDetector {
  Mat<Scalar> u;          // unit-norm rows
  Eigen::VectorXd delta;  // original row norms
};

namespace detail {

/// (1/N) G ((1/N) G^H G + reg I)^{-1}, solved on whichever Gram is smaller.
template <class Scalar>
Mat<Scalar> regularized_detector(const Mat<Scalar>& g, double n_antennas, double reg) {
  const Eigen::Index k = g.rows();
  const Eigen::Index m = g.cols();
  const double inv_n = 1.0 / n_antennas;
  if (k <= m) {
    // Push-through form: ((1/N) G G^H + reg I_K)^{-1} (1/N) G.
    Mat<Scalar> gram = inv_n * (g * g.adjoint());
    gram.diagonal().array() += reg;
    Eigen::LLT<Mat<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success)
      throw InfeasibleError("regularized Gram is not positive definite");
    return llt.solve(inv_n * g);
  }
  Mat<Scalar> gram = inv_n * (g.adjoint() * g);
  gram.diagonal().array() += reg;
  Eigen::LLT<Mat<Scalar>> llt(gram);
  if (llt.info() != Eigen::Success)
    throw InfeasibleError("regularized Gram is not positive definite");
  return llt.solve(inv_n * g.adjoint()).adjoint();
}

/// (G G^H)^{-1} G with a conditioning guard.
template <class Scalar>
Mat<Scalar> zero_forcing_detector(const Mat<Scalar>& g, const char* what) {
  if (g.rows() > g.cols())
    throw InfeasibleError(std::string(what) + " needs K <= " +
                          std::to_string(g.cols()) + " users, got " +
                          std::to_string(g.rows()));
  const Mat<Scalar> gram = g * g.adjoint();
  Eigen::LLT<Mat<Scalar>> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinGramRcond))
    throw InfeasibleError(std::string(what) + " Gram matrix is numerically singular");
  return llt.solve(g);
}

}  // namespace detail

/// Unnormalized WL-MMSE detector
/// (1/N) H~ ((1/N) H~^T H~ + (sigma_R^2/P_TX)(K/N) I_2N)^{-1}, K x 2N.
inline Eigen::MatrixXd wl_mmse_detector(const AugmentedChannel& h, const SystemConfig& cfg) {
  cfg.validate();
  if (h.n_users() != cfg.n_users || h.n_antennas() != cfg.n_antennas)
    throw DimensionError("wl_mmse_detector: channel does not match configuration");
  return detail::regularized_detector<double>(h.entries, cfg.n_antennas,
                                              pe_regularizer(cfg));
}

/// (H~ H~^T)^{-1} H~; requires K <= 2N.
inline Eigen::MatrixXd wl_zf_detector(const AugmentedChannel& h) {
  return detail::zero_forcing_detector<double>(h.entries, "WL-ZF");
}

/// Unnormalized complex MMSE detector H (H^H H + (sigma^2/rho) I_N)^{-1}.
inline Eigen::MatrixXcd mmse_detector(const ComplexChannel& h, const SystemConfig& cfg) {
  cfg.validate();
  if (h.n_users() != cfg.n_users || h.n_antennas() != cfg.n_antennas)
    throw DimensionError("mmse_detector: channel does not match configuration");
  // sigma^2 / (rho N) is gamma.
  return detail::regularized_detector<cplx>(h.entries, cfg.n_antennas, cfg.gamma_from_noise());
}

/// (H H^H)^{-1} H; requires K <= N.
inline Eigen::MatrixXcd zf_detector(const ComplexChannel& h) {
  return detail::zero_forcing_detector<cplx>(h.entries, "ZF");
}

template <class Scalar>
NormalizedDetector<Scalar> normalize_rows(const Mat<Scalar>& u_check) {
  NormalizedDetector<Scalar> out{u_check, u_check.rowwise().norm()};
  for (Eigen::Index k = 0; k < out.delta.size(); ++k) {
    const double d = out.delta(k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw DegenerateUserError("detector row " + std::to_string(k) + " has zero norm");
    out.u.row(k) /= d;
  }
  return out;
}

/// Uplink SINRs with equal powers Q_k = P_TX / K, plus the b vector and gain
/// matrix needed for the downlink power transfer. `channel` is H~ (real) or
/// H (complex); `noise_factor` is 0.5 for real-part receivers, 1 otherwise.
template <class Scalar>
DualUplinkReport dual_uplink_sinr(const Mat<Scalar>& u, const Mat<Scalar>& channel,
                                  const SystemConfig& cfg, double noise_factor) {
  if (u.rows() != channel.rows() || u.cols() != channel.cols())
    throw DimensionError("dual_uplink_sinr: detector and channel shapes differ");
  const Eigen::Index k_users = u.rows();
  const double q = cfg.tx_power() / static_cast<double>(k_users);
  const double noise = noise_factor * cfg.noise_variance;

  // cross(k, j) = [U]_{k,:} h_j^H, the response of detector k to user j;
  // it is also the conjugate downlink gain from precoder column k to user j.
  const Mat<Scalar> cross = u * channel.adjoint();
  DualUplinkReport r;
  r.big_b = cross.cwiseAbs2();
  r.sinr_ul.resize(k_users);
  r.b.resize(k_users);
  const Eigen::VectorXd row_norm2 = u.rowwise().squaredNorm();
  const Eigen::VectorXd row_total = r.big_b.rowwise().sum();
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double signal = r.big_b(k, k);
    const double interference = row_total(k) - signal;
    const double sinr = q * signal / (noise * row_norm2(k) + q * interference);
    r.sinr_ul(k) = sinr;
    r.b(k) = sinr / ((1.0 + sinr) * signal);
  }
  return r;
}

/// Downlink powers that reproduce the uplink SINRs:
/// p = eta sigma^2 (I - diag(b) B^T)^{-1} b.
///
/// `inject_fault` flips the sign of the coupling term. It exists only so the
/// validation harness can prove it detects a broken allocation.
inline Eigen::VectorXd duality_power_allocation(const DualUplinkReport& report,
                                                const SystemConfig& cfg, double noise_factor,
                                                bool inject_fault = false) {
  const Eigen::Index k_users = report.b.size();
  const double sign = inject_fault ? -1.0 : 1.0;
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(k_users, k_users) -
                           sign * (report.b.asDiagonal() * report.big_b.transpose());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  if (!(lu.rcond() >= kMinGramRcond))
    throw DualityInfeasibleError("power transfer system is singular (K=" +
                                 std::to_string(k_users) + ", N=" +
                                 std::to_string(cfg.n_antennas) + ")");
  Eigen::VectorXd p = lu.solve(noise_factor * cfg.noise_variance * report.b);
  const double slack = kNegativePowerSlack * cfg.tx_power();
  for (Eigen::Index k = 0; k < k_users; ++k) {
    if (!std::isfinite(p(k)) || p(k) < -slack)
      throw DualityInfeasibleError("negative downlink power " + std::to_string(p(k)) +
                                   " for user " + std::to_string(k));
    if (p(k) < 0.0) p(k) = 0.0;
  }
  return p;
}

struct BuildOptions {
  /// Precomputed PE coefficients; computed from the configuration if absent.
  const PeCoefficients* pe = nullptr;
  bool inject_duality_fault = false;
};

namespace detail {

template <class Scalar>
PrecoderSolution finish_dual(PrecoderKind kind, const Mat<Scalar>& u_check,
                             const Mat<Scalar>& channel, const SystemConfig& cfg,
                             const BuildOptions& opts) {
  NormalizedDetector<Scalar> nd = normalize_rows<Scalar>(u_check);
  DualUplinkReport report = dual_uplink_sinr<Scalar>(nd.u, channel, cfg, kind.noise_factor());
  Eigen::VectorXd p = duality_power_allocation(report, cfg, kind.noise_factor(),
                                               opts.inject_duality_fault);
  Mat<Scalar> v = nd.u.adjoint();
  return PrecoderSolution{kind, std::move(v), std::move(p), std::move(nd.delta),
                          std::move(report)};
}

}  // namespace detail

/// Matched-filter precoder V = H^H with unit columns and uniform powers.
inline PrecoderSolution conjugate_bf(const ComplexChannel& h, const SystemConfig& cfg) {
  cfg.validate();
  NormalizedDetector<cplx> nd = normalize_rows<cplx>(h.entries);
  const Eigen::Index k_users = h.n_users();
  Eigen::VectorXd p =
      Eigen::VectorXd::Constant(k_users, cfg.tx_power() / static_cast<double>(k_users));
  Eigen::MatrixXcd v = nd.u.adjoint();
  return PrecoderSolution{PrecoderKind::conjugate_bf(), std::move(v), std::move(p),
                          std::move(nd.delta), std::nullopt};
}

inline PrecoderSolution build_precoder(PrecoderKind kind, const ComplexChannel& h,
                                       const SystemConfig& cfg, const BuildOptions& opts = {}) {
  cfg.validate();
  if (h.n_users() != cfg.n_users || h.n_antennas() != cfg.n_antennas)
    throw DimensionError("build_precoder: channel does not match configuration");

  switch (kind.family) {
    case PrecoderFamily::WlMmse: {
      const AugmentedChannel ha = augment_channel(h);
      return detail::finish_dual<double>(kind, wl_mmse_detector(ha, cfg), ha.entries, cfg, opts);
    }
    case PrecoderFamily::WlZf: {
      const AugmentedChannel ha = augment_channel(h);
      return detail::finish_dual<double>(kind, wl_zf_detector(ha), ha.entries, cfg, opts);
    }
    case PrecoderFamily::PeWlMmse: {
      const AugmentedChannel ha = augment_channel(h);
      std::optional<PeCoefficients> local;
      const PeCoefficients* coeffs = opts.pe;
      if (coeffs == nullptr) {
        local = pe_coefficients(kind.order, cfg);
        coeffs = &*local;
      } else if (coeffs->order != kind.order) {
        throw DimensionError("PE coefficients of order " + std::to_string(coeffs->order) +
                             " supplied for " + kind.name());
      }
      return detail::finish_dual<double>(kind, pe_detector_matrix(ha, *coeffs), ha.entries,
                                         cfg, opts);
    }
    case PrecoderFamily::Mmse:
      return detail::finish_dual<cplx>(kind, mmse_detector(h, cfg), h.entries, cfg, opts);
    case PrecoderFamily::Zf:
      return detail::finish_dual<cplx>(kind, zf_detector(h), h.entries, cfg, opts);
    case PrecoderFamily::ConjugateBf:
      return conjugate_bf(h, cfg);
  }
  throw ConfigError("unknown precoder kind");
}

}  // namespace wlp
