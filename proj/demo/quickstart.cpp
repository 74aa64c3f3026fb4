// Builds the WL-MMSE, PE WL-MMSE and MMSE precoders for one overloaded
// channel draw and compares their sum rates with the large-system prediction.

#include <cstdio>

#include "wlp/wlp.hpp"

int main() {
  const auto cfg = wlp::SystemConfig::from_snr_db(/*n_antennas=*/100, /*n_users=*/150, /*snr_db=*/20.0);
  const wlp::ComplexChannel h = wlp::generate_channel(cfg, /*seed=*/2024);

  for (auto kind : {wlp::PrecoderKind::mmse(), wlp::PrecoderKind::wl_mmse(), wlp::PrecoderKind::pe(4)}) {
    const wlp::TrialResult r = wlp::evaluate_precoder(kind, h, cfg);
    std::printf("%-8s sum rate %8.2f bit/s/Hz", kind.name().c_str(), r.sum_rate);
    if (wlp::has_asymptotic_rate(kind))
      std::printf("   (large-system prediction %8.2f)", wlp::asymptotic_sum_rate(kind, cfg));
    std::printf("\n");
  }

  // Matrix-free precoding of one symbol vector with the order-4 polynomial.
  const wlp::AugmentedChannel ha = wlp::augment_channel(h);
  const wlp::PeCoefficients coeffs = wlp::pe_coefficients(4, cfg);
  const auto nd = wlp::normalize_rows<double>(wlp::pe_detector_matrix(ha, coeffs));
  const Eigen::VectorXd d = Eigen::VectorXd::Ones(cfg.n_users);
  const Eigen::VectorXd x = wlp::pe_apply(ha, coeffs, nd.delta, d);
  const Eigen::VectorXcd tx = wlp::deaugment_precoder(Eigen::MatrixXd(x));
  std::printf("precoded vector: %ld antennas, first entry %.4f%+.4fi\n", static_cast<long>(tx.size()),
              tx(0).real(), tx(0).imag());
  return 0;
}
