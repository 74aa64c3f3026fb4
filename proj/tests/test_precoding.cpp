#include <cmath>

#include <gtest/gtest.h>

#include "wlp/precoding.hpp"
#include "wlp/sim.hpp"

namespace {

using wlp::ComplexChannel;
using wlp::PrecoderKind;
using wlp::SystemConfig;

ComplexChannel scalar_channel(wlp::cplx h) {
  return ComplexChannel{Eigen::MatrixXcd::Constant(1, 1, h), 0};
}

TEST(PrecoderKind, NamesRoundTrip) {
  for (PrecoderKind k : {PrecoderKind::wl_mmse(), PrecoderKind::wl_zf(), PrecoderKind::mmse(),
                         PrecoderKind::zf(), PrecoderKind::conjugate_bf(), PrecoderKind::pe(0),
                         PrecoderKind::pe(7)}) {
    const auto parsed = PrecoderKind::parse(k.name());
    ASSERT_TRUE(parsed.has_value()) << k.name();
    EXPECT_EQ(*parsed, k);
  }
  EXPECT_EQ(PrecoderKind::pe(3).name(), "pe:3");
  EXPECT_FALSE(PrecoderKind::parse("pe:").has_value());
  EXPECT_FALSE(PrecoderKind::parse("pe:-1").has_value());
  EXPECT_FALSE(PrecoderKind::parse("pe:2x").has_value());
  EXPECT_FALSE(PrecoderKind::parse("MMSE").has_value());
  EXPECT_TRUE(PrecoderKind::pe(2).widely_linear());
  EXPECT_FALSE(PrecoderKind::zf().widely_linear());
  EXPECT_EQ(PrecoderKind::wl_zf().noise_factor(), 0.5);
  EXPECT_EQ(PrecoderKind::mmse().noise_factor(), 1.0);
}

// One user on a real unit channel: U = [1/(1+c), 0], V = [1; 0], all power
// to the single user.
TEST(WlMmse, SingleUserByHand) {
  const SystemConfig cfg = SystemConfig::from_snr_db(1, 1, 10.0);
  const ComplexChannel h = scalar_channel({1.0, 0.0});
  const Eigen::MatrixXd u = wlp::wl_mmse_detector(wlp::augment_channel(h), cfg);
  const double c = wlp::pe_regularizer(cfg);
  EXPECT_NEAR(u(0, 0), 1.0 / (1.0 + c), 1e-15);
  EXPECT_EQ(u(0, 1), 0.0);

  const auto sol = wlp::build_precoder(PrecoderKind::wl_mmse(), h, cfg);
  EXPECT_NEAR(sol.augmented()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(sol.augmented()(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(sol.p(0), cfg.tx_power(), 1e-12);
  EXPECT_NEAR(sol.delta(0), 1.0 / (1.0 + c), 1e-15);
  // Real-part receiver: noise 0.5 sigma^2.
  const double sinr = wlp::measure_downlink_sinr(sol, h, cfg)(0);
  EXPECT_NEAR(sinr, cfg.tx_power() / 0.5, 1e-9);
}

TEST(Mmse, SingleUserComplexChannel) {
  const SystemConfig cfg = SystemConfig::from_snr_db(1, 1, 3.0);
  const wlp::cplx g(0.6, -0.8);
  const ComplexChannel h = scalar_channel(g);
  const auto sol = wlp::build_precoder(PrecoderKind::mmse(), h, cfg);
  EXPECT_NEAR(std::abs(sol.complex()(0, 0)), 1.0, 1e-15);
  // V = conj(h)/|h| up to the real positive detector scaling.
  EXPECT_NEAR(std::abs(sol.complex()(0, 0) - std::conj(g)), 0.0, 1e-15);
  EXPECT_NEAR(sol.p(0), cfg.tx_power(), 1e-12);
  EXPECT_NEAR(wlp::measure_downlink_sinr(sol, h, cfg)(0), cfg.tx_power(), 1e-9);
}

TEST(Detectors, PushThroughBranchesAgree) {
  // K < cols and K > cols exercise the two solve paths of the same formula.
  for (auto [k, n] : {std::pair{4, 9}, std::pair{9, 4}}) {
    const SystemConfig cfg = SystemConfig::from_snr_db(n, k, 7.0);
    const ComplexChannel h = wlp::generate_channel(cfg, 21);
    const Eigen::MatrixXcd& g = h.entries;
    const double inv_n = 1.0 / n;
    Eigen::MatrixXcd big = inv_n * g.adjoint() * g;
    big.diagonal().array() += cfg.gamma();
    const Eigen::MatrixXcd expect = inv_n * g * big.inverse();
    EXPECT_LT((wlp::mmse_detector(h, cfg) - expect).norm(), 1e-11 * expect.norm());

    const wlp::AugmentedChannel ha = wlp::augment_channel(h);
    Eigen::MatrixXd big_r = inv_n * ha.entries.transpose() * ha.entries;
    big_r.diagonal().array() += wlp::pe_regularizer(cfg);
    const Eigen::MatrixXd expect_r = inv_n * ha.entries * big_r.inverse();
    EXPECT_LT((wlp::wl_mmse_detector(ha, cfg) - expect_r).norm(), 1e-11 * expect_r.norm());
  }
}

TEST(Detectors, WlRegularizerIsHalfGamma) {
  const SystemConfig cfg = SystemConfig::from_snr_db(40, 30, 12.0);
  EXPECT_NEAR(wlp::pe_regularizer(cfg), 0.5 * cfg.gamma(), 1e-16);
}

TEST(ZeroForcing, NullsInterference) {
  const SystemConfig cfg = SystemConfig::from_snr_db(16, 12, 20.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 4);
  const auto zf = wlp::build_precoder(PrecoderKind::zf(), h, cfg);
  Eigen::MatrixXcd g = h.entries * zf.complex();
  g.diagonal().setZero();
  EXPECT_LT(g.norm(), 1e-10);

  // WL-ZF in the overloaded regime K > N, real-part interference vanishes.
  const SystemConfig over = SystemConfig::from_snr_db(16, 28, 20.0);
  const ComplexChannel ho = wlp::generate_channel(over, 5);
  const auto wlzf = wlp::build_precoder(PrecoderKind::wl_zf(), ho, over);
  Eigen::MatrixXd gr = wlp::augment_channel(ho).entries * wlzf.augmented();
  gr.diagonal().setZero();
  EXPECT_LT(gr.norm(), 1e-9);
}

TEST(ZeroForcing, InfeasibleWhenOverloaded) {
  const SystemConfig cfg = SystemConfig::from_snr_db(8, 9, 20.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 1);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::zf(), h, cfg), wlp::InfeasibleError);
  EXPECT_NO_THROW(wlp::build_precoder(PrecoderKind::wl_zf(), h, cfg));
  const SystemConfig over = SystemConfig::from_snr_db(8, 17, 20.0);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::wl_zf(), wlp::generate_channel(over, 1), over),
               wlp::InfeasibleError);
}

TEST(ZeroForcing, SingularGram) {
  const SystemConfig cfg = SystemConfig::from_snr_db(4, 2, 20.0);
  ComplexChannel h = wlp::generate_channel(cfg, 2);
  h.entries.row(1) = h.entries.row(0);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::zf(), h, cfg), wlp::InfeasibleError);
}

TEST(Build, DegenerateUser) {
  const SystemConfig cfg = SystemConfig::from_snr_db(6, 3, 10.0);
  ComplexChannel h = wlp::generate_channel(cfg, 3);
  h.entries.row(2).setZero();
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::mmse(), h, cfg), wlp::DegenerateUserError);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::wl_mmse(), h, cfg), wlp::DegenerateUserError);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::conjugate_bf(), h, cfg), wlp::DegenerateUserError);
}

TEST(Build, ShapeChecks) {
  const SystemConfig cfg = SystemConfig::from_snr_db(6, 3, 10.0);
  const ComplexChannel wrong = wlp::generate_channel(4, 6, 1);
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::mmse(), wrong, cfg), wlp::DimensionError);
  const auto pc = wlp::pe_coefficients(1, cfg);
  wlp::BuildOptions opts;
  opts.pe = &pc;
  EXPECT_THROW(wlp::build_precoder(PrecoderKind::pe(2), wlp::generate_channel(cfg, 1), cfg, opts),
               wlp::DimensionError);
  EXPECT_NO_THROW(wlp::build_precoder(PrecoderKind::pe(1), wlp::generate_channel(cfg, 1), cfg, opts));
}

TEST(ConjugateBf, UniformPowerUnitColumns) {
  const SystemConfig cfg = SystemConfig::from_snr_db(10, 6, 5.0);
  const auto sol = wlp::build_precoder(PrecoderKind::conjugate_bf(), wlp::generate_channel(cfg, 6), cfg);
  EXPECT_FALSE(sol.report.has_value());
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(sol.complex().col(k).norm(), 1.0, 1e-14);
    EXPECT_NEAR(sol.p(k), cfg.tx_power() / 6, 1e-14);
  }
}

struct DualityCase {
  PrecoderKind kind;
  int n_users;
};

// Property: for every channel draw the downlink SINRs reproduce the dual
// uplink ones and the powers exhaust the budget.
TEST(Duality, ExactOverRandomChannels) {
  const DualityCase cases[] = {
      {PrecoderKind::wl_mmse(), 12}, {PrecoderKind::wl_mmse(), 24}, {PrecoderKind::wl_zf(), 12},
      {PrecoderKind::wl_zf(), 24},   {PrecoderKind::mmse(), 12},    {PrecoderKind::mmse(), 24},
      {PrecoderKind::zf(), 12},      {PrecoderKind::pe(3), 24}};
  for (const auto& c : cases) {
    for (double snr_db : {0.0, 20.0}) {
      const SystemConfig cfg = SystemConfig::from_snr_db(16, c.n_users, snr_db, 2.0);
      for (std::uint64_t t = 0; t < 30; ++t) {
        const ComplexChannel h = wlp::generate_channel(cfg, wlp::derive_seed(77, c.n_users, t));
        const auto sol = wlp::build_precoder(c.kind, h, cfg);
        const Eigen::VectorXd dl = wlp::measure_downlink_sinr(sol, h, cfg);
        const Eigen::VectorXd& ul = sol.report->sinr_ul;
        const double gap = ((dl - ul).cwiseAbs().array() / ul.array()).maxCoeff();
        ASSERT_LE(gap, 1e-8) << c.kind.name() << " K=" << c.n_users << " trial " << t;
        ASSERT_LE(std::abs(sol.p.sum() - cfg.tx_power()) / cfg.tx_power(), 1e-8);
        ASSERT_TRUE((sol.p.array() >= 0.0).all());
      }
    }
  }
}

TEST(Duality, UnitNormColumns) {
  const SystemConfig cfg = SystemConfig::from_snr_db(8, 6, 10.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 31);
  const auto wl = wlp::build_precoder(PrecoderKind::wl_mmse(), h, cfg);
  const auto mm = wlp::build_precoder(PrecoderKind::mmse(), h, cfg);
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(wl.augmented().col(k).norm(), 1.0, 1e-14);
    EXPECT_NEAR(mm.complex().col(k).norm(), 1.0, 1e-14);
  }
}

TEST(Duality, InjectedFaultDetected) {
  const SystemConfig cfg = SystemConfig::from_snr_db(16, 12, 20.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 8);
  wlp::BuildOptions opts;
  opts.inject_duality_fault = true;
  try {
    const auto sol = wlp::build_precoder(PrecoderKind::mmse(), h, cfg, opts);
    const Eigen::VectorXd dl = wlp::measure_downlink_sinr(sol, h, cfg);
    const double gap = ((dl - sol.report->sinr_ul).cwiseAbs().array() / sol.report->sinr_ul.array()).maxCoeff();
    EXPECT_GT(gap, 1e-3);
  } catch (const wlp::DualityInfeasibleError&) {
    SUCCEED();
  }
}

TEST(Duality, ReportGainMatrix) {
  const SystemConfig cfg = SystemConfig::from_snr_db(5, 4, 10.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 13);
  const auto sol = wlp::build_precoder(PrecoderKind::mmse(), h, cfg);
  // big_b(m, n) = |h_n v_m|^2
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      EXPECT_NEAR(sol.report->big_b(m, n), std::norm((h.entries.row(n) * sol.complex().col(m))(0)), 1e-13);
}

TEST(Mmse, ApproachesZfAtHighSnr) {
  const SystemConfig cfg = SystemConfig::from_snr_db(16, 8, 90.0);
  const ComplexChannel h = wlp::generate_channel(cfg, 17);
  const auto mm = wlp::build_precoder(PrecoderKind::mmse(), h, cfg);
  const auto zf = wlp::build_precoder(PrecoderKind::zf(), h, cfg);
  EXPECT_LT((mm.complex() - zf.complex()).norm(), 1e-6);
}

}  // namespace
