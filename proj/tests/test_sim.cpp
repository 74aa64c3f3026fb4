#include <atomic>
#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "wlp/sim.hpp"

namespace {

using wlp::PrecoderKind;
using wlp::SweepSpec;
using wlp::SystemConfig;

TEST(Rates, HalfRateForRealSymbols) {
  Eigen::VectorXd sinr(2);
  sinr << 1.0, 3.0;
  const auto wl = wlp::rates_from_sinr(PrecoderKind::wl_mmse(), sinr);
  const auto cx = wlp::rates_from_sinr(PrecoderKind::mmse(), sinr);
  EXPECT_DOUBLE_EQ(cx.sum_rate, 3.0);
  EXPECT_DOUBLE_EQ(wl.sum_rate, 1.5);
  EXPECT_DOUBLE_EQ(wl.rates(1), 1.0);
}

TEST(Trial, Deterministic) {
  const SystemConfig cfg = SystemConfig::from_snr_db(12, 10, 10.0);
  const auto a = wlp::run_trial(PrecoderKind::wl_mmse(), cfg, 5);
  const auto b = wlp::run_trial(PrecoderKind::wl_mmse(), cfg, 5);
  EXPECT_EQ(a.sum_rate, b.sum_rate);
  EXPECT_NE(a.sum_rate, wlp::run_trial(PrecoderKind::wl_mmse(), cfg, 6).sum_rate);
}

// With a single user nothing interferes and every linear scheme reaches the
// matched-filter SNR.
TEST(Trial, SingleUserMatchedFilterSnr) {
  const SystemConfig cfg = SystemConfig::from_snr_db(6, 1, 10.0);
  const auto h = wlp::generate_channel(cfg, 3);
  const double gain = h.entries.squaredNorm() * cfg.tx_power() / cfg.noise_variance;
  for (PrecoderKind k : {PrecoderKind::mmse(), PrecoderKind::zf(), PrecoderKind::conjugate_bf()})
    EXPECT_NEAR(wlp::evaluate_precoder(k, h, cfg).sinr_dl(0), gain, 1e-9 * gain) << k.name();
  // Real-part reception: twice the SNR, half the rate prefactor.
  EXPECT_NEAR(wlp::evaluate_precoder(PrecoderKind::wl_mmse(), h, cfg).sinr_dl(0), 2 * gain, 1e-9 * gain);
}

TEST(Stats, OrderedMean) {
  const auto s = wlp::ordered_mean({1.0, NAN, 3.0, 5.0});
  EXPECT_EQ(s.count, 3);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.std_err, 2.0 / std::sqrt(3.0), 1e-15);
  const auto single = wlp::ordered_mean({4.0});
  EXPECT_EQ(single.std_err, 0.0);
  EXPECT_TRUE(std::isnan(wlp::ordered_mean({NAN}).mean));
}

TEST(Parallel, CoversEveryJobAndPropagates) {
  std::vector<int> hits(97, 0);
  wlp::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(wlp::parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 7) throw std::runtime_error("boom");
                                 }),
               std::runtime_error);
}

SweepSpec small_spec() {
  SweepSpec spec;
  spec.n_antennas = 8;
  spec.beta_grid = {0.5, 1.5};
  spec.snr_db = 10.0;
  spec.kinds = {PrecoderKind::mmse(), PrecoderKind::zf(), PrecoderKind::wl_mmse(), PrecoderKind::pe(2),
                PrecoderKind::conjugate_bf()};
  spec.n_trials = 12;
  spec.master_seed = 2024;
  return spec;
}

TEST(Sweep, ThreadCountInvariant) {
  const auto one = wlp::run_sweep(small_spec(), 1);
  for (int threads : {2, 5}) {
    const auto many = wlp::run_sweep(small_spec(), threads);
    ASSERT_EQ(one.points.size(), many.points.size());
    for (std::size_t i = 0; i < one.points.size(); ++i) {
      const auto& a = one.points[i];
      const auto& b = many.points[i];
      EXPECT_EQ(a.n_ok, b.n_ok);
      if (a.n_ok > 0) {
        EXPECT_EQ(a.mean_sum_rate, b.mean_sum_rate);
        EXPECT_EQ(a.std_err, b.std_err);
      }
    }
  }
}

TEST(Sweep, LayoutAndInfeasibility) {
  const auto r = wlp::run_sweep(small_spec(), 1);
  ASSERT_EQ(r.points.size(), 10u);
  EXPECT_EQ(r.points[0].beta, 0.5);
  EXPECT_EQ(r.points[0].n_users, 4);
  EXPECT_EQ(r.points[5].n_users, 12);
  for (const auto& p : r.points) {
    EXPECT_EQ(p.n_ok + p.n_infeasible, 12);
    EXPECT_EQ(p.analytic_sum_rate.has_value(), wlp::has_asymptotic_rate(p.kind));
  }
  // ZF cannot serve 12 users with 8 antennas.
  EXPECT_EQ(r.points[6].kind, PrecoderKind::zf());
  EXPECT_EQ(r.points[6].n_ok, 0);
  EXPECT_EQ(r.points[6].n_infeasible, 12);
  EXPECT_TRUE(std::isnan(r.points[6].mean_sum_rate));
  EXPECT_EQ(r.points[1].n_infeasible, 0);
}

TEST(Sweep, CommonChannelsAcrossKinds) {
  // A kind's numbers do not depend on which other kinds share the sweep.
  SweepSpec alone = small_spec();
  alone.kinds = {PrecoderKind::wl_mmse()};
  const auto a = wlp::run_sweep(alone, 1);
  const auto full = wlp::run_sweep(small_spec(), 1);
  EXPECT_EQ(a.points[0].mean_sum_rate, full.points[2].mean_sum_rate);
  EXPECT_EQ(a.points[1].mean_sum_rate, full.points[7].mean_sum_rate);
}

TEST(Sweep, AllInfeasible) {
  SweepSpec spec = small_spec();
  spec.beta_grid = {2.0};
  spec.kinds = {PrecoderKind::zf()};
  EXPECT_THROW(wlp::run_sweep(spec, 1), wlp::InfeasibleError);
}

TEST(Sweep, SpecValidation) {
  SweepSpec spec = small_spec();
  spec.beta_grid = {0.01};  // rounds to zero users
  EXPECT_THROW(wlp::run_sweep(spec, 1), wlp::ConfigError);
  spec = small_spec();
  spec.n_trials = 0;
  EXPECT_THROW(wlp::run_sweep(spec, 1), wlp::ConfigError);
  spec = small_spec();
  spec.kinds.clear();
  EXPECT_THROW(wlp::run_sweep(spec, 1), wlp::ConfigError);
  spec = small_spec();
  spec.kinds = {PrecoderKind::pe(9)};
  EXPECT_THROW(wlp::run_sweep(spec, 1), wlp::ConfigError);
}

// Moderate-size sanity check of the large-system prediction; the full-size
// comparison lives in the acceptance suite.
TEST(Sweep, NearAnalyticAtModerateSize) {
  SweepSpec spec;
  spec.n_antennas = 40;
  spec.beta_grid = {1.5};
  spec.snr_db = 20.0;
  spec.kinds = {PrecoderKind::mmse(), PrecoderKind::wl_mmse()};
  spec.n_trials = 40;
  spec.master_seed = 3;
  const auto r = wlp::run_sweep(spec, 1);
  for (const auto& p : r.points)
    EXPECT_NEAR(p.mean_sum_rate / *p.analytic_sum_rate, 1.0, 0.08) << p.kind.name();
}

}  // namespace
