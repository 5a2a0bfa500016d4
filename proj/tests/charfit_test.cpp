// Copyright 2026 The spadrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "spadrecon/charfit.hpp"
#include "spadrecon/sim.hpp"

using namespace spadrecon;

namespace {

SimConfig cw_config(const DetectorParams &p, std::uint64_t seed) {
    SimConfig c;
    c.detector = p;
    c.loss = LossProfileModel::from(p);
    c.mode = SimMode::Physical;
    c.seed = seed;
    return c;
}

DetectorParams dead_time_only(double t) {
    DetectorParams p;
    p.t_dead = {t, 0.0};
    p.t_rec = {t, 0.0};
    return p;
}

DelayHistogram fan(const TimeTagStream &s, int n, double max_delay) {
    HistogramOptions o;
    o.max_delay = std::uint64_t(max_delay / s.tick_duration);
    return first_and_n_histogram(s, n, o);
}

DelayHistogram dark_fa2(const TimeTagStream &s) { return fan(s, 2, 10e-3); }

RateEstimate background_of(const TimeTagStream &s) {
    HistogramOptions o;
    o.bin_width = 6000;
    o.max_delay = std::uint64_t(1e-3 / s.tick_duration);
    CharfitOptions f;
    f.bootstrap = 50;
    return fit_background_rate(full_correlation_histogram(s, o), s.collection_time(), f);
}

}  // namespace

TEST(CountRateModel, TwoFoldIsShiftedExponential) {
    const double r = 2e6, dt = 1e-9, tau = 20e-9;
    EXPECT_EQ(first_and_n_bin_model(10e-9, 2, r, 0.0, tau, 1000, dt), 0.0);
    EXPECT_NEAR(first_and_n_bin_model(100e-9, 2, r, 0.01, tau, 1000, dt), 1000 * dt * r * std::exp(-r * 80e-9) * 0.99,
                1e-12);
    // Without afterpulses the n-fold model is the Erlang density of n-1 shifted gaps.
    const double t = 500e-9, u = t - 3 * tau, x = r * u;
    EXPECT_NEAR(first_and_n_bin_model(t, 4, r, 0.0, tau, 1.0, dt), dt * r * x * x / 2.0 * std::exp(-x), 1e-15);
}

TEST(CountRateModel, FitStartRule) {
    EXPECT_NEAR(count_rate_fit_start(100e-9, 300e-9, 20e-9, 5), 380e-9, 1e-18);
    EXPECT_NEAR(count_rate_fit_start(1e-9, 2e-9, 20e-9, 2), 40e-9, 1e-18);
}

TEST(CountRate, IdealDetectorTwoFold) {
    SimConfig c = cw_config(DetectorParams{}, 3);
    const double rate = 1e6;
    const TimeTagStream s = simulate_cw(c, rate, 0.5).stream;
    CountRateOptions o;
    o.bootstrap = 50;
    o.fit_start = 0.0;
    const CountRateFit f = fit_count_rate(fan(s, 2, 15e-6), 0.0, o);
    EXPECT_NEAR(f.rate, rate, 3.0 * std::max(f.sigma_rate, f.sigma_rate_lsq));
    EXPECT_GE(f.fit_start, 2.0 * f.tau_r);
}

TEST(CountRate, HighRateWithDeadTime) {
    const double rate = 20e6;
    SimConfig c = cw_config(dead_time_only(14e-9), 5);
    const TimeTagStream s = simulate_cw(c, rate, 0.05).stream;
    HistogramOptions o3;
    o3.max_delay = std::uint64_t(1e-6 / s.tick_duration);
    CountRateOptions o;
    o.bootstrap = 20;
    o.fan3_peak = histogram_peak_delay(first_and_n_histogram(s, 3, o3));
    const CountRateFit f = fit_count_rate(fan(s, 6, 5e-6), 0.0, o);
    EXPECT_LT(std::abs(f.rate - rate) / rate, 0.01);
    EXPECT_GT(f.rate, 0.0);
}

TEST(CountRate, EmptyHistogram) {
    DelayHistogram h;
    h.counts.assign(100, 0);
    EXPECT_THROW(fit_count_rate(h, 10e-9), Error);
}

TEST(BackgroundRate, DarkStreamRecovered) {
    DetectorParams p = oracle::spad1();
    p.ap_total = {0.0, 0.0};
    p.ap_profile = {};
    const TimeTagStream s = simulate_cw(cw_config(p, 7), 0.0, 2000.0).stream;
    const RateEstimate e = background_of(s);
    EXPECT_NEAR(e.rate, 137.0, 2.0 * e.sigma);
    EXPECT_GT(e.sigma, 0.0);
}

TEST(BackgroundRate, NoClicks) {
    TimeTagStream s;
    s.cycle_length = std::uint64_t(1.0 / s.tick_duration);
    s.n_cycles = 1;
    try {
        background_of(s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
    }
}

TEST(Afterpulse, ProbabilityRecovered) {
    const DetectorParams p = oracle::spad2();
    const TimeTagStream s = simulate_cw(cw_config(p, 11), 0.0, 3000.0).stream;
    const RateEstimate bg = background_of(s);
    CharfitOptions f;
    f.bootstrap = 50;
    const AfterpulseExtraction a = extract_afterpulse_profile(dark_fa2(s), bg.rate * (1 - 0.025), bg.sigma, p.t_rec.value, f);
    EXPECT_NEAR(a.p_total, 0.02482, 2.0 * a.sigma);
    EXPECT_EQ(a.profile.cumulative(p.t_rec.value - 2e-9), 0.0);
}

TEST(Afterpulse, NullCase) {
    DetectorParams p = oracle::spad2();
    p.ap_total = {0.0, 0.0};
    p.ap_profile = {};
    const TimeTagStream s = simulate_cw(cw_config(p, 13), 0.0, 2000.0).stream;
    const RateEstimate bg = background_of(s);
    CharfitOptions f;
    f.bootstrap = 50;
    const AfterpulseExtraction a = extract_afterpulse_profile(dark_fa2(s), bg.rate, bg.sigma, p.t_rec.value, f);
    EXPECT_LT(std::abs(a.p_total), 2.0 * a.sigma);
}

TEST(Dep, NullWithoutTwilightOrAfterpulses) {
    const DetectorParams p = dead_time_only(21.7e-9);
    const double rate = 1e6;
    const TimeTagStream s = simulate_cw(cw_config(p, 17), rate, 1.0).stream;
    CharfitOptions f;
    f.bootstrap = 50;
    const DepMeasurement d = measure_dep_fraction(fan(s, 2, 2e-6), rate, 0.0, 0.0, 21.7e-9, f);
    EXPECT_LT(std::abs(d.dep_fraction), 2.0 * d.sigma);
    EXPECT_GE(d.dep_fraction, 0.0);
}

TEST(Dep, LowRateTendsToAfterpulseProbability) {
    const DetectorParams p = oracle::spad2();
    const double rate = 2e4, truth = rate + p.r_b.value;
    const TimeTagStream s = simulate_cw(cw_config(p, 19), rate, 20.0).stream;
    CharfitOptions f;
    f.bootstrap = 50;
    DepBackground bg;
    bg.profile = &p.ap_profile;
    const DepMeasurement d = measure_dep_fraction(fan(s, 2, 2e-6), truth, 0.0, p.ap_total.value, p.t_rec.value, f, bg);
    const double p_two = p.ap_profile.cumulative(2.0 * p.t_rec.value);
    EXPECT_NEAR(d.dep_fraction, p_two, 2.0 * d.sigma + 1e-4);
}

TEST(ResetTime, ExactLine) {
    const double p_a = 0.01, t_reset = 8e-9;
    std::vector<DepMeasurement> pts(2);
    for (int i = 0; i < 2; ++i) {
        pts[std::size_t(i)].rate = 1e6 * (i + 1);
        pts[std::size_t(i)].dep_fraction = p_a + (1 - p_a) * pts[std::size_t(i)].rate * t_reset / 2.0;
        pts[std::size_t(i)].sigma = 1e-12;
    }
    const ResetTimeFit f = fit_reset_time(pts, p_a);
    EXPECT_NEAR(f.t_reset, t_reset, 1e-15);
    EXPECT_LT(f.sigma, 1e-15);
    EXPECT_EQ(f.points_used, 2);
}

TEST(DeadTime, LostFractionDefinition) {
    EXPECT_NEAR(lost_fraction(1e6, 1.0, 980000, 0.0), 0.02, 1e-15);
    EXPECT_NEAR(lost_fraction(1e6, 2.0, 1000000, 0.5), 0.75, 1e-15);
    EXPECT_THROW(lost_fraction(0.0, 1.0, 1, 0.0), Error);
}

TEST(DeadTime, ZeroDeadTimeLosesNothing) {
    SimConfig c = cw_config(DetectorParams{}, 23);
    const TimeTagStream s = simulate_cw(c, 1e6, 0.2).stream;
    const double pl = lost_fraction(1e6, 0.2, s.total_clicks(), 0.0);
    EXPECT_LT(std::abs(pl), 3.0 * std::sqrt(2e5) / 2e5);
}

TEST(DeadTime, ConsistencyRecoversModelExactly) {
    // Click counts generated from 1 - exp(-r s) itself.
    const double s_true = 18.4e-9, T = 1e3, p_a = 0.01;
    std::vector<LostFractionPoint> pts;
    for (double rate : {1e6, 2e6, 4e6})
        pts.push_back({rate, 0.0, T, std::uint64_t(std::llround(rate * T * std::exp(-rate * s_true) / (1 - p_a)))});
    const DeadTimeCheck d = dead_time_consistency(pts, p_a, {8e-9, 0.0});
    EXPECT_NEAR(d.half_sum, s_true, 1e-13);
    EXPECT_NEAR(d.t_rec, s_true + 4e-9, 1e-13);
}

TEST(DeadTime, Spad1LostFractionMatchesRenewalOracle) {
    // Renewal oracle for linear twilight: mean click spacing t_rec + exp(-r t_reset / 2) / r.
    DetectorParams p = oracle::spad1();
    p.ap_total = {0.0, 0.0};
    p.ap_profile = {};
    p.r_b = {0.0, 0.0};
    const double t_reset = p.t_rec.value - p.t_dead.value;
    std::vector<LostFractionPoint> pts;
    std::uint64_t seed = 29;
    for (double rate : {1e6, 2e6, 4e6}) {
        const TimeTagStream s = simulate_cw(cw_config(p, seed++), rate, 0.5).stream;
        pts.push_back({rate, 0.0, 0.5, s.total_clicks()});
        const double expect = 1.0 - 1.0 / (rate * p.t_rec.value + std::exp(-rate * t_reset / 2.0));
        const double sigma = std::sqrt(double(s.total_clicks())) / (rate * 0.5);
        EXPECT_NEAR(lost_fraction(rate, 0.5, s.total_clicks(), 0.0), expect, 4.0 * sigma) << rate;
    }
    // The exponential model ignores saturation, so it reads t_rec a few percent short here.
    const DeadTimeCheck d = dead_time_consistency(pts, 0.0, p.t_reset);
    EXPECT_NEAR(d.t_rec, p.t_rec.value, 0.05 * p.t_rec.value);
    EXPECT_EQ(d.lost.size(), 3u);
}

TEST(ShapeFactor, CountsFormula) {
    EXPECT_NEAR(shape_factor(1000, 1000, 0).value, 1.0, 1e-15);
    const Measured m = shape_factor(500, 1000, 0);
    EXPECT_NEAR(m.value, 0.5, 1e-15);
    // Without background: f^2 (1/n_pd + 1/n_cw).
    EXPECT_NEAR(m.sigma, 0.5 * std::sqrt(1.0 / 500 + 1.0 / 1000), 1e-15);
    EXPECT_THROW(shape_factor(10, 5, 5), Error);
}

TEST(ShapeFactor, IdenticalAndHalfPulse) {
    DetectorParams p;
    p.eta0 = {1.0, 0.0};
    SimConfig c;
    c.detector = p;
    c.cycles = 200000;
    c.seed = 31;
    c.gamma = PhotonProfile::flat(100e-9, 100);
    c.source = PhotonSource::poisson(0.05);
    const TimeTagStream cw = simulate(c).stream;
    const CycleWindow w{0.0, 100e-9, 1e-9};
    EXPECT_NEAR(shape_factor(cw, cw, w, 0.0).value, 1.0, 1e-15);
    std::vector<double> half(100, 0.0);
    std::fill(half.begin(), half.begin() + 50, 1.0);
    c.gamma = PhotonProfile(1e-9, half);
    c.source = PhotonSource::poisson(0.025);
    c.seed = 32;
    const Measured f = shape_factor(simulate(c).stream, cw, w, 0.0);
    EXPECT_NEAR(f.value, 0.5, 3.0 * f.sigma);
}

TEST(Characterize, DarkOnlyLeavesResetUnavailable) {
    const DetectorParams p = oracle::spad2();
    const TimeTagStream dark = simulate_cw(cw_config(p, 37), 0.0, 500.0).stream;
    CharacterizationOptions o;
    o.fit.bootstrap = 20;
    const CharacterizationReport r = characterize(dark, {}, {}, o);
    EXPECT_FALSE(r.t_reset.has_value());
    EXPECT_FALSE(r.reset_fit.has_value());
    EXPECT_GT(r.r_b.value, 0.0);
    EXPECT_NEAR(r.t_rec.value, p.t_rec.value, 1.5e-9);
    EXPECT_THROW(r.to_params(), Error);
}
