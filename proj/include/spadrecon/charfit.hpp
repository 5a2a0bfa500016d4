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

#ifndef SPADRECON_CHARFIT_HPP
#define SPADRECON_CHARFIT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spadrecon/core.hpp"
#include "spadrecon/tags.hpp"

namespace spadrecon {

/// Thresholds and resampling settings shared by the characterization fits.
struct CharfitOptions {
    double long_delay = 100e-6;       ///< start of the "afterpulse-free" region (s)
    double linear_rate_limit = 5e6;   ///< reset-time fit uses points below this rate (counts/s)
    int bootstrap = 500;
    std::uint64_t seed = 1;
};

/// Expected events in one first-and-n bin, first order in p_a, for delays past (n-1) tau_r.
double first_and_n_bin_model(double t, int n, double rate, double p_a, double tau_r, double n_starts, double dt);

/// Fit-start rule: first nonzero bin plus n/5 of (first-and-third peak - tau_r), at least 2 tau_r.
double count_rate_fit_start(double t_first, double fan3_peak, double tau_r, int n);

struct CountRateFit {
    double rate = 0.0;          ///< counts/s
    double p_a_fit = 0.0;       ///< reported only; biased low by construction
    double tau_r = 0.0;         ///< the fixed recovery shift used (s)
    double fit_start = 0.0;     ///< s
    double sigma_rate_lsq = 0.0;  ///< from the least-squares covariance
    double sigma_p_a_lsq = 0.0;
    double sigma_rate = 0.0;    ///< bootstrap
    double reduced_chi2 = 0.0;
    int bins_used = 0;
};

struct CountRateOptions {
    /// Explicit fit start (s); 0 applies count_rate_fit_start.
    double fit_start = 0.0;
    /// Peak of the first-and-third histogram from the same data (s); 0 estimates it as 2 tau_r + 1/r.
    double fan3_peak = 0.0;
    int bootstrap = 500;
    std::uint64_t seed = 1;
};

/// Delay of the first nonzero bin (bin start, s). Throws InsufficientData on an empty histogram.
double first_nonzero_delay(const DelayHistogram &h);
/// Bin-start time of the largest bin.
double histogram_peak_delay(const DelayHistogram &h);

/// tau_r <= 0 takes the first nonzero bin divided by n-1.
CountRateFit fit_count_rate(const DelayHistogram &fan, double tau_r, const CountRateOptions &opt = {});

struct RateEstimate {
    double rate = 0.0;
    double sigma = 0.0;
    int bins_used = 0;
};

/// Fits r^2 dt (t0 - t) to full-correlation bins past fit_start. The amplitude is the total click
/// rate, afterpulse clicks included.
RateEstimate fit_background_rate(const DelayHistogram &full, double t0, const CharfitOptions &opt = {});

struct AfterpulseExtraction {
    AfterpulseProfile profile;  ///< per-click probability per bin, zero below t_rec, up to long_delay
    double p_total = 0.0;
    double sigma = 0.0;
    double amplitude = 0.0;     ///< fitted exponential amplitude (events per bin at t = 0)
};

/// Dark first-and-second histogram minus the extrapolated A exp(-r_b t) fit.
AfterpulseExtraction extract_afterpulse_profile(const DelayHistogram &fa2, double r_b, double sigma_r_b, double t_rec,
                                                const CharfitOptions &opt = {});

struct DepMeasurement {
    double rate = 0.0;
    double sigma_rate = 0.0;
    double dep_fraction = 0.0;
    double sigma = 0.0;
    double sigma_counts = 0.0;      ///< counting part
    double sigma_background = 0.0;  ///< Monte Carlo part from sigma_rate
};

/// Optional refinements of the subtracted background. The defaults give the plain
/// N dt (1 - p_a) r exp(-r (t - tau_r)) form.
struct DepBackground {
    /// Twilight probability at this rate; scales the plain term by (1 - p_twilight).
    double p_twilight = 0.0;
    /// Adds p_a (1 - P_a(t)) r exp(-r (t - tau_r)), photons that beat a pending afterpulse.
    const AfterpulseProfile *profile = nullptr;
};

/// DEP fraction of an illuminated first-and-second histogram. p_a is the total afterpulse
/// probability used in the subtracted background.
DepMeasurement measure_dep_fraction(const DelayHistogram &fa2, double rate, double sigma_rate, double p_a,
                                    double tau_r, const CharfitOptions &opt = {}, const DepBackground &bg = {});

struct ResetTimeFit {
    double t_reset = 0.0;
    double sigma = 0.0;
    double slope = 0.0;
    double sigma_slope = 0.0;
    double chi2_scale = 1.0;   ///< sqrt of the reduced chi^2 applied to the sigma
    int points_used = 0;
    /// data - p_a - (1 - p_a)(1 - exp(-r t_reset / 2)) for every input point
    std::vector<double> saturating_residuals;
};

/// Weighted line through the fixed intercept p_a using points below opt.linear_rate_limit.
ResetTimeFit fit_reset_time(const std::vector<DepMeasurement> &points, double p_a, const CharfitOptions &opt = {});

/// (rT - N (1 - p_a)) / (rT).
double lost_fraction(double rate, double duration, std::uint64_t clicks, double p_a);

struct LostFractionPoint {
    double rate = 0.0;
    double sigma_rate = 0.0;
    double duration = 0.0;
    std::uint64_t clicks = 0;
};

struct DeadTimeCheck {
    double t_rec = 0.0;
    double sigma = 0.0;
    double half_sum = 0.0;  ///< fitted (t_rec + t_dead) / 2
    double sigma_half_sum = 0.0;
    std::vector<double> lost;
};

/// Fits 1 - exp(-r (t_rec + t_dead) / 2) to the lost fractions; t_rec = fit + t_reset / 2.
DeadTimeCheck dead_time_consistency(const std::vector<LostFractionPoint> &points, double p_a, Measured t_reset);

/// Recovery time from the leading zero bins of several histograms; sigma is half a bin over sqrt(count).
Measured recovery_time_from_histograms(const std::vector<const DelayHistogram *> &hists);

/// Background-subtracted pulsed over cw clicks inside the window. Both streams need the same cycle count.
Measured shape_factor(const TimeTagStream &pulsed, const TimeTagStream &cw, const CycleWindow &window, double r_b);
/// Same, from raw counts.
Measured shape_factor(double n_pd, double n_cw, double n_bg);

struct CharacterizationOptions {
    CharfitOptions fit;
    int rate_order = 6;             ///< first-and-n order for the count rate
    std::uint64_t bin_ticks = kDefaultBinTicks;
    std::uint64_t background_bin_ticks = 6000;  ///< coarse bins for the full-correlation line
    double background_max_delay = 1e-3;         ///< s
    double afterpulse_max_delay = 10e-3;        ///< s
    /// Correct the background-line amplitude for afterpulse clicks: r_b = r_click (1 - p_a).
    bool correct_background_for_afterpulses = true;
    /// DEP background includes the twilight factor (iterated) and the interrupted-afterpulse term.
    bool full_dep_background = true;
};

struct LitSummary {
    std::string label;
    CountRateFit rate;
    DepMeasurement dep;
    double lost_fraction = 0.0;
};

struct CharacterizationReport {
    std::optional<Measured> eta0;  ///< external input, copied through
    Measured r_click;              ///< background-line amplitude
    Measured r_b;
    Measured p_a_total;
    Measured p_a_two_rec;          ///< afterpulse probability within 2 t_rec
    Measured t_rec;
    std::optional<Measured> t_reset;
    std::optional<Measured> t_dead;
    std::optional<DeadTimeCheck> t_rec_check;
    std::optional<ResetTimeFit> reset_fit;
    AfterpulseProfile ap_profile;
    std::vector<LitSummary> lit;

    /// Detector parameters for the matrix builders; needs t_reset.
    DetectorParams to_params() const;
};

/// Dark record first, then illuminated records. Lit records are optional; fewer than two leave the
/// reset fields empty.
CharacterizationReport characterize(const TimeTagStream &dark, const std::vector<TimeTagStream> &lit,
                                    const std::vector<std::string> &labels, const CharacterizationOptions &opt = {});

}  // namespace spadrecon

#endif  // SPADRECON_CHARFIT_HPP
