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

#include "spadrecon/charfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spadrecon/numerics.hpp"
#include "spadrecon/random.hpp"

namespace spadrecon {

namespace {

constexpr std::uint32_t kRateBootDomain = 0x4352;
constexpr std::uint32_t kBackgroundBootDomain = 0x4252;
constexpr std::uint32_t kAfterpulseBootDomain = 0x4150;
constexpr std::uint32_t kDepBootDomain = 0x4445;
constexpr std::size_t kMaxFitGroups = 4000;

double bin_center(const DelayHistogram &h, std::size_t i) { return (double(i) + 0.5) * h.bin_seconds(); }

// Last bin is only partly covered by max_delay, so fits stop before it.
std::size_t usable_bins(const DelayHistogram &h) { return h.counts.empty() ? 0 : h.counts.size() - 1; }

// Signed square root of the Poisson deviance term.
double deviance_residual(double y, double m) {
    m = std::max(m, 1e-300);
    double d = m - y;
    if (y > 0.0) d += y * std::log(y / m);
    d = std::sqrt(std::max(2.0 * d, 0.0));
    return y >= m ? d : -d;
}

// Sum of exp(-r (i + 0.5) w) for i in [a, b).
double exp_bin_sum(double r, double w, std::size_t a, std::size_t b) {
    if (b <= a) return 0.0;
    const double q = std::exp(-r * w);
    const double first = std::exp(-r * (double(a) + 0.5) * w);
    if (r * w < 1e-12) return first * double(b - a);
    return first * -std::expm1(-r * w * double(b - a)) / (1.0 - q);
}

std::vector<double> bootstrap_parallel(int reps, const std::function<double(int)> &one) {
    std::vector<double> out(std::size_t(std::max(reps, 0)), std::numeric_limits<double>::quiet_NaN());
    parallel_chunks(out.size(), [&](std::size_t b, std::size_t e, unsigned) {
        for (std::size_t i = b; i < e; ++i) out[i] = one(int(i));
    });
    std::vector<double> ok;
    for (double v : out)
        if (std::isfinite(v)) ok.push_back(v);
    return ok;
}

}  // namespace

double first_and_n_bin_model(double t, int n, double rate, double p_a, double tau_r, double n_starts, double dt) {
    const double u = t - double(n - 1) * tau_r;
    if (u <= 0.0) return 0.0;
    const double x = rate * u;
    const double base = n_starts * dt * rate * std::exp(-x);
    if (n == 2) return base * (1.0 - p_a);
    const double lx = std::log(x);
    const double lead = std::exp(double(n - 2) * lx - std::lgamma(double(n - 1)));
    const double corr = std::exp(double(n - 3) * lx - std::lgamma(double(n - 2)));
    return base * ((1.0 - double(n - 1) * p_a) * lead + double(n - 1) * p_a * corr);
}

double count_rate_fit_start(double t_first, double fan3_peak, double tau_r, int n) {
    return std::max(t_first + double(n) / 5.0 * (fan3_peak - tau_r), 2.0 * tau_r);
}

double first_nonzero_delay(const DelayHistogram &h) {
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        if (h.counts[i] > 0) return h.bin_start(i);
    throw Error(ErrorCode::InsufficientData, "histogram has no entries");
}

double histogram_peak_delay(const DelayHistogram &h) {
    if (h.counts.empty() || h.total() == h.overflow) throw Error(ErrorCode::InsufficientData, "histogram has no entries");
    const auto it = std::max_element(h.counts.begin(), h.counts.end());
    return h.bin_start(std::size_t(it - h.counts.begin()));
}

CountRateFit fit_count_rate(const DelayHistogram &fan, double tau_r, const CountRateOptions &opt) {
    if (fan.kind != HistogramKind::FirstAndN || fan.n < 2)
        throw Error(ErrorCode::InvalidArgument, "count-rate fit needs a first-and-n histogram with n >= 2");
    const int n = fan.n;
    const double t_first = first_nonzero_delay(fan);
    if (!(tau_r > 0.0)) tau_r = t_first / double(n - 1);
    const double dt = fan.bin_seconds();
    const double n_starts = double(fan.total());

    // Starting guess from the mean delay past the shift.
    double sum = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < fan.counts.size(); ++i) {
        sum += double(fan.counts[i]) * bin_center(fan, i);
        mass += double(fan.counts[i]);
    }
    const double excess = sum / mass - double(n - 1) * tau_r;
    double r0 = excess > 0.0 ? double(n - 1) / excess : 1.0 / dt;

    CountRateFit out;
    out.tau_r = tau_r;
    if (opt.fit_start > 0.0) {
        out.fit_start = opt.fit_start;
    } else {
        const double peak3 = opt.fan3_peak > 0.0 ? opt.fan3_peak : 2.0 * tau_r + 1.0 / r0;
        out.fit_start = count_rate_fit_start(t_first, peak3, tau_r, n);
    }

    // Fit bins are merged into at most kMaxFitGroups groups; the model uses the group midpoint.
    const std::size_t end = usable_bins(fan);
    const std::size_t begin = std::size_t(std::ceil(out.fit_start / dt - 1e-9));
    std::size_t last = begin;
    for (std::size_t i = begin; i < end; ++i)
        if (fan.counts[i] > 0) last = i + 1;
    const std::size_t group = std::max<std::size_t>(1, (last - std::min(begin, last) + kMaxFitGroups - 1) / kMaxFitGroups);
    std::vector<double> t, y;
    for (std::size_t i = begin; i + group <= end && i < last; i += group) {
        double c = 0.0;
        for (std::size_t j = i; j < i + group; ++j) c += double(fan.counts[j]);
        t.push_back((double(i) + 0.5 * double(group)) * dt);
        y.push_back(c);
    }
    const double gdt = dt * double(group);
    if (t.size() < 3 || std::accumulate(y.begin(), y.end(), 0.0) < 10.0)
        throw Error(ErrorCode::InsufficientData, "too few events past the count-rate fit start");
    out.bins_used = int(t.size());

    // Parameters are (r / r0, p_a) so both are order one.
    auto fit = [&](const std::vector<double> &data, Vector<double> x0) {
        auto resid = [&](const Vector<double> &x) {
            Vector<double> r(Index(t.size()));
            const double rate = x(0) * r0;
            if (!(rate > 0.0)) {
                r.setConstant(std::numeric_limits<double>::infinity());
                return r;
            }
            for (std::size_t i = 0; i < t.size(); ++i)
                r(Index(i)) = deviance_residual(data[i], first_and_n_bin_model(t[i], n, rate, x(1), tau_r, n_starts, gdt));
            return r;
        };
        LeastSquaresOptions lo;
        lo.rel_tol = 1e-10;
        return damped_least_squares(resid, std::move(x0), lo);
    };

    Vector<double> x0(2);
    x0 << 1.0, 0.0;
    const LeastSquaresResult main = fit(y, x0);
    if (!main.converged || !(main.x(0) > 0.0)) throw Error(ErrorCode::FitDiverged, "count-rate fit did not converge");
    out.rate = main.x(0) * r0;
    out.p_a_fit = main.x(1);
    out.reduced_chi2 = main.cost / double(std::max<std::size_t>(t.size() - 2, 1));
    out.sigma_rate_lsq = std::sqrt(std::max(main.covariance(0, 0), 0.0)) * r0;
    out.sigma_p_a_lsq = std::sqrt(std::max(main.covariance(1, 1), 0.0));

    std::vector<double> model(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        model[i] = first_and_n_bin_model(t[i], n, out.rate, out.p_a_fit, tau_r, n_starts, gdt);
    const std::vector<double> boot = bootstrap_parallel(opt.bootstrap, [&](int b) {
        CounterRng rng(opt.seed, stream_id(kRateBootDomain, std::uint64_t(b)));
        std::vector<double> d(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) d[i] = double(rng.poisson(model[i]));
        try {
            const LeastSquaresResult r = fit(d, main.x);
            return r.x(0) * r0;
        } catch (const Error &) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    });
    out.sigma_rate = boot.size() >= 2 ? sample_stddev(boot) : out.sigma_rate_lsq;
    return out;
}

RateEstimate fit_background_rate(const DelayHistogram &full, double t0, const CharfitOptions &opt) {
    if (!(t0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "collection time must be > 0");
    const double dt = full.bin_seconds();
    const std::size_t end = usable_bins(full);
    const std::size_t begin = std::size_t(std::ceil(opt.long_delay / dt - 1e-9));
    if (begin >= end) throw Error(ErrorCode::InsufficientData, "histogram does not extend past the fit start");
    // Model m_i = r^2 dt (t0 - t_i); the Poisson ML solution for r^2 is closed form.
    double Y = 0.0, W = 0.0;
    std::vector<double> w;
    for (std::size_t i = begin; i < end; ++i) {
        Y += double(full.counts[i]);
        w.push_back(dt * (t0 - bin_center(full, i)));
        W += w.back();
    }
    if (Y <= 0.0 || W <= 0.0) throw Error(ErrorCode::InsufficientData, "no pairs past the fit start");
    RateEstimate out;
    out.bins_used = int(end - begin);
    const double q = Y / W;
    out.rate = std::sqrt(q);
    const std::vector<double> boot = bootstrap_parallel(opt.bootstrap, [&](int b) {
        CounterRng rng(opt.seed, stream_id(kBackgroundBootDomain, std::uint64_t(b)));
        double y = 0.0;
        for (double wi : w) y += double(rng.poisson(q * wi));
        return std::sqrt(y / W);
    });
    out.sigma = boot.size() >= 2 ? sample_stddev(boot) : out.rate / (2.0 * std::sqrt(Y));
    return out;
}

AfterpulseExtraction extract_afterpulse_profile(const DelayHistogram &fa2, double r_b, double sigma_r_b, double t_rec,
                                                const CharfitOptions &opt) {
    if (fa2.kind != HistogramKind::FirstAndN || fa2.n != 2)
        throw Error(ErrorCode::InvalidArgument, "afterpulse extraction needs a first-and-second histogram");
    const double w = fa2.bin_seconds();
    const std::size_t end = usable_bins(fa2);
    const std::size_t i_long = std::size_t(std::ceil(opt.long_delay / w - 1e-9));
    if (i_long >= end) throw Error(ErrorCode::InsufficientData, "histogram does not extend past the fit start");
    const std::size_t i_rec = std::min(std::size_t(std::llround(t_rec / w)), i_long);
    const double n_clicks = double(fa2.source_clicks);
    if (n_clicks <= 0.0) throw Error(ErrorCode::InsufficientData, "no clicks");

    double Y = 0.0, S = 0.0;
    for (std::size_t i = i_long; i < end; ++i) Y += double(fa2.counts[i]);
    for (std::size_t i = i_rec; i < i_long; ++i) S += double(fa2.counts[i]);
    if (Y <= 0.0) throw Error(ErrorCode::InsufficientData, "no events past the fit start");

    AfterpulseExtraction out;
    out.amplitude = Y / exp_bin_sum(r_b, w, i_long, end);
    out.profile.bin_width = w;
    out.profile.values.assign(i_long, 0.0);
    for (std::size_t i = i_rec; i < i_long; ++i) {
        out.profile.values[i] = (double(fa2.counts[i]) - out.amplitude * std::exp(-r_b * bin_center(fa2, i))) / n_clicks;
    }
    out.p_total = (S - out.amplitude * exp_bin_sum(r_b, w, i_rec, i_long)) / n_clicks;

    // Resample the peak region and the fit region, and draw r_b from its Gaussian.
    const std::vector<double> boot = bootstrap_parallel(opt.bootstrap, [&](int b) {
        CounterRng rng(opt.seed, stream_id(kAfterpulseBootDomain, std::uint64_t(b)));
        const double r = std::max(rng.normal(r_b, sigma_r_b), 0.0);
        const double y = double(rng.poisson(Y));
        const double s = double(rng.poisson(S));
        const double a = y / exp_bin_sum(r, w, i_long, end);
        return (s - a * exp_bin_sum(r, w, i_rec, i_long)) / n_clicks;
    });
    out.sigma = boot.size() >= 2 ? sample_stddev(boot) : std::sqrt(S) / n_clicks;
    return out;
}

DepMeasurement measure_dep_fraction(const DelayHistogram &fa2, double rate, double sigma_rate, double p_a,
                                    double tau_r, const CharfitOptions &opt, const DepBackground &model) {
    if (fa2.kind != HistogramKind::FirstAndN || fa2.n != 2)
        throw Error(ErrorCode::InvalidArgument, "DEP measurement needs a first-and-second histogram");
    if (!(rate > 0.0) || !(tau_r > 0.0)) throw Error(ErrorCode::InvalidArgument, "rate and tau_r must be > 0");
    const double w = fa2.bin_seconds();
    const double n_clicks = double(fa2.source_clicks);
    std::size_t stop = 0;
    while (stop < fa2.counts.size() && bin_center(fa2, stop) < 2.0 * tau_r) ++stop;

    // Weight of r exp(-r (t - tau_r)) in each bin.
    std::vector<double> weight(stop, (1.0 - p_a) * (1.0 - model.p_twilight));
    if (model.profile && model.profile->total() > 0.0) {
        const double total = model.profile->total();
        for (std::size_t i = 0; i < stop; ++i)
            weight[i] += p_a * (1.0 - model.profile->cumulative(bin_center(fa2, i)) / total);
    }
    auto fraction = [&](double r, double *var_counts) {
        std::vector<double> sub(stop);
        for (std::size_t i = 0; i < stop; ++i) {
            const double bg = n_clicks * w * weight[i] * r * std::exp(-r * (bin_center(fa2, i) - tau_r));
            sub[i] = double(fa2.counts[i]) - bg;
        }
        const std::size_t peak = std::size_t(std::max_element(sub.begin(), sub.end()) - sub.begin());
        // Add-back only inside the recovery region, so a noise maximum in a null
        // histogram cannot pull ordinary tail bins in.
        for (std::size_t i = 0; i < peak && bin_center(fa2, i) < tau_r; ++i)
            if (sub[i] < 0.0) sub[i] = double(fa2.counts[i]);
        double total = 0.0, var = 0.0;
        for (std::size_t i = 0; i < stop; ++i) {
            const double scale = std::exp(r * (bin_center(fa2, i) - tau_r));
            total += sub[i] * scale;
            var += double(fa2.counts[i]) * scale * scale;
        }
        if (var_counts) *var_counts = var;
        return total / n_clicks;
    };

    DepMeasurement out;
    out.rate = rate;
    out.sigma_rate = sigma_rate;
    if (stop == 0 || n_clicks <= 0.0) return out;
    double var = 0.0;
    out.dep_fraction = std::clamp(fraction(rate, &var), 0.0, 1.0);
    out.sigma_counts = std::sqrt(var) / n_clicks;
    if (sigma_rate > 0.0) {
        const std::vector<double> mc = bootstrap_parallel(opt.bootstrap, [&](int b) {
            CounterRng rng(opt.seed, stream_id(kDepBootDomain, std::uint64_t(b)));
            const double r = rng.normal(rate, sigma_rate);
            return r > 0.0 ? fraction(r, nullptr) : std::numeric_limits<double>::quiet_NaN();
        });
        if (mc.size() >= 2) out.sigma_background = sample_stddev(mc);
    }
    out.sigma = std::hypot(out.sigma_counts, out.sigma_background);
    return out;
}

ResetTimeFit fit_reset_time(const std::vector<DepMeasurement> &points, double p_a, const CharfitOptions &opt) {
    std::vector<const DepMeasurement *> use;
    for (const auto &p : points)
        if (p.rate < opt.linear_rate_limit) use.push_back(&p);
    if (use.size() < 2) throw Error(ErrorCode::InsufficientData, "reset-time fit needs >= 2 points below the rate limit");
    bool weighted = true;
    for (auto *p : use) weighted = weighted && p->sigma > 0.0;
    double Sxx = 0.0, Sxy = 0.0;
    for (auto *p : use) {
        const double wi = weighted ? 1.0 / (p->sigma * p->sigma) : 1.0;
        Sxx += wi * p->rate * p->rate;
        Sxy += wi * p->rate * (p->dep_fraction - p_a);
    }
    ResetTimeFit out;
    out.points_used = int(use.size());
    out.slope = Sxy / Sxx;
    double chi2 = 0.0;
    for (auto *p : use) {
        const double wi = weighted ? 1.0 / (p->sigma * p->sigma) : 1.0;
        const double d = p->dep_fraction - p_a - out.slope * p->rate;
        chi2 += wi * d * d;
    }
    out.chi2_scale = std::sqrt(chi2 / double(use.size() - 1));
    out.sigma_slope = out.chi2_scale / std::sqrt(Sxx);
    out.t_reset = 2.0 * out.slope / (1.0 - p_a);
    out.sigma = 2.0 * out.sigma_slope / (1.0 - p_a);
    for (const auto &p : points) {
        const double model = p_a + (1.0 - p_a) * -std::expm1(-p.rate * out.t_reset / 2.0);
        out.saturating_residuals.push_back(p.dep_fraction - model);
    }
    return out;
}

double lost_fraction(double rate, double duration, std::uint64_t clicks, double p_a) {
    const double expected = rate * duration;
    if (!(expected > 0.0)) throw Error(ErrorCode::ZeroDenominator, "rate * duration must be > 0");
    return (expected - double(clicks) * (1.0 - p_a)) / expected;
}

DeadTimeCheck dead_time_consistency(const std::vector<LostFractionPoint> &points, double p_a, Measured t_reset) {
    if (points.empty()) throw Error(ErrorCode::InsufficientData, "dead-time check needs at least one rate");
    std::vector<double> r, p, s2;
    double r_max = 0.0;
    for (const auto &pt : points) {
        const double pl = lost_fraction(pt.rate, pt.duration, pt.clicks, p_a);
        const double fr = pt.sigma_rate / pt.rate;
        const double fc = std::sqrt(double(pt.clicks)) * (1.0 - p_a) / (pt.rate * pt.duration);
        r.push_back(pt.rate);
        p.push_back(pl);
        s2.push_back(std::max(std::pow((1.0 - pl) * fr, 2) + fc * fc, 1e-300));
        r_max = std::max(r_max, pt.rate);
    }
    auto chi2 = [&](double s) {
        double c = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double d = p[i] + std::expm1(-r[i] * s);
            c += d * d / s2[i];
        }
        return c;
    };
    const double hi = 5.0 / r_max;
    const ScalarMinimum m = brent_minimize(chi2, 0.0, hi, 1e-10);
    DeadTimeCheck out;
    out.lost = p;
    out.half_sum = m.x;
    // Curvature of chi^2 in closed form (model is exact in s).
    double curv = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double g = r[i] * std::exp(-r[i] * m.x);
        curv += g * g / s2[i];
    }
    double scale = 1.0;
    if (r.size() > 1) scale = std::sqrt(m.value / double(r.size() - 1));
    out.sigma_half_sum = scale / std::sqrt(std::max(curv, 1e-300));
    out.t_rec = m.x + t_reset.value / 2.0;
    out.sigma = std::hypot(out.sigma_half_sum, t_reset.sigma / 2.0);
    return out;
}

Measured recovery_time_from_histograms(const std::vector<const DelayHistogram *> &hists) {
    if (hists.empty()) throw Error(ErrorCode::InsufficientData, "no histograms");
    double sum = 0.0, bin = 0.0;
    for (const auto *h : hists) {
        sum += first_nonzero_delay(*h);
        bin = std::max(bin, h->bin_seconds());
    }
    const double k = double(hists.size());
    return {sum / k, 0.5 * bin / std::sqrt(k)};
}

Measured shape_factor(double n_pd, double n_cw, double n_bg) {
    const double pd = n_pd - n_bg;
    const double cw = n_cw - n_bg;
    if (!(cw > 0.0)) throw Error(ErrorCode::ZeroDenominator, "background-subtracted cw count is <= 0");
    const double f = pd / cw;
    // (df/f)^2 expression multiplied through by f^2, so pd = 0 stays finite.
    const double var = n_pd / (cw * cw) + f * f * n_cw / (cw * cw) + std::pow((n_pd - n_cw) / (cw * cw), 2) * n_bg;
    return {f, std::sqrt(var)};
}

Measured shape_factor(const TimeTagStream &pulsed, const TimeTagStream &cw, const CycleWindow &window, double r_b) {
    if (pulsed.n_cycles != cw.n_cycles) throw Error(ErrorCode::InvalidArgument, "shape factor needs equal cycle counts");
    auto count = [&](const TimeTagStream &s) {
        const std::vector<std::uint32_t> k = clicks_per_cycle(s, window);
        return std::accumulate(k.begin(), k.end(), 0.0);
    };
    const double n_pd = count(pulsed);
    const double n_cw = count(cw);
    if (n_pd <= 0.0 || n_cw <= 0.0) throw Error(ErrorCode::ZeroDenominator, "no clicks inside the window");
    return shape_factor(n_pd, n_cw, r_b * window.duration() * double(cw.n_cycles));
}

DetectorParams CharacterizationReport::to_params() const {
    if (!t_reset) throw Error(ErrorCode::InsufficientData, "report has no reset time");
    DetectorParams p;
    if (eta0) p.eta0 = *eta0;
    p.r_b = r_b;
    p.ap_total = p_a_total;
    p.ap_profile = ap_profile;
    p.t_rec = t_rec;
    p.t_reset = *t_reset;
    p.t_dead = t_dead ? *t_dead : Measured{t_rec.value - t_reset->value, 0.0};
    return p;
}

CharacterizationReport characterize(const TimeTagStream &dark, const std::vector<TimeTagStream> &lit,
                                    const std::vector<std::string> &labels, const CharacterizationOptions &opt) {
    const double tick = dark.tick_duration;
    auto ticks = [&](double s) { return std::uint64_t(std::ceil(s / tick)); };
    CharacterizationReport rep;
    const bool dark_cross = dark.n_cycles > 1;

    HistogramOptions full_opt;
    full_opt.bin_width = opt.background_bin_ticks;
    full_opt.max_delay = ticks(opt.background_max_delay);
    full_opt.cross_cycle = dark_cross;
    const DelayHistogram full = full_correlation_histogram(dark, full_opt);
    const RateEstimate bg = fit_background_rate(full, dark.collection_time(), opt.fit);
    rep.r_click = {bg.rate, bg.sigma};

    HistogramOptions fa_opt;
    fa_opt.bin_width = opt.bin_ticks;
    fa_opt.max_delay = ticks(opt.afterpulse_max_delay);
    fa_opt.cross_cycle = dark_cross;
    const DelayHistogram dark_fa2 = first_and_n_histogram(dark, 2, fa_opt);

    std::vector<DelayHistogram> lit_fa2;
    for (const auto &s : lit) {
        HistogramOptions o;
        o.bin_width = opt.bin_ticks;
        o.max_delay = ticks(2e-6);
        o.cross_cycle = s.n_cycles > 1;
        lit_fa2.push_back(first_and_n_histogram(s, 2, o));
    }
    std::vector<const DelayHistogram *> all_fa2{&dark_fa2};
    for (const auto &h : lit_fa2) all_fa2.push_back(&h);
    rep.t_rec = recovery_time_from_histograms(all_fa2);

    AfterpulseExtraction ap = extract_afterpulse_profile(dark_fa2, rep.r_click.value, rep.r_click.sigma, rep.t_rec.value, opt.fit);
    rep.r_b = rep.r_click;
    if (opt.correct_background_for_afterpulses) {
        const double f = 1.0 - ap.p_total;
        rep.r_b = {rep.r_click.value * f, std::hypot(rep.r_click.sigma * f, rep.r_click.value * ap.sigma)};
        ap = extract_afterpulse_profile(dark_fa2, rep.r_b.value, rep.r_b.sigma, rep.t_rec.value, opt.fit);
    }
    rep.p_a_total = {ap.p_total, ap.sigma};
    rep.ap_profile = ap.profile;
    const double p_two = ap.profile.cumulative(2.0 * rep.t_rec.value);
    rep.p_a_two_rec = {p_two, ap.p_total != 0.0 ? ap.sigma * std::abs(p_two / ap.p_total) : ap.sigma};

    std::vector<DepMeasurement> deps;
    std::vector<LostFractionPoint> lost;
    for (std::size_t k = 0; k < lit.size(); ++k) {
        const TimeTagStream &s = lit[k];
        LitSummary sum;
        sum.label = k < labels.size() ? labels[k] : std::to_string(k);
        try {
            const double r_guess = double(s.total_clicks()) / s.collection_time();
            const int n = opt.rate_order;
            HistogramOptions o;
            o.bin_width = opt.bin_ticks;
            o.cross_cycle = s.n_cycles > 1;
            o.max_delay = ticks(double(n - 1) * rep.t_rec.value + 15.0 * double(n - 1) / r_guess);
            const DelayHistogram fan = first_and_n_histogram(s, n, o);
            const DelayHistogram fa3 = first_and_n_histogram(s, 3, o);
            CountRateOptions ro;
            ro.fan3_peak = histogram_peak_delay(fa3);
            ro.bootstrap = opt.fit.bootstrap;
            ro.seed = opt.fit.seed + k;
            sum.rate = fit_count_rate(fan, rep.t_rec.value, ro);
            CharfitOptions dep_opt = opt.fit;
            dep_opt.seed = opt.fit.seed + k;
            DepBackground model;
            if (opt.full_dep_background) model.profile = &rep.ap_profile;
            sum.dep = measure_dep_fraction(lit_fa2[k], sum.rate.rate, sum.rate.sigma_rate, ap.p_total, rep.t_rec.value,
                                           dep_opt, model);
            // p_t enters its own background; a few passes settle it.
            for (int pass = 0; opt.full_dep_background && pass < 4; ++pass) {
                model.p_twilight = std::clamp((sum.dep.dep_fraction - p_two) / (1.0 - p_two), 0.0, 1.0);
                sum.dep = measure_dep_fraction(lit_fa2[k], sum.rate.rate, sum.rate.sigma_rate, ap.p_total,
                                               rep.t_rec.value, dep_opt, model);
            }
            sum.lost_fraction = lost_fraction(sum.rate.rate, s.collection_time(), s.total_clicks(), ap.p_total);
        } catch (const Error &e) {
            throw Error(e.code(), "dataset '" + sum.label + "': " + e.what());
        }
        deps.push_back(sum.dep);
        lost.push_back({sum.rate.rate, sum.rate.sigma_rate, s.collection_time(), s.total_clicks()});
        rep.lit.push_back(std::move(sum));
    }

    std::size_t below = 0;
    for (const auto &d : deps) below += d.rate < opt.fit.linear_rate_limit;
    if (below >= 2) {
        rep.reset_fit = fit_reset_time(deps, p_two, opt.fit);
        rep.t_reset = Measured{rep.reset_fit->t_reset, rep.reset_fit->sigma};
        rep.t_dead = Measured{rep.t_rec.value - rep.t_reset->value, std::hypot(rep.t_rec.sigma, rep.t_reset->sigma)};
        rep.t_rec_check = dead_time_consistency(lost, ap.p_total, *rep.t_reset);
    }
    return rep;
}

}  // namespace spadrecon
