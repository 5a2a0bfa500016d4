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

#include "spadrecon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "spadrecon/random.hpp"

namespace spadrecon {

namespace {

constexpr std::uint32_t kCycleDomain = 0x5143;  // per-cycle streams
constexpr std::uint32_t kCwDomain = 0x4357;
constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Cause { Photon, Background, Afterpulse };

// Recovery state machine for one record. Photon and background events are fed in time
// order; clicks are collected as continuous times.
class DetectorMachine {
   public:
    DetectorMachine(const SimConfig &cfg, const AfterpulseSampler &ap, CounterRng &rng, double end,
                    std::vector<double> &clicks, SimTallies &t)
        : cfg_(cfg),
          loss_(cfg.loss),
          ap_(ap),
          p_a_(ap.empty() ? 0.0 : cfg.detector.ap_total.value),
          rng_(rng),
          end_(end),
          clicks_(clicks),
          t_(t) {}

    void feed(double time, Cause cause) {
        settle(time);
        detect(time, cause);
    }

    void finish() {
        settle(kInf);
        t_.afterpulses_beyond_end += heap_.size();
    }

   private:
    // Runs pending twilight clicks and queued afterpulses up to `time`.
    void settle(double time) {
        for (;;) {
            const double flush = pending_ ? t_ref_ + loss_.t_rec : kInf;
            const double next_ap = heap_.empty() ? kInf : heap_.top();
            if (flush > time && next_ap > time) return;
            if (flush == kInf && next_ap == kInf) return;
            if (flush <= next_ap) {
                pending_ = false;
                t_ref_ = flush;
                ++t_.twilight_clicks;
                if (pending_cause_ == Cause::Photon) ++t_.photon_twilight;
                if (pending_cause_ == Cause::Background) ++t_.background_twilight;
                if (pending_cause_ == Cause::Afterpulse) ++t_.afterpulse_twilight;
                register_click(flush);
            } else {
                heap_.pop();
                detect(next_ap, Cause::Afterpulse);
            }
        }
    }

    void detect(double time, Cause cause) {
        if (!clicked_ || time >= t_ref_ + loss_.t_rec) {
            clicked_ = true;
            t_ref_ = time;
            if (cause != Cause::Afterpulse) ++t_.armed_clicks;
            if (cause == Cause::Photon) ++t_.photon_armed;
            if (cause == Cause::Background) ++t_.background_armed;
            if (cause == Cause::Afterpulse) {
                ++t_.afterpulse_armed;
                ++t_.afterpulse_clicks;
            }
            register_click(time);
            return;
        }
        const double d = loss_(time - t_ref_);
        const bool lost = d >= 1.0 || (d > 0.0 && rng_.uniform() < d);
        if (lost || pending_) {
            if (cause == Cause::Photon) ++t_.photon_recovery_losses;
            if (cause == Cause::Background) ++t_.background_recovery_losses;
            if (cause == Cause::Afterpulse) ++t_.afterpulse_recovery_losses;
            return;
        }
        pending_ = true;
        pending_cause_ = cause;
    }

    void register_click(double time) {
        const double gap = last_click_ < 0.0 ? kInf : time - last_click_;
        last_click_ = time;
        store(time);
        if (p_a_ <= 0.0) return;
        if (cfg_.mode == SimMode::Faithful) {
            // Geometric chain, no interaction with the recovery state.
            double t = time;
            while (rng_.uniform() < p_a_) {
                const double u1 = rng_.uniform(), u2 = rng_.uniform();
                t += ap_(u1, u2);
                ++t_.afterpulse_clicks;
                store(t);
            }
            return;
        }
        double p = p_a_;
        if (cfg_.ap_inflation > 0.0 && std::isfinite(gap)) {
            p *= 1.0 + cfg_.ap_inflation * loss_.t_rec / std::max(gap, loss_.t_rec);
        }
        if (rng_.uniform() < std::min(p, 1.0)) {
            const double u1 = rng_.uniform(), u2 = rng_.uniform();
            const double at = time + ap_(u1, u2);
            if (at < end_) {
                ++t_.afterpulse_events;
                heap_.push(at);
            } else {
                ++t_.afterpulses_beyond_end;
            }
        }
    }

    void store(double time) {
        if (time >= end_) {
            ++t_.clicks_beyond_end;
            return;
        }
        clicks_.push_back(time);
    }

    const SimConfig &cfg_;
    LossProfileModel loss_;
    const AfterpulseSampler &ap_;
    double p_a_;
    CounterRng &rng_;
    double end_;
    std::vector<double> &clicks_;
    SimTallies &t_;
    bool clicked_ = false;
    double t_ref_ = 0.0;
    double last_click_ = -1.0;
    bool pending_ = false;
    Cause pending_cause_ = Cause::Photon;
    std::priority_queue<double, std::vector<double>, std::greater<>> heap_;
};

// Sorted click times -> strictly increasing ticks, nudging collisions forward.
void to_ticks(std::vector<double> &times, double tick, std::uint64_t limit, std::uint32_t cycle, TimeTagStream &out,
              SimTallies &t) {
    std::sort(times.begin(), times.end());
    bool have_prev = false;
    std::uint64_t prev = 0;
    for (double x : times) {
        auto k = std::uint64_t(std::floor(x / tick));
        if (have_prev && k <= prev) {
            k = prev + 1;
            ++t.nudged_ticks;
        }
        if (k >= limit) {
            ++t.clicks_beyond_end;
            continue;
        }
        out.push(cycle, k);
        prev = k;
        have_prev = true;
    }
}

class GammaSampler {
   public:
    explicit GammaSampler(const PhotonProfile &g) : bw_(g.bin_width()) {
        const std::vector<double> m = g.masses();
        cdf_.resize(m.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) cdf_[i] = (acc += m[i]);
        cdf_.back() = 1.0;
    }
    double operator()(double u_bin, double u_jitter) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u_bin);
        const std::size_t i = std::min<std::size_t>(std::size_t(it - cdf_.begin()), cdf_.size() - 1);
        return (double(i) + u_jitter) * bw_;
    }

   private:
    std::vector<double> cdf_;
    double bw_;
};

std::uint64_t draw_count(const PhotonSource &src, const std::vector<double> &cdf, std::uint64_t cycle,
                         std::uint64_t cycles, CounterRng &rng) {
    switch (src.kind) {
        case PhotonSource::Kind::Poisson:
            return rng.poisson(src.nbar);
        case PhotonSource::Kind::DriftingPoisson: {
            const double f = cycles > 1 ? double(cycle) / double(cycles - 1) : 0.0;
            return rng.poisson(src.nbar + (src.nbar_end - src.nbar) * f);
        }
        case PhotonSource::Kind::Distribution: {
            const double u = rng.uniform();
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            return std::min<std::uint64_t>(std::uint64_t(it - cdf.begin()), cdf.size() - 1);
        }
    }
    return 0;
}

}  // namespace

SimTallies &SimTallies::operator+=(const SimTallies &o) {
    photons += o.photons;
    efficiency_losses += o.efficiency_losses;
    photon_armed += o.photon_armed;
    photon_twilight += o.photon_twilight;
    photon_recovery_losses += o.photon_recovery_losses;
    background_events += o.background_events;
    background_armed += o.background_armed;
    background_twilight += o.background_twilight;
    background_recovery_losses += o.background_recovery_losses;
    afterpulse_events += o.afterpulse_events;
    afterpulse_armed += o.afterpulse_armed;
    afterpulse_twilight += o.afterpulse_twilight;
    afterpulse_recovery_losses += o.afterpulse_recovery_losses;
    afterpulses_beyond_end += o.afterpulses_beyond_end;
    armed_clicks += o.armed_clicks;
    twilight_clicks += o.twilight_clicks;
    afterpulse_clicks += o.afterpulse_clicks;
    clicks_beyond_end += o.clicks_beyond_end;
    nudged_ticks += o.nudged_ticks;
    return *this;
}

bool SimTallies::reconciles(std::uint64_t stored) const {
    const bool photons_ok = photons == efficiency_losses + photon_armed + photon_twilight + photon_recovery_losses;
    const bool background_ok =
        background_events == background_armed + background_twilight + background_recovery_losses;
    const bool afterpulse_ok = afterpulse_events == afterpulse_armed + afterpulse_twilight +
                                                        afterpulse_recovery_losses;
    const bool armed_ok = armed_clicks == photon_armed + background_armed;
    const bool twilight_ok = twilight_clicks == photon_twilight + background_twilight + afterpulse_twilight;
    const bool clicks_ok = armed_clicks + twilight_clicks + afterpulse_clicks == stored + clicks_beyond_end;
    return photons_ok && background_ok && afterpulse_ok && armed_ok && twilight_ok && clicks_ok;
}

void SimConfig::validate() const {
    if (cycles < 1) throw Error(ErrorCode::InvalidArgument, "cycles must be >= 1");
    if (!(detector.eta0.value >= 0.0 && detector.eta0.value <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eta0 outside [0,1]");
    if (!(detector.r_b.value >= 0.0)) throw Error(ErrorCode::InvalidArgument, "r_b must be >= 0");
    if (!(detector.ap_total.value >= 0.0 && detector.ap_total.value < 1.0)) throw Error(ErrorCode::InvalidArgument, "ap_total outside [0,1)");
    if (!(loss.t_dead >= 0.0 && loss.t_rec >= loss.t_dead)) throw Error(ErrorCode::InvalidArgument, "need 0 <= t_dead <= t_rec");
    if (!(detector.ap_profile.bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "afterpulse bin width must be > 0");
    if (ap_inflation < 0.0) throw Error(ErrorCode::InvalidArgument, "ap_inflation must be >= 0");
}

AfterpulseSampler::AfterpulseSampler(const AfterpulseProfile &p) : bin_width_(p.bin_width) {
    double acc = 0.0;
    std::vector<double> c(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) c[i] = (acc += std::max(0.0, p.values[i]));
    if (acc > 0.0) {
        for (double &v : c) v /= acc;
        c.back() = 1.0;
        cdf_ = std::move(c);
    }
}

double AfterpulseSampler::operator()(double u_bin, double u_jitter) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u_bin);
    const std::size_t i = std::min<std::size_t>(std::size_t(it - cdf_.begin()), cdf_.size() - 1);
    return (double(i) + u_jitter) * bin_width_;
}

namespace {

// Shared per-cycle generator for the pulsed entry points.
class PulsedRunner {
   public:
    explicit PulsedRunner(const SimConfig &cfg) : cfg_(cfg), gamma_(cfg.gamma), ap_(cfg.detector.ap_profile) {
        cfg.validate();
        if (cfg.gamma.bins() == 0) throw Error(ErrorCode::InvalidArgument, "pulsed simulation needs a photon profile");
        const double cycle_len = cfg.cycle_duration > 0.0 ? cfg.cycle_duration : cfg.gamma_offset + cfg.gamma.window();
        cycle_ticks_ = std::uint64_t(std::ceil(cycle_len / kDefaultTick));
        end_ = double(cycle_ticks_) * kDefaultTick;
        if (cfg.source.kind == PhotonSource::Kind::Distribution) {
            const auto &p = cfg.source.distribution.probs();
            double acc = 0.0;
            for (Index n = 0; n < p.size(); ++n) source_cdf_.push_back(acc += p(n));
            source_cdf_.back() = 1.0;
        }
        bg_mean_ = cfg.detector.r_b.value * end_;
    }

    std::uint64_t cycle_ticks() const { return cycle_ticks_; }

    /// Appends cycle c's clicks to out.
    void run(std::uint64_t c, TimeTagStream &out, SimTallies &t) {
        CounterRng rng(cfg_.seed, stream_id(kCycleDomain, c));
        events_.clear();
        clicks_.clear();
        const double eta = cfg_.detector.eta0.value;
        const std::uint64_t n = draw_count(cfg_.source, source_cdf_, c, cfg_.cycles, rng);
        t.photons += n;
        for (std::uint64_t k = 0; k < n; ++k) {
            const double u1 = rng.uniform(), u2 = rng.uniform();
            const double time = cfg_.gamma_offset + gamma_(u1, u2);
            if (eta < 1.0 && rng.uniform() >= eta) {
                ++t.efficiency_losses;
                continue;
            }
            events_.emplace_back(time, Cause::Photon);
        }
        const std::uint64_t nb = bg_mean_ > 0.0 ? rng.poisson(bg_mean_) : 0;
        t.background_events += nb;
        for (std::uint64_t k = 0; k < nb; ++k) events_.emplace_back(rng.uniform() * end_, Cause::Background);
        std::sort(events_.begin(), events_.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
        DetectorMachine machine(cfg_, ap_, rng, end_, clicks_, t);
        for (const auto &[time, cause] : events_) machine.feed(time, cause);
        machine.finish();
        to_ticks(clicks_, kDefaultTick, cycle_ticks_, std::uint32_t(c), out, t);
    }

   private:
    const SimConfig &cfg_;
    GammaSampler gamma_;
    AfterpulseSampler ap_;
    std::vector<double> source_cdf_;
    std::uint64_t cycle_ticks_ = 0;
    double end_ = 0.0;
    double bg_mean_ = 0.0;
    std::vector<std::pair<double, Cause>> events_;
    std::vector<double> clicks_;
};

// Fixed-size blocks of cycles so the merge order never depends on the worker count.
constexpr std::uint64_t kBlock = 4096;

}  // namespace

SimResult simulate(const SimConfig &cfg) {
    const PulsedRunner proto(cfg);
    const std::uint64_t n_blocks = (cfg.cycles + kBlock - 1) / kBlock;
    std::vector<TimeTagStream> parts(n_blocks);
    std::vector<SimTallies> tallies(n_blocks);
    parallel_chunks(std::size_t(n_blocks), [&](std::size_t b0, std::size_t b1, unsigned) {
        PulsedRunner runner(cfg);
        for (std::size_t b = b0; b < b1; ++b) {
            const std::uint64_t c_end = std::min<std::uint64_t>(cfg.cycles, (b + 1) * kBlock);
            for (std::uint64_t c = b * kBlock; c < c_end; ++c) runner.run(c, parts[b], tallies[b]);
        }
    });

    SimResult res;
    res.stream.tick_duration = kDefaultTick;
    res.stream.cycle_length = proto.cycle_ticks();
    res.stream.n_cycles = cfg.cycles;
    std::size_t total = 0;
    for (const auto &p : parts) total += p.ticks.size();
    res.stream.cycle_of.reserve(total);
    res.stream.ticks.reserve(total);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        res.stream.cycle_of.insert(res.stream.cycle_of.end(), parts[b].cycle_of.begin(), parts[b].cycle_of.end());
        res.stream.ticks.insert(res.stream.ticks.end(), parts[b].ticks.begin(), parts[b].ticks.end());
        res.tallies += tallies[b];
    }
    return res;
}

ClickCountResult simulate_click_counts(const SimConfig &cfg, const CycleWindow &window, Index n_max) {
    window.validate();
    if (n_max < 0) throw Error(ErrorCode::InvalidArgument, "n_max must be >= 0");
    const std::uint64_t n_blocks = (cfg.cycles + kBlock - 1) / kBlock;
    std::vector<std::vector<std::uint64_t>> counts(n_blocks);
    std::vector<std::uint64_t> stored(n_blocks, 0);
    std::vector<SimTallies> tallies(n_blocks);
    parallel_chunks(std::size_t(n_blocks), [&](std::size_t b0, std::size_t b1, unsigned) {
        PulsedRunner runner(cfg);
        TimeTagStream scratch;
        for (std::size_t b = b0; b < b1; ++b) {
            counts[b].assign(std::size_t(n_max + 1), 0);
            const std::uint64_t c_end = std::min<std::uint64_t>(cfg.cycles, (b + 1) * kBlock);
            for (std::uint64_t c = b * kBlock; c < c_end; ++c) {
                scratch.ticks.clear();
                scratch.cycle_of.clear();
                runner.run(c, scratch, tallies[b]);
                stored[b] += scratch.ticks.size();
                Index k = 0;
                for (std::uint64_t tk : scratch.ticks) {
                    const double t = double(tk) * kDefaultTick;
                    if (t >= window.t_start && t < window.t_end) ++k;
                }
                ++counts[b][std::size_t(std::min(k, n_max))];
            }
        }
    });
    ClickCountResult res;
    res.counts.assign(std::size_t(n_max + 1), 0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (std::size_t k = 0; k < res.counts.size(); ++k) res.counts[k] += counts[b][k];
        res.stored_clicks += stored[b];
        res.tallies += tallies[b];
    }
    Vector<double> p(n_max + 1);
    for (Index k = 0; k <= n_max; ++k) p(k) = double(res.counts[std::size_t(k)]) / double(cfg.cycles);
    res.distribution = normalize(p);
    return res;
}

SimResult simulate_cw(const SimConfig &cfg, double rate, double duration) {
    cfg.validate();
    if (!(rate >= 0.0) || !(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "cw needs rate >= 0, duration > 0");
    const double tick = kDefaultTick;
    const auto ticks_total = std::uint64_t(std::ceil(duration / tick));
    const double end = double(ticks_total) * tick;
    const double r_b = cfg.detector.r_b.value;
    const double total_rate = rate + r_b;
    if (!(total_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "cw needs a positive event rate");
    const AfterpulseSampler ap(cfg.detector.ap_profile);
    CounterRng rng(cfg.seed, stream_id(kCwDomain, 0));
    SimResult res;
    std::vector<double> clicks;
    clicks.reserve(std::size_t(std::min(1e8, total_rate * end * 1.1 + 16)));
    {
        DetectorMachine machine(cfg, ap, rng, end, clicks, res.tallies);
        const double p_bg = r_b / total_rate;
        double t = 0.0;
        for (;;) {
            t += rng.exponential() / total_rate;
            if (t >= end) break;
            const bool bg = p_bg > 0.0 && rng.uniform() < p_bg;
            if (bg) {
                ++res.tallies.background_events;
            } else {
                ++res.tallies.photons;
            }
            machine.feed(t, bg ? Cause::Background : Cause::Photon);
        }
        machine.finish();
    }
    res.stream.tick_duration = tick;
    res.stream.cycle_length = ticks_total;
    res.stream.n_cycles = 1;
    to_ticks(clicks, tick, ticks_total, 0, res.stream, res.tallies);
    return res;
}

AfterpulseProfile hyperexponential_profile(double total, double t_rec, double bin_width, double length) {
    if (!(total >= 0.0) || !(bin_width > 0.0) || !(length > t_rec)) {
        throw Error(ErrorCode::InvalidArgument, "hyperexponential_profile arguments");
    }
    const double taus[3] = {4e-9, 300e-9, 6e-6};
    auto F = [&](double t, double tau) { return t <= t_rec ? 0.0 : 1.0 - std::exp(-(t - t_rec) / tau); };
    // Weights pinned by the two cumulative fractions; the third closes the sum.
    const double a11 = F(200e-9, taus[0]) - F(200e-9, taus[2]), a12 = F(200e-9, taus[1]) - F(200e-9, taus[2]);
    const double a21 = F(2e-6, taus[0]) - F(2e-6, taus[2]), a22 = F(2e-6, taus[1]) - F(2e-6, taus[2]);
    const double b1 = 0.873 - F(200e-9, taus[2]), b2 = 0.948 - F(2e-6, taus[2]);
    const double det = a11 * a22 - a12 * a21;
    const double w[3] = {(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det, 0.0};
    const double w3 = 1.0 - w[0] - w[1];
    auto cdf = [&](double t) { return w[0] * F(t, taus[0]) + w[1] * F(t, taus[1]) + w3 * F(t, taus[2]); };
    AfterpulseProfile p;
    p.bin_width = bin_width;
    const auto bins = std::size_t(std::ceil(length / bin_width));
    p.values.resize(bins);
    double acc = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        p.values[i] = cdf(double(i + 1) * bin_width) - cdf(double(i) * bin_width);
        acc += p.values[i];
    }
    for (double &v : p.values) v *= total / acc;
    return p;
}

}  // namespace spadrecon
