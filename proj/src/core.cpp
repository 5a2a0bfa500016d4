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

#include "spadrecon/core.hpp"

#include <algorithm>
#include <cstring>
#include <atomic>
#include <numeric>
#include <thread>

namespace spadrecon {

const char *error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return "InvalidArgument";
        case ErrorCode::AllZero:
            return "AllZero";
        case ErrorCode::DimensionMismatch:
            return "DimensionMismatch";
        case ErrorCode::NumericalUnderflow:
            return "NumericalUnderflow";
        case ErrorCode::ZeroMean:
            return "ZeroMean";
        case ErrorCode::ParseError:
            return "ParseError";
        case ErrorCode::NonMonotonicTags:
            return "NonMonotonicTags";
        case ErrorCode::NoSingleClickCycles:
            return "NoSingleClickCycles";
        case ErrorCode::InsufficientData:
            return "InsufficientData";
        case ErrorCode::FitDiverged:
            return "FitDiverged";
        case ErrorCode::ZeroDenominator:
            return "ZeroDenominator";
        case ErrorCode::TooManyDroppedSamples:
            return "TooManyDroppedSamples";
        case ErrorCode::Io:
            return "Io";
    }
    return "Unknown";
}

double poisson_pmf(double nbar, Index n) {
    if (n < 0) return 0.0;
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(double(n) * std::log(nbar) - nbar - std::lgamma(double(n) + 1.0));
}

Index default_n_max(double nbar) {
    if (nbar < 0.0) throw Error(ErrorCode::InvalidArgument, "nbar must be >= 0");
    double cdf = 0.0;
    Index n = 0;
    for (;; ++n) {
        cdf += poisson_pmf(nbar, n);
        if (1.0 - cdf < 1e-6) break;
        if (n > 100000) break;
    }
    return std::max<Index>(n, 10);
}

double AfterpulseProfile::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double AfterpulseProfile::cumulative(double tau) const {
    if (tau <= 0.0 || values.empty()) return 0.0;
    const double x = tau / bin_width;
    const auto full = std::size_t(std::min<double>(std::floor(x), double(values.size())));
    double acc = std::accumulate(values.begin(), values.begin() + std::ptrdiff_t(full), 0.0);
    if (full < values.size()) acc += (x - double(full)) * values[full];
    return acc;
}

void DetectorParams::validate(double tick) const {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidArgument, m); };
    if (!(eta0.value >= 0.0 && eta0.value <= 1.0)) fail("eta0 outside [0,1]");
    if (!(r_b.value >= 0.0)) fail("r_b < 0");
    if (!(ap_total.value >= 0.0 && ap_total.value < 1.0)) fail("ap_total outside [0,1)");
    if (t_dead.value < 0.0 || t_reset.value < 0.0 || t_rec.value < 0.0) fail("negative recovery timing");
    if (std::abs(t_rec.value - (t_dead.value + t_reset.value)) > tick) fail("t_rec != t_dead + t_reset");
    if (!ap_profile.values.empty() && std::abs(ap_profile.total() - ap_total.value) > 1e-6) {
        fail("ap_profile does not sum to ap_total");
    }
}

PhotonProfile::PhotonProfile(double bin_width, std::vector<double> values)
    : bin_width_(bin_width), values_(std::move(values)) {
    if (!(bin_width_ > 0.0) || values_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "photon profile needs bin_width > 0 and at least one bin");
    }
    for (double v : values_) {
        if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "photon profile values must be >= 0");
    }
}

std::vector<double> PhotonProfile::masses() const {
    const double total = std::accumulate(values_.begin(), values_.end(), 0.0);
    if (!(total > 0.0)) throw Error(ErrorCode::NumericalUnderflow, "photon profile is identically zero");
    std::vector<double> m(values_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = values_[i] / total;
    return m;
}

std::uint64_t PhotonProfile::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(bin_width_);
    for (double v : values_) mix(v);
    return h;
}

PhotonProfile PhotonProfile::flat(double window, Index bins) {
    if (bins < 1) throw Error(ErrorCode::InvalidArgument, "flat profile needs >= 1 bin");
    return PhotonProfile(window / double(bins), std::vector<double>(std::size_t(bins), 1.0 / window));
}

double LossProfileModel::operator()(double tau) const {
    if (tau < t_dead) return 1.0;
    if (tau >= t_rec) return 0.0;
    return (t_rec - tau) / (t_rec - t_dead);
}

LossGrid::LossGrid(const LossProfileModel &model, double bin_width) {
    if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin_width must be > 0");
    if (model.t_dead < 0.0 || model.t_rec < model.t_dead) {
        throw Error(ErrorCode::InvalidArgument, "loss profile needs 0 <= t_dead <= t_rec");
    }
    dead_bins = Index(std::llround(model.t_dead / bin_width));
    rec_bins = Index(std::llround(model.t_rec / bin_width));
    dead_bins = std::min(dead_bins, rec_bins);
}

double LossGrid::operator()(Index lag) const {
    if (lag < dead_bins) return 1.0;
    if (lag >= rec_bins) return 0.0;
    return double(rec_bins - lag) / double(rec_bins - dead_bins);
}

void CycleWindow::validate() const {
    if (!(t_end > t_start)) throw Error(ErrorCode::InvalidArgument, "window needs t_end > t_start");
    if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "window needs bin_width > 0");
}

Index CycleWindow::bins() const {
    validate();
    return std::max<Index>(1, Index(std::llround(duration() / bin_width)));
}

namespace {
std::atomic<unsigned> g_thread_limit{0};
}  // namespace

void set_thread_limit(unsigned threads) { g_thread_limit.store(threads); }

unsigned thread_limit() {
    const unsigned t = g_thread_limit.load();
    if (t > 0) return t;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, unsigned)> &body,
                     unsigned max_workers) {
    unsigned workers = thread_limit();
    if (max_workers > 0) workers = std::min(workers, max_workers);
    workers = unsigned(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        body(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t b = n * w / workers, e = n * (w + 1) / workers;
        pool.emplace_back([&, b, e, w] {
            try {
                body(b, e, w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace spadrecon
