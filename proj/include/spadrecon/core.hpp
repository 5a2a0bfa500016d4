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

#ifndef SPADRECON_CORE_HPP
#define SPADRECON_CORE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spadrecon {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Time-tagger resolution in seconds.
inline constexpr double kDefaultTick = 164.6e-12;
/// Analysis bin in ticks (about 1 ns).
inline constexpr int kDefaultBinTicks = 6;

enum class ErrorCode {
    InvalidArgument,
    AllZero,
    DimensionMismatch,
    NumericalUnderflow,
    ZeroMean,
    ParseError,
    NonMonotonicTags,
    NoSingleClickCycles,
    InsufficientData,
    FitDiverged,
    ZeroDenominator,
    TooManyDroppedSamples,
    Io,
};

const char *error_code_name(ErrorCode code);

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

/// Probability vector over n = 0..n_max.
template <typename Scalar>
class BasicNumberDistribution {
   public:
    BasicNumberDistribution() : probs_(Vector<Scalar>::Ones(1)) {}

    /// Wraps an already-normalized vector. Throws if the invariants do not hold.
    static BasicNumberDistribution from_normalized(Vector<Scalar> probs, Scalar tol = Scalar(1e-9)) {
        if (probs.size() == 0) {
            throw Error(ErrorCode::InvalidArgument, "empty distribution");
        }
        if ((probs.array() < Scalar(0)).any()) {
            throw Error(ErrorCode::InvalidArgument, "negative probability");
        }
        if (std::abs(probs.sum() - Scalar(1)) > tol) {
            throw Error(ErrorCode::InvalidArgument, "probabilities do not sum to 1");
        }
        BasicNumberDistribution d;
        d.probs_ = std::move(probs);
        return d;
    }

    const Vector<Scalar> &probs() const noexcept { return probs_; }
    Index n_max() const noexcept { return probs_.size() - 1; }
    Index size() const noexcept { return probs_.size(); }
    Scalar operator[](Index n) const { return probs_(n); }

    Scalar mean() const {
        Scalar m(0);
        for (Index n = 0; n < probs_.size(); ++n) m += Scalar(n) * probs_(n);
        return m;
    }

   private:
    Vector<Scalar> probs_;
};

using NumberDistribution = BasicNumberDistribution<double>;

/// Clamps negatives to zero and rescales to unit sum.
template <typename Derived>
BasicNumberDistribution<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived> &raw) {
    using Scalar = typename Derived::Scalar;
    Vector<Scalar> v = raw.derived().template cast<Scalar>().cwiseMax(Scalar(0));
    const Scalar total = v.sum();
    if (!(total > Scalar(0))) {
        throw Error(ErrorCode::AllZero, "every entry is <= 0");
    }
    v /= total;
    return BasicNumberDistribution<Scalar>::from_normalized(std::move(v), Scalar(1e-9));
}

/// Poisson pmf on 0..n_max, renormalized over the truncated basis.
template <typename Scalar = double>
BasicNumberDistribution<Scalar> poisson_pmf_vector(Scalar nbar, Index n_max) {
    using std::exp;
    using std::log;
    if (nbar < Scalar(0) || n_max < 0) {
        throw Error(ErrorCode::InvalidArgument, "poisson_pmf_vector needs nbar >= 0 and n_max >= 0");
    }
    Vector<Scalar> v(n_max + 1);
    if (nbar == Scalar(0)) {
        v.setZero();
        v(0) = Scalar(1);
        return BasicNumberDistribution<Scalar>::from_normalized(std::move(v));
    }
    const Scalar log_nbar = log(nbar);
    for (Index n = 0; n <= n_max; ++n) {
        v(n) = exp(Scalar(n) * log_nbar - nbar - Scalar(std::lgamma(double(n) + 1.0)));
    }
    v /= v.sum();
    return BasicNumberDistribution<Scalar>::from_normalized(std::move(v));
}

/// Untruncated Poisson pmf value.
double poisson_pmf(double nbar, Index n);

/// Smallest n with Poisson tail mass P(N > n) < 1e-6, never below 10.
Index default_n_max(double nbar);

/// A scalar with its one-sigma uncertainty.
struct Measured {
    double value = 0.0;
    double sigma = 0.0;
    friend bool operator==(const Measured &, const Measured &) = default;
};

/// Binned afterpulse density a(tau): probability per bin, bins start at tau = 0.
struct AfterpulseProfile {
    double bin_width = kDefaultTick * kDefaultBinTicks;
    std::vector<double> values;

    double total() const;
    /// Cumulative probability over [0, tau], linear inside bins.
    double cumulative(double tau) const;
};

struct DetectorParams {
    Measured eta0{1.0, 0.0};
    Measured r_b{0.0, 0.0};
    Measured ap_total{0.0, 0.0};
    AfterpulseProfile ap_profile;
    Measured t_dead{0.0, 0.0};
    Measured t_reset{0.0, 0.0};
    Measured t_rec{0.0, 0.0};

    /// Throws InvalidArgument if a documented invariant fails.
    void validate(double tick = kDefaultTick) const;
};

/// Binned temporal photon profile gamma(t) on [0, T).
class PhotonProfile {
   public:
    PhotonProfile() = default;
    PhotonProfile(double bin_width, std::vector<double> values);

    double bin_width() const noexcept { return bin_width_; }
    const std::vector<double> &values() const noexcept { return values_; }
    Index bins() const noexcept { return Index(values_.size()); }
    double window() const noexcept { return bin_width_ * double(values_.size()); }
    /// Per-bin masses summing to 1. Throws NumericalUnderflow when gamma is identically zero.
    std::vector<double> masses() const;
    std::uint64_t hash() const;

    static PhotonProfile flat(double window, Index bins);

   private:
    double bin_width_ = 0.0;
    std::vector<double> values_;
};

/// Loss profile D(tau): 1 before t_dead, linear ramp to 0 at t_rec, 0 after.
struct LossProfileModel {
    double t_dead = 0.0;
    double t_rec = 0.0;

    double operator()(double tau) const;
    static LossProfileModel from(const DetectorParams &p) { return {p.t_dead.value, p.t_rec.value}; }
};

/// D(tau) with t_dead and t_rec rounded to whole bins, evaluated at integer bin lags.
struct LossGrid {
    Index dead_bins = 0;
    Index rec_bins = 0;

    LossGrid(const LossProfileModel &model, double bin_width);
    double operator()(Index lag) const;
};

struct CycleWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    double bin_width = kDefaultTick * kDefaultBinTicks;

    void validate() const;
    double duration() const { return t_end - t_start; }
    Index bins() const;
};

/// Worker cap shared by every parallel loop; 0 means hardware concurrency.
void set_thread_limit(unsigned threads);
unsigned thread_limit();

/// Runs body(begin, end, worker) over [0, n) split into at most thread_limit() contiguous chunks.
/// Chunk boundaries depend only on n and the worker count.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, unsigned)> &body,
                     unsigned max_workers = 0);

}  // namespace spadrecon

#endif  // SPADRECON_CORE_HPP
