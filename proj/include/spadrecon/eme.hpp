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

#ifndef SPADRECON_EME_HPP
#define SPADRECON_EME_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "spadrecon/core.hpp"
#include "spadrecon/numerics.hpp"

namespace spadrecon {

/// Form of the entropy correction added to the EM step.
enum class EntropyTerm {
    /// -alpha (ln P_n - S) P_n; keeps the sum fixed.
    Weighted,
    /// -alpha (ln P_n - S), unweighted.
    Unweighted,
};

struct EmeConfig {
    double alpha = 1e-3;
    double epsilon = 1e-12;
    long max_iter = 1'000'000;
    EntropyTerm entropy = EntropyTerm::Weighted;

    void validate() const {
        if (!(alpha >= 0.0) || !(epsilon > 0.0) || max_iter < 1) {
            throw Error(ErrorCode::InvalidArgument, "EmeConfig needs alpha >= 0, epsilon > 0, max_iter >= 1");
        }
    }
};

template <typename Scalar>
Scalar total_variation_distance(const BasicNumberDistribution<Scalar> &a, const BasicNumberDistribution<Scalar> &b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "distributions differ in length");
    return Scalar(0.5) * (a.probs() - b.probs()).cwiseAbs().sum();
}

/// <n(n-1)> / <n>^2.
template <typename Scalar>
Scalar g2_reconstructed(const BasicNumberDistribution<Scalar> &d) {
    Scalar m1(0), m2(0);
    for (Index n = 0; n < d.size(); ++n) {
        m1 += Scalar(n) * d[n];
        m2 += Scalar(n) * Scalar(n - 1) * d[n];
    }
    if (!(m1 > Scalar(0))) throw Error(ErrorCode::ZeroMean, "g2 of a distribution with zero mean");
    return m2 / (m1 * m1);
}

enum class PoissonFitObjective { LeastSquares, MaximumLikelihood };

struct PoissonFit {
    double nbar = 0.0;
    double tvd = 0.0;
};

/// Fits a truncated Poissonian; bracket is centered on the distribution mean.
template <typename Scalar>
PoissonFit fit_poissonian(const BasicNumberDistribution<Scalar> &d,
                          PoissonFitObjective objective = PoissonFitObjective::LeastSquares) {
    const Vector<double> p = d.probs().template cast<double>();
    const Index n_max = d.n_max();
    const double mean = double(d.mean());
    auto objective_fn = [&](double nbar) {
        const Vector<double> q = poisson_pmf_vector<double>(std::max(nbar, 0.0), n_max).probs();
        if (objective == PoissonFitObjective::LeastSquares) return (p - q).squaredNorm();
        double nll = 0.0;
        for (Index n = 0; n <= n_max; ++n) {
            if (p(n) > 0.0) nll -= p(n) * std::log(std::max(q(n), 1e-300));
        }
        return nll;
    };
    const double span = 4.0 * std::sqrt(mean + 1.0) + 0.5 * mean;
    double lo = std::max(0.0, mean - span), hi = mean + span;
    ScalarMinimum best = brent_minimize(objective_fn, lo, hi, 1e-12);
    // Widen once if the minimum sits on a bracket edge.
    if (best.x >= hi * (1.0 - 1e-9) || (lo > 0.0 && best.x <= lo * (1.0 + 1e-9))) {
        lo = 0.0;
        hi = 2.0 * hi + double(n_max);
        best = brent_minimize(objective_fn, lo, hi, 1e-12);
    }
    PoissonFit fit;
    fit.nbar = best.x;
    const Vector<double> q = poisson_pmf_vector<double>(best.x, n_max).probs();
    fit.tvd = 0.5 * (p - q).cwiseAbs().sum();
    return fit;
}

template <typename Scalar>
struct BasicReconstructionResult {
    BasicNumberDistribution<Scalar> distribution;
    long iterations = 0;
    bool converged = false;
    /// Some click number with C_m > 0 had zero predicted probability; its term was skipped.
    bool singular_denominator = false;
    double g2_recon = std::numeric_limits<double>::quiet_NaN();
    double fitted_nbar = 0.0;
    double tvd_to_fit = 0.0;
    std::optional<double> delta_nbar;
};

using ReconstructionResult = BasicReconstructionResult<double>;

/// Called after every iteration with the iteration index (1-based) and the new estimate.
template <typename Scalar>
using EmeObserver = std::function<void(long, const Vector<Scalar> &)>;

template <typename Scalar>
Scalar log_likelihood(const Vector<Scalar> &C, const Matrix<Scalar> &D, const Vector<Scalar> &P) {
    using std::log;
    const Vector<Scalar> DP = D * P;
    Scalar ll(0);
    for (Index m = 0; m < C.size(); ++m) {
        if (C(m) > Scalar(0)) ll += C(m) * log(DP(m));
    }
    return ll;
}

/// EME iteration from the uniform start. Metrics are filled in on return.
template <typename Scalar>
BasicReconstructionResult<Scalar> eme_reconstruct(const BasicNumberDistribution<Scalar> &C, const Matrix<Scalar> &D,
                                                  const EmeConfig &cfg, std::optional<double> nbar_exp = std::nullopt,
                                                  const EmeObserver<Scalar> &observer = {}) {
    using std::log;
    using std::sqrt;
    cfg.validate();
    const Index N = D.cols();
    if (D.rows() != C.size()) throw Error(ErrorCode::DimensionMismatch, "click distribution and matrix rows differ");
    const Scalar alpha(cfg.alpha);
    const Scalar floor(1e-300);
    const Vector<Scalar> &c = C.probs();

    BasicReconstructionResult<Scalar> res;
    Vector<Scalar> P = Vector<Scalar>::Constant(N, Scalar(1) / Scalar(N));
    Vector<Scalar> next(N), ratio(D.rows()), logp(N);
    long it = 0;
    while (it < cfg.max_iter) {
        const Vector<Scalar> DP = D * P;
        for (Index m = 0; m < ratio.size(); ++m) {
            if (c(m) > Scalar(0) && !(DP(m) > Scalar(0))) {
                ratio(m) = Scalar(0);
                res.singular_denominator = true;
            } else {
                ratio(m) = c(m) > Scalar(0) ? c(m) / DP(m) : Scalar(0);
            }
        }
        next = P.cwiseProduct(D.transpose() * ratio);
        if (alpha != Scalar(0)) {
            Scalar S(0);
            for (Index n = 0; n < N; ++n) {
                logp(n) = log(std::max(P(n), floor));
                S += P(n) * logp(n);
            }
            for (Index n = 0; n < N; ++n) {
                const Scalar term = logp(n) - S;
                next(n) -= alpha * (cfg.entropy == EntropyTerm::Weighted ? term * P(n) : term);
            }
        }
        next = next.cwiseMax(Scalar(0));
        const Scalar total = next.sum();
        if (!(total > Scalar(0))) throw Error(ErrorCode::AllZero, "EME step produced an all-zero estimate");
        next /= total;
        ++it;
        const Scalar step = sqrt((next - P).squaredNorm());
        P.swap(next);
        if (observer) observer(it, P);
        if (double(step) < cfg.epsilon) {
            res.converged = true;
            break;
        }
    }
    res.iterations = it;
    res.distribution = BasicNumberDistribution<Scalar>::from_normalized(P, Scalar(1e-9));
    if (res.distribution.mean() > Scalar(0)) res.g2_recon = double(g2_reconstructed(res.distribution));
    const PoissonFit fit = fit_poissonian(res.distribution);
    res.fitted_nbar = fit.nbar;
    res.tvd_to_fit = fit.tvd;
    if (nbar_exp) res.delta_nbar = (*nbar_exp - fit.nbar) / *nbar_exp;
    return res;
}

struct CalibrationInputs {
    Measured V_meas;      ///< V
    Measured T_ND;        ///< filter transmittance
    Measured f_s;         ///< shape factor
    Measured eta_trap;    ///< trap detector efficiency
    Measured R_resp{1.0, 0.0};  ///< A/W
    Measured G{1.0, 0.0};       ///< V/A
    double lambda = 780e-9;     ///< m
};

/// Expected mean photon number per pulse from the power calibration.
Measured expected_nbar(const CalibrationInputs &cal);

}  // namespace spadrecon

#endif  // SPADRECON_EME_HPP
