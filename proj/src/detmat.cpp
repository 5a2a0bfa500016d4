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

#include "spadrecon/detmat.hpp"

#include <map>

#include "spadrecon/eme.hpp"

namespace spadrecon {

double afterpulse_window_probability(const PhotonProfile &gamma, const AfterpulseProfile &ap, double T) {
    if (ap.values.empty()) return 0.0;
    if (!(ap.bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "afterpulse profile bin width must be > 0");
    const std::vector<double> g = gamma.masses();
    const double dt = gamma.bin_width();
    double p = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == 0.0) continue;
        const double t = (double(i) + 0.5) * dt;
        p += g[i] * ap.cumulative(std::max(0.0, T - t));
    }
    return p;
}

DetectorMatrix build_detector_matrix(const DetectorParams &params, const PhotonProfile &gamma, const Matrix<double> &R,
                                     Index o_a) {
    const double T = gamma.window();
    const Index n_max = R.rows() - 1;
    // The profile shape is fixed; ap_total sets its scale (Monte Carlo draws only move ap_total).
    double p_a = 0.0;
    const double shape_total = params.ap_profile.total();
    if (params.ap_total.value > 0.0 && shape_total != 0.0) {
        p_a = afterpulse_window_probability(gamma, params.ap_profile, T) * params.ap_total.value / shape_total;
    }
    return compose<double>(build_afterpulse_matrix(std::clamp(p_a, 0.0, 1.0 - 1e-12), n_max, o_a), R,
                           build_background_matrix(params.r_b.value * T, n_max),
                           build_loss_matrix(params.eta0.value, n_max));
}

DetectorMatrix build_detector_matrix(const DetectorParams &params, const PhotonProfile &gamma,
                                     const DetectorModelOptions &opt) {
    const RecoveryMatrix R =
        build_recovery_matrix(gamma, LossProfileModel::from(params), gamma.window(), opt.n_max, opt.o_R);
    return build_detector_matrix(params, gamma, R.matrix, opt.o_a);
}

Index choose_recovery_order(const NumberDistribution &C, const DetectorParams &params, const PhotonProfile &gamma,
                            Index n_max, const EmeConfig &cfg, Index max_order, double tol) {
    if (max_order < 1) throw Error(ErrorCode::InvalidArgument, "max_order must be >= 1");
    std::map<Index, double> cache;
    auto distance = [&](Index o) {
        auto it = cache.find(o);
        if (it != cache.end()) return it->second;
        const DetectorMatrix D = build_detector_matrix(params, gamma, DetectorModelOptions{n_max, o, kDefaultAfterpulseOrder});
        const double d = eme_reconstruct(C, D.matrix, cfg).tvd_to_fit;
        cache.emplace(o, d);
        return d;
    };
    for (Index o = 1; o <= max_order; ++o) {
        const Index doubled = std::min(2 * o, std::max(n_max, Index(1)));
        if (std::abs(distance(doubled) - distance(o)) < tol) return o;
    }
    return max_order;
}

}  // namespace spadrecon
