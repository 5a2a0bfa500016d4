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

#ifndef SPADRECON_UNCERTAINTY_HPP
#define SPADRECON_UNCERTAINTY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spadrecon/core.hpp"
#include "spadrecon/detmat.hpp"
#include "spadrecon/eme.hpp"

namespace spadrecon {

/// Which noise sources a Monte Carlo run keeps.
enum class UncertaintySource { Sampling, Efficiency, Background, Afterpulse, Full };

const char *uncertainty_source_name(UncertaintySource s);

struct SourceSpread {
    UncertaintySource source = UncertaintySource::Full;
    Vector<double> sigma;     ///< per-component standard deviation
    Vector<double> mean;
    double g2_sigma = 0.0;
    double nbar_fit_sigma = 0.0;
    int used = 0;
    int dropped = 0;
};

struct UncertaintyReport {
    SourceSpread sampling;
    SourceSpread full;
    /// Efficiency (L), background (B) and afterpulse (A) alone, in that order. Empty if disabled.
    std::vector<SourceSpread> breakdown;
    int mc_samples = 0;
    std::uint64_t seed = 0;
    double drop_limit = 0.1;
};

struct UncertaintyOptions {
    int mc_samples = 1000;
    std::uint64_t seed = 1;
    /// Fraction of dropped samples above which a run fails.
    double drop_limit = 0.1;
    bool breakdown = true;
};

/// Monte Carlo spread of the reconstruction. R is held fixed across samples; L, B and A are
/// rebuilt from Gaussian draws of eta0, r_b and ap_total. Sampling noise is Poisson on each
/// component of C * counts_total.
UncertaintyReport propagate(const NumberDistribution &C, double counts_total, const DetectorParams &params,
                            const PhotonProfile &gamma, const DetectorModelOptions &model, const EmeConfig &cfg,
                            const UncertaintyOptions &opt = {});

/// Same, with a prebuilt recovery matrix.
UncertaintyReport propagate(const NumberDistribution &C, double counts_total, const DetectorParams &params,
                            const PhotonProfile &gamma, const Matrix<double> &R, Index o_a, const EmeConfig &cfg,
                            const UncertaintyOptions &opt = {});

/// One run with the chosen source only (Full keeps everything).
SourceSpread propagate_source(UncertaintySource source, const NumberDistribution &C, double counts_total,
                              const DetectorParams &params, const PhotonProfile &gamma, const Matrix<double> &R,
                              Index o_a, const EmeConfig &cfg, const UncertaintyOptions &opt);

}  // namespace spadrecon

#endif  // SPADRECON_UNCERTAINTY_HPP
