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

#include "spadrecon/uncertainty.hpp"

#include <cmath>
#include <optional>

#include "spadrecon/random.hpp"
#include "spadrecon/recovery.hpp"

namespace spadrecon {

namespace {

constexpr std::uint32_t kUncertaintyDomain = 0x5543;

struct Sample {
    bool ok = false;
    Vector<double> p;
    double g2 = 0.0;
    double nbar = 0.0;
};

double stddev(const std::vector<double> &v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

const char *uncertainty_source_name(UncertaintySource s) {
    switch (s) {
        case UncertaintySource::Sampling: return "sampling";
        case UncertaintySource::Efficiency: return "efficiency";
        case UncertaintySource::Background: return "background";
        case UncertaintySource::Afterpulse: return "afterpulse";
        case UncertaintySource::Full: return "full";
    }
    return "?";
}

SourceSpread propagate_source(UncertaintySource source, const NumberDistribution &C, double counts_total,
                              const DetectorParams &params, const PhotonProfile &gamma, const Matrix<double> &R,
                              Index o_a, const EmeConfig &cfg, const UncertaintyOptions &opt) {
    if (opt.mc_samples < 2) throw Error(ErrorCode::InvalidArgument, "mc_samples must be >= 2");
    if (C.size() != R.cols()) throw Error(ErrorCode::DimensionMismatch, "click distribution and R sizes differ");
    if (!(counts_total > 0.0)) throw Error(ErrorCode::InvalidArgument, "counts_total must be > 0");
    cfg.validate();
    const bool sampling = source == UncertaintySource::Sampling || source == UncertaintySource::Full;
    const bool eff = source == UncertaintySource::Efficiency || source == UncertaintySource::Full;
    const bool bg = source == UncertaintySource::Background || source == UncertaintySource::Full;
    const bool ap = source == UncertaintySource::Afterpulse || source == UncertaintySource::Full;
    const std::uint64_t domain_index = std::uint64_t(source);

    std::vector<Sample> samples(std::size_t(opt.mc_samples));
    parallel_chunks(samples.size(), [&](std::size_t b, std::size_t e, unsigned) {
        for (std::size_t s = b; s < e; ++s) {
            CounterRng rng(opt.seed, stream_id(kUncertaintyDomain + std::uint32_t(domain_index), s));
            DetectorParams p = params;
            // Draw order is fixed so a source's draws do not depend on which others are on.
            const double z_eta = rng.normal(), z_b = rng.normal(), z_a = rng.normal();
            if (eff) p.eta0.value = std::clamp(params.eta0.value + params.eta0.sigma * z_eta, 1e-9, 1.0);
            if (bg) p.r_b.value = std::max(params.r_b.value + params.r_b.sigma * z_b, 0.0);
            if (ap) p.ap_total.value = std::clamp(params.ap_total.value + params.ap_total.sigma * z_a, 0.0, 1.0 - 1e-9);
            Vector<double> c = C.probs();
            if (sampling) {
                for (Index k = 0; k < c.size(); ++k) c(k) = double(rng.poisson(C[k] * counts_total));
            }
            Sample &out = samples[s];
            try {
                const DetectorMatrix D = build_detector_matrix(p, gamma, R, o_a);
                const ReconstructionResult r = eme_reconstruct(normalize(c), D.matrix, cfg);
                if (!r.converged) continue;
                out.p = r.distribution.probs();
                out.g2 = r.g2_recon;
                out.nbar = r.fitted_nbar;
                out.ok = true;
            } catch (const Error &) {
                out.ok = false;
            }
        }
    });

    SourceSpread res;
    res.source = source;
    const Index n = C.size();
    res.mean = Vector<double>::Zero(n);
    std::vector<double> g2, nbar;
    for (const auto &s : samples) {
        if (!s.ok) {
            ++res.dropped;
            continue;
        }
        ++res.used;
        res.mean += s.p;
        g2.push_back(s.g2);
        nbar.push_back(s.nbar);
    }
    if (double(res.dropped) > opt.drop_limit * double(samples.size()) || res.used < 2) {
        throw Error(ErrorCode::TooManyDroppedSamples, std::string(uncertainty_source_name(source)) + " run dropped " +
                                                          std::to_string(res.dropped) + " of " +
                                                          std::to_string(samples.size()) + " samples");
    }
    res.mean /= double(res.used);
    res.sigma = Vector<double>::Zero(n);
    for (const auto &s : samples)
        if (s.ok) res.sigma += (s.p - res.mean).cwiseAbs2();
    res.sigma = (res.sigma / double(res.used - 1)).cwiseSqrt();
    double g2m = 0.0, nm = 0.0;
    for (std::size_t i = 0; i < g2.size(); ++i) {
        g2m += g2[i];
        nm += nbar[i];
    }
    res.g2_sigma = stddev(g2, g2m / double(g2.size()));
    res.nbar_fit_sigma = stddev(nbar, nm / double(nbar.size()));
    return res;
}

UncertaintyReport propagate(const NumberDistribution &C, double counts_total, const DetectorParams &params,
                            const PhotonProfile &gamma, const Matrix<double> &R, Index o_a, const EmeConfig &cfg,
                            const UncertaintyOptions &opt) {
    UncertaintyReport rep;
    rep.mc_samples = opt.mc_samples;
    rep.seed = opt.seed;
    rep.drop_limit = opt.drop_limit;
    rep.sampling = propagate_source(UncertaintySource::Sampling, C, counts_total, params, gamma, R, o_a, cfg, opt);
    rep.full = propagate_source(UncertaintySource::Full, C, counts_total, params, gamma, R, o_a, cfg, opt);
    if (opt.breakdown) {
        for (auto s : {UncertaintySource::Efficiency, UncertaintySource::Background, UncertaintySource::Afterpulse})
            rep.breakdown.push_back(propagate_source(s, C, counts_total, params, gamma, R, o_a, cfg, opt));
    }
    return rep;
}

UncertaintyReport propagate(const NumberDistribution &C, double counts_total, const DetectorParams &params,
                            const PhotonProfile &gamma, const DetectorModelOptions &model, const EmeConfig &cfg,
                            const UncertaintyOptions &opt) {
    const RecoveryMatrix R =
        build_recovery_matrix(gamma, LossProfileModel::from(params), gamma.window(), model.n_max, model.o_R);
    return propagate(C, counts_total, params, gamma, R.matrix, model.o_a, cfg, opt);
}

}  // namespace spadrecon
