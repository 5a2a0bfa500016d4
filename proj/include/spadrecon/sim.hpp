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

#ifndef SPADRECON_SIM_HPP
#define SPADRECON_SIM_HPP

#include <cstdint>
#include <vector>

#include "spadrecon/core.hpp"
#include "spadrecon/tags.hpp"

namespace spadrecon {

/// FAITHFUL follows the matrix model's independence assumptions; PHYSICAL routes afterpulses
/// through the detector state.
enum class SimMode { Faithful, Physical };

struct PhotonSource {
    enum class Kind { Distribution, Poisson, DriftingPoisson };

    Kind kind = Kind::Poisson;
    NumberDistribution distribution;  ///< Distribution (Fock mixtures included)
    double nbar = 0.0;                ///< Poisson; DriftingPoisson value at the first cycle
    double nbar_end = 0.0;            ///< DriftingPoisson value at the last cycle

    static PhotonSource poisson(double nbar) { return {Kind::Poisson, {}, nbar, nbar}; }
    static PhotonSource from(NumberDistribution d) { return {Kind::Distribution, std::move(d), 0.0, 0.0}; }
    /// Fock mixture with weights w_n over n = 0..w.size()-1.
    static PhotonSource fock_mixture(const Vector<double> &weights) { return from(normalize(weights)); }
    /// Poisson mean ramps linearly from nbar to nbar_end across the cycles.
    static PhotonSource drifting(double nbar, double nbar_end) { return {Kind::DriftingPoisson, {}, nbar, nbar_end}; }
};

struct SimConfig {
    DetectorParams detector;
    LossProfileModel loss;
    PhotonProfile gamma;
    /// Start of gamma inside the cycle (s).
    double gamma_offset = 0.0;
    /// Cycle duration (s); 0 means gamma_offset + gamma window.
    double cycle_duration = 0.0;
    PhotonSource source;
    std::uint64_t cycles = 1;
    SimMode mode = SimMode::Faithful;
    std::uint64_t seed = 1;
    /// PHYSICAL only: afterpulse probability becomes p (1 + k t_rec / dt), dt the gap to the
    /// previous click (at least t_rec). 0 disables.
    double ap_inflation = 0.0;

    void validate() const;
};

struct SimTallies {
    std::uint64_t photons = 0;            ///< incident photons (cw: detected-rate events)
    std::uint64_t efficiency_losses = 0;
    std::uint64_t photon_armed = 0;        ///< photons that clicked armed
    std::uint64_t photon_twilight = 0;     ///< photons that started a twilight click
    std::uint64_t photon_recovery_losses = 0;  ///< lost in recovery, or merged into a pending twilight
    std::uint64_t background_events = 0;
    std::uint64_t background_armed = 0;
    std::uint64_t background_twilight = 0;
    std::uint64_t background_recovery_losses = 0;
    std::uint64_t afterpulse_events = 0;   ///< PHYSICAL: afterpulses generated inside the record
    std::uint64_t afterpulse_armed = 0;    ///< PHYSICAL: afterpulses that clicked armed
    std::uint64_t afterpulse_twilight = 0;
    std::uint64_t afterpulse_recovery_losses = 0;
    std::uint64_t afterpulses_beyond_end = 0;  ///< PHYSICAL: generated past the record end, discarded

    std::uint64_t armed_clicks = 0;        ///< photon or background clicks while armed
    std::uint64_t twilight_clicks = 0;
    std::uint64_t afterpulse_clicks = 0;   ///< FAITHFUL: appended afterpulses; PHYSICAL: afterpulse_armed
    std::uint64_t clicks_beyond_end = 0;   ///< registered at or after the record end, not stored
    std::uint64_t nudged_ticks = 0;        ///< clicks moved to the next free tick

    SimTallies &operator+=(const SimTallies &o);
    /// Checks every conservation identity; returns false on any mismatch.
    bool reconciles(std::uint64_t stored_clicks) const;
};

struct SimResult {
    TimeTagStream stream;
    SimTallies tallies;
};

/// Pulsed simulation: one record per cycle.
SimResult simulate(const SimConfig &cfg);

struct ClickCountResult {
    NumberDistribution distribution;
    std::vector<std::uint64_t> counts;  ///< cycles with k clicks in the window; top bin holds overflow
    std::uint64_t stored_clicks = 0;    ///< clicks that simulate() would have stored
    SimTallies tallies;
};

/// Same cycles as simulate(), but keeps only the per-cycle click counts inside the window.
ClickCountResult simulate_click_counts(const SimConfig &cfg, const CycleWindow &window, Index n_max);

/// Continuous simulation: homogeneous events at `rate` (already past the efficiency, so eta0 is
/// not applied) plus background at r_b, one record of `duration` seconds. gamma/source/cycles
/// are ignored.
SimResult simulate_cw(const SimConfig &cfg, double rate, double duration);

/// Positive-part inverse-CDF sampler for an afterpulse profile.
class AfterpulseSampler {
   public:
    explicit AfterpulseSampler(const AfterpulseProfile &profile);
    bool empty() const { return cdf_.empty(); }
    /// Delay drawn from the profile shape.
    double operator()(double u_bin, double u_jitter) const;

   private:
    std::vector<double> cdf_;
    double bin_width_ = 0.0;
};

/// Three-exponential afterpulse profile starting at t_rec with the given total probability.
/// The default shape holds 87.3 % of its mass within 200 ns and 94.8 % within 2 us.
AfterpulseProfile hyperexponential_profile(double total, double t_rec, double bin_width = kDefaultTick * kDefaultBinTicks,
                                           double length = 200e-6);

}  // namespace spadrecon

#endif  // SPADRECON_SIM_HPP
