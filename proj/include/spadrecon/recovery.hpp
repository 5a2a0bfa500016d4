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

#ifndef SPADRECON_RECOVERY_HPP
#define SPADRECON_RECOVERY_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spadrecon/core.hpp"

namespace spadrecon {

/// What happened to one photon: lost in recovery, delayed to a twilight click, or clicked armed.
enum class EventSymbol : std::uint8_t { Lost, Twilight, Armed };

/// A photon event: consecutive photons grouped by the recovery period they fall in.
///
/// Text form uses `*` for armed, `#` for twilight and `o` for lost, with one
/// bracket pair per group, e.g. `[*#][o#][#]`.
struct EventString {
    std::vector<std::vector<EventSymbol>> groups;

    Index photon_count() const;
    std::string to_string() const;
    static EventString parse(std::string_view text);

    friend bool operator==(const EventString &, const EventString &) = default;
    friend bool operator<(const EventString &a, const EventString &b) { return a.to_string() < b.to_string(); }
};

/// Expands one symbol string (first symbol armed) into its disambiguated events.
std::vector<EventString> expand_symbol_string(const std::vector<EventSymbol> &symbols);

/// All events of n_photons photons with at most o_R non-armed photons, sorted by text form.
std::vector<EventString> enumerate_events(Index n_photons, Index o_R);

/// Registered clicks of an event: groups, plus the two twilight caveats.
Index click_count(const EventString &event);

/// True when the event is one that enumerate_events can produce.
bool is_enumerable(const EventString &event);

/// Ordered-time normalization N_m for m = 0..m_max on gamma's grid (N_0 = 1).
std::vector<double> ordered_normalization(const PhotonProfile &gamma, Index m_max);

/// Probability of one event for photons drawn from gamma over a window of length T.
double event_probability(const EventString &event, const PhotonProfile &gamma, const LossProfileModel &loss,
                         double T);

struct RecoveryMatrix {
    Matrix<double> matrix;
    Index order = 0;
    double window = 0.0;
    LossProfileModel loss;
    std::uint64_t gamma_hash = 0;
    /// Column sums before the truncation fix.
    Vector<double> raw_column_sums;
};

/// Recovery-effects matrix R with rows = clicks, columns = photons.
RecoveryMatrix build_recovery_matrix(const PhotonProfile &gamma, const LossProfileModel &loss, double T, Index n_max,
                                     Index o_R);

}  // namespace spadrecon

#endif  // SPADRECON_RECOVERY_HPP
