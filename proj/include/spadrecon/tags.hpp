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

#ifndef SPADRECON_TAGS_HPP
#define SPADRECON_TAGS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spadrecon/core.hpp"

namespace spadrecon {

/// Click tags grouped by cycle. Clicks are stored flat, ordered by (cycle, tick).
///
/// A continuous record is a single cycle whose length is the record length.
struct TimeTagStream {
    double tick_duration = kDefaultTick;
    std::uint64_t cycle_length = 0;  ///< ticks
    std::uint64_t n_cycles = 0;
    std::vector<std::uint32_t> cycle_of;
    std::vector<std::uint64_t> ticks;

    std::size_t total_clicks() const { return ticks.size(); }
    /// Total recorded time in seconds.
    double collection_time() const { return double(cycle_length) * double(n_cycles) * tick_duration; }
    /// Appends one click; cycles must be appended in order.
    void push(std::uint32_t cycle, std::uint64_t tick) {
        cycle_of.push_back(cycle);
        ticks.push_back(tick);
    }
    /// Throws NonMonotonicTags / InvalidArgument if the ordering invariants fail.
    void validate() const;

    friend bool operator==(const TimeTagStream &, const TimeTagStream &) = default;
};

enum class TagFormat { Auto, Text, Binary };

TimeTagStream read_time_tags(const std::string &path, TagFormat format = TagFormat::Auto);
void write_time_tags(const std::string &path, const TimeTagStream &stream, TagFormat format = TagFormat::Text);

enum class HistogramKind { FirstAndN, FullCorrelation };

struct DelayHistogram {
    HistogramKind kind = HistogramKind::FirstAndN;
    int n = 2;  ///< FirstAndN order; unused for FullCorrelation.
    bool cross_cycle = false;
    std::uint64_t bin_width = kDefaultBinTicks;  ///< ticks
    double tick_duration = kDefaultTick;
    std::vector<std::uint64_t> counts;
    std::uint64_t source_clicks = 0;
    double collection_time = 0.0;  ///< s
    /// Entries beyond the last bin.
    std::uint64_t overflow = 0;

    double bin_seconds() const { return double(bin_width) * tick_duration; }
    double bin_start(std::size_t i) const { return double(i) * bin_seconds(); }
    std::uint64_t total() const;
};

struct HistogramOptions {
    std::uint64_t bin_width = kDefaultBinTicks;
    /// Longest delay kept, in ticks; 0 keeps every delay.
    std::uint64_t max_delay = 0;
    /// Pairs may span cycles (cw data recorded in cycles).
    bool cross_cycle = false;
};

/// Delay from each click to its (n-1)th successor in the same record.
DelayHistogram first_and_n_histogram(const TimeTagStream &stream, int n, const HistogramOptions &opt = {});

/// Delays of all ordered click pairs up to opt.max_delay (required > 0).
DelayHistogram full_correlation_histogram(const TimeTagStream &stream, const HistogramOptions &opt);

/// Two-column text: bin start (s), count.
void write_histogram(const std::string &path, const DelayHistogram &h);

/// Normalized arrival-time histogram over the window, from single-click cycles only.
PhotonProfile estimate_photon_profile(const TimeTagStream &stream, const CycleWindow &window);

struct ClickDistribution {
    NumberDistribution distribution;
    std::vector<std::uint64_t> counts;  ///< cycles with k clicks, k = 0..n_max (top bin includes overflow)
    double overflow_mass = 0.0;         ///< fraction of cycles with more than n_max clicks
    bool overflow_warning = false;      ///< overflow_mass > 1e-6
    std::uint64_t cycles = 0;
};

ClickDistribution click_number_distribution(const TimeTagStream &stream, const CycleWindow &window, Index n_max);

/// Clicks per cycle inside the window, one entry per cycle.
std::vector<std::uint32_t> clicks_per_cycle(const TimeTagStream &stream, const CycleWindow &window);

}  // namespace spadrecon

#endif  // SPADRECON_TAGS_HPP
