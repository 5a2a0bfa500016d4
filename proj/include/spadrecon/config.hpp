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

#ifndef SPADRECON_CONFIG_HPP
#define SPADRECON_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spadrecon/core.hpp"

namespace spadrecon {

/// Flat key = value file with one [section] per module. Every key has a default.
struct RunConfig {
    struct Detector {
        std::string file;  ///< JSON detector report; empty uses the inline values below
        Measured eta0{1.0, 0.0};
        Measured r_b{0.0, 0.0};
        Measured ap_total{0.0, 0.0};
        Measured t_dead{0.0, 0.0};
        Measured t_reset{0.0, 0.0};
        Measured t_rec{0.0, 0.0};
        /// When no file is given: "none" or "hyperexponential" (scaled to ap_total).
        std::string ap_shape = "none";
        friend bool operator==(const Detector &, const Detector &) = default;
    } detector;

    struct Data {
        std::string tags;                ///< pulsed record for reconstruct / build-matrix
        std::string dark;                ///< characterize
        std::vector<std::string> lit;    ///< characterize, comma separated
        friend bool operator==(const Data &, const Data &) = default;
    } data;

    struct Window {
        double t_start = 0.0;
        double t_end = 3e-6;
        double bin_width = kDefaultTick * kDefaultBinTicks;
        friend bool operator==(const Window &, const Window &) = default;
    } window;

    struct Model {
        Index n_max = 0;  ///< 0: smallest n with Poisson tail < 1e-6 at the expected nbar (>= 10)
        Index o_R = 0;    ///< 0: automatic order choice
        Index o_a = 2;
        friend bool operator==(const Model &, const Model &) = default;
    } model;

    struct Eme {
        double alpha = 1e-3;
        double epsilon = 1e-12;
        long max_iter = 1'000'000;
        std::string entropy = "weighted";  ///< weighted | unweighted
        double nbar_exp = 0.0;             ///< 0: not given
        double nbar_exp_sigma = 0.0;
        friend bool operator==(const Eme &, const Eme &) = default;
    } eme;

    struct Charfit {
        double long_delay = 100e-6;
        double linear_rate_limit = 5e6;
        int bootstrap = 500;
        int rate_order = 6;
        std::uint64_t bin_ticks = kDefaultBinTicks;
        std::uint64_t background_bin_ticks = 6000;
        double background_max_delay = 1e-3;
        double afterpulse_max_delay = 10e-3;
        bool correct_background = true;
        bool full_dep_background = true;
        friend bool operator==(const Charfit &, const Charfit &) = default;
    } charfit;

    struct Uncertainty {
        int mc_samples = 1000;
        double counts_total = 0.0;  ///< 0: number of cycles in the data
        bool breakdown = true;
        double drop_limit = 0.1;
        friend bool operator==(const Uncertainty &, const Uncertainty &) = default;
    } uncertainty;

    struct Sim {
        std::string mode = "faithful";    ///< faithful | physical
        std::string source = "poisson";   ///< poisson | fock | drifting | cw | dark
        double nbar = 5.0;
        double nbar_end = 5.0;
        std::vector<double> fock_weights;
        std::uint64_t cycles = 100000;
        double pulse_start = 0.0;         ///< flat pulse inside the window
        double pulse_end = 3e-6;
        double gamma_offset = 0.0;
        double cycle_duration = 0.0;
        double cw_rate = 1e6;
        double cw_duration = 1.0;
        double ap_inflation = 0.0;
        std::string format = "binary";    ///< text | binary
        friend bool operator==(const Sim &, const Sim &) = default;
    } sim;

    struct Hist {
        std::string kind = "first_and_n";  ///< first_and_n | full
        int n = 2;
        std::uint64_t bin_ticks = kDefaultBinTicks;
        double max_delay = 0.0;            ///< s; 0 keeps every delay (first_and_n only)
        bool cross_cycle = false;
        friend bool operator==(const Hist &, const Hist &) = default;
    } hist;

    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out = "out";

    friend bool operator==(const RunConfig &, const RunConfig &) = default;
};

/// Unknown keys are an error so typos do not pass silently.
RunConfig parse_run_config(const std::string &text);
RunConfig load_run_config(const std::string &path);
std::string serialize_run_config(const RunConfig &cfg);

}  // namespace spadrecon

#endif  // SPADRECON_CONFIG_HPP
