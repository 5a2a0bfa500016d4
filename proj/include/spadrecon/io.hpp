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

#ifndef SPADRECON_IO_HPP
#define SPADRECON_IO_HPP

#include <optional>
#include <string>

#include "spadrecon/charfit.hpp"
#include "spadrecon/core.hpp"
#include "spadrecon/detmat.hpp"
#include "spadrecon/eme.hpp"
#include "spadrecon/uncertainty.hpp"

namespace spadrecon {

/// Writes `content` to `path`, creating parent directories. Throws Io.
void write_text_file(const std::string &path, const std::string &content);
std::string read_text_file(const std::string &path);

/// JSON with {value, sigma} objects plus an "ap_profile" {bin_width, values} block.
std::string detector_params_json(const DetectorParams &p);
DetectorParams parse_detector_params(const std::string &json, const std::string &origin = "<string>");
DetectorParams read_detector_params(const std::string &path);

/// Table-shaped report; its top-level keys also parse as detector parameters once t_reset exists.
std::string characterization_json(const CharacterizationReport &r);

std::string detector_matrix_json(const DetectorMatrix &D, const DetectorModelOptions &opt);

struct ReconstructionOutput {
    NumberDistribution clicks;
    ReconstructionResult result;
    Index o_R = 0;
    std::uint64_t cycles = 0;
    std::optional<Measured> nbar_exp;
};

std::string reconstruction_json(const ReconstructionOutput &out);
/// Columns: n, click_prob, recon_prob, poisson_fit_prob.
std::string reconstruction_bars(const ReconstructionOutput &out);

std::string uncertainty_json(const UncertaintyReport &r, const NumberDistribution &recon);
/// Columns: n, recon_prob, sigma_sampling, sigma_full.
std::string uncertainty_bars(const UncertaintyReport &r, const NumberDistribution &recon);

/// Parses the "distribution" array of a reconstruction JSON file.
NumberDistribution parse_distribution_json(const std::string &json, const std::string &key = "distribution");

}  // namespace spadrecon

#endif  // SPADRECON_IO_HPP
