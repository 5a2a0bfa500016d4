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

#include "spadrecon/eme.hpp"

namespace spadrecon {

namespace {

constexpr double kPlanck = 6.62607015e-34;
constexpr double kLightSpeed = 299792458.0;

double rel2(const Measured &m) { return m.value != 0.0 ? (m.sigma / m.value) * (m.sigma / m.value) : 0.0; }

}  // namespace

Measured expected_nbar(const CalibrationInputs &cal) {
    for (const Measured *m : {&cal.V_meas, &cal.T_ND, &cal.f_s, &cal.eta_trap, &cal.R_resp, &cal.G}) {
        if (!(m->value > 0.0)) throw Error(ErrorCode::InvalidArgument, "calibration inputs must be positive");
    }
    if (!(cal.lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "wavelength must be positive");
    const double power = cal.V_meas.value * cal.T_ND.value / (cal.eta_trap.value * cal.R_resp.value * cal.G.value);
    const double photon_energy = kPlanck * kLightSpeed / cal.lambda;
    Measured out;
    out.value = power * cal.f_s.value / photon_energy;
    out.sigma = out.value * std::sqrt(rel2(cal.V_meas) + rel2(cal.T_ND) + rel2(cal.eta_trap) + rel2(cal.f_s));
    return out;
}

}  // namespace spadrecon
