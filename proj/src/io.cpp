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

#include "spadrecon/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace spadrecon {

namespace {

using nlohmann::json;

json measured(const Measured &m) { return json{{"value", m.value}, {"sigma", m.sigma}}; }

Measured get_measured(const json &j, const char *key, const std::string &origin) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, origin + ": missing key '" + key + "'");
    const json &v = j.at(key);
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (!v.is_object() || !v.contains("value")) throw Error(ErrorCode::ParseError, origin + ": bad value for '" + key + "'");
    return {v.at("value").get<double>(), v.value("sigma", 0.0)};
}

json vec(const Vector<double> &v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat(const Matrix<double> &m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json detector_block(const DetectorParams &p) {
    json j;
    j["eta0"] = measured(p.eta0);
    j["r_b"] = measured(p.r_b);
    j["ap_total"] = measured(p.ap_total);
    j["t_dead"] = measured(p.t_dead);
    j["t_reset"] = measured(p.t_reset);
    j["t_rec"] = measured(p.t_rec);
    j["ap_profile"] = json{{"bin_width", p.ap_profile.bin_width}, {"values", p.ap_profile.values}};
    return j;
}

std::string line(std::initializer_list<double> cols, Index n) {
    std::ostringstream o;
    o.precision(17);
    o << n;
    for (double c : cols) o << ' ' << c;
    o << '\n';
    return o.str();
}

json spread(const SourceSpread &s) {
    return json{{"source", uncertainty_source_name(s.source)}, {"sigma", vec(s.sigma)},  {"mean", vec(s.mean)},
                {"g2_sigma", s.g2_sigma},                       {"nbar_fit_sigma", s.nbar_fit_sigma},
                {"used", s.used},                               {"dropped", s.dropped}};
}

}  // namespace

void write_text_file(const std::string &path, const std::string &content) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string detector_params_json(const DetectorParams &p) { return detector_block(p).dump(2) + "\n"; }

DetectorParams parse_detector_params(const std::string &text, const std::string &origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(ErrorCode::ParseError, origin + ": " + e.what());
    }
    DetectorParams p;
    try {
        if (j.contains("eta0") && !j.at("eta0").is_null()) p.eta0 = get_measured(j, "eta0", origin);
        p.r_b = get_measured(j, "r_b", origin);
        p.ap_total = get_measured(j, "ap_total", origin);
        p.t_rec = get_measured(j, "t_rec", origin);
        p.t_reset = get_measured(j, "t_reset", origin);
        p.t_dead = j.contains("t_dead") ? get_measured(j, "t_dead", origin)
                                        : Measured{p.t_rec.value - p.t_reset.value, 0.0};
        if (j.contains("ap_profile")) {
            const json &a = j.at("ap_profile");
            p.ap_profile.bin_width = a.at("bin_width").get<double>();
            p.ap_profile.values = a.at("values").get<std::vector<double>>();
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ParseError, origin + ": " + e.what());
    }
    return p;
}

DetectorParams read_detector_params(const std::string &path) { return parse_detector_params(read_text_file(path), path); }

std::string characterization_json(const CharacterizationReport &r) {
    json j;
    j["eta0"] = r.eta0 ? measured(*r.eta0) : json(nullptr);
    j["r_b"] = measured(r.r_b);
    j["r_click"] = measured(r.r_click);
    j["ap_total"] = measured(r.p_a_total);
    j["ap_two_rec"] = measured(r.p_a_two_rec);
    j["t_rec"] = measured(r.t_rec);
    j["t_reset"] = r.t_reset ? measured(*r.t_reset) : json("unavailable");
    j["t_dead"] = r.t_dead ? measured(*r.t_dead) : json("unavailable");
    if (r.t_rec_check) {
        j["t_rec_check"] = json{{"value", r.t_rec_check->t_rec},
                                {"sigma", r.t_rec_check->sigma},
                                {"half_sum", r.t_rec_check->half_sum},
                                {"lost", r.t_rec_check->lost}};
    } else {
        j["t_rec_check"] = "unavailable";
    }
    if (r.reset_fit) {
        j["reset_fit"] = json{{"slope", r.reset_fit->slope},
                              {"sigma_slope", r.reset_fit->sigma_slope},
                              {"chi2_scale", r.reset_fit->chi2_scale},
                              {"points_used", r.reset_fit->points_used},
                              {"saturating_residuals", r.reset_fit->saturating_residuals}};
    }
    json lit = json::array();
    for (const auto &l : r.lit) {
        lit.push_back(json{{"label", l.label},
                           {"rate", l.rate.rate},
                           {"sigma_rate", l.rate.sigma_rate},
                           {"fit_start", l.rate.fit_start},
                           {"p_a_fit", l.rate.p_a_fit},
                           {"dep_fraction", l.dep.dep_fraction},
                           {"dep_sigma", l.dep.sigma},
                           {"lost_fraction", l.lost_fraction}});
    }
    j["lit"] = lit;
    j["ap_profile"] = json{{"bin_width", r.ap_profile.bin_width}, {"values", r.ap_profile.values}};
    return j.dump(2) + "\n";
}

std::string detector_matrix_json(const DetectorMatrix &D, const DetectorModelOptions &opt) {
    json j;
    j["n_max"] = opt.n_max;
    j["o_R"] = opt.o_R;
    j["o_a"] = opt.o_a;
    j["D"] = mat(D.matrix);
    j["A"] = mat(D.A);
    j["R"] = mat(D.R);
    j["B"] = mat(D.B);
    j["L"] = mat(D.L);
    return j.dump(1) + "\n";
}

std::string reconstruction_json(const ReconstructionOutput &out) {
    const ReconstructionResult &r = out.result;
    json j;
    j["clicks"] = vec(out.clicks.probs());
    j["distribution"] = vec(r.distribution.probs());
    j["cycles"] = out.cycles;
    j["o_R"] = out.o_R;
    json m;
    m["delta"] = r.tvd_to_fit;
    m["fitted_nbar"] = r.fitted_nbar;
    m["mean"] = r.distribution.mean();
    m["g2_recon"] = r.g2_recon;
    m["iterations"] = r.iterations;
    m["converged"] = r.converged;
    m["singular_denominator"] = r.singular_denominator;
    if (out.nbar_exp) m["nbar_exp"] = measured(*out.nbar_exp);
    m["delta_nbar"] = r.delta_nbar ? json(*r.delta_nbar) : json(nullptr);
    j["metrics"] = m;
    return j.dump(2) + "\n";
}

std::string reconstruction_bars(const ReconstructionOutput &out) {
    const auto &P = out.result.distribution;
    const NumberDistribution fit = poisson_pmf_vector(out.result.fitted_nbar, P.n_max());
    std::string s = "# n click_prob recon_prob poisson_fit_prob\n";
    for (Index n = 0; n < P.size(); ++n) s += line({out.clicks[n], P[n], fit[n]}, n);
    return s;
}

std::string uncertainty_json(const UncertaintyReport &r, const NumberDistribution &recon) {
    json j;
    j["distribution"] = vec(recon.probs());
    j["mc_samples"] = r.mc_samples;
    j["seed"] = r.seed;
    j["drop_limit"] = r.drop_limit;
    j["sampling"] = spread(r.sampling);
    j["full"] = spread(r.full);
    json b = json::array();
    for (const auto &s : r.breakdown) b.push_back(spread(s));
    j["breakdown"] = b;
    return j.dump(2) + "\n";
}

std::string uncertainty_bars(const UncertaintyReport &r, const NumberDistribution &recon) {
    std::string s = "# n recon_prob sigma_sampling sigma_full\n";
    for (Index n = 0; n < recon.size(); ++n) s += line({recon[n], r.sampling.sigma(n), r.full.sigma(n)}, n);
    return s;
}

NumberDistribution parse_distribution_json(const std::string &text, const std::string &key) {
    try {
        const json j = json::parse(text);
        const auto v = j.at(key).get<std::vector<double>>();
        Vector<double> p(Index(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) p(Index(i)) = v[i];
        return normalize(p);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ParseError, std::string("distribution json: ") + e.what());
    }
}

}  // namespace spadrecon
