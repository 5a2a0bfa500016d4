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

#include "spadrecon/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace spadrecon {

namespace {

namespace pt = boost::property_tree;

struct Field {
    std::string key;  // section.name
    std::function<void(const std::string &)> set;
    std::function<std::string()> get;
};

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string &key, const std::string &s) {
    T v{};
    const char *b = s.data();
    const char *e = s.data() + s.size();
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw Error(ErrorCode::ParseError, "bad value for " + key + ": '" + s + "'");
    return v;
}

bool parse_bool(const std::string &key, const std::string &s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(ErrorCode::ParseError, "bad boolean for " + key + ": '" + s + "'");
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

std::string join(const std::vector<std::string> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

Field num(const std::string &key, double &x) {
    return {key, [&x, key](const std::string &s) { x = parse_number<double>(key, s); }, [&x] { return fmt(x); }};
}
template <typename I>
Field integer(const std::string &key, I &x) {
    return {key, [&x, key](const std::string &s) { x = parse_number<I>(key, s); }, [&x] { return std::to_string(x); }};
}
Field text(const std::string &key, std::string &x) {
    return {key, [&x](const std::string &s) { x = s; }, [&x] { return x; }};
}
Field flag(const std::string &key, bool &x) {
    return {key, [&x, key](const std::string &s) { x = parse_bool(key, s); }, [&x] { return std::string(x ? "true" : "false"); }};
}
Field list(const std::string &key, std::vector<std::string> &x) {
    return {key, [&x](const std::string &s) { x = split_list(s); }, [&x] { return join(x); }};
}
Field numbers(const std::string &key, std::vector<double> &x) {
    return {key,
            [&x, key](const std::string &s) {
                x.clear();
                for (const auto &t : split_list(s)) x.push_back(parse_number<double>(key, t));
            },
            [&x] {
                std::vector<std::string> v;
                for (double d : x) v.push_back(fmt(d));
                return join(v);
            }};
}
void measured(std::vector<Field> &f, const std::string &key, Measured &m) {
    f.push_back(num(key, m.value));
    f.push_back(num(key + "_sigma", m.sigma));
}

std::vector<Field> fields(RunConfig &c) {
    std::vector<Field> f;
    f.push_back(text("detector.file", c.detector.file));
    measured(f, "detector.eta0", c.detector.eta0);
    measured(f, "detector.r_b", c.detector.r_b);
    measured(f, "detector.ap_total", c.detector.ap_total);
    measured(f, "detector.t_dead", c.detector.t_dead);
    measured(f, "detector.t_reset", c.detector.t_reset);
    measured(f, "detector.t_rec", c.detector.t_rec);
    f.push_back(text("detector.ap_shape", c.detector.ap_shape));

    f.push_back(text("data.tags", c.data.tags));
    f.push_back(text("data.dark", c.data.dark));
    f.push_back(list("data.lit", c.data.lit));

    f.push_back(num("window.t_start", c.window.t_start));
    f.push_back(num("window.t_end", c.window.t_end));
    f.push_back(num("window.bin_width", c.window.bin_width));

    f.push_back(integer("model.n_max", c.model.n_max));
    f.push_back(integer("model.o_R", c.model.o_R));
    f.push_back(integer("model.o_a", c.model.o_a));

    f.push_back(num("eme.alpha", c.eme.alpha));
    f.push_back(num("eme.epsilon", c.eme.epsilon));
    f.push_back(integer("eme.max_iter", c.eme.max_iter));
    f.push_back(text("eme.entropy", c.eme.entropy));
    f.push_back(num("eme.nbar_exp", c.eme.nbar_exp));
    f.push_back(num("eme.nbar_exp_sigma", c.eme.nbar_exp_sigma));

    f.push_back(num("charfit.long_delay", c.charfit.long_delay));
    f.push_back(num("charfit.linear_rate_limit", c.charfit.linear_rate_limit));
    f.push_back(integer("charfit.bootstrap", c.charfit.bootstrap));
    f.push_back(integer("charfit.rate_order", c.charfit.rate_order));
    f.push_back(integer("charfit.bin_ticks", c.charfit.bin_ticks));
    f.push_back(integer("charfit.background_bin_ticks", c.charfit.background_bin_ticks));
    f.push_back(num("charfit.background_max_delay", c.charfit.background_max_delay));
    f.push_back(num("charfit.afterpulse_max_delay", c.charfit.afterpulse_max_delay));
    f.push_back(flag("charfit.correct_background", c.charfit.correct_background));
    f.push_back(flag("charfit.full_dep_background", c.charfit.full_dep_background));

    f.push_back(integer("uncertainty.mc_samples", c.uncertainty.mc_samples));
    f.push_back(num("uncertainty.counts_total", c.uncertainty.counts_total));
    f.push_back(flag("uncertainty.breakdown", c.uncertainty.breakdown));
    f.push_back(num("uncertainty.drop_limit", c.uncertainty.drop_limit));

    f.push_back(text("sim.mode", c.sim.mode));
    f.push_back(text("sim.source", c.sim.source));
    f.push_back(num("sim.nbar", c.sim.nbar));
    f.push_back(num("sim.nbar_end", c.sim.nbar_end));
    f.push_back(numbers("sim.fock_weights", c.sim.fock_weights));
    f.push_back(integer("sim.cycles", c.sim.cycles));
    f.push_back(num("sim.pulse_start", c.sim.pulse_start));
    f.push_back(num("sim.pulse_end", c.sim.pulse_end));
    f.push_back(num("sim.gamma_offset", c.sim.gamma_offset));
    f.push_back(num("sim.cycle_duration", c.sim.cycle_duration));
    f.push_back(num("sim.cw_rate", c.sim.cw_rate));
    f.push_back(num("sim.cw_duration", c.sim.cw_duration));
    f.push_back(num("sim.ap_inflation", c.sim.ap_inflation));
    f.push_back(text("sim.format", c.sim.format));

    f.push_back(text("hist.kind", c.hist.kind));
    f.push_back(integer("hist.n", c.hist.n));
    f.push_back(integer("hist.bin_ticks", c.hist.bin_ticks));
    f.push_back(num("hist.max_delay", c.hist.max_delay));
    f.push_back(flag("hist.cross_cycle", c.hist.cross_cycle));

    f.push_back(integer("run.seed", c.seed));
    f.push_back(integer("run.threads", c.threads));
    f.push_back(text("run.out", c.out));
    return f;
}

}  // namespace

RunConfig parse_run_config(const std::string &content) {
    pt::ptree tree;
    std::istringstream in(content);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        throw Error(ErrorCode::ParseError, std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    RunConfig cfg;
    auto fs = fields(cfg);
    std::set<std::string> seen;
    for (const auto &section : tree) {
        if (section.second.empty() && !section.second.data().empty())
            throw Error(ErrorCode::ParseError, "config key outside a section: " + section.first);
        for (const auto &kv : section.second) {
            const std::string key = section.first + "." + kv.first;
            auto it = std::find_if(fs.begin(), fs.end(), [&](const Field &f) { return f.key == key; });
            if (it == fs.end()) throw Error(ErrorCode::ParseError, "unknown config key: " + key);
            it->set(kv.second.data());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig &cfg) {
    RunConfig copy = cfg;
    std::string out, current;
    for (const auto &f : fields(copy)) {
        const auto dot = f.key.find('.');
        const std::string section = f.key.substr(0, dot);
        if (section != current) {
            out += (current.empty() ? "" : "\n") + std::string("[") + section + "]\n";
            current = section;
        }
        out += f.key.substr(dot + 1) + " = " + f.get() + "\n";
    }
    return out;
}

}  // namespace spadrecon
