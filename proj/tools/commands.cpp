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

#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "spadrecon/charfit.hpp"
#include "spadrecon/detmat.hpp"
#include "spadrecon/eme.hpp"
#include "spadrecon/io.hpp"
#include "spadrecon/recovery.hpp"
#include "spadrecon/sim.hpp"
#include "spadrecon/tags.hpp"
#include "spadrecon/uncertainty.hpp"

namespace spadrecon::cli {

namespace {

std::string out_path(const RunConfig &cfg, const std::string &name) {
    return (std::filesystem::path(cfg.out) / name).string();
}

EmeConfig eme_config(const RunConfig &cfg) {
    EmeConfig e;
    e.alpha = cfg.eme.alpha;
    e.epsilon = cfg.eme.epsilon;
    e.max_iter = cfg.eme.max_iter;
    if (cfg.eme.entropy == "weighted") {
        e.entropy = EntropyTerm::Weighted;
    } else if (cfg.eme.entropy == "unweighted") {
        e.entropy = EntropyTerm::Unweighted;
    } else {
        throw Error(ErrorCode::InvalidArgument, "eme.entropy must be weighted or unweighted");
    }
    e.validate();
    return e;
}

CycleWindow window_of(const RunConfig &cfg) {
    CycleWindow w{cfg.window.t_start, cfg.window.t_end, cfg.window.bin_width};
    w.validate();
    return w;
}

DetectorParams detector_of(const RunConfig &cfg) {
    DetectorParams p;
    if (!cfg.detector.file.empty()) {
        p = read_detector_params(cfg.detector.file);
    } else {
        const auto &d = cfg.detector;
        p.eta0 = d.eta0;
        p.r_b = d.r_b;
        p.ap_total = d.ap_total;
        p.t_rec = d.t_rec;
        p.t_reset = d.t_reset;
        p.t_dead = d.t_dead;
        if (p.t_dead.value == 0.0 && p.t_reset.value > 0.0) p.t_dead.value = p.t_rec.value - p.t_reset.value;
        if (d.ap_shape == "hyperexponential") {
            if (p.ap_total.value > 0.0) p.ap_profile = hyperexponential_profile(p.ap_total.value, p.t_rec.value);
        } else if (d.ap_shape != "none") {
            throw Error(ErrorCode::InvalidArgument, "detector.ap_shape must be none or hyperexponential");
        }
    }
    p.validate();
    return p;
}

struct Prepared {
    TimeTagStream stream;
    CycleWindow window;
    DetectorParams params;
    PhotonProfile gamma;
    ClickDistribution clicks;
    DetectorModelOptions model;
    DetectorMatrix D;
    EmeConfig eme;
    std::optional<Measured> nbar_exp;
};

Prepared prepare(const RunConfig &cfg) {
    if (cfg.data.tags.empty()) throw Error(ErrorCode::InvalidArgument, "data.tags (or --tags) is required");
    Prepared p;
    p.stream = read_time_tags(cfg.data.tags);
    p.window = window_of(cfg);
    p.params = detector_of(cfg);
    p.eme = eme_config(cfg);
    p.gamma = estimate_photon_profile(p.stream, p.window);
    if (cfg.eme.nbar_exp > 0.0) p.nbar_exp = Measured{cfg.eme.nbar_exp, cfg.eme.nbar_exp_sigma};
    Index n_max = cfg.model.n_max;
    if (n_max <= 0) {
        double guess = 0.0;
        if (p.nbar_exp) {
            guess = p.nbar_exp->value;
        } else {
            const auto k = clicks_per_cycle(p.stream, p.window);
            const double mean = k.empty() ? 0.0 : std::accumulate(k.begin(), k.end(), 0.0) / double(k.size());
            guess = mean / std::max(p.params.eta0.value, 1e-9);
        }
        n_max = default_n_max(guess);
    }
    p.clicks = click_number_distribution(p.stream, p.window, n_max);
    if (p.clicks.overflow_warning)
        std::cerr << "spadrecon: warning: " << p.clicks.overflow_mass << " of cycles exceed n_max = " << n_max << "\n";
    p.model.n_max = n_max;
    p.model.o_a = cfg.model.o_a;
    p.model.o_R = cfg.model.o_R > 0 ? cfg.model.o_R
                                     : choose_recovery_order(p.clicks.distribution, p.params, p.gamma, n_max, p.eme);
    p.D = build_detector_matrix(p.params, p.gamma, p.model);
    return p;
}

PhotonProfile flat_pulse(const RunConfig &cfg) {
    const double T = cfg.window.t_end - cfg.window.t_start;
    const Index bins = Index(std::llround(T / cfg.window.bin_width));
    if (bins < 1) throw Error(ErrorCode::InvalidArgument, "window shorter than one bin");
    std::vector<double> v(std::size_t(bins), 0.0);
    for (Index i = 0; i < bins; ++i) {
        const double t = cfg.window.t_start + (double(i) + 0.5) * cfg.window.bin_width;
        if (t >= cfg.sim.pulse_start && t < cfg.sim.pulse_end) v[std::size_t(i)] = 1.0;
    }
    return PhotonProfile(cfg.window.bin_width, v);
}

std::string tallies_json(const SimTallies &t, std::size_t stored) {
    std::ostringstream o;
    o << "{\n"
      << "  \"stored_clicks\": " << stored << ",\n"
      << "  \"reconciles\": " << (t.reconciles(stored) ? "true" : "false") << ",\n"
      << "  \"photons\": " << t.photons << ",\n"
      << "  \"efficiency_losses\": " << t.efficiency_losses << ",\n"
      << "  \"photon_armed\": " << t.photon_armed << ",\n"
      << "  \"photon_twilight\": " << t.photon_twilight << ",\n"
      << "  \"photon_recovery_losses\": " << t.photon_recovery_losses << ",\n"
      << "  \"background_events\": " << t.background_events << ",\n"
      << "  \"background_recovery_losses\": " << t.background_recovery_losses << ",\n"
      << "  \"afterpulse_events\": " << t.afterpulse_events << ",\n"
      << "  \"armed_clicks\": " << t.armed_clicks << ",\n"
      << "  \"twilight_clicks\": " << t.twilight_clicks << ",\n"
      << "  \"afterpulse_clicks\": " << t.afterpulse_clicks << ",\n"
      << "  \"clicks_beyond_end\": " << t.clicks_beyond_end << ",\n"
      << "  \"nudged_ticks\": " << t.nudged_ticks << "\n"
      << "}\n";
    return o.str();
}

}  // namespace

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NumericalUnderflow:
        case ErrorCode::ZeroMean:
        case ErrorCode::InsufficientData:
        case ErrorCode::FitDiverged:
        case ErrorCode::ZeroDenominator:
        case ErrorCode::TooManyDroppedSamples:
            return kExitFit;
        default:
            return kExitInput;
    }
}

void cmd_characterize(const RunConfig &cfg) {
    if (cfg.data.dark.empty()) throw Error(ErrorCode::InvalidArgument, "data.dark (or --dark) is required");
    const TimeTagStream dark = read_time_tags(cfg.data.dark);
    std::vector<TimeTagStream> lit;
    std::vector<std::string> labels;
    for (const auto &f : cfg.data.lit) {
        lit.push_back(read_time_tags(f));
        labels.push_back(std::filesystem::path(f).filename().string());
    }
    CharacterizationOptions o;
    o.fit.long_delay = cfg.charfit.long_delay;
    o.fit.linear_rate_limit = cfg.charfit.linear_rate_limit;
    o.fit.bootstrap = cfg.charfit.bootstrap;
    o.fit.seed = cfg.seed;
    o.rate_order = cfg.charfit.rate_order;
    o.bin_ticks = cfg.charfit.bin_ticks;
    o.background_bin_ticks = cfg.charfit.background_bin_ticks;
    o.background_max_delay = cfg.charfit.background_max_delay;
    o.afterpulse_max_delay = cfg.charfit.afterpulse_max_delay;
    o.correct_background_for_afterpulses = cfg.charfit.correct_background;
    o.full_dep_background = cfg.charfit.full_dep_background;
    CharacterizationReport rep = characterize(dark, lit, labels, o);
    rep.eta0 = cfg.detector.eta0;
    write_text_file(out_path(cfg, "detector.json"), characterization_json(rep));
}

void cmd_build_matrix(const RunConfig &cfg) {
    DetectorMatrix D;
    DetectorModelOptions model;
    if (!cfg.data.tags.empty()) {
        const Prepared p = prepare(cfg);
        D = p.D;
        model = p.model;
    } else {
        const DetectorParams params = detector_of(cfg);
        const PhotonProfile gamma = flat_pulse(cfg);
        if (cfg.model.n_max > 0) model.n_max = cfg.model.n_max;
        if (cfg.model.o_R > 0) model.o_R = cfg.model.o_R;
        model.o_a = cfg.model.o_a;
        D = build_detector_matrix(params, gamma, model);
    }
    write_text_file(out_path(cfg, "matrix.json"), detector_matrix_json(D, model));
}

void cmd_reconstruct(const RunConfig &cfg) {
    const Prepared p = prepare(cfg);
    ReconstructionOutput out;
    out.clicks = p.clicks.distribution;
    out.result = eme_reconstruct(p.clicks.distribution, p.D.matrix, p.eme,
                                 p.nbar_exp ? std::optional<double>(p.nbar_exp->value) : std::nullopt);
    out.o_R = p.model.o_R;
    out.cycles = p.clicks.cycles;
    out.nbar_exp = p.nbar_exp;
    write_text_file(out_path(cfg, "reconstruction.json"), reconstruction_json(out));
    write_text_file(out_path(cfg, "bars.dat"), reconstruction_bars(out));
    if (!out.result.converged) throw Error(ErrorCode::FitDiverged, "EME did not converge within eme.max_iter");
}

void cmd_uncertainty(const RunConfig &cfg) {
    const Prepared p = prepare(cfg);
    const ReconstructionResult base = eme_reconstruct(p.clicks.distribution, p.D.matrix, p.eme);
    UncertaintyOptions o;
    o.mc_samples = cfg.uncertainty.mc_samples;
    o.seed = cfg.seed;
    o.drop_limit = cfg.uncertainty.drop_limit;
    o.breakdown = cfg.uncertainty.breakdown;
    const double counts = cfg.uncertainty.counts_total > 0.0 ? cfg.uncertainty.counts_total : double(p.clicks.cycles);
    const UncertaintyReport rep = propagate(p.clicks.distribution, counts, p.params, p.gamma, p.D.R, p.model.o_a, p.eme, o);
    write_text_file(out_path(cfg, "uncertainty.json"), uncertainty_json(rep, base.distribution));
    write_text_file(out_path(cfg, "errorbars.dat"), uncertainty_bars(rep, base.distribution));
}

void cmd_simulate(const RunConfig &cfg) {
    SimConfig s;
    s.detector = detector_of(cfg);
    s.loss = LossProfileModel::from(s.detector);
    s.seed = cfg.seed;
    s.ap_inflation = cfg.sim.ap_inflation;
    if (cfg.sim.mode == "faithful") {
        s.mode = SimMode::Faithful;
    } else if (cfg.sim.mode == "physical") {
        s.mode = SimMode::Physical;
    } else {
        throw Error(ErrorCode::InvalidArgument, "sim.mode must be faithful or physical");
    }
    TagFormat fmt = TagFormat::Binary;
    if (cfg.sim.format == "text") {
        fmt = TagFormat::Text;
    } else if (cfg.sim.format != "binary") {
        throw Error(ErrorCode::InvalidArgument, "sim.format must be text or binary");
    }
    SimResult res;
    const std::string &src = cfg.sim.source;
    if (src == "cw" || src == "dark") {
        s.gamma = PhotonProfile::flat(1e-6, 1);
        res = simulate_cw(s, src == "cw" ? cfg.sim.cw_rate : 0.0, cfg.sim.cw_duration);
    } else {
        s.gamma = flat_pulse(cfg);
        s.gamma_offset = cfg.sim.gamma_offset;
        s.cycle_duration = cfg.sim.cycle_duration;
        s.cycles = cfg.sim.cycles;
        if (src == "poisson") {
            s.source = PhotonSource::poisson(cfg.sim.nbar);
        } else if (src == "drifting") {
            s.source = PhotonSource::drifting(cfg.sim.nbar, cfg.sim.nbar_end);
        } else if (src == "fock") {
            Vector<double> w(Index(cfg.sim.fock_weights.size()));
            for (std::size_t i = 0; i < cfg.sim.fock_weights.size(); ++i) w(Index(i)) = cfg.sim.fock_weights[i];
            if (w.size() == 0) throw Error(ErrorCode::InvalidArgument, "sim.fock_weights is empty");
            s.source = PhotonSource::fock_mixture(w);
        } else {
            throw Error(ErrorCode::InvalidArgument, "sim.source must be poisson, drifting, fock, cw or dark");
        }
        res = simulate(s);
    }
    write_time_tags(out_path(cfg, fmt == TagFormat::Text ? "tags.txt" : "tags.bin"), res.stream, fmt);
    write_text_file(out_path(cfg, "sim.json"), tallies_json(res.tallies, res.stream.total_clicks()));
}

void cmd_hist(const RunConfig &cfg) {
    if (cfg.data.tags.empty()) throw Error(ErrorCode::InvalidArgument, "data.tags (or --tags) is required");
    const TimeTagStream s = read_time_tags(cfg.data.tags);
    HistogramOptions o;
    o.bin_width = cfg.hist.bin_ticks;
    o.cross_cycle = cfg.hist.cross_cycle;
    o.max_delay = std::uint64_t(std::ceil(cfg.hist.max_delay / s.tick_duration));
    DelayHistogram h;
    if (cfg.hist.kind == "first_and_n") {
        h = first_and_n_histogram(s, cfg.hist.n, o);
    } else if (cfg.hist.kind == "full") {
        h = full_correlation_histogram(s, o);
    } else {
        throw Error(ErrorCode::InvalidArgument, "hist.kind must be first_and_n or full");
    }
    write_histogram(out_path(cfg, "histogram.dat"), h);
}

int run(int argc, char **argv) {
    CLI::App app{"spadrecon: photon-number reconstruction from SPAD click data"};
    app.require_subcommand(1);
    std::string config_path;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out, tags, dark, detector, kind;
    std::vector<std::string> lit;
    int n = 0;
    std::uint64_t bin = 0;
    auto *o_config = app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    auto *o_seed = app.add_option("--seed", seed, "random seed");
    auto *o_threads = app.add_option("--threads", threads, "worker cap (0 = all cores)");
    auto *o_out = app.add_option("--out", out, "output directory");
    auto *o_tags = app.add_option("--tags", tags, "time-tag file");
    auto *o_dark = app.add_option("--dark", dark, "dark time-tag file");
    auto *o_lit = app.add_option("--lit", lit, "illuminated time-tag files");
    auto *o_det = app.add_option("--detector", detector, "detector JSON");
    auto *o_kind = app.add_option("--kind", kind, "histogram kind: first_and_n | full");
    auto *o_n = app.add_option("--n", n, "first-and-n order");
    auto *o_bin = app.add_option("--bin", bin, "histogram bin width in ticks");
    (void)o_config;

    std::string verb;
    for (const char *name : {"characterize", "build-matrix", "reconstruct", "simulate", "hist", "uncertainty"}) {
        app.add_subcommand(name)->fallthrough()->callback([&verb, name] { verb = name; });
    }
    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (o_seed->count()) cfg.seed = seed;
        if (o_threads->count()) cfg.threads = threads;
        if (o_out->count()) cfg.out = out;
        if (o_tags->count()) cfg.data.tags = tags;
        if (o_dark->count()) cfg.data.dark = dark;
        if (o_lit->count()) cfg.data.lit = lit;
        if (o_det->count()) cfg.detector.file = detector;
        if (o_kind->count()) cfg.hist.kind = kind;
        if (o_n->count()) cfg.hist.n = n;
        if (o_bin->count()) cfg.hist.bin_ticks = bin;
        set_thread_limit(cfg.threads);
        if (!cfg.out.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(cfg.out, ec);
            if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + cfg.out);
        }

        if (verb == "characterize") cmd_characterize(cfg);
        else if (verb == "build-matrix") cmd_build_matrix(cfg);
        else if (verb == "reconstruct") cmd_reconstruct(cfg);
        else if (verb == "simulate") cmd_simulate(cfg);
        else if (verb == "hist") cmd_hist(cfg);
        else if (verb == "uncertainty") cmd_uncertainty(cfg);
        return kExitOk;
    } catch (const Error &e) {
        std::cerr << "spadrecon: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception &e) {
        std::cerr << "spadrecon: " << e.what() << "\n";
        return kExitInput;
    }
}

}  // namespace spadrecon::cli
