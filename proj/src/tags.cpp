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

#include "spadrecon/tags.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace spadrecon {

namespace {

// Inverse of the writer's seconds * 1e12, exact for any tick it produced.
double ps_to_seconds(double ps) {
    const double t = ps / 1e12;
    for (double c : {t, std::nextafter(t, 0.0), std::nextafter(t, 1.0)}) {
        if (c * 1e12 == ps) return c;
    }
    return t;
}

constexpr char kMagic[8] = {'S', 'P', 'A', 'D', 'T', 'A', 'G', '1'};

template <typename T>
void put_le(std::ostream &os, T v) {
    std::array<char, sizeof(T)> b{};
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = char((std::uint64_t(v) >> (8 * i)) & 0xFFu);
    os.write(b.data(), std::streamsize(b.size()));
}

template <typename T>
T get_le(const unsigned char *p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return T(v);
}

std::vector<char> slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

template <typename T>
bool parse_number(std::string_view s, T &out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

TimeTagStream read_text(const std::vector<char> &buf, const std::string &path) {
    TimeTagStream s;
    bool have_cycles = false;
    std::uint64_t declared_cycles = 0;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    const std::string_view all(buf.data(), buf.size());
    while (pos < all.size()) {
        std::size_t end = all.find('\n', pos);
        if (end == std::string_view::npos) end = all.size();
        std::string_view line = all.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fail = [&](const std::string &why) {
            throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": " + why);
        };
        if (line.front() == '#') {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) continue;  // comment
            const std::string_view key = line.substr(1, eq - 1);
            const std::string_view val = line.substr(eq + 1);
            if (key == "tick_ps") {
                double ps = 0.0;
                if (!parse_number(val, ps) || !(ps > 0.0)) fail("bad tick_ps");
                s.tick_duration = ps_to_seconds(ps);
            } else if (key == "cycle_ticks") {
                if (!parse_number(val, s.cycle_length)) fail("bad cycle_ticks");
            } else if (key == "cycles") {
                if (!parse_number(val, declared_cycles)) fail("bad cycles");
                have_cycles = true;
            }
            continue;
        }
        const auto tab = line.find_first_of("\t ");
        if (tab == std::string_view::npos) fail("expected <cycle>\\t<ticks>");
        std::uint32_t cycle = 0;
        std::uint64_t tick = 0;
        if (!parse_number(line.substr(0, tab), cycle) || !parse_number(line.substr(tab + 1), tick)) {
            fail("expected <cycle>\\t<ticks>");
        }
        if (s.cycle_length > 0 && tick >= s.cycle_length) fail("tick beyond cycle length");
        if (!s.ticks.empty()) {
            const std::uint32_t pc = s.cycle_of.back();
            if (cycle < pc || (cycle == pc && tick <= s.ticks.back())) {
                throw Error(ErrorCode::NonMonotonicTags,
                            path + ":" + std::to_string(line_no) + ": out-of-order tag in cycle " + std::to_string(cycle));
            }
        }
        s.push(cycle, tick);
    }
    const std::uint64_t seen = s.ticks.empty() ? 0 : std::uint64_t(s.cycle_of.back()) + 1;
    if (have_cycles && declared_cycles < seen) throw Error(ErrorCode::ParseError, path + ": #cycles below last cycle index");
    s.n_cycles = have_cycles ? declared_cycles : seen;
    return s;
}

TimeTagStream read_binary(const std::vector<char> &buf, const std::string &path) {
    constexpr std::size_t kHeader = 8 + 8 + 8 + 8 + 8;
    constexpr std::size_t kRecord = 4 + 8;
    if (buf.size() < kHeader) throw Error(ErrorCode::ParseError, path + ": truncated header");
    const auto *p = reinterpret_cast<const unsigned char *>(buf.data());
    TimeTagStream s;
    double ps = 0.0;
    const std::uint64_t ps_bits = get_le<std::uint64_t>(p + 8);
    std::memcpy(&ps, &ps_bits, sizeof ps);
    if (!(ps > 0.0)) throw Error(ErrorCode::ParseError, path + ": bad tick duration");
    s.tick_duration = ps_to_seconds(ps);
    s.cycle_length = get_le<std::uint64_t>(p + 16);
    s.n_cycles = get_le<std::uint64_t>(p + 24);
    const std::uint64_t records = get_le<std::uint64_t>(p + 32);
    if (buf.size() != kHeader + records * kRecord) throw Error(ErrorCode::ParseError, path + ": size does not match record count");
    s.cycle_of.reserve(records);
    s.ticks.reserve(records);
    for (std::uint64_t i = 0; i < records; ++i) {
        const unsigned char *r = p + kHeader + i * kRecord;
        const auto cycle = get_le<std::uint32_t>(r);
        const auto tick = get_le<std::uint64_t>(r + 4);
        if (s.cycle_length > 0 && tick >= s.cycle_length) {
            throw Error(ErrorCode::ParseError, path + ": record " + std::to_string(i) + " beyond cycle length");
        }
        if (cycle >= s.n_cycles) throw Error(ErrorCode::ParseError, path + ": record " + std::to_string(i) + " cycle out of range");
        if (!s.ticks.empty()) {
            const std::uint32_t pc = s.cycle_of.back();
            if (cycle < pc || (cycle == pc && tick <= s.ticks.back())) {
                throw Error(ErrorCode::NonMonotonicTags, path + ": out-of-order tag in cycle " + std::to_string(cycle));
            }
        }
        s.push(cycle, tick);
    }
    return s;
}

// Absolute tick of click i when pairs may cross cycles.
inline std::uint64_t abs_tick(const TimeTagStream &s, std::size_t i, bool cross) {
    return cross ? std::uint64_t(s.cycle_of[i]) * s.cycle_length + s.ticks[i] : s.ticks[i];
}

inline bool same_record(const TimeTagStream &s, std::size_t i, std::size_t j, bool cross) {
    return cross || s.cycle_of[i] == s.cycle_of[j];
}

template <typename Visit>
std::vector<std::uint64_t> parallel_histogram(std::size_t n_clicks, std::size_t n_bins, const Visit &visit,
                                              std::uint64_t &overflow) {
    const unsigned workers = std::max(1u, thread_limit());
    std::vector<std::vector<std::uint64_t>> partial(workers);
    std::vector<std::uint64_t> part_overflow(workers, 0);
    parallel_chunks(n_clicks, [&](std::size_t b, std::size_t e, unsigned w) {
        auto &h = partial[w];
        h.assign(n_bins, 0);
        for (std::size_t i = b; i < e; ++i) visit(i, h, part_overflow[w]);
    });
    std::vector<std::uint64_t> out(n_bins, 0);
    overflow = 0;
    for (unsigned w = 0; w < workers; ++w) {
        overflow += part_overflow[w];
        for (std::size_t k = 0; k < partial[w].size(); ++k) out[k] += partial[w][k];
    }
    return out;
}

}  // namespace

void TimeTagStream::validate() const {
    if (cycle_of.size() != ticks.size()) throw Error(ErrorCode::InvalidArgument, "cycle and tick arrays differ in length");
    if (!(tick_duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "tick duration must be > 0");
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        if (cycle_of[i] >= n_cycles) throw Error(ErrorCode::InvalidArgument, "cycle index out of range");
        if (cycle_length > 0 && ticks[i] >= cycle_length) throw Error(ErrorCode::InvalidArgument, "tick beyond cycle length");
        if (i > 0 && (cycle_of[i] < cycle_of[i - 1] || (cycle_of[i] == cycle_of[i - 1] && ticks[i] <= ticks[i - 1]))) {
            throw Error(ErrorCode::NonMonotonicTags, "out-of-order tag in cycle " + std::to_string(cycle_of[i]));
        }
    }
}

TimeTagStream read_time_tags(const std::string &path, TagFormat format) {
    const std::vector<char> buf = slurp(path);
    if (format == TagFormat::Auto) {
        format = (buf.size() >= 8 && std::memcmp(buf.data(), kMagic, 8) == 0) ? TagFormat::Binary : TagFormat::Text;
    }
    return format == TagFormat::Binary ? read_binary(buf, path) : read_text(buf, path);
}

void write_time_tags(const std::string &path, const TimeTagStream &s, TagFormat format) {
    s.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
    if (format == TagFormat::Binary) {
        os.write(kMagic, 8);
        const double ps = s.tick_duration * 1e12;
        std::uint64_t bits = 0;
        std::memcpy(&bits, &ps, sizeof bits);
        put_le<std::uint64_t>(os, bits);
        put_le<std::uint64_t>(os, s.cycle_length);
        put_le<std::uint64_t>(os, s.n_cycles);
        put_le<std::uint64_t>(os, s.ticks.size());
        for (std::size_t i = 0; i < s.ticks.size(); ++i) {
            put_le<std::uint32_t>(os, s.cycle_of[i]);
            put_le<std::uint64_t>(os, s.ticks[i]);
        }
    } else {
        std::ostringstream hdr;
        hdr << std::setprecision(17) << "#tick_ps=" << s.tick_duration * 1e12 << "\n";
        os << hdr.str() << "#cycle_ticks=" << s.cycle_length << "\n#cycles=" << s.n_cycles << "\n";
        std::string line;
        for (std::size_t i = 0; i < s.ticks.size(); ++i) {
            line.clear();
            line += std::to_string(s.cycle_of[i]);
            line += '\t';
            line += std::to_string(s.ticks[i]);
            line += '\n';
            os << line;
        }
    }
    if (!os) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::uint64_t DelayHistogram::total() const {
    std::uint64_t t = overflow;
    for (auto c : counts) t += c;
    return t;
}

DelayHistogram first_and_n_histogram(const TimeTagStream &s, int n, const HistogramOptions &opt) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "first-and-n histogram needs n >= 2");
    if (opt.bin_width == 0) throw Error(ErrorCode::InvalidArgument, "bin width must be > 0");
    const bool cross = opt.cross_cycle;
    const std::size_t step = std::size_t(n - 1);
    const std::size_t N = s.ticks.size();
    std::uint64_t max_delay = opt.max_delay;
    if (max_delay == 0) {
        for (std::size_t i = 0; i + step < N; ++i) {
            if (same_record(s, i, i + step, cross)) max_delay = std::max(max_delay, abs_tick(s, i + step, cross) - abs_tick(s, i, cross));
        }
    }
    DelayHistogram h;
    h.kind = HistogramKind::FirstAndN;
    h.n = n;
    h.cross_cycle = cross;
    h.bin_width = opt.bin_width;
    h.tick_duration = s.tick_duration;
    h.source_clicks = N;
    h.collection_time = s.collection_time();
    const std::size_t bins = std::size_t(max_delay / opt.bin_width) + 1;
    h.counts = parallel_histogram(
        N, bins,
        [&](std::size_t i, std::vector<std::uint64_t> &hist, std::uint64_t &over) {
            const std::size_t j = i + step;
            if (j >= N || !same_record(s, i, j, cross)) return;
            const std::uint64_t d = abs_tick(s, j, cross) - abs_tick(s, i, cross);
            if (d > max_delay) {
                ++over;
                return;
            }
            ++hist[std::size_t(d / opt.bin_width)];
        },
        h.overflow);
    return h;
}

DelayHistogram full_correlation_histogram(const TimeTagStream &s, const HistogramOptions &opt) {
    if (opt.max_delay == 0) throw Error(ErrorCode::InvalidArgument, "full correlation needs max_delay > 0");
    if (opt.bin_width == 0) throw Error(ErrorCode::InvalidArgument, "bin width must be > 0");
    const bool cross = opt.cross_cycle;
    const std::size_t N = s.ticks.size();
    DelayHistogram h;
    h.kind = HistogramKind::FullCorrelation;
    h.cross_cycle = cross;
    h.bin_width = opt.bin_width;
    h.tick_duration = s.tick_duration;
    h.source_clicks = N;
    h.collection_time = s.collection_time();
    const std::size_t bins = std::size_t(opt.max_delay / opt.bin_width) + 1;
    h.counts = parallel_histogram(
        N, bins,
        [&](std::size_t i, std::vector<std::uint64_t> &hist, std::uint64_t &) {
            const std::uint64_t ti = abs_tick(s, i, cross);
            for (std::size_t j = i + 1; j < N && same_record(s, i, j, cross); ++j) {
                const std::uint64_t d = abs_tick(s, j, cross) - ti;
                if (d > opt.max_delay) break;
                ++hist[std::size_t(d / opt.bin_width)];
            }
        },
        h.overflow);
    return h;
}

void write_histogram(const std::string &path, const DelayHistogram &h) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
    os << "# bin_start_s\tcount\n" << std::setprecision(12);
    for (std::size_t i = 0; i < h.counts.size(); ++i) os << h.bin_start(i) << '\t' << h.counts[i] << '\n';
    if (!os) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::vector<std::uint32_t> clicks_per_cycle(const TimeTagStream &s, const CycleWindow &w) {
    w.validate();
    std::vector<std::uint32_t> per(std::size_t(s.n_cycles), 0);
    for (std::size_t i = 0; i < s.ticks.size(); ++i) {
        const double t = double(s.ticks[i]) * s.tick_duration;
        if (t >= w.t_start && t < w.t_end) ++per[s.cycle_of[i]];
    }
    return per;
}

PhotonProfile estimate_photon_profile(const TimeTagStream &s, const CycleWindow &w) {
    const std::vector<std::uint32_t> per = clicks_per_cycle(s, w);
    const Index M = w.bins();
    const double bw = w.duration() / double(M);
    std::vector<double> hist(std::size_t(M), 0.0);
    std::uint64_t singles = 0;
    for (std::size_t i = 0; i < s.ticks.size(); ++i) {
        if (per[s.cycle_of[i]] != 1) continue;
        const double t = double(s.ticks[i]) * s.tick_duration;
        if (t < w.t_start || t >= w.t_end) continue;
        const auto b = std::min<Index>(M - 1, Index((t - w.t_start) / bw));
        hist[std::size_t(b)] += 1.0;
        ++singles;
    }
    if (singles == 0) throw Error(ErrorCode::NoSingleClickCycles, "no cycle has exactly one click in the window");
    for (double &v : hist) v /= double(singles);
    return PhotonProfile(bw, std::move(hist));
}

ClickDistribution click_number_distribution(const TimeTagStream &s, const CycleWindow &w, Index n_max) {
    if (s.n_cycles == 0) throw Error(ErrorCode::InsufficientData, "click distribution needs at least one cycle");
    if (n_max < 0) throw Error(ErrorCode::InvalidArgument, "n_max must be >= 0");
    const std::vector<std::uint32_t> per = clicks_per_cycle(s, w);
    ClickDistribution out;
    out.cycles = s.n_cycles;
    out.counts.assign(std::size_t(n_max + 1), 0);
    std::uint64_t over = 0;
    for (std::uint32_t k : per) {
        if (Index(k) > n_max) {
            ++over;
            ++out.counts.back();
        } else {
            ++out.counts[k];
        }
    }
    Vector<double> p(n_max + 1);
    for (Index k = 0; k <= n_max; ++k) p(k) = double(out.counts[std::size_t(k)]) / double(out.cycles);
    p /= p.sum();
    out.distribution = NumberDistribution::from_normalized(std::move(p), 1e-12);
    out.overflow_mass = double(over) / double(out.cycles);
    out.overflow_warning = out.overflow_mass > 1e-6;
    return out;
}

}  // namespace spadrecon
