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

#include "spadrecon/recovery.hpp"

#include <algorithm>
#include <functional>

namespace spadrecon {

Index EventString::photon_count() const {
    Index n = 0;
    for (const auto &g : groups) n += Index(g.size());
    return n;
}

std::string EventString::to_string() const {
    std::string s;
    for (const auto &g : groups) {
        s.push_back('[');
        for (EventSymbol sym : g) {
            s.push_back(sym == EventSymbol::Armed ? '*' : sym == EventSymbol::Twilight ? '#' : 'o');
        }
        s.push_back(']');
    }
    return s;
}

EventString EventString::parse(std::string_view text) {
    EventString e;
    bool open = false;
    for (char c : text) {
        if (c == ' ') continue;
        if (c == '[') {
            if (open) throw Error(ErrorCode::ParseError, "nested group in event string");
            e.groups.emplace_back();
            open = true;
        } else if (c == ']') {
            if (!open || e.groups.back().empty()) throw Error(ErrorCode::ParseError, "empty or unopened group");
            open = false;
        } else {
            if (!open) throw Error(ErrorCode::ParseError, "symbol outside a group");
            if (c == '*') {
                e.groups.back().push_back(EventSymbol::Armed);
            } else if (c == '#') {
                e.groups.back().push_back(EventSymbol::Twilight);
            } else if (c == 'o') {
                e.groups.back().push_back(EventSymbol::Lost);
            } else {
                throw Error(ErrorCode::ParseError, std::string("unknown event symbol '") + c + "'");
            }
        }
    }
    if (open) throw Error(ErrorCode::ParseError, "unterminated group");
    return e;
}

std::vector<EventString> expand_symbol_string(const std::vector<EventSymbol> &symbols) {
    if (symbols.empty() || symbols.front() != EventSymbol::Armed) {
        throw Error(ErrorCode::InvalidArgument, "symbol string must start with an armed photon");
    }
    // Substrings start at each armed photon.
    std::vector<std::vector<EventSymbol>> subs;
    for (EventSymbol s : symbols) {
        if (s == EventSymbol::Armed) subs.emplace_back();
        subs.back().push_back(s);
    }
    // Per substring: every way of placing at most one split in each twilight-led segment.
    std::vector<std::vector<std::vector<std::vector<EventSymbol>>>> options(subs.size());
    for (std::size_t si = 0; si < subs.size(); ++si) {
        const auto &sub = subs[si];
        const std::size_t len = sub.size();
        // A split index i means a boundary between photon i and i+1.
        std::vector<std::vector<std::size_t>> segment_choices;
        for (std::size_t a = 0; a < len; ++a) {
            if (sub[a] != EventSymbol::Twilight) continue;
            std::size_t b = a + 1;
            while (b < len && sub[b] != EventSymbol::Twilight) ++b;
            std::vector<std::size_t> choices;
            for (std::size_t i = a; i + 1 < std::min(b + 1, len) && i < b; ++i) choices.push_back(i);
            segment_choices.push_back(std::move(choices));
        }
        std::vector<std::size_t> picks;
        std::function<void(std::size_t)> rec = [&](std::size_t k) {
            if (k == segment_choices.size()) {
                std::vector<std::vector<EventSymbol>> groups(1);
                std::size_t pi = 0;
                for (std::size_t i = 0; i < len; ++i) {
                    groups.back().push_back(sub[i]);
                    while (pi < picks.size() && picks[pi] == std::size_t(-1)) ++pi;
                    if (pi < picks.size() && picks[pi] == i) {
                        groups.emplace_back();
                        ++pi;
                    }
                }
                options[si].push_back(std::move(groups));
                return;
            }
            picks.push_back(std::size_t(-1));
            rec(k + 1);
            picks.pop_back();
            for (std::size_t c : segment_choices[k]) {
                picks.push_back(c);
                rec(k + 1);
                picks.pop_back();
            }
        };
        rec(0);
    }
    std::vector<EventString> out;
    std::vector<std::size_t> idx(subs.size(), 0);
    for (;;) {
        EventString e;
        for (std::size_t si = 0; si < subs.size(); ++si) {
            for (const auto &g : options[si][idx[si]]) e.groups.push_back(g);
        }
        out.push_back(std::move(e));
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == options[k].size()) idx[k++] = 0;
        if (k == idx.size()) break;
    }
    return out;
}

std::vector<EventString> enumerate_events(Index n_photons, Index o_R) {
    if (n_photons < 1 || o_R < 0) throw Error(ErrorCode::InvalidArgument, "enumerate_events needs n >= 1, o_R >= 0");
    std::vector<EventString> out;
    std::vector<EventSymbol> s{EventSymbol::Armed};
    std::function<void(Index)> rec = [&](Index non_armed) {
        if (Index(s.size()) == n_photons) {
            auto events = expand_symbol_string(s);
            out.insert(out.end(), events.begin(), events.end());
            return;
        }
        for (EventSymbol sym : {EventSymbol::Armed, EventSymbol::Twilight, EventSymbol::Lost}) {
            const Index na = non_armed + (sym == EventSymbol::Armed ? 0 : 1);
            if (na > o_R) continue;
            s.push_back(sym);
            rec(na);
            s.pop_back();
        }
    };
    rec(0);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Index click_count(const EventString &e) {
    Index clicks = Index(e.groups.size());
    Index last_armed_group = -1;
    for (std::size_t gi = 0; gi < e.groups.size(); ++gi) {
        const auto &g = e.groups[gi];
        if (g.front() != EventSymbol::Armed) continue;
        last_armed_group = Index(gi);
        if (gi == 0) continue;
        // Nearest preceding non-lost photon.
        for (std::ptrdiff_t pj = std::ptrdiff_t(gi) - 1; pj >= 0; --pj) {
            const auto &pg = e.groups[std::size_t(pj)];
            auto it = std::find_if(pg.rbegin(), pg.rend(), [](EventSymbol s) { return s != EventSymbol::Lost; });
            if (it == pg.rend()) continue;
            if (*it == EventSymbol::Twilight && pj == std::ptrdiff_t(gi) - 1) ++clicks;
            break;
        }
    }
    if (!e.groups.empty()) {
        const auto &last = e.groups.back();
        const bool twilight_in_last = std::find(last.begin(), last.end(), EventSymbol::Twilight) != last.end();
        if (twilight_in_last && last_armed_group >= 0) ++clicks;
    }
    return clicks;
}

bool is_enumerable(const EventString &e) {
    if (e.groups.empty() || e.groups.front().empty() || e.groups.front().front() != EventSymbol::Armed) return false;
    bool prev_has_twilight = false;
    for (std::size_t gi = 0; gi < e.groups.size(); ++gi) {
        const auto &g = e.groups[gi];
        if (g.empty()) return false;
        for (std::size_t k = 1; k < g.size(); ++k) {
            if (g[k] == EventSymbol::Armed) return false;
        }
        if (gi > 0 && g.front() != EventSymbol::Armed && !prev_has_twilight) return false;
        prev_has_twilight = std::find(g.begin(), g.end(), EventSymbol::Twilight) != g.end();
    }
    return true;
}

namespace {

// Discrete evaluation of the nested event integrals.
//
// Photon times sit at bin midpoints; the recovery window is K whole bins. An inner
// integral over [a, b) of the piecewise-constant profile, with a and b at midpoints,
// gives weight 1/2 to the end bins and 1 to the bins between, so the in-recovery,
// continuation and armed intervals tile the time axis exactly and event sums
// reproduce the normalization integral to rounding.
//
// A state after placing photon k is (r, L): r is the reference bin of the current
// group and L = (photon bin - r) in [0, K]. Planes hold the accumulated integrand
// mass for every state.
class Dp {
   public:
    Dp(const PhotonProfile &gamma, const LossProfileModel &loss)
        : g_(gamma.masses()), M_(Index(g_.size())), K_(LossGrid(loss, gamma.bin_width()).rec_bins), stride_(K_ + 1) {
        const LossGrid grid(loss, gamma.bin_width());
        d_.resize(std::size_t(K_ + 1));
        for (Index L = 0; L <= K_; ++L) d_[std::size_t(L)] = grid(L);
    }

    Index bins() const { return M_; }
    Index rec_bins() const { return K_; }
    std::size_t plane_size() const { return std::size_t(M_ * stride_); }

    double sym_weight(EventSymbol s, Index L) const {
        const double d = d_[std::size_t(L)];
        return s == EventSymbol::Lost ? d : 1.0 - d;
    }

    void star_first(std::vector<double> &out) const {
        for (Index j = 0; j < M_; ++j) out[idx(j, 0)] += g_[std::size_t(j)];
    }

    void in_group(const std::vector<double> &in, std::vector<double> &out, EventSymbol s) const {
        for (Index r = 0; r < M_; ++r) {
            const Index lmax = std::min(K_, M_ - 1 - r);
            double acc = 0.0;
            for (Index L = 0; L <= lmax; ++L) {
                const double v = in[idx(r, L)];
                const double total = (L < K_) ? acc + 0.5 * v : 0.5 * acc;
                if (total != 0.0) out[idx(r, L)] += total * g_[std::size_t(r + L)] * sym_weight(s, L);
                acc += v;
            }
        }
    }

    void continuation(const std::vector<double> &in, std::vector<double> &out, EventSymbol s) const {
        for (Index r = 0; r + K_ < M_; ++r) {
            double S = 0.0;
            const Index lin = std::min(K_, M_ - 1 - r);
            for (Index L = 0; L <= lin; ++L) S += in[idx(r, L)];
            if (S == 0.0) continue;
            const Index rp = r + K_;
            const Index lmax = std::min(K_, M_ - 1 - rp);
            for (Index L = 0; L <= lmax; ++L) {
                const double w = (L == 0 || L == K_) ? 0.5 : 1.0;
                out[idx(rp, L)] += S * w * g_[std::size_t(rp + L)] * sym_weight(s, L);
            }
        }
    }

    /// Next armed photon; its interval starts c recovery windows after the group reference.
    void star_next(const std::vector<double> &in, std::vector<double> &out, Index c) const {
        std::vector<double> A(std::size_t(M_), 0.0);
        for (Index r = 0; r < M_; ++r) {
            const Index lin = std::min(K_, M_ - 1 - r);
            double S = 0.0;
            for (Index L = 0; L <= lin; ++L) S += in[idx(r, L)];
            A[std::size_t(r)] = S;
        }
        double prefix = 0.0;  // sum of A[x] for x < j - cK
        const Index shift = c * K_;
        for (Index j = 0; j < M_; ++j) {
            const Index x0 = j - shift;
            if (x0 < 0) continue;
            const double val = prefix + 0.5 * A[std::size_t(x0)];
            if (val != 0.0) out[idx(j, 0)] += g_[std::size_t(j)] * val;
            prefix += A[std::size_t(x0)];
        }
    }

    static double total(const std::vector<double> &plane) {
        double s = 0.0;
        for (double v : plane) s += v;
        return s;
    }

    std::vector<double> normalization(Index m_max) const {
        std::vector<double> N(std::size_t(m_max + 1), 0.0);
        N[0] = 1.0;
        if (m_max == 0) return N;
        std::vector<double> q = g_;
        N[1] = 1.0;
        for (Index m = 2; m <= m_max; ++m) {
            std::vector<double> nq(q.size());
            double prefix = 0.0;
            for (std::size_t j = 0; j < q.size(); ++j) {
                nq[j] = g_[j] * (prefix + 0.5 * q[j]);
                prefix += q[j];
            }
            q.swap(nq);
            double s = 0.0;
            for (double v : q) s += v;
            N[std::size_t(m)] = s;
        }
        return N;
    }

   private:
    std::size_t idx(Index r, Index L) const { return std::size_t(r * stride_ + L); }

    std::vector<double> g_;
    Index M_;
    Index K_;
    Index stride_;
    std::vector<double> d_;
};

void check_window(const PhotonProfile &gamma, double T) {
    if (!(std::abs(gamma.window() - T) <= 1e-9 * std::max(T, 1e-300))) {
        throw Error(ErrorCode::InvalidArgument, "window T does not match the photon profile");
    }
}

}  // namespace

std::vector<double> ordered_normalization(const PhotonProfile &gamma, Index m_max) {
    return Dp(gamma, LossProfileModel{}).normalization(m_max);
}

double event_probability(const EventString &event, const PhotonProfile &gamma, const LossProfileModel &loss,
                         double T) {
    check_window(gamma, T);
    if (!is_enumerable(event)) throw Error(ErrorCode::InvalidArgument, "malformed event " + event.to_string());
    const Dp dp(gamma, loss);
    const Index n = event.photon_count();
    if (dp.rec_bins() == 0) {
        for (const auto &g : event.groups) {
            for (EventSymbol s : g) {
                if (s != EventSymbol::Armed) return 0.0;
            }
        }
        return 1.0;
    }
    std::vector<double> cur(dp.plane_size(), 0.0), next(dp.plane_size(), 0.0);
    bool prev_group_twilight = false;
    for (std::size_t gi = 0; gi < event.groups.size(); ++gi) {
        const auto &grp = event.groups[gi];
        for (std::size_t k = 0; k < grp.size(); ++k) {
            std::fill(next.begin(), next.end(), 0.0);
            if (gi == 0 && k == 0) {
                dp.star_first(next);
            } else if (k == 0 && grp[k] == EventSymbol::Armed) {
                dp.star_next(cur, next, prev_group_twilight ? 2 : 1);
            } else if (k == 0) {
                dp.continuation(cur, next, grp[k]);
            } else {
                dp.in_group(cur, next, grp[k]);
            }
            cur.swap(next);
        }
        prev_group_twilight = std::find(grp.begin(), grp.end(), EventSymbol::Twilight) != grp.end();
    }
    const double Nm = dp.normalization(n)[std::size_t(n)];
    if (!(Nm > 0.0)) throw Error(ErrorCode::NumericalUnderflow, "normalization N_m vanished");
    return Dp::total(cur) / Nm;
}

RecoveryMatrix build_recovery_matrix(const PhotonProfile &gamma, const LossProfileModel &loss, double T, Index n_max,
                                     Index o_R) {
    if (n_max < 0 || o_R < 0) throw Error(ErrorCode::InvalidArgument, "build_recovery_matrix needs n_max, o_R >= 0");
    check_window(gamma, T);
    const Dp dp(gamma, loss);
    RecoveryMatrix R;
    R.order = o_R;
    R.window = T;
    R.loss = loss;
    R.gamma_hash = gamma.hash();
    const Index N = n_max + 1;
    R.matrix = Matrix<double>::Zero(N, N);
    R.raw_column_sums = Vector<double>::Ones(N);
    R.matrix(0, 0) = 1.0;
    if (n_max == 0) return R;
    if (dp.rec_bins() == 0) {
        R.matrix.setIdentity();
        return R;
    }
    const std::vector<double> Nm = dp.normalization(n_max);
    for (Index m = 1; m <= n_max; ++m) {
        if (!(Nm[std::size_t(m)] > 0.0)) throw Error(ErrorCode::NumericalUnderflow, "normalization N_m vanished");
    }

    // Automaton over (s = non-armed photons so far, b = groups holding a twilight, f = current group has one).
    const Index smax = std::min(o_R, n_max - 1);
    auto key = [smax](Index s, Index b, Index f) { return std::size_t((s * (smax + 1) + b) * 2 + f); };
    const std::size_t nkeys = std::size_t((smax + 1) * (smax + 1) * 2);
    std::vector<std::vector<double>> cur(nkeys), next(nkeys);
    auto plane = [&](std::vector<std::vector<double>> &set, std::size_t k) -> std::vector<double> & {
        if (set[k].empty()) set[k].assign(dp.plane_size(), 0.0);
        return set[k];
    };
    dp.star_first(plane(cur, key(0, 0, 0)));

    for (Index n = 1; n <= n_max; ++n) {
        for (Index s = 0; s <= smax; ++s) {
            for (Index b = 0; b <= s; ++b) {
                for (Index f = 0; f <= 1; ++f) {
                    const auto &p = cur[key(s, b, f)];
                    if (p.empty()) continue;
                    const Index clicks = (n - s) + b;
                    R.matrix(clicks, n) += Dp::total(p) / Nm[std::size_t(n)];
                }
            }
        }
        if (n == n_max) break;
        for (auto &p : next) p.clear();
        for (Index s = 0; s <= smax; ++s) {
            for (Index b = 0; b <= s; ++b) {
                for (Index f = 0; f <= 1; ++f) {
                    const auto &p = cur[key(s, b, f)];
                    if (p.empty()) continue;
                    dp.star_next(p, plane(next, key(s, b, 0)), f ? 2 : 1);
                    if (s + 1 > smax) continue;
                    dp.in_group(p, plane(next, key(s + 1, b, f)), EventSymbol::Lost);
                    dp.in_group(p, plane(next, key(s + 1, f ? b : b + 1, 1)), EventSymbol::Twilight);
                    if (f) {
                        dp.continuation(p, plane(next, key(s + 1, b, 0)), EventSymbol::Lost);
                        dp.continuation(p, plane(next, key(s + 1, b + 1, 1)), EventSymbol::Twilight);
                    }
                }
            }
        }
        cur.swap(next);
    }

    for (Index n = 0; n < N; ++n) {
        R.raw_column_sums(n) = R.matrix.col(n).sum();
        if (n - o_R > 1) {
            const Index row = n - o_R - 1;
            R.matrix(row, n) = 0.0;
            R.matrix(row, n) = std::max(0.0, 1.0 - R.matrix.col(n).sum());
        }
    }
    return R;
}

}  // namespace spadrecon
