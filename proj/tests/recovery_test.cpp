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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "spadrecon/recovery.hpp"

using namespace spadrecon;

namespace {
const LossProfileModel kLoss{0.1, 0.25};
}

TEST(EventString, ParseRoundTrip) {
    for (const char *s : {"[*]", "[*#][o#][#]", "[*oo][*][#]"}) EXPECT_EQ(EventString::parse(s).to_string(), s);
    EXPECT_EQ(EventString::parse("[*#][o#][#]").photon_count(), 5);
    EXPECT_THROW(EventString::parse("[*x]"), Error);
    EXPECT_THROW(EventString::parse("[*"), Error);
}

TEST(EventString, ClickCounts) {
    EXPECT_EQ(click_count(EventString::parse("[*]")), 1);
    EXPECT_EQ(click_count(EventString::parse("[*o]")), 1);
    EXPECT_EQ(click_count(EventString::parse("[*#]")), 2);
    EXPECT_EQ(click_count(EventString::parse("[*#][#]")), 3);
    EXPECT_EQ(click_count(EventString::parse("[*#][o]")), 2);
    EXPECT_EQ(click_count(EventString::parse("[*][*]")), 2);
}

TEST(EventString, SixEventExpansion) {
    using S = EventSymbol;
    const auto ev = expand_symbol_string({S::Armed, S::Twilight, S::Lost, S::Twilight, S::Twilight});
    ASSERT_EQ(ev.size(), 6u);
    std::multiset<Index> clicks;
    for (const auto &e : ev) {
        clicks.insert(click_count(e));
        EXPECT_EQ(e.photon_count(), 5);
        EXPECT_TRUE(is_enumerable(e));
    }
    EXPECT_EQ(clicks, (std::multiset<Index>{2, 3, 3, 3, 4, 4}));
}

TEST(Enumeration, MatchesBruteForceSets) {
    // Small grids are enough to hit every reachable event for n <= 4 with T / t_rec = 4.
    const int bins[5] = {0, 40, 40, 40, 40};
    for (int n = 1; n <= 4; ++n) {
        const auto brute = oracle::brute_force_events(n, bins[n], 1.0, kLoss);
        std::set<std::string> lib, ref;
        for (const auto &e : enumerate_events(n, n)) lib.insert(e.to_string());
        for (const auto &[k, v] : brute) {
            ref.insert(k);
            EXPECT_EQ(click_count(EventString::parse(k)), v.clicks) << k;
        }
        EXPECT_EQ(lib, ref) << "n = " << n;
    }
}

TEST(Enumeration, OrderLimitsNonArmedPhotons) {
    for (const auto &e : enumerate_events(4, 1)) {
        int non_armed = 0;
        for (const auto &g : e.groups)
            for (auto s : g) non_armed += s != EventSymbol::Armed;
        EXPECT_LE(non_armed, 1);
    }
    EXPECT_EQ(enumerate_events(3, 0).size(), 1u);
}

TEST(OrderedNormalization, FlatProfileConvergesToSimplexVolume) {
    // Time-ordered integral of a flat unit profile over [0, 1] is 1/m!, with a
    // second-order grid error.
    const auto a = ordered_normalization(PhotonProfile::flat(1.0, 50), 5);
    const auto b = ordered_normalization(PhotonProfile::flat(1.0, 100), 5);
    double fact = 1.0;
    for (Index m = 0; m <= 5; ++m) {
        if (m > 0) fact *= double(m);
        const double ea = a[std::size_t(m)] - 1.0 / fact, eb = b[std::size_t(m)] - 1.0 / fact;
        EXPECT_LT(std::abs(ea), 1e-4) << m;
        if (std::abs(ea) > 1e-12) EXPECT_NEAR(ea / eb, 4.0, 0.05) << m;
    }
}

TEST(EventProbability, MatchesBruteForceOnSameGrid) {
    // Same midpoint grid on both sides; with t_dead and t_rec on bin edges the two
    // discretizations agree to first order in the bin width.
    for (int n = 1; n <= 3; ++n) {
        const int M = 200;
        const auto brute = oracle::brute_force_events(n, M, 1.0, kLoss);
        const auto brute2 = oracle::brute_force_events(n, 2 * M, 1.0, kLoss);
        for (const auto &e : enumerate_events(n, n)) {
            const std::string s = e.to_string();
            const double lib = event_probability(e, PhotonProfile::flat(1.0, 2 * M), kLoss, 1.0);
            const double step = std::abs(brute2.at(s).probability - brute.at(s).probability);
            EXPECT_NEAR(lib, brute2.at(s).probability, 2.0 * step + 1e-4) << s;
        }
    }
}

TEST(EventProbability, AllEventsSumToOne) {
    const PhotonProfile g(1.0 / 200, std::vector<double>(200, 1.0));
    for (Index n = 1; n <= 5; ++n) {
        double total = 0.0;
        for (const auto &e : enumerate_events(n, n)) total += event_probability(e, g, kLoss, 1.0);
        EXPECT_NEAR(total, 1.0, 1e-6) << n;
    }
}

TEST(EventProbability, NoRecoveryMeansAllArmed) {
    const LossProfileModel none{0.0, 0.0};
    const auto g = PhotonProfile::flat(1.0, 100);
    EXPECT_NEAR(event_probability(EventString::parse("[*][*][*]"), g, none, 1.0), 1.0, 1e-12);
    EXPECT_NEAR(event_probability(EventString::parse("[*o][*]"), g, none, 1.0), 0.0, 1e-12);
}

TEST(RecoveryMatrix, ColumnsAndTruncation) {
    const auto g = PhotonProfile::flat(1.0, 200);
    Vector<double> prev;
    for (Index o : {1, 2, 3, 5}) {
        const RecoveryMatrix R = build_recovery_matrix(g, kLoss, 1.0, 5, o);
        for (Index j = 0; j < R.matrix.cols(); ++j) {
            EXPECT_NEAR(R.matrix.col(j).sum(), 1.0, 1e-12);
            EXPECT_GE(R.matrix.col(j).minCoeff(), 0.0);
            EXPECT_LE(R.raw_column_sums(j), 1.0 + 1e-9);
        }
        if (prev.size()) EXPECT_TRUE((R.raw_column_sums.array() >= prev.array() - 1e-12).all());
        prev = R.raw_column_sums;
        EXPECT_EQ(R.matrix(0, 0), 1.0);
    }
    // o_R >= n_max: nothing truncated.
    const RecoveryMatrix full = build_recovery_matrix(g, kLoss, 1.0, 5, 5);
    for (Index j = 0; j <= 5; ++j) EXPECT_NEAR(full.raw_column_sums(j), 1.0, 1e-6);
}

TEST(RecoveryMatrix, ClickDistributionMatchesBruteForce) {
    const RecoveryMatrix R = build_recovery_matrix(PhotonProfile::flat(1.0, 160), kLoss, 1.0, 3, 3);
    const auto coarse = oracle::brute_force_clicks(3, 80, 1.0, kLoss);
    const auto fine = oracle::brute_force_clicks(3, 160, 1.0, kLoss);
    for (std::size_t m = 0; m < fine.size() && m <= 3; ++m)
        EXPECT_NEAR(R.matrix(Index(m), 3), fine[m], 2.0 * std::abs(fine[m] - coarse[m]) + 2e-3) << m;
}
