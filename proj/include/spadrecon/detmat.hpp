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

#ifndef SPADRECON_DETMAT_HPP
#define SPADRECON_DETMAT_HPP

#include <algorithm>
#include <cmath>

#include "spadrecon/core.hpp"
#include "spadrecon/recovery.hpp"

namespace spadrecon {

struct EmeConfig;

inline constexpr Index kDefaultAfterpulseOrder = 2;

namespace detail {

template <typename Scalar>
Scalar binomial(Index n, Index k) {
    if (k < 0 || k > n) return Scalar(0);
    k = std::min(k, n - k);
    Scalar c(1);
    for (Index i = 1; i <= k; ++i) c = c * Scalar(n - k + i) / Scalar(i);
    return c;
}

// 0^0 = 1 so that eta0 = 1 or p = 0 give exact identities.
template <typename Scalar>
Scalar ipow(Scalar x, Index e) {
    Scalar r(1);
    for (Index i = 0; i < e; ++i) r *= x;
    return r;
}

}  // namespace detail

/// Loss matrix: binomial thinning with efficiency eta0. Upper triangular.
template <typename Scalar = double>
Matrix<Scalar> build_loss_matrix(Scalar eta0, Index n_max) {
    if (!(eta0 >= Scalar(0) && eta0 <= Scalar(1)) || n_max < 0) {
        throw Error(ErrorCode::InvalidArgument, "build_loss_matrix needs 0 <= eta0 <= 1, n_max >= 0");
    }
    Matrix<Scalar> L = Matrix<Scalar>::Zero(n_max + 1, n_max + 1);
    for (Index n = 0; n <= n_max; ++n) {
        for (Index m = 0; m <= n; ++m) {
            L(m, n) = detail::binomial<Scalar>(n, m) * detail::ipow(eta0, m) * detail::ipow(Scalar(1) - eta0, n - m);
        }
    }
    return L;
}

/// Background matrix for mean background count p_b = r_b T. Last row absorbs the tail.
template <typename Scalar = double>
Matrix<Scalar> build_background_matrix(Scalar p_b, Index n_max) {
    using std::exp;
    if (!(p_b >= Scalar(0)) || n_max < 0) {
        throw Error(ErrorCode::InvalidArgument, "build_background_matrix needs p_b >= 0, n_max >= 0");
    }
    Matrix<Scalar> B = Matrix<Scalar>::Zero(n_max + 1, n_max + 1);
    const Scalar e = exp(-p_b);
    for (Index n = 0; n <= n_max; ++n) {
        Scalar term = e;
        Scalar acc(0);
        for (Index m = n; m < n_max; ++m) {
            B(m, n) = term;
            acc += term;
            term = term * p_b / Scalar(m - n + 1);
        }
        B(n_max, n) = Scalar(1) - acc;
    }
    return B;
}

/// Afterpulse matrix with at most o_a afterpulses per column; the next row absorbs the rest.
template <typename Scalar = double>
Matrix<Scalar> build_afterpulse_matrix(Scalar p_a, Index n_max, Index o_a = kDefaultAfterpulseOrder) {
    if (!(p_a >= Scalar(0) && p_a < Scalar(1)) || n_max < 0 || o_a < 0) {
        throw Error(ErrorCode::InvalidArgument, "build_afterpulse_matrix needs 0 <= p_a < 1, o_a >= 0");
    }
    Matrix<Scalar> A = Matrix<Scalar>::Zero(n_max + 1, n_max + 1);
    A(0, 0) = Scalar(1);
    for (Index m = 1; m <= n_max; ++m) {
        const Scalar base = detail::ipow(Scalar(1) - p_a, m);
        for (Index k = 0; k <= o_a && m + k <= n_max; ++k) {
            // k afterpulses shared among m clicks: C(k + m - 1, m - 1) compositions.
            A(m + k, m) = detail::binomial<Scalar>(k + m - 1, m - 1) * base * detail::ipow(p_a, k);
        }
        const Index fix = std::min(m + o_a + 1, n_max);
        A(fix, m) = Scalar(0);
        A(fix, m) = Scalar(1) - A.col(m).sum();
    }
    return A;
}

template <typename Derived>
bool is_column_stochastic(const Eigen::MatrixBase<Derived> &M, double tol) {
    using Scalar = typename Derived::Scalar;
    if (M.rows() != M.cols()) return false;
    for (Index j = 0; j < M.cols(); ++j) {
        if (std::abs(double(M.col(j).sum() - Scalar(1))) > tol) return false;
        if ((M.col(j).array() < Scalar(-tol)).any()) return false;
    }
    return true;
}

template <typename Scalar>
struct BasicDetectorMatrix {
    Matrix<Scalar> matrix;
    Matrix<Scalar> A, R, B, L;

    Index n_max() const { return matrix.rows() - 1; }
};

using DetectorMatrix = BasicDetectorMatrix<double>;

/// D = A R B L.
template <typename Scalar>
BasicDetectorMatrix<Scalar> compose(const Matrix<Scalar> &A, const Matrix<Scalar> &R, const Matrix<Scalar> &B,
                                    const Matrix<Scalar> &L) {
    const Index n = L.rows();
    for (const Matrix<Scalar> *f : {&A, &R, &B, &L}) {
        if (f->rows() != n || f->cols() != n) throw Error(ErrorCode::DimensionMismatch, "factor matrix sizes differ");
    }
    BasicDetectorMatrix<Scalar> d;
    d.A = A;
    d.R = R;
    d.B = B;
    d.L = L;
    d.matrix.noalias() = A * (R * (B * L));
    return d;
}

/// In-window afterpulse probability of one click, averaged over gamma.
double afterpulse_window_probability(const PhotonProfile &gamma, const AfterpulseProfile &ap, double T);

struct DetectorModelOptions {
    Index n_max = 10;
    Index o_R = 4;
    Index o_a = kDefaultAfterpulseOrder;
};

/// Builds all four factors from characterized parameters and the measured photon profile.
DetectorMatrix build_detector_matrix(const DetectorParams &params, const PhotonProfile &gamma,
                                     const DetectorModelOptions &opt);

/// Same, but reuses a prebuilt recovery matrix (R does not depend on eta0, r_b or p_a).
DetectorMatrix build_detector_matrix(const DetectorParams &params, const PhotonProfile &gamma, const Matrix<double> &R,
                                     Index o_a = kDefaultAfterpulseOrder);

/// Smallest o_R in [1, max_order] whose reconstructed distance to the fitted Poissonian
/// moves by less than tol when o_R is doubled.
Index choose_recovery_order(const NumberDistribution &C, const DetectorParams &params, const PhotonProfile &gamma,
                            Index n_max, const EmeConfig &cfg, Index max_order = 16, double tol = 1e-3);

}  // namespace spadrecon

#endif  // SPADRECON_DETMAT_HPP
