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

#include "spadrecon/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spadrecon {

ScalarMinimum brent_minimize(const std::function<double(double)> &f, double lo, double hi, double rel_tol,
                             int max_iter) {
    constexpr double kGolden = 0.3819660112501051;
    constexpr double kTiny = 1e-300;
    double a = lo, b = hi;
    double x = a + kGolden * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const double xm = 0.5 * (a + b);
        const double tol1 = rel_tol * std::abs(x) + kTiny + 1e-15;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
        bool golden = true;
        if (std::abs(e) > tol1) {
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double etemp = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
                golden = false;
            }
        }
        if (golden) {
            e = (x >= xm) ? a - x : b - x;
            d = kGolden * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + (d >= 0.0 ? tol1 : -tol1);
        const double fu = f(u);
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    // The interior search never evaluates the end points; a monotone objective wants them.
    const double flo = f(lo), fhi = f(hi);
    if (flo < fx) { x = lo; fx = flo; }
    if (fhi < fx) { x = hi; fx = fhi; }
    return {x, fx, it};
}

namespace {

Matrix<double> numeric_jacobian(const std::function<Vector<double>(const Vector<double> &)> &residuals,
                                const Vector<double> &x, const Vector<double> &r0, double step) {
    Matrix<double> J(r0.size(), x.size());
    for (Index j = 0; j < x.size(); ++j) {
        Vector<double> xp = x;
        const double h = step * std::max(1.0, std::abs(x(j)));
        xp(j) += h;
        J.col(j) = (residuals(xp) - r0) / h;
    }
    return J;
}

}  // namespace

LeastSquaresResult damped_least_squares(const std::function<Vector<double>(const Vector<double> &)> &residuals,
                                        Vector<double> x0, const LeastSquaresOptions &opt) {
    LeastSquaresResult res;
    Vector<double> x = std::move(x0);
    Vector<double> r = residuals(x);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw Error(ErrorCode::FitDiverged, "non-finite residuals at the start point");
    double lambda = 1e-3;
    Matrix<double> J = numeric_jacobian(residuals, x, r, opt.jacobian_step);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Matrix<double> JtJ = J.transpose() * J;
        const Vector<double> g = J.transpose() * r;
        bool improved = false;
        for (int inner = 0; inner < 40; ++inner) {
            Matrix<double> A = JtJ;
            for (Index k = 0; k < A.rows(); ++k) A(k, k) += lambda * std::max(JtJ(k, k), 1e-300);
            const Vector<double> dx = A.ldlt().solve(-g);
            const Vector<double> xn = x + dx;
            const Vector<double> rn = residuals(xn);
            const double cn = rn.squaredNorm();
            if (std::isfinite(cn) && cn <= cost) {
                const double rel_step = dx.norm() / std::max(x.norm(), 1e-300);
                const double rel_cost = (cost - cn) / std::max(cost, 1e-300);
                x = xn;
                r = rn;
                cost = cn;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (rel_step < opt.rel_tol || rel_cost < opt.rel_tol * opt.rel_tol) {
                    res.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            res.converged = true;  // no downhill direction left at machine precision
            break;
        }
        J = numeric_jacobian(residuals, x, r, opt.jacobian_step);
        if (res.converged) break;
    }
    res.x = x;
    res.cost = cost;
    res.iterations = it;
    const Matrix<double> JtJ = J.transpose() * J;
    res.covariance = JtJ.completeOrthogonalDecomposition().pseudoInverse();
    return res;
}

LineFit weighted_line_fit(const std::vector<double> &x, const std::vector<double> &y, const std::vector<double> &w) {
    if (x.size() != y.size() || x.size() != w.size()) throw Error(ErrorCode::DimensionMismatch, "line fit inputs");
    if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "line fit needs >= 2 points");
    double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        S += w[i];
        Sx += w[i] * x[i];
        Sy += w[i] * y[i];
        Sxx += w[i] * x[i] * x[i];
        Sxy += w[i] * x[i] * y[i];
    }
    const double det = S * Sxx - Sx * Sx;
    if (!(std::abs(det) > 0.0)) throw Error(ErrorCode::InsufficientData, "degenerate line fit");
    LineFit f;
    f.intercept = (Sxx * Sy - Sx * Sxy) / det;
    f.slope = (S * Sxy - Sx * Sy) / det;
    f.sigma_intercept = std::sqrt(Sxx / det);
    f.sigma_slope = std::sqrt(S / det);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = y[i] - f.intercept - f.slope * x[i];
        f.chi2 += w[i] * d * d;
    }
    return f;
}

double sample_stddev(const std::vector<double> &v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / double(v.size() - 1));
}

}  // namespace spadrecon
