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

#ifndef SPADRECON_NUMERICS_HPP
#define SPADRECON_NUMERICS_HPP

#include <functional>
#include <vector>

#include "spadrecon/core.hpp"

namespace spadrecon {

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Brent's bounded minimizer on [lo, hi]; rel_tol is relative to |x|.
ScalarMinimum brent_minimize(const std::function<double(double)> &f, double lo, double hi, double rel_tol = 1e-10,
                             int max_iter = 500);

struct LeastSquaresOptions {
    int max_iter = 200;
    double rel_tol = 1e-10;
    /// Relative forward-difference step for the numeric Jacobian.
    double jacobian_step = 1e-7;
};

struct LeastSquaresResult {
    Vector<double> x;
    double cost = 0.0;  ///< Sum of squared residuals.
    Matrix<double> covariance;  ///< (J^T J)^-1 at the solution.
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on a residual vector function.
LeastSquaresResult damped_least_squares(const std::function<Vector<double>(const Vector<double> &)> &residuals,
                                        Vector<double> x0, const LeastSquaresOptions &opt = {});

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double sigma_intercept = 0.0;
    double sigma_slope = 0.0;
    double chi2 = 0.0;
};

/// Weighted straight-line fit y = a + b x with weights w = 1/sigma^2.
LineFit weighted_line_fit(const std::vector<double> &x, const std::vector<double> &y, const std::vector<double> &w);

/// Sample standard deviation (n - 1 denominator).
double sample_stddev(const std::vector<double> &v);

}  // namespace spadrecon

#endif  // SPADRECON_NUMERICS_HPP
