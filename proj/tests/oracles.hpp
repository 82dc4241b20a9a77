#pragma once

// Independent reference computations for the test suite. Nothing here calls
// into the library under test.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

/// Gauss-Hermite rule for the standard normal weight (probabilists'
/// convention) by the Golub-Welsch eigenvalue method:
/// sum_i w_i g(x_i) ~ E[g(Z)], Z ~ N(0, 1).
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    std::vector<double> nodes(n), weights(n);
    for (int i = 0; i < n; ++i) {
        nodes[i] = eig.eigenvalues()[i];
        const double v = eig.eigenvectors()(0, i);
        weights[i] = v * v;
    }
    return {nodes, weights};
}

/// E[g(Z)] for Z ~ N(0, 1) by an n-point Gauss-Hermite rule.
template <typename G>
double normal_expectation(G&& g, int n = 80) {
    const auto [x, w] = gauss_hermite(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * g(x[i]);
    return s;
}

inline double normal_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// E|Z|^p for Z ~ N(0, 1): 2^{p/2} Gamma((p + 1)/2) / sqrt(pi).
inline double abs_normal_moment(double p) {
    return std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1.0)) / std::sqrt(std::numbers::pi);
}

/// E|sigma W_T| = sigma sqrt(2 T / pi).
inline double abs_brownian(double sigma, double horizon) { return sigma * std::sqrt(2.0 * horizon / std::numbers::pi); }

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace oracle
