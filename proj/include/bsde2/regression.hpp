#pragma once

// Least-squares projection on bivariate monomials in (x, m), used for the
// conditional expectations of the probabilistic scheme.

#include "bsde2/core.hpp"
#include "bsde2/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bsde2 {

struct RegressionBasis {
    int degree = 2;

    /// Number of monomials x^p m^q with p + q <= degree.
    std::size_t size() const { return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2); }
};

namespace detail {

inline constexpr std::size_t kReductionChunk = 8192;

/// Accumulates fn(lo, hi, acc) over fixed chunks of [0, n) and merges the
/// partial sums in chunk order; the result does not depend on the worker
/// count.
template <typename T, typename Fn>
T chunked_sum(std::size_t n, std::size_t workers, T zero, Fn&& fn) {
    const std::size_t chunks = (n + kReductionChunk - 1) / kReductionChunk;
    std::vector<T> partial(chunks, zero);
    parallel_for(0, chunks, workers, [&](std::size_t c) {
        T acc = zero;
        fn(c * kReductionChunk, std::min(n, (c + 1) * kReductionChunk), acc);
        partial[c] = acc;
    });
    T total = zero;
    for (const auto& p : partial) total += p;
    return total;
}

}  // namespace detail

/// Standardized monomial features; coordinates with no spread are dropped.
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(std::span<const double> x, std::span<const double> m, int degree, std::size_t workers) {
        const std::size_t n = x.size();
        const double inv_n = 1.0 / static_cast<double>(n);
        Eigen::Vector2d s = detail::chunked_sum(n, workers, Eigen::Vector2d::Zero().eval(),
                                                [&](std::size_t lo, std::size_t hi, Eigen::Vector2d& acc) {
                                                    for (std::size_t i = lo; i < hi; ++i) {
                                                        acc[0] += x[i];
                                                        acc[1] += m[i];
                                                    }
                                                });
        x_mean_ = s[0] * inv_n;
        m_mean_ = s[1] * inv_n;
        Eigen::Vector2d q = detail::chunked_sum(n, workers, Eigen::Vector2d::Zero().eval(),
                                                [&](std::size_t lo, std::size_t hi, Eigen::Vector2d& acc) {
                                                    for (std::size_t i = lo; i < hi; ++i) {
                                                        const double dx = x[i] - x_mean_;
                                                        const double dm = m[i] - m_mean_;
                                                        acc[0] += dx * dx;
                                                        acc[1] += dm * dm;
                                                    }
                                                });
        x_scale_ = std::sqrt(q[0] * inv_n);
        m_scale_ = std::sqrt(q[1] * inv_n);
        use_x_ = x_scale_ > 1e-12 * std::max(1.0, std::abs(x_mean_));
        use_m_ = m_scale_ > 1e-12 * std::max(1.0, std::abs(m_mean_));
        set_degree(degree);
    }

    void set_degree(int degree) {
        degree_ = degree;
        powers_.clear();
        for (int d = 0; d <= degree; ++d) {
            for (int q = 0; q <= d; ++q) {
                const int p = d - q;
                if ((p > 0 && !use_x_) || (q > 0 && !use_m_)) continue;
                powers_.emplace_back(p, q);
            }
        }
    }

    int degree() const noexcept { return degree_; }
    std::size_t size() const noexcept { return powers_.size(); }
    bool uses_x() const noexcept { return use_x_; }
    bool uses_m() const noexcept { return use_m_; }

    template <typename Out>
    void evaluate(double x, double m, Out& out) const {
        const double u = use_x_ ? (x - x_mean_) / x_scale_ : 0.0;
        const double w = use_m_ ? (m - m_mean_) / m_scale_ : 0.0;
        for (std::size_t f = 0; f < powers_.size(); ++f) {
            out[static_cast<Eigen::Index>(f)] = ipow(u, powers_[f].first) * ipow(w, powers_[f].second);
        }
    }

private:
    static double ipow(double v, int p) {
        double r = 1.0;
        for (int i = 0; i < p; ++i) r *= v;
        return r;
    }

    double x_mean_ = 0.0, x_scale_ = 1.0, m_mean_ = 0.0, m_scale_ = 1.0;
    bool use_x_ = false, use_m_ = false;
    int degree_ = 0;
    std::vector<std::pair<int, int>> powers_;
};

/// Ordinary least squares on a fixed design; several regressands may be
/// fitted against one factorization.
class Regressor {
public:
    Regressor(std::span<const double> x, std::span<const double> m, int degree, std::size_t workers,
              double max_condition = 1e12)
        : x_(x), m_(m), workers_(workers), map_(x, m, degree, workers) {
        for (int d = degree; d >= 0; --d) {
            map_.set_degree(d);
            build_gram();
            if (condition_ <= max_condition) break;
            if (d == 0) throw Error(ErrorKind::RankDeficientBasis, "constant-only design is singular");
            reduced_ = true;
        }
        ldlt_.compute(gram_);
    }

    const FeatureMap& features() const noexcept { return map_; }
    double condition() const noexcept { return condition_; }
    bool reduced() const noexcept { return reduced_; }

    Eigen::VectorXd fit(std::span<const double> y) const {
        const auto k = static_cast<Eigen::Index>(map_.size());
        Eigen::VectorXd rhs = detail::chunked_sum(y.size(), workers_, Eigen::VectorXd::Zero(k).eval(),
                                                  [&](std::size_t lo, std::size_t hi, Eigen::VectorXd& acc) {
                                                      Eigen::VectorXd phi(k);
                                                      for (std::size_t i = lo; i < hi; ++i) {
                                                          map_.evaluate(x_[i], m_[i], phi);
                                                          acc += y[i] * phi;
                                                      }
                                                  });
        return ldlt_.solve(rhs);
    }

    double predict(std::size_t i, const Eigen::VectorXd& coef) const {
        thread_local Eigen::VectorXd phi;
        phi.resize(coef.size());
        map_.evaluate(x_[i], m_[i], phi);
        return phi.dot(coef);
    }

private:
    void build_gram() {
        const auto k = static_cast<Eigen::Index>(map_.size());
        gram_ = detail::chunked_sum(x_.size(), workers_, Eigen::MatrixXd::Zero(k, k).eval(),
                                    [&](std::size_t lo, std::size_t hi, Eigen::MatrixXd& acc) {
                                        Eigen::VectorXd phi(k);
                                        for (std::size_t i = lo; i < hi; ++i) {
                                            map_.evaluate(x_[i], m_[i], phi);
                                            acc.selfadjointView<Eigen::Lower>().rankUpdate(phi);
                                        }
                                    });
        gram_ = gram_.selfadjointView<Eigen::Lower>();
        const Eigen::VectorXd d = gram_.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd normalized = d.asDiagonal() * gram_ * d.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }

    std::span<const double> x_;
    std::span<const double> m_;
    std::size_t workers_;
    FeatureMap map_;
    Eigen::MatrixXd gram_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    double condition_ = 1.0;
    bool reduced_ = false;
};

}  // namespace bsde2
