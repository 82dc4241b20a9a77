#pragma once

#include "bsde2/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace bsde2 {

struct UniformAxis {
    double min = 0.0;
    double step = 1.0;
    std::size_t count = 1;

    double at(std::size_t i) const { return min + static_cast<double>(i) * step; }
    double max() const { return at(count - 1); }

    // Fractional index of v; values within 1e-9 of a node snap onto it.
    double position(double v) const {
        const double pos = (v - min) / step;
        const double r = std::round(pos);
        return std::abs(pos - r) < 1e-9 ? r : pos;
    }
};

/// Values u(t_k, x_i, m_j) on a rectangular lattice, x-major.
class ValueGrid {
public:
    ValueGrid() = default;
    ValueGrid(UniformAxis x, UniformAxis m, double fill = 0.0)
        : x_(x), m_(m), values_(x.count * m.count, fill) {
        if (!(x.step > 0.0) || !(m.step > 0.0) || x.count == 0 || m.count == 0) {
            throw Error(ErrorKind::Config, "value grid needs positive steps and nonempty axes");
        }
    }

    const UniformAxis& x_axis() const noexcept { return x_; }
    const UniformAxis& m_axis() const noexcept { return m_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * m_.count + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * m_.count + j]; }

    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    /// Row i read at fractional m-position pos: linear interpolation,
    /// clamped to the end nodes.
    double at_position(std::size_t i, double pos) const {
        const double* row = &values_[i * m_.count];
        if (pos <= 0.0) return row[0];
        const double last = static_cast<double>(m_.count - 1);
        if (pos >= last) return row[m_.count - 1];
        const double fl = std::floor(pos);
        const auto j = static_cast<std::size_t>(fl);
        const double w = pos - fl;
        if (w == 0.0) return row[j];
        return (1.0 - w) * row[j] + w * row[j + 1];
    }

    double at_m(std::size_t i, double m) const { return at_position(i, m_.position(m)); }

    template <typename F>
    void fill(F&& f) {
        for (std::size_t i = 0; i < x_.count; ++i) {
            const double x = x_.at(i);
            for (std::size_t j = 0; j < m_.count; ++j) (*this)(i, j) = f(x, m_.at(j));
        }
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    UniformAxis x_;
    UniformAxis m_;
    std::vector<double> values_;
};

}  // namespace bsde2
