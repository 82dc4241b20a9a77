#pragma once

#include "bsde2/core.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bsde2 {

enum class IncrementKind { Gaussian, Trinomial, FtwDensity };

inline const char* to_string(IncrementKind k) {
    switch (k) {
        case IncrementKind::Gaussian: return "gaussian";
        case IncrementKind::Trinomial: return "trinomial";
        case IncrementKind::FtwDensity: return "ftw";
    }
    return "unknown";
}

struct Outcome {
    double value;
    double prob;
};

namespace detail {

inline double std_normal_pdf(double v) {
    return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double v) {
    return 0.5 * std::erfc(-v / std::numbers::sqrt2);
}

inline double std_normal_quantile(double u) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, u);
}

// E|Z|^p for Z ~ N(0, 1)
inline double std_normal_abs_moment(double p) {
    return std::pow(2.0, 0.5 * p) * boost::math::tgamma(0.5 * (p + 1.0)) / std::sqrt(std::numbers::pi);
}

}  // namespace detail

/// Weight turning the Gaussian(0, a0 dt) density into the density of an
/// increment with variance a dt.
inline double ftw_weight(double a, double a0, double dt, double x) {
    const double r = (a - a0) / a0;
    return 1.0 - 0.5 * r + 0.5 * r * x * x / (a0 * dt);
}

/// Density of the controlled increment built on the base level a0.
inline double ftw_density(double a, double a0, double dt, double x) {
    if (!(a0 > 0.0) || !(dt > 0.0)) {
        throw Error(ErrorKind::DomainViolation, "ftw density needs a0 > 0 and dt > 0");
    }
    if (a < a0 || a > 3.0 * a0) {
        throw Error(ErrorKind::DomainViolation, "ftw density needs a0 <= a <= 3 a0");
    }
    const double s = std::sqrt(a0 * dt);
    return detail::std_normal_pdf(x / s) / s * ftw_weight(a, a0, dt, x);
}

/// One-step martingale increments H(a, u): mean zero, variance a dt and a
/// (2 + delta)-moment bound C dt^{1 + delta/2}.
class IncrementFamily {
public:
    static IncrementFamily gaussian(double a_max, double dt) {
        check_common(a_max, dt);
        IncrementFamily f(IncrementKind::Gaussian, a_max, dt);
        return f;
    }

    /// Three-point law {-dx, 0, dx} with P[+-dx] = p_a / 2, p_a = a dt / dx^2,
    /// so that the variance is p_a dx^2 = a dt.
    static IncrementFamily trinomial(double a_max, double dt, double dx) {
        check_common(a_max, dt);
        if (!(dx > 0.0)) throw Error(ErrorKind::DomainViolation, "trinomial space step must be positive");
        IncrementFamily f(IncrementKind::Trinomial, a_max, dt);
        f.dx_ = dx;
        const double p = f.trinomial_probability(a_max);
        if (p > 0.5 + 1e-12) {
            std::ostringstream os;
            os << "p_a = " << p << " > 1/2 at a = " << a_max << " (dt = " << dt << ", dx = " << dx << ")";
            throw Error(ErrorKind::CflViolation, os.str());
        }
        return f;
    }

    static IncrementFamily ftw(double a0, double a_max, double dt) {
        check_common(a_max, dt);
        if (!(a0 > 0.0) || a_max > 3.0 * a0 || a_max < a0) {
            throw Error(ErrorKind::DomainViolation, "ftw family needs 0 < a0 <= a_max <= 3 a0");
        }
        IncrementFamily f(IncrementKind::FtwDensity, a_max, dt);
        f.a0_ = a0;
        return f;
    }

    IncrementKind kind() const noexcept { return kind_; }
    double dt() const noexcept { return dt_; }
    double dx() const noexcept { return dx_; }
    double a0() const noexcept { return a0_; }
    double a_max() const noexcept { return a_max_; }
    bool discrete() const noexcept { return kind_ == IncrementKind::Trinomial; }

    double trinomial_probability(double a) const { return a * dt_ / (dx_ * dx_); }

    /// Declared constant C of E|H|^{2+delta} <= C dt^{1+delta/2}, valid for
    /// every a <= a_max.
    double moment_constant(double delta) const {
        const double p = 2.0 + delta;
        switch (kind_) {
            case IncrementKind::Gaussian:
                return std::pow(a_max_, 0.5 * p) * detail::std_normal_abs_moment(p);
            case IncrementKind::Trinomial:
                // a dt dx^delta with dx = c sqrt(dt)
                return a_max_ * std::pow(dx_ / std::sqrt(dt_), delta);
            case IncrementKind::FtwDensity: {
                const double r = (a_max_ - a0_) / a0_;
                return std::pow(a0_, 0.5 * p) * detail::std_normal_abs_moment(p) * (1.0 + 0.5 * r * p);
            }
        }
        return 0.0;
    }

    std::string support_description() const {
        std::ostringstream os;
        if (kind_ == IncrementKind::Trinomial) {
            os << "{-" << dx_ << ", 0, " << dx_ << "}";
        } else {
            os << "R";
        }
        return os.str();
    }

    /// Discrete law for the trinomial family, ordered {-dx, 0, +dx}.
    std::vector<Outcome> outcomes(double a) const {
        if (kind_ != IncrementKind::Trinomial) {
            throw Error(ErrorKind::DomainViolation, "continuous increment family has no finite outcome set");
        }
        const double p = checked_probability(a);
        return {{-dx_, 0.5 * p}, {0.0, 1.0 - p}, {dx_, 0.5 * p}};
    }

    /// Density for the continuous families.
    double density(double a, double x) const {
        check_control(a);
        switch (kind_) {
            case IncrementKind::Gaussian: {
                const double s = std::sqrt(a * dt_);
                return detail::std_normal_pdf(x / s) / s;
            }
            case IncrementKind::FtwDensity:
                return ftw_density(a, a0_, dt_, x);
            case IncrementKind::Trinomial:
                break;
        }
        throw Error(ErrorKind::DomainViolation, "trinomial family has no density");
    }

    /// H(a, u) for u in (0, 1). Pure function of its arguments.
    double sample(double a, double u) const {
        check_control(a);
        if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::DomainViolation, "uniform variate must lie in (0, 1)");
        switch (kind_) {
            case IncrementKind::Gaussian:
                return std::sqrt(a * dt_) * detail::std_normal_quantile(u);
            case IncrementKind::Trinomial: {
                const double p = checked_probability(a);
                if (u < 0.5 * p) return -dx_;
                if (u >= 1.0 - 0.5 * p) return dx_;
                return 0.0;
            }
            case IncrementKind::FtwDensity:
                return std::sqrt(a0_ * dt_) * ftw_standard_quantile((a - a0_) / a0_, u);
        }
        return 0.0;
    }

private:
    IncrementFamily(IncrementKind kind, double a_max, double dt) : kind_(kind), a_max_(a_max), dt_(dt) {}

    static void check_common(double a_max, double dt) {
        if (!(a_max > 0.0)) throw Error(ErrorKind::DomainViolation, "control must be positive");
        if (!(dt > 0.0)) throw Error(ErrorKind::DomainViolation, "time step must be positive");
    }

    void check_control(double a) const {
        if (!(a > 0.0)) throw Error(ErrorKind::DomainViolation, "control must be positive");
        if (kind_ == IncrementKind::FtwDensity && (a < a0_ || a > 3.0 * a0_)) {
            throw Error(ErrorKind::DomainViolation, "ftw increments need a0 <= a <= 3 a0");
        }
    }

    double checked_probability(double a) const {
        check_control(a);
        const double p = trinomial_probability(a);
        if (p > 0.5 + 1e-12) {
            std::ostringstream os;
            os << "p_a = " << p << " > 1/2 at a = " << a;
            throw Error(ErrorKind::CflViolation, os.str());
        }
        return std::min(p, 0.5);
    }

    // Inverse of F(v) = Phi(v) - r/2 v phi(v), the standardized CDF.
    static double ftw_standard_quantile(double r, double u) {
        auto cdf = [r](double v) { return detail::std_normal_cdf(v) - 0.5 * r * v * detail::std_normal_pdf(v); };
        double lo = -40.0, hi = 40.0;
        double v = detail::std_normal_quantile(u);
        for (int it = 0; it < 200; ++it) {
            const double g = cdf(v) - u;
            if (g > 0.0) hi = v; else lo = v;
            const double dens = detail::std_normal_pdf(v) * (1.0 + 0.5 * r * (v * v - 1.0));
            double next = dens > 0.0 ? v - g / dens : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - v) <= 1e-15 * std::max(1.0, std::abs(v))) return next;
            v = next;
        }
        return v;
    }

    IncrementKind kind_;
    double a_max_;
    double dt_;
    double dx_ = 0.0;
    double a0_ = 0.0;
};

inline IncrementFamily gaussian_increment(double a_max, double dt) { return IncrementFamily::gaussian(a_max, dt); }
inline IncrementFamily trinomial_increment(double a_max, double dt, double dx) {
    return IncrementFamily::trinomial(a_max, dt, dx);
}
inline IncrementFamily ftw_increment(double a0, double a_max, double dt) { return IncrementFamily::ftw(a0, a_max, dt); }

// ---------------------------------------------------------------------------
// Moment contract validation
// ---------------------------------------------------------------------------

struct MomentRow {
    double a = 0.0;
    double mean = 0.0;
    double var = 0.0;
    double var_target = 0.0;
    double moment = 0.0;  // E|H|^{2+delta}
    double bound = 0.0;   // C dt^{1+delta/2}
    bool pass = false;
};

struct MomentFailure {
    std::string check;  // "mean", "variance", "moment" or "cfl"
    double a = 0.0;
    double residual = 0.0;
};

struct MomentReport {
    IncrementKind kind = IncrementKind::Gaussian;
    std::vector<MomentRow> rows;
    std::vector<MomentFailure> failures;
    bool cfl_violation = false;

    bool passed() const { return failures.empty(); }
};

struct MomentCheckOptions {
    double delta = 1.0;
    double tol = 1e-10;
    // fault injection hook: target variance is variance_scale * a dt
    double variance_scale = 1.0;
};

namespace detail {

// Integral of g(x) rho(x) over the real line, in units of the standard
// deviation scale s.
template <typename G, typename Rho>
double integrate_against(G&& g, Rho&& rho, double s) {
    using boost::math::quadrature::gauss_kronrod;
    auto integrand = [&](double v) { return g(s * v) * rho(s * v) * s; };
    double err = 0.0;
    const double left = gauss_kronrod<double, 61>::integrate(integrand, -40.0, 0.0, 15, 1e-14, &err);
    const double right = gauss_kronrod<double, 61>::integrate(integrand, 0.0, 40.0, 15, 1e-14, &err);
    return left + right;
}

}  // namespace detail

/// Checks mean zero, variance a dt and the (2 + delta)-moment bound for every
/// control on the grid. Trinomial moments are closed form; the continuous
/// families are integrated numerically.
inline MomentReport validate_moments(const IncrementFamily& fam, const ControlSet& cs,
                                     const MomentCheckOptions& opt = {}) {
    if (!(opt.delta > 0.0)) throw Error(ErrorKind::Config, "moment check needs delta > 0");
    MomentReport report;
    report.kind = fam.kind();
    const double dt = fam.dt();
    const double p_exp = 2.0 + opt.delta;
    const double bound = fam.moment_constant(opt.delta) * std::pow(dt, 1.0 + 0.5 * opt.delta);

    for (double a : make_control_grid(cs)) {
        MomentRow row;
        row.a = a;
        row.var_target = opt.variance_scale * a * dt;
        row.bound = bound;
        if (fam.kind() == IncrementKind::Trinomial) {
            const double p = fam.trinomial_probability(a);
            if (p > 0.5 + 1e-12) {
                report.cfl_violation = true;
                report.failures.push_back({"cfl", a, p - 0.5});
                row.pass = false;
                row.mean = row.var = row.moment = std::numeric_limits<double>::quiet_NaN();
                report.rows.push_back(row);
                continue;
            }
            // symmetric law with P[+-dx] = p/2: p dx^2 = a dt and p dx^{2+delta} = a dt dx^delta
            row.mean = 0.0;
            row.var = a * dt;
            row.moment = a * dt * std::pow(fam.dx(), opt.delta);
        } else {
            const double s = std::sqrt((fam.kind() == IncrementKind::FtwDensity ? fam.a0() : a) * dt);
            auto rho = [&](double x) { return fam.density(a, x); };
            row.mean = detail::integrate_against([](double x) { return x; }, rho, s);
            const double second = detail::integrate_against([](double x) { return x * x; }, rho, s);
            row.var = second - row.mean * row.mean;
            row.moment = detail::integrate_against([p_exp](double x) { return std::pow(std::abs(x), p_exp); }, rho, s);
        }
        row.pass = true;
        if (std::abs(row.mean) > opt.tol) {
            report.failures.push_back({"mean", a, row.mean});
            row.pass = false;
        }
        if (std::abs(row.var - row.var_target) > opt.tol) {
            report.failures.push_back({"variance", a, row.var - row.var_target});
            row.pass = false;
        }
        if (row.moment > bound + opt.tol) {
            report.failures.push_back({"moment", a, row.moment - bound});
            row.pass = false;
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace bsde2
