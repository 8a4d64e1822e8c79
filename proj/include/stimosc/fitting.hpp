#pragma once

// Least-squares fits and 1-D search used by the experiment drivers.

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stimosc/errors.hpp"

namespace stimosc::fit {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_error = 0.0;
    double intercept_error = 0.0;
    double r_squared = 0.0;
    double residual_norm = 0.0;
};

inline LinearFit linear(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("linear fit: need >= 2 matching points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear fit: degenerate abscissa");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    f.residual_norm = std::sqrt(ss_res);
    f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    if (n > 2) {
        const double s2 = ss_res / (n - 2);
        f.slope_error = std::sqrt(s2 / sxx);
        f.intercept_error = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    }
    return f;
}

struct Extremum {
    double x = 0.0;
    double value = 0.0;
};

// Golden-section search for the maximum of a unimodal function on [lo, hi].
inline Extremum golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-6,
                                   int max_iter = 200) {
    if (!(hi > lo)) throw std::invalid_argument("golden_section_max: empty interval");
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < max_iter && (b - a) > tol * std::max(1.0, std::abs(a) + std::abs(b)); ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc > fd ? Extremum{c, fc} : Extremum{d, fd};
}

// Generic nonlinear least squares (Levenberg-Marquardt, forward-difference Jacobian).
using Model = std::function<double(const Eigen::VectorXd& p, double x)>;

struct NonlinearFit {
    Eigen::VectorXd params;
    Eigen::VectorXd errors;  // 1σ from (JᵀJ)⁻¹ scaled by residual variance
    double residual_norm = 0.0;
    bool converged = false;
    std::vector<std::string> names;

    double operator[](std::size_t i) const { return params(static_cast<Eigen::Index>(i)); }
};

using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

namespace detail {

struct Residuals {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const ResidualFn* fn;
    int n_params;
    int n_values;

    int inputs() const { return n_params; }
    int values() const { return n_values; }
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
        (*fn)(p, r);
        return 0;
    }
};

}  // namespace detail

inline NonlinearFit least_squares(const ResidualFn& residuals, int n_values, Eigen::VectorXd p0,
                                  std::vector<std::string> names = {}) {
    if (n_values < p0.size()) throw std::invalid_argument("least_squares: need at least as many points as parameters");
    detail::Residuals functor{&residuals, static_cast<int>(p0.size()), n_values};
    Eigen::NumericalDiff<detail::Residuals> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::Residuals>> lm(numdiff);
    lm.parameters.maxfev = 4000;
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-14;
    const auto status = lm.minimize(p0);

    NonlinearFit out;
    out.params = p0;
    out.names = std::move(names);
    out.converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                    status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
    Eigen::VectorXd r(n_values);
    functor(p0, r);
    out.residual_norm = r.norm();

    Eigen::MatrixXd jac(n_values, p0.size());
    numdiff.df(p0, jac);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const int dof = std::max<int>(1, n_values - static_cast<int>(p0.size()));
    const double s2 = r.squaredNorm() / dof;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
    const Eigen::MatrixXd cov = cod.pseudoInverse() * s2;
    out.errors = cov.diagonal().cwiseAbs().cwiseSqrt();
    return out;
}

inline NonlinearFit least_squares(const Model& model, const std::vector<double>& x, const std::vector<double>& y,
                                  Eigen::VectorXd p0, std::vector<std::string> names = {}) {
    if (x.size() != y.size()) throw std::invalid_argument("least_squares: x and y sizes differ");
    ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < x.size(); ++i) r(static_cast<Eigen::Index>(i)) = model(p, x[i]) - y[i];
    };
    return least_squares(fn, static_cast<int>(x.size()), std::move(p0), std::move(names));
}

// ---- standard shapes ----------------------------------------------------

// A / (1 + ((x − x0)/(w/2))²) + c, parameters {A, x0, w, c}; w is the FWHM.
inline double lorentzian_shape(const Eigen::VectorXd& p, double x) {
    const double u = (x - p(1)) / (0.5 * p(2));
    return p(0) / (1.0 + u * u) + p(3);
}

inline NonlinearFit lorentzian(const std::vector<double>& x, const std::vector<double>& y) {
    const auto imax = std::max_element(y.begin(), y.end()) - y.begin();
    const double ymin = *std::min_element(y.begin(), y.end());
    const double peak = y[imax];
    // half-maximum crossings as width guess
    const double half = ymin + 0.5 * (peak - ymin);
    auto left = imax, right = imax;
    while (left > 0 && y[left] > half) --left;
    while (right + 1 < static_cast<long>(y.size()) && y[right] > half) ++right;
    double w = std::max(x[right] - x[left], std::abs(x[1] - x[0]));
    Eigen::VectorXd p0(4);
    p0 << peak - ymin, x[imax], w, ymin;
    auto r = least_squares(lorentzian_shape, x, y, p0, {"amplitude", "center", "fwhm", "offset"});
    r.params(2) = std::abs(r.params(2));
    return r;
}

// A·exp(−x/T) + c, parameters {A, T, c}.
inline double exponential_shape(const Eigen::VectorXd& p, double x) { return p(0) * std::exp(-x / p(1)) + p(2); }

inline NonlinearFit exponential(const std::vector<double>& x, const std::vector<double>& y, bool with_offset = true) {
    const double y0 = y.front(), y1 = y.back();
    // guess T from the 1/e crossing of the span
    const double target = y1 + (y0 - y1) / std::exp(1.0);
    double t_guess = 0.5 * (x.back() - x.front());
    for (std::size_t i = 1; i < y.size(); ++i) {
        if ((y[i - 1] - target) * (y[i] - target) <= 0.0) {
            t_guess = x[i] - x.front();
            break;
        }
    }
    if (!with_offset) {
        Model m = [](const Eigen::VectorXd& p, double t) { return p(0) * std::exp(-t / p(1)); };
        Eigen::VectorXd p0(2);
        p0 << y0, std::max(t_guess, 1e-12);
        return least_squares(m, x, y, p0, {"amplitude", "tau"});
    }
    Eigen::VectorXd p0(3);
    p0 << y0 - y1, std::max(t_guess, 1e-12), y1;
    return least_squares(exponential_shape, x, y, p0, {"amplitude", "tau", "offset"});
}

// A·exp(−x/T)·cos(ω x + φ) + c, parameters {A, T, ω, φ, c}.
inline double damped_cosine_shape(const Eigen::VectorXd& p, double x) {
    return p(0) * std::exp(-x / p(1)) * std::cos(p(2) * x + p(3)) + p(4);
}

inline NonlinearFit damped_cosine(const std::vector<double>& x, const std::vector<double>& y, double omega_guess,
                                  double tau_guess) {
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    const double amp = 0.5 * (*std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end()));
    NonlinearFit best;
    best.residual_norm = INFINITY;
    for (double phase : {0.0, 0.5 * M_PI, M_PI, 1.5 * M_PI}) {
        Eigen::VectorXd p0(5);
        p0 << amp, tau_guess, omega_guess, phase, mean;
        auto r = least_squares(damped_cosine_shape, x, y, p0, {"amplitude", "tau", "omega", "phase", "offset"});
        if (r.residual_norm < best.residual_norm) best = r;
    }
    if (best.params(0) < 0) {
        best.params(0) = -best.params(0);
        best.params(3) += M_PI;
    }
    best.params(3) = std::remainder(best.params(3), 2.0 * M_PI);
    return best;
}

struct AvoidedCrossing {
    double crossing = 0.0;  // abscissa where the bare levels cross
    double level = 0.0;     // fixed bare level
    double gap = 0.0;       // minimum branch separation 2G
    double gap_error = 0.0;
    double slope = 0.0;     // of the swept bare level
    double residual_norm = 0.0;

    double upper(double x) const { return branch(x, 1.0); }
    double lower(double x) const { return branch(x, -1.0); }

private:
    double branch(double x, double sign) const {
        const double swept = level + slope * (x - crossing);
        const double half = 0.5 * gap;
        return 0.5 * (swept + level) + sign * std::sqrt(0.25 * (swept - level) * (swept - level) + half * half);
    }
};

// Branches E±(x) = (L + F)/2 ± sqrt((L − F)²/4 + G²) with a swept bare level
// L(x) = F + s·(x − x_c) and a fixed bare level F.
inline AvoidedCrossing avoided_crossing(const std::vector<double>& x, const std::vector<double>& upper,
                                        const std::vector<double>& lower, double slope_guess) {
    const std::size_t n = x.size();
    if (upper.size() != n || lower.size() != n || n < 3) throw std::invalid_argument("avoided_crossing: bad branches");
    ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < n; ++i) {
            const double level = p(1) + p(3) * (x[i] - p(0));
            const double mid = 0.5 * (level + p(1));
            const double root = std::sqrt(0.25 * (level - p(1)) * (level - p(1)) + p(2) * p(2));
            r(static_cast<Eigen::Index>(i)) = mid + root - upper[i];
            r(static_cast<Eigen::Index>(n + i)) = mid - root - lower[i];
        }
    };
    std::size_t imin = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (upper[i] - lower[i] < upper[imin] - lower[imin]) imin = i;
    Eigen::VectorXd p0(4);
    p0 << x[imin], 0.5 * (upper[imin] + lower[imin]), 0.5 * (upper[imin] - lower[imin]), slope_guess;
    const auto r = least_squares(fn, static_cast<int>(2 * n), p0);
    AvoidedCrossing out;
    out.crossing = r.params(0);
    out.level = r.params(1);
    out.gap = 2.0 * std::abs(r.params(2));
    out.gap_error = 2.0 * r.errors(2);
    out.slope = r.params(3);
    out.residual_norm = r.residual_norm;
    return out;
}

}  // namespace stimosc::fit
