#pragma once

// Expected Renyi entropy under the null-control (u = 1) protocol.
//
// With the state kept diagonal, the record w after elapsed time tau fixes the
// Bloch component z(w, L0) = tanh(2w + atanh c), c = sqrt(1 - 2 L0), and w has
// density
//
//   p(w) = (cosh 2w + c sinh 2w) exp(-w^2 / 2tau) / sqrt(2 pi tau) exp(-2tau)
//        = (1+c)/2 N(w; 2tau, tau) + (1-c)/2 N(w; -2tau, tau).
//
// The second form is integrated with Gauss-Hermite rules per component. An
// adaptive trapezoid over the printed density is kept as an independent route.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>
#include <boost/math/tools/roots.hpp>

#include "purify/axis.hpp"
#include "purify/errors.hpp"
#include "purify/renyi.hpp"

namespace purify {

/// Nodes and weights for E[f(X)], X ~ N(0, 1).
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Orthonormal Hermite recurrence (physicists' convention, weight exp(-x^2)).
// Returns {p_n(z), p_n'(z)}.
inline std::pair<double, double> hermite_orthonormal(std::size_t n, double z) {
    double p1 = 1.0 / std::pow(std::numbers::pi, 0.25), p2 = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / jd) * p2 - std::sqrt((jd - 1.0) / jd) * p3;
    }
    return {p1, std::sqrt(2.0 * static_cast<double>(n)) * p2};
}

// Positive roots are bracketed by a sign scan finer than the smallest root
// spacing, then polished by safeguarded Newton; the rule is rescaled to the
// standard normal.
inline GaussHermiteRule build_gauss_hermite(std::size_t n) {
    if (n == 0) throw QuadratureError("Gauss-Hermite rule needs at least one node");
    const double nd = static_cast<double>(n);
    const double top = std::sqrt(2.0 * nd + 1.0) + 1.0;
    const double step = 0.05 / std::sqrt(nd);
    std::vector<double> roots;
    if (n % 2 == 1) roots.push_back(0.0);
    double a = n % 2 == 1 ? step : 0.0;
    double fa = hermite_orthonormal(n, a).first;
    for (double b = a + step; b <= top && roots.size() < (n + 1) / 2; a = b, b += step) {
        const double fb = hermite_orthonormal(n, b).first;
        if (fa * fb < 0.0) {
            std::uintmax_t iterations = 100;
            roots.push_back(boost::math::tools::newton_raphson_iterate(
                [n](double z) { return hermite_orthonormal(n, z); }, 0.5 * (a + b), a, b, 52, iterations));
        }
        fa = fb;
    }
    if (roots.size() != (n + 1) / 2) throw QuadratureError("Gauss-Hermite root scan missed nodes");

    std::vector<double> x, w;
    for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
        if (*it == 0.0) continue;
        x.push_back(-*it);
    }
    for (double r : roots) x.push_back(r);
    std::sort(x.begin(), x.end());
    GaussHermiteRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double pp = hermite_orthonormal(n, x[i]).second;
        rule.nodes[i] = std::numbers::sqrt2 * x[i];
        rule.weights[i] = 2.0 / (pp * pp) / std::sqrt(std::numbers::pi);
    }
    return rule;
}

}  // namespace detail

/// Shared, lazily built rule with n nodes.
inline const GaussHermiteRule& gauss_hermite_rule(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, GaussHermiteRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::build_gauss_hermite(n)).first;
    return it->second;
}

inline constexpr std::size_t kDefaultHermiteNodes = 200;
/// Refinement ladder used when the default rule is not yet converged. The
/// integrand has complex singularities at distance ~pi/(8 sqrt(tau)) in the
/// standardized variable, so Hermite convergence slows as tau grows; past the
/// ladder the adaptive trapezoid takes over.
inline constexpr std::array<std::size_t, 3> kHermiteLadder{200, 300, 400};
/// Accepted disagreement between consecutive ladder rules.
inline constexpr double kQuadratureTolerance = 1e-8;

/// z(w, L0) = (c cosh 2w + sinh 2w) / (cosh 2w + c sinh 2w), evaluated as tanh(2w + atanh c).
inline double z_of_w(double w, Impurity L0) {
    const double c = L0.bloch_radius();
    if (c >= 1.0) return 1.0;
    return std::tanh(2.0 * w + std::atanh(c));
}

/// The record density p(w; L0, tau) as printed (cosh/sinh times a Gaussian).
/// cosh 2w + c sinh 2w cancels for w < 0, so it is evaluated in long double;
/// where that overflows the mixture form is used.
inline double wr_weight(double w, Impurity L0, double tau) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    const long double c = L0.bloch_radius();
    const long double x = w, t = tau;
    const long double value = (std::cosh(2.0L * x) + c * std::sinh(2.0L * x)) * std::exp(-x * x / (2.0L * t)) /
                              std::sqrt(2.0L * std::numbers::pi_v<long double> * t) * std::exp(-2.0L * t);
    if (std::isfinite(value)) return static_cast<double>(value);
    const auto normal = [tau](double y, double mu) {
        return std::exp(-(y - mu) * (y - mu) / (2.0 * tau)) / std::sqrt(2.0 * std::numbers::pi * tau);
    };
    return 0.5 * (1.0 + L0.bloch_radius()) * normal(w, 2.0 * tau) + 0.5 * (1.0 - L0.bloch_radius()) * normal(w, -2.0 * tau);
}

/// The same density as a two-Gaussian mixture.
inline double wr_weight_mixture(double w, Impurity L0, double tau) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    const double c = L0.bloch_radius();
    const auto normal = [tau](double x, double mu) {
        return std::exp(-(x - mu) * (x - mu) / (2.0 * tau)) / std::sqrt(2.0 * std::numbers::pi * tau);
    };
    return 0.5 * (1.0 + c) * normal(w, 2.0 * tau) + 0.5 * (1.0 - c) * normal(w, -2.0 * tau);
}

/// S_alpha of the state reached with record w. Eigenvalues are formed as
/// logistic functions of 2(2w + atanh c) so neither loses precision near a pure state.
inline double wr_entropy_given_record(RenyiOrder order, double w, Impurity L0) {
    const double c = L0.bloch_radius();
    if (c >= 1.0) return 0.0;
    const double x = 2.0 * (2.0 * w + std::atanh(c));
    const double up = 1.0 / (1.0 + std::exp(-x));   // (1 + z)/2
    const double down = 1.0 / (1.0 + std::exp(x));  // (1 - z)/2
    return renyi_entropy_from_eigenvalues(order, std::max(up, down), std::min(up, down));
}

/// Gauss-Hermite evaluation with a fixed node count, no convergence check.
inline double wr_expected_entropy_rule(RenyiOrder order, Impurity L0, double tau, std::size_t nodes) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (L0.value() == 0.0) return 0.0;
    const auto& rule = gauss_hermite_rule(nodes);
    const double c = L0.bloch_radius();
    const double sd = std::sqrt(tau);
    double up = 0.0, down = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double shift = sd * rule.nodes[i];
        up += rule.weights[i] * wr_entropy_given_record(order, 2.0 * tau + shift, L0);
        down += rule.weights[i] * wr_entropy_given_record(order, -2.0 * tau + shift, L0);
    }
    return 0.5 * (1.0 + c) * up + 0.5 * (1.0 - c) * down;
}

namespace detail {

// Each half-line on either side of the kink w* = -atanh(c)/2 by exp-sinh.
inline double wr_min_entropy_split(Impurity L0, double tau) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (L0.value() == 0.0) return 0.0;
    const double kink = -0.5 * std::atanh(L0.bloch_radius());
    const auto order = RenyiOrder::infinity();
    boost::math::quadrature::exp_sinh<double> integrator;
    double value = 0.0;
    for (double side : {1.0, -1.0}) {
        double error = 0.0;
        value += integrator.integrate(
            [&](double s) {
                const double w = kink + side * s;
                return wr_entropy_given_record(order, w, L0) * wr_weight_mixture(w, L0, tau);
            },
            1e-12, &error);
        if (!(error <= 0.5 * kQuadratureTolerance)) {
            throw QuadratureError("min-entropy half-line integral did not converge (error " +
                                  full_precision(error) + ") at L0 = " + full_precision(L0.value()) +
                                  ", tau = " + full_precision(tau));
        }
    }
    return std::clamp(value, 0.0, std::numbers::ln2);
}

}  // namespace detail

/// Integration window for the adaptive route: both Gaussian centres plus 12 sd.
inline double wr_window(double tau) { return 2.0 * tau + 12.0 * std::sqrt(tau); }

namespace detail {

template <typename F>
double wr_trapezoid(F&& integrand, double tau, double tolerance, double* error) {
    const double b = wr_window(tau);
    const double value = boost::math::quadrature::trapezoidal(integrand, -b, b, tolerance, 20, error);
    if (!std::isfinite(value)) throw QuadratureError("adaptive trapezoid produced a non-finite value");
    return value;
}

}  // namespace detail

/// Adaptive trapezoid of f(w) p(w) over the window, with the printed density.
template <typename F>
double wr_integrate_adaptive(F&& f, Impurity L0, double tau, double tolerance = 1e-13) {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    double error = 0.0;
    return detail::wr_trapezoid([&](double w) { return f(w) * wr_weight(w, L0, tau); }, tau, tolerance, &error);
}

/// Total mass of p(w; L0, tau); 1 up to quadrature error.
inline double wr_weight_integral(Impurity L0, double tau) {
    return wr_integrate_adaptive([](double) { return 1.0; }, L0, tau);
}

/// Validation route for wr_expected_entropy.
inline double wr_expected_entropy_adaptive(RenyiOrder order, Impurity L0, double tau) {
    return wr_integrate_adaptive([&](double w) { return wr_entropy_given_record(order, w, L0); }, L0, tau);
}

/// E[S_alpha(t) | L0, t0] under u = 1 after elapsed time tau > 0.
/// Walks up kHermiteLadder until consecutive rules agree to
/// kQuadratureTolerance, then falls back to the adaptive trapezoid; throws
/// QuadratureError if that does not reach the tolerance either. The
/// min-entropy has a kink where z changes sign, so it is integrated piecewise.
inline double wr_expected_entropy(RenyiOrder order, Impurity L0, double tau) {
    if (order.is_infinite()) return detail::wr_min_entropy_split(L0, tau);
    double previous = wr_expected_entropy_rule(order, L0, tau, kHermiteLadder.front());
    double gap = 0.0;
    for (std::size_t k = 1; k < kHermiteLadder.size(); ++k) {
        const double value = wr_expected_entropy_rule(order, L0, tau, kHermiteLadder[k]);
        gap = std::abs(value - previous);
        if (gap <= kQuadratureTolerance) return std::clamp(value, 0.0, std::numbers::ln2);
        previous = value;
    }
    double error = 0.0;
    const double value = detail::wr_trapezoid(
        [&](double w) { return wr_entropy_given_record(order, w, L0) * wr_weight_mixture(w, L0, tau); }, tau,
        1e-12, &error);
    if (!(error <= kQuadratureTolerance)) {
        throw QuadratureError("quadrature did not converge (Hermite gap " + detail::full_precision(gap) +
                              ", trapezoid error " + detail::full_precision(error) + ") at alpha = " +
                              detail::full_precision(order.value()) + ", L0 = " + detail::full_precision(L0.value()) +
                              ", tau = " + detail::full_precision(tau));
    }
    return std::clamp(value, 0.0, std::numbers::ln2);
}

inline void write_wr_table_csv(std::ostream& out, std::span<const RenyiOrder> orders, std::span<const double> L0s,
                               std::span<const double> taus) {
    out << "alpha,L0,tau,expected_entropy\n";
    for (const auto& order : orders) {
        for (double L0 : L0s) {
            for (double tau : taus) {
                out << (order.is_infinite() ? std::string("inf") : detail::full_precision(order.value())) << ','
                    << detail::full_precision(L0) << ',' << detail::full_precision(tau) << ','
                    << detail::full_precision(wr_expected_entropy(order, Impurity(L0), tau)) << '\n';
            }
        }
    }
}

}  // namespace purify
