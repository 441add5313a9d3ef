#pragma once

// Qubit state parametrizations and the Renyi entropy family.
//
// A qubit whose Bloch vector lies in the x-z plane is described by the
// impurity L = (1 - r^2)/2 in [0, 1/2]. Its eigenvalues are
// lambda_pm = (1 +- r)/2 and the Renyi entropy of order alpha is
//
//     S_alpha(L) = ln(lambda_+^alpha + lambda_-^alpha) / (1 - alpha).
//
// Derivatives with respect to L are taken through m = r^2 = 1 - 2L, in which
// Tr rho^alpha = 2^{1-alpha} sum_k C(alpha, 2k) m^k is analytic, so the
// maximally mixed point L = 1/2 is regular.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "purify/errors.hpp"

namespace purify {

/// Order of a Renyi entropy: a positive real, or infinity (min-entropy).
class RenyiOrder {
public:
    /// Orders with |alpha - 1| below this are evaluated as von Neumann entropy.
    static constexpr double kVonNeumannBand = 1e-8;

    explicit RenyiOrder(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0)) {
            throw DomainError("order must be positive, got " + std::to_string(alpha));
        }
    }

    static RenyiOrder infinity() { return RenyiOrder(std::numeric_limits<double>::infinity()); }

    double value() const { return alpha_; }
    bool is_infinite() const { return std::isinf(alpha_); }
    bool is_von_neumann() const { return std::abs(alpha_ - 1.0) < kVonNeumannBand; }

    friend bool operator==(const RenyiOrder&, const RenyiOrder&) = default;

private:
    double alpha_;
};

/// Impurity L = 1 - Tr rho^2 of a qubit, in [0, 1/2].
class Impurity {
public:
    explicit Impurity(double L) : L_(L) {
        if (!(L >= 0.0)) {
            throw DomainError("impurity must be nonnegative, got " + std::to_string(L));
        }
        if (L > 0.5) {
            throw DomainError("impurity exceeds 1/2, got " + std::to_string(L));
        }
    }

    double value() const { return L_; }
    /// Bloch radius r = sqrt(1 - 2L).
    double bloch_radius() const { return std::sqrt(1.0 - 2.0 * L_); }

private:
    double L_;
};

struct Eigenvalues {
    double plus;
    double minus;
};

/// lambda_pm = (1 +- sqrt(1 - 2L))/2. The smaller one is formed as L/(1 + r)
/// so it keeps full relative precision near pure states.
inline Eigenvalues eigenvalues(Impurity L) {
    const double r = L.bloch_radius();
    return {0.5 * (1.0 + r), L.value() / (1.0 + r)};
}

/// Bloch vector (x, 0, z) with x^2 + z^2 <= 1.
struct BlochState {
    double x = 0.0;
    double z = 1.0;

    static BlochState from_polar(double r, double theta) {
        return {r * std::sin(theta), r * std::cos(theta)};
    }

    double radius() const { return std::hypot(x, z); }
    /// Angle from the z axis.
    double theta() const { return std::atan2(x, z); }

    Impurity impurity() const {
        const double r2 = x * x + z * z;
        if (r2 > 1.0 + 1e-12) {
            throw DomainError("Bloch vector outside the unit ball");
        }
        return Impurity(std::max(0.0, 0.5 * (1.0 - r2)));
    }
};

/// Renyi entropy from the two eigenvalues (plus >= minus >= 0, plus + minus = 1).
inline double renyi_entropy_from_eigenvalues(RenyiOrder order, double plus, double minus) {
    if (order.is_infinite()) {
        return -std::log(plus);
    }
    if (order.is_von_neumann()) {
        const auto xlogx = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
        return -xlogx(plus) - xlogx(minus);
    }
    const double alpha = order.value();
    // ln(p^a + q^a) = a ln p + log1p((q/p)^a); stays finite for huge alpha.
    const double log_trace = alpha * std::log(plus) + std::log1p(std::pow(minus / plus, alpha));
    return std::max(0.0, log_trace / (1.0 - alpha));
}

inline double renyi_entropy(RenyiOrder order, Impurity L) {
    const auto [plus, minus] = eigenvalues(L);
    return renyi_entropy_from_eigenvalues(order, plus, minus);
}

/// dS/dL, d^2S/dL^2, d^3S/dL^3.
struct RenyiDerivatives {
    double first;
    double second;
    double third;
};

namespace detail {

/// Derivatives of some function with respect to the variable m = r^2.
struct MDerivatives {
    double d1, d2, d3;
};

/// Below this value of m the even binomial series is used.
inline constexpr double kSeriesThreshold = 0.25;

/// Converts derivatives with respect to r into derivatives with respect to
/// m = r^2 (d/dm = (1/2r) d/dr). Requires r > 0.
inline MDerivatives r_to_m(double r, double s1, double s2, double s3) {
    const double r2 = r * r;
    const double r3 = r2 * r;
    return {s1 / (2.0 * r),
            s2 / (4.0 * r2) - s1 / (4.0 * r3),
            s3 / (8.0 * r3) - 3.0 * s2 / (8.0 * r2 * r2) + 3.0 * s1 / (8.0 * r3 * r2)};
}

/// ln P(m) with P(m) = sum_k C(alpha, 2k) m^k (Tr rho^alpha up to the constant
/// 2^{1-alpha}), differentiated in m. Valid for 0 <= m <= kSeriesThreshold.
inline MDerivatives log_trace_series(double alpha, double m) {
    double p[4] = {0.0, 0.0, 0.0, 0.0};
    double binom = 1.0;  // C(alpha, 2k)
    for (int k = 0; k < 200; ++k) {
        const double kd = k;
        double falling = 1.0;  // k (k-1) ... (k-j+1)
        for (int j = 0; j < 4 && j <= k; ++j) {
            p[j] += falling * binom * std::pow(m, kd - j);
            falling *= kd - j;
        }
        const double j2 = 2.0 * kd;
        binom *= (alpha - j2) * (alpha - j2 - 1.0) / ((j2 + 1.0) * (j2 + 2.0));
        if (binom == 0.0 || (k >= 3 && m == 0.0)) break;
        if (k >= 3 && std::abs(binom) * (kd + 1.0) * (kd + 1.0) * (kd + 1.0) * std::pow(m, kd - 2.0) < 1e-18) break;
    }
    const double g1 = p[1] / p[0];
    const double g2 = p[2] / p[0] - g1 * g1;
    const double g3 = p[3] / p[0] - 3.0 * g1 * p[2] / p[0] + 2.0 * g1 * g1 * g1;
    return {g1, g2, g3};
}

/// von Neumann entropy S = ln 2 - sum_{k>=1} m^k / ((2k-1) 2k), differentiated in m.
inline MDerivatives von_neumann_series(double m) {
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    for (int k = 1; k < 400; ++k) {
        const double kd = k;
        const double c = 1.0 / ((2.0 * kd - 1.0) * 2.0 * kd);
        d1 -= c * kd * std::pow(m, kd - 1.0);
        if (k >= 2) d2 -= c * kd * (kd - 1.0) * std::pow(m, kd - 2.0);
        if (k >= 3) d3 -= c * kd * (kd - 1.0) * (kd - 2.0) * std::pow(m, kd - 3.0);
        if (k >= 3 && (m == 0.0 || kd * kd * std::pow(m, kd - 2.0) < 1e-18)) break;
    }
    return {d1, d2, d3};
}

/// d^k/dr^k ln[(1+r)^a + (1-r)^a], k = 1..3, with (1+r)^a factored out so
/// large orders do not overflow.
inline MDerivatives log_trace_in_r(double alpha, double r) {
    const double q = (1.0 - r) / (1.0 + r);
    const double u = 1.0 + r;
    const double c2 = alpha * (alpha - 1.0);
    const double c3 = c2 * (alpha - 2.0);
    const double a0 = 1.0 + std::pow(q, alpha);
    const double a1 = alpha / u * (1.0 - std::pow(q, alpha - 1.0));
    const double a2 = c2 == 0.0 ? 0.0 : c2 / (u * u) * (1.0 + std::pow(q, alpha - 2.0));
    const double a3 = c3 == 0.0 ? 0.0 : c3 / (u * u * u) * (1.0 - std::pow(q, alpha - 3.0));
    const double g1 = a1 / a0;
    const double g2 = a2 / a0 - g1 * g1;
    const double g3 = a3 / a0 - 3.0 * g1 * a2 / a0 + 2.0 * g1 * g1 * g1;
    return {g1, g2, g3};
}

inline RenyiDerivatives m_to_L(MDerivatives d) {
    // m = 1 - 2L, so d/dL = -2 d/dm.
    return {-2.0 * d.d1, 4.0 * d.d2, -8.0 * d.d3};
}

}  // namespace detail

/// Analytic first three L-derivatives of S_alpha.
///
/// Throws SingularPointError where a derivative diverges: at L = 0 for
/// alpha < 1 (S' ~ L^{alpha-1}) and for the other non-smooth orders, and at
/// L = 1/2 for the min-entropy, which is not smooth in m there.
inline RenyiDerivatives renyi_derivatives(RenyiOrder order, Impurity L) {
    const double m = 1.0 - 2.0 * L.value();
    const double r = std::sqrt(m);
    const auto singular = [&](const char* why) {
        return SingularPointError(std::string("entropy derivatives diverge at L = ") +
                                  std::to_string(L.value()) + " (" + why + ")");
    };

    if (L.value() == 0.0 && !order.is_infinite()) {
        const double alpha = order.value();
        if (order.is_von_neumann() || alpha < 1.0) throw singular("pure state, alpha <= 1");
    }

    detail::MDerivatives d{};
    if (order.is_infinite()) {
        if (r == 0.0) throw singular("min-entropy at the maximally mixed state");
        // S = ln 2 - ln(1 + r)
        const double u = 1.0 + r;
        d = detail::r_to_m(r, -1.0 / u, 1.0 / (u * u), -2.0 / (u * u * u));
    } else if (order.is_von_neumann()) {
        if (m <= detail::kSeriesThreshold) {
            d = detail::von_neumann_series(m);
        } else {
            const double s = 1.0 - r * r;
            d = detail::r_to_m(r, -std::atanh(r), -1.0 / s, -2.0 * r / (s * s));
        }
    } else {
        const double alpha = order.value();
        detail::MDerivatives g{};
        if (m <= detail::kSeriesThreshold) {
            g = detail::log_trace_series(alpha, m);
        } else {
            const auto gr = detail::log_trace_in_r(alpha, r);
            g = detail::r_to_m(r, gr.d1, gr.d2, gr.d3);
        }
        const double inv = 1.0 / (1.0 - alpha);
        d = {g.d1 * inv, g.d2 * inv, g.d3 * inv};
    }

    const RenyiDerivatives out = detail::m_to_L(d);
    if (!std::isfinite(out.first) || !std::isfinite(out.second) || !std::isfinite(out.third)) {
        throw singular("non-finite derivative");
    }
    return out;
}

}  // namespace purify
