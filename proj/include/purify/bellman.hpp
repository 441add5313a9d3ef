#pragma once

// Finite-difference Bellman residuals for candidate value functions.
//
// With tau = T - t, a value function V(L, tau) solves the Bellman equation of
// the impurity control problem iff
//
//   dV/dt - 4L dV/dL + min{0, Dt[V]} = 0,   Dt[V] = 4L(1-2L)(dV/dL + 2L d2V/dL2),
//
// where the min is over u in [0, 1] of u^2 Dt[V]. The discretization noise
// floor comes from repeating the computation on a grid with halved spacings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "purify/axis.hpp"
#include "purify/errors.hpp"
#include "purify/parallel.hpp"
#include "purify/renyi.hpp"
#include "purify/sde.hpp"
#include "purify/wr_analytic.hpp"

namespace purify {

/// V(L, tau) = S_alpha(L e^{-4 tau}) for u = 0, whose evolution is deterministic.
inline double jacobs_value(RenyiOrder order, Impurity L, double tau) {
    if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
    return renyi_entropy(order, Impurity(L.value() * std::exp(-4.0 * tau)));
}

enum class ValueSource { jacobs_closed_form, wr_quadrature };

inline std::string to_string(ValueSource source) {
    return source == ValueSource::jacobs_closed_form ? "jacobs-closed-form" : "wr-quadrature";
}

inline constexpr std::size_t kMinStencilPoints = 5;

struct ValueFunctionGrid {
    ValueSource source = ValueSource::jacobs_closed_form;
    RenyiOrder order{2.0};
    std::vector<double> L_axis;
    std::vector<double> tau_axis;
    std::vector<double> V;  ///< L-major: V[i * tau_axis.size() + j]
    double hL = 0.0;
    double htau = 0.0;

    double at(std::size_t i, std::size_t j) const { return V[i * tau_axis.size() + j]; }
};

namespace detail {

inline double uniform_spacing(const std::vector<double>& axis, const char* name) {
    if (axis.size() < kMinStencilPoints) {
        throw ConfigError(std::string(name) + " axis needs at least 5 points for central stencils");
    }
    const double h = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
    if (!(h > 0.0)) throw ConfigError(std::string(name) + " axis must be increasing");
    for (std::size_t k = 1; k < axis.size(); ++k) {
        if (std::abs(axis[k] - axis[k - 1] - h) > 1e-6 * h) {
            throw ConfigError(std::string(name) + " axis is not uniform");
        }
    }
    return h;
}

inline std::vector<double> halved(const std::vector<double>& axis) {
    return uniform_axis(axis.front(), axis.back(), 2 * axis.size() - 1);
}

}  // namespace detail

/// Samples V on the L x tau lattice. Failures name the offending cell.
inline ValueFunctionGrid build_value_grid(ValueSource source, RenyiOrder order, std::vector<double> L_axis,
                                          std::vector<double> tau_axis, unsigned threads = 0) {
    ValueFunctionGrid grid;
    grid.source = source;
    grid.order = order;
    grid.hL = detail::uniform_spacing(L_axis, "L");
    grid.htau = detail::uniform_spacing(tau_axis, "tau");
    if (L_axis.front() < 0.0 || L_axis.back() > 0.5) throw ConfigError("L axis must lie in [0, 1/2]");
    if (tau_axis.front() < 0.0) throw ConfigError("tau axis must be nonnegative");
    if (source == ValueSource::wr_quadrature && !(tau_axis.front() > 0.0)) {
        throw ConfigError("wr-quadrature grids need tau > 0 everywhere");
    }
    grid.L_axis = std::move(L_axis);
    grid.tau_axis = std::move(tau_axis);
    const std::size_t nt = grid.tau_axis.size();
    grid.V.resize(grid.L_axis.size() * nt);

    parallel_for(grid.V.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double L = grid.L_axis[k / nt];
            const double tau = grid.tau_axis[k % nt];
            try {
                grid.V[k] = source == ValueSource::jacobs_closed_form
                                ? jacobs_value(order, Impurity(L), tau)
                                : wr_expected_entropy(order, Impurity(L), tau);
            } catch (const QuadratureError& e) {
                throw QuadratureError(std::string(e.what()) + " [cell L = " + detail::full_precision(L) +
                                      ", tau = " + detail::full_precision(tau) + "]");
            }
        }
    });
    return grid;
}

/// Prefactor of Dt. The Ito generator gives 4L(1-2L); 4L(1-L) is offered for comparison.
enum class DtildePrefactor { one_minus_2L, one_minus_L };

inline std::string to_string(DtildePrefactor p) {
    return p == DtildePrefactor::one_minus_2L ? "1-2L" : "1-L";
}

inline double dtilde_prefactor(DtildePrefactor p, double L) {
    return 4.0 * L * (p == DtildePrefactor::one_minus_2L ? 1.0 - 2.0 * L : 1.0 - L);
}

enum class Verdict { satisfied, violated };

inline std::string to_string(Verdict v) { return v == Verdict::satisfied ? "satisfied" : "violated"; }

/// Factor by which max|residual| must exceed the noise floor for "violated".
inline constexpr double kViolationFactor = 10.0;

struct BellmanOptions {
    DtildePrefactor prefactor = DtildePrefactor::one_minus_2L;
    unsigned threads = 0;
};

struct BellmanReport {
    ValueSource source = ValueSource::jacobs_closed_form;
    RenyiOrder order{2.0};
    DtildePrefactor prefactor = DtildePrefactor::one_minus_2L;
    std::vector<double> L_axis;
    std::vector<double> tau_axis;
    /// Full-lattice matrices (L-major); edge nodes hold NaN and sign 0.
    std::vector<double> residual;
    std::vector<double> dtilde;
    std::vector<int> dtilde_sign;
    double noise_floor = 0.0;         ///< Richardson estimate for the residual
    double dtilde_noise_floor = 0.0;  ///< same for Dt (max of dtilde_error)
    std::vector<double> dtilde_error;  ///< per-node Richardson error of Dt; the sign zero band
    double max_abs_residual = 0.0;
    double argmax_L = 0.0;
    double argmax_tau = 0.0;
    Verdict verdict = Verdict::satisfied;

    std::size_t index(std::size_t i, std::size_t j) const { return i * tau_axis.size() + j; }
    bool interior(std::size_t i, std::size_t j) const {
        return i > 0 && j > 0 && i + 1 < L_axis.size() && j + 1 < tau_axis.size();
    }
    std::size_t count_sign(int s) const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < L_axis.size(); ++i)
            for (std::size_t j = 0; j < tau_axis.size(); ++j) n += interior(i, j) && dtilde_sign[index(i, j)] == s;
        return n;
    }
};

/// Pointwise minimizer of u^2 Dt over u in [0, 1] given the sign of Dt.
inline double optimal_control_for_sign(int sign) { return sign < 0 ? 1.0 : 0.0; }

namespace detail {

struct RawResidual {
    std::vector<double> residual;
    std::vector<double> dtilde;
};

inline RawResidual raw_residual(const ValueFunctionGrid& g, DtildePrefactor prefactor, unsigned threads) {
    const std::size_t nL = g.L_axis.size(), nt = g.tau_axis.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    RawResidual out{std::vector<double>(nL * nt, nan), std::vector<double>(nL * nt, nan)};
    parallel_for(nL * nt, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t i = k / nt, j = k % nt;
            if (i == 0 || j == 0 || i + 1 == nL || j + 1 == nt) continue;
            const double L = g.L_axis[i];
            const double dV_dt = -(g.at(i, j + 1) - g.at(i, j - 1)) / (2.0 * g.htau);
            const double dV_dL = (g.at(i + 1, j) - g.at(i - 1, j)) / (2.0 * g.hL);
            const double d2V_dL2 = (g.at(i + 1, j) - 2.0 * g.at(i, j) + g.at(i - 1, j)) / (g.hL * g.hL);
            const double dt = dtilde_prefactor(prefactor, L) * (dV_dL + 2.0 * L * d2V_dL2);
            out.dtilde[k] = dt;
            out.residual[k] = dV_dt - 4.0 * L * dV_dL + std::min(0.0, dt);
        }
    });
    return out;
}

// (4/3) max |X_h - X_{h/2}| over interior nodes of the coarse grid; the fine
// grid must be the coarse one with both spacings halved.
inline double richardson_floor(const std::vector<double>& coarse, const std::vector<double>& fine, std::size_t nL,
                               std::size_t nt) {
    const std::size_t fine_nt = 2 * nt - 1;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < nL; ++i) {
        for (std::size_t j = 1; j + 1 < nt; ++j) {
            worst = std::max(worst, std::abs(coarse[i * nt + j] - fine[(2 * i) * fine_nt + 2 * j]));
        }
    }
    return 4.0 / 3.0 * worst;
}

}  // namespace detail

/// The halved-spacing companion of `grid` used for the noise floor.
inline ValueFunctionGrid refine(const ValueFunctionGrid& grid, unsigned threads = 0) {
    return build_value_grid(grid.source, grid.order, detail::halved(grid.L_axis), detail::halved(grid.tau_axis),
                            threads);
}

/// Residual report for `grid`, with the noise floor taken against `fine`
/// (which must be refine(grid)).
inline BellmanReport bellman_residual(const ValueFunctionGrid& grid, const ValueFunctionGrid& fine,
                                      const BellmanOptions& options = {}) {
    const std::size_t nL = grid.L_axis.size(), nt = grid.tau_axis.size();
    if (fine.L_axis.size() != 2 * nL - 1 || fine.tau_axis.size() != 2 * nt - 1 ||
        fine.L_axis.front() != grid.L_axis.front() || fine.tau_axis.front() != grid.tau_axis.front()) {
        throw ConfigError("fine grid must halve both spacings of the coarse grid");
    }
    const auto coarse = detail::raw_residual(grid, options.prefactor, options.threads);
    const auto refined = detail::raw_residual(fine, options.prefactor, options.threads);

    BellmanReport r;
    r.source = grid.source;
    r.order = grid.order;
    r.prefactor = options.prefactor;
    r.L_axis = grid.L_axis;
    r.tau_axis = grid.tau_axis;
    r.residual = coarse.residual;
    r.dtilde = coarse.dtilde;
    r.noise_floor = detail::richardson_floor(coarse.residual, refined.residual, nL, nt);
    r.dtilde_noise_floor = detail::richardson_floor(coarse.dtilde, refined.dtilde, nL, nt);
    r.dtilde_sign.assign(nL * nt, 0);
    r.dtilde_error.assign(nL * nt, std::numeric_limits<double>::quiet_NaN());
    const std::size_t fine_nt = 2 * nt - 1;
    for (std::size_t i = 1; i + 1 < nL; ++i) {
        for (std::size_t j = 1; j + 1 < nt; ++j) {
            const std::size_t k = r.index(i, j);
            const double d = r.dtilde[k];
            const double band = 4.0 / 3.0 * std::abs(d - refined.dtilde[(2 * i) * fine_nt + 2 * j]);
            r.dtilde_error[k] = band;
            r.dtilde_sign[k] = d > band ? 1 : (d < -band ? -1 : 0);
            if (std::abs(r.residual[k]) > r.max_abs_residual) {
                r.max_abs_residual = std::abs(r.residual[k]);
                r.argmax_L = r.L_axis[i];
                r.argmax_tau = r.tau_axis[j];
            }
        }
    }
    r.verdict = r.max_abs_residual > kViolationFactor * r.noise_floor ? Verdict::violated : Verdict::satisfied;
    return r;
}

inline BellmanReport bellman_residual(const ValueFunctionGrid& grid, const BellmanOptions& options = {}) {
    return bellman_residual(grid, refine(grid, options.threads), options);
}

/// Default lattice: 101 L nodes on [0.01, 0.49] and 61 tau nodes on [0.05, 3].
inline std::vector<double> default_L_axis() { return uniform_axis(0.01, 0.49, 101); }
inline std::vector<double> default_tau_axis() { return uniform_axis(0.05, 3.0, 61); }

/// Max |residual| at the base grid's interior nodes on successively halved
/// grids, and the observed orders log2(e_k / e_{k+1}).
struct RefinementStudy {
    std::vector<std::size_t> L_points;
    std::vector<std::size_t> tau_points;
    std::vector<double> max_abs_residual;
    std::vector<double> observed_order;
    double base_noise_floor = 0.0;
};

inline RefinementStudy refinement_study(ValueSource source, RenyiOrder order, std::vector<double> L_axis,
                                        std::vector<double> tau_axis, std::size_t refinements = 2,
                                        const BellmanOptions& options = {}) {
    RefinementStudy study;
    const std::size_t nL = L_axis.size(), nt = tau_axis.size();
    std::vector<ValueFunctionGrid> grids;
    grids.push_back(build_value_grid(source, order, std::move(L_axis), std::move(tau_axis), options.threads));
    for (std::size_t level = 0; level < refinements; ++level) grids.push_back(refine(grids.back(), options.threads));

    for (std::size_t level = 0; level < grids.size(); ++level) {
        const auto& g = grids[level];
        const auto raw = detail::raw_residual(g, options.prefactor, options.threads);
        const std::size_t stride = std::size_t{1} << level;
        const std::size_t gnt = g.tau_axis.size();
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < nL; ++i) {
            for (std::size_t j = 1; j + 1 < nt; ++j) {
                worst = std::max(worst, std::abs(raw.residual[(i * stride) * gnt + j * stride]));
            }
        }
        study.L_points.push_back(g.L_axis.size());
        study.tau_points.push_back(gnt);
        study.max_abs_residual.push_back(worst);
        if (level == 1) study.base_noise_floor = bellman_residual(grids[0], grids[1], options).noise_floor;
    }
    for (std::size_t k = 0; k + 1 < study.max_abs_residual.size(); ++k) {
        study.observed_order.push_back(std::log2(study.max_abs_residual[k] / study.max_abs_residual[k + 1]));
    }
    return study;
}

// ---------------------------------------------------------------------------
// Protocol comparison

struct ProtocolCost {
    std::string protocol;
    Estimate cost;
};

struct ComparisonRow {
    RenyiOrder order{1.0};
    double jacobs = 0.0;
    double wr = 0.0;
    std::vector<ProtocolCost> monte_carlo;
};

/// Expected terminal cost per order for u = 0 (closed form) and u = 1
/// (quadrature), plus Monte Carlo estimates for `protocols` when `mc` is set.
/// The Monte Carlo horizon is [mc->t0, mc->t0 + tau] starting from L0.
inline std::vector<ComparisonRow> protocol_compare(std::span<const RenyiOrder> orders, Impurity L0, double tau,
                                                   const std::optional<SimulationConfig>& mc = std::nullopt,
                                                   std::span<const ControlProtocol> protocols = {}) {
    std::vector<ComparisonRow> rows;
    if (orders.empty()) return rows;
    std::vector<TrajectoryEnsemble> ensembles;
    if (mc) {
        SimulationConfig config = *mc;
        config.L0 = L0.value();
        config.T = config.t0 + tau;
        config.keep_paths = false;
        for (const auto& p : protocols) ensembles.push_back(simulate_ensemble(p, config));
    }
    for (const auto& order : orders) {
        ComparisonRow row;
        row.order = order;
        row.jacobs = jacobs_value(order, L0, tau);
        row.wr = tau > 0.0 ? wr_expected_entropy(order, L0, tau) : renyi_entropy(order, L0);
        for (const auto& ens : ensembles) row.monte_carlo.push_back({ens.protocol, expected_terminal_cost(ens, order)});
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json order_json(RenyiOrder order) {
    if (order.is_infinite()) return "inf";
    return order.value();
}

inline nlohmann::json to_json(const BellmanReport& r) {
    return {{"source", to_string(r.source)},
            {"alpha", order_json(r.order)},
            {"prefactor", to_string(r.prefactor)},
            {"grid",
             {{"L", {r.L_axis.front(), r.L_axis.back(), r.L_axis.size()}},
              {"tau", {r.tau_axis.front(), r.tau_axis.back(), r.tau_axis.size()}}}},
            {"verdict", to_string(r.verdict)},
            {"noise_floor", r.noise_floor},
            {"dtilde_noise_floor", r.dtilde_noise_floor},
            {"max_abs_residual", r.max_abs_residual},
            {"argmax", {{"L", r.argmax_L}, {"tau", r.argmax_tau}}},
            {"dtilde_sign_counts", {{"negative", r.count_sign(-1)}, {"zero", r.count_sign(0)}, {"positive", r.count_sign(1)}}}};
}

/// Interior nodes in long form for heat maps.
inline void write_residual_csv(std::ostream& out, const BellmanReport& r) {
    out << "L,tau,residual,dtilde,dtilde_sign\n";
    for (std::size_t i = 1; i + 1 < r.L_axis.size(); ++i) {
        for (std::size_t j = 1; j + 1 < r.tau_axis.size(); ++j) {
            const std::size_t k = r.index(i, j);
            out << detail::full_precision(r.L_axis[i]) << ',' << detail::full_precision(r.tau_axis[j]) << ','
                << detail::full_precision(r.residual[k]) << ',' << detail::full_precision(r.dtilde[k]) << ','
                << r.dtilde_sign[k] << '\n';
        }
    }
}

inline nlohmann::json to_json(std::span<const ComparisonRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json mc = nlohmann::json::array();
        for (const auto& p : row.monte_carlo) {
            mc.push_back({{"protocol", p.protocol}, {"mean", p.cost.mean}, {"standard_error", p.cost.standard_error}});
        }
        out.push_back({{"alpha", order_json(row.order)}, {"jacobs", row.jacobs}, {"wr", row.wr}, {"monte_carlo", mc}});
    }
    return out;
}

inline void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
    out << "alpha,protocol,method,cost,standard_error\n";
    for (const auto& row : rows) {
        const std::string a = row.order.is_infinite() ? "inf" : detail::full_precision(row.order.value());
        out << a << ",jacobs,closed-form," << detail::full_precision(row.jacobs) << ",0\n";
        out << a << ",wr,quadrature," << detail::full_precision(row.wr) << ",0\n";
        for (const auto& p : row.monte_carlo) {
            out << a << ',' << p.protocol << ",monte-carlo," << detail::full_precision(p.cost.mean) << ','
                << detail::full_precision(p.cost.standard_error) << '\n';
        }
    }
}

}  // namespace purify
