#pragma once

// Sufficient conditions for the u = 0 protocol to be globally optimal for a
// cost F(L):
//
//   local optimality   D[F] = 4L(1-2L) (F' + 2L F'') >= 0
//   convexity          L F''^2 / F' - L F''' - F''  >= 0
//
// evaluated for the Renyi family over the (alpha, L) plane.

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "purify/axis.hpp"
#include "purify/errors.hpp"
#include "purify/parallel.hpp"
#include "purify/renyi.hpp"

namespace purify {

struct ConditionMargin {
    double local_opt_bracket;  ///< B = F' + 2L F''
    double local_opt_full;     ///< D[F] = 4L(1-2L) B
    double convexity_margin;   ///< L F''^2/F' - L F''' - F''
};

inline ConditionMargin margins_from_derivatives(const RenyiDerivatives& d, double L) {
    const double bracket = d.first + 2.0 * L * d.second;
    return {bracket, 4.0 * L * (1.0 - 2.0 * L) * bracket,
            L * d.second * d.second / d.first - L * d.third - d.second};
}

inline ConditionMargin condition_margins(RenyiOrder order, Impurity L) {
    return margins_from_derivatives(renyi_derivatives(order, L), L.value());
}

/// Margins of the identity cost F(L) = L, which is locally optimal everywhere.
inline ConditionMargin identity_margins(Impurity L) {
    return margins_from_derivatives({1.0, 0.0, 0.0}, L.value());
}

struct ConditionCell {
    ConditionMargin margin{};
    bool local_opt_ok = false;
    bool convex_ok = false;
    bool singular = false;
};

/// Smallest L admitted by a region scan; alpha < 1 derivatives diverge at L = 0.
inline constexpr double kScanFloorL = 1e-4;
/// Default upper end of the alpha scan.
inline constexpr double kDefaultAlphaCeiling = 50.0;

struct ConditionGrid {
    std::vector<double> alpha_axis;
    std::vector<double> L_axis;
    std::vector<ConditionCell> cells;  ///< alpha-major: cells[i * L_axis.size() + j]
    std::size_t dropped_nonpositive_alphas = 0;

    const ConditionCell& at(std::size_t alpha_index, std::size_t L_index) const {
        return cells[alpha_index * L_axis.size() + L_index];
    }

    /// Local optimality holds at every non-singular L of row i.
    bool local_opt_all_L(std::size_t i) const {
        for (std::size_t j = 0; j < L_axis.size(); ++j) {
            const auto& c = at(i, j);
            if (!c.singular && !c.local_opt_ok) return false;
        }
        return true;
    }

    bool convex_all_L(std::size_t i) const {
        for (std::size_t j = 0; j < L_axis.size(); ++j) {
            const auto& c = at(i, j);
            if (!c.singular && !c.convex_ok) return false;
        }
        return true;
    }

    std::vector<double> alphas_with_both() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < alpha_axis.size(); ++i) {
            if (local_opt_all_L(i) && convex_all_L(i)) out.push_back(alpha_axis[i]);
        }
        return out;
    }

    std::size_t singular_count() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.singular ? 1 : 0;
        return n;
    }
};

inline ConditionCell evaluate_cell(double alpha, double L) {
    ConditionCell cell;
    try {
        cell.margin = condition_margins(RenyiOrder(alpha), Impurity(L));
        cell.local_opt_ok = cell.margin.local_opt_bracket >= 0.0;
        cell.convex_ok = cell.margin.convexity_margin >= 0.0;
    } catch (const SingularPointError&) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        cell.margin = {nan, nan, nan};
        cell.singular = true;
    }
    return cell;
}

/// Evaluates both conditions on the alpha x L lattice. Nonpositive alpha
/// nodes (e.g. a range starting at 0) are dropped from the axis and counted.
inline ConditionGrid scan_regions(const Range& alpha_range, const Range& L_range, unsigned threads = 0) {
    if (L_range.start < kScanFloorL) {
        throw ConfigError("L range must start at or above 1e-4");
    }
    if (L_range.stop > 0.5) throw ConfigError("impurity exceeds 1/2 in L range");

    ConditionGrid grid;
    for (double a : alpha_range.nodes()) {
        if (a > 0.0) {
            grid.alpha_axis.push_back(a);
        } else {
            ++grid.dropped_nonpositive_alphas;
        }
    }
    grid.L_axis = L_range.nodes();
    const std::size_t nL = grid.L_axis.size();
    grid.cells.resize(grid.alpha_axis.size() * nL);

    parallel_for(grid.cells.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            grid.cells[k] = evaluate_cell(grid.alpha_axis[k / nL], grid.L_axis[k % nL]);
        }
    });
    return grid;
}

/// Bisection for the order at which `margin(alpha)` changes sign inside
/// [lo, hi], to absolute tolerance `tol`.
template <typename Margin>
double find_order_root(Margin&& margin, double lo, double hi, double tol = 1e-6) {
    const double f_lo = margin(lo);
    const double f_hi = margin(hi);
    if (!(f_lo * f_hi < 0.0)) {
        throw RootNotBracketedError("no sign change on [" + detail::full_precision(lo) + ", " +
                                    detail::full_precision(hi) + "]");
    }
    const auto [a, b] = boost::math::tools::bisect(
        [&](double alpha) { return margin(alpha); }, lo, hi,
        [tol](double x, double y) { return std::abs(y - x) <= tol; });
    return 0.5 * (a + b);
}

inline double bracket_at_maximally_mixed(double alpha) {
    return condition_margins(RenyiOrder(alpha), Impurity(0.5)).local_opt_bracket;
}

inline double convexity_at_maximally_mixed(double alpha) {
    return condition_margins(RenyiOrder(alpha), Impurity(0.5)).convexity_margin;
}

struct CriticalAlphas {
    double alpha_lo;  ///< local optimality holds above this order
    double alpha_hi;  ///< convexity holds below this order
};

struct CriticalSearch {
    double lo_bracket_min = 0.5, lo_bracket_max = 1.0;
    double hi_bracket_min = 1.0, hi_bracket_max = 1.5;
    double tolerance = 1e-6;
};

/// The orders bounding the interval on which both conditions hold for all L;
/// both boundaries are set at the maximally mixed state L = 1/2.
inline CriticalAlphas critical_alphas(const CriticalSearch& search = {}) {
    return {find_order_root(bracket_at_maximally_mixed, search.lo_bracket_min, search.lo_bracket_max,
                            search.tolerance),
            find_order_root(convexity_at_maximally_mixed, search.hi_bracket_min, search.hi_bracket_max,
                            search.tolerance)};
}

/// r^3 (1 + r) times the min-entropy bracket, which is 1 + r - r^2. Finite at
/// L = 1/2, where the bracket itself diverges to +infinity.
inline double min_entropy_scaled_bracket(Impurity L) {
    const double r = L.bloch_radius();
    return 1.0 + r - r * r;
}

/// True iff the min-entropy satisfies local optimality at every grid point.
inline bool min_entropy_local_opt_check(std::span<const double> L_grid) {
    for (double value : L_grid) {
        const Impurity L(value);
        if (value <= 0.0) throw DomainError("min-entropy check needs L > 0");
        const double bracket = value == 0.5
                                   ? min_entropy_scaled_bracket(L)
                                   : condition_margins(RenyiOrder::infinity(), L).local_opt_bracket;
        if (!(bracket >= 0.0)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Export

inline void write_csv(std::ostream& out, const ConditionGrid& grid) {
    out << "alpha,L,local_opt_bracket,convexity_margin,local_opt_ok,convex_ok\n";
    for (std::size_t i = 0; i < grid.alpha_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.L_axis.size(); ++j) {
            const auto& c = grid.at(i, j);
            out << detail::full_precision(grid.alpha_axis[i]) << ',' << detail::full_precision(grid.L_axis[j])
                << ',' << (c.singular ? "singular" : detail::full_precision(c.margin.local_opt_bracket)) << ','
                << (c.singular ? "singular" : detail::full_precision(c.margin.convexity_margin)) << ','
                << (c.local_opt_ok ? 1 : 0) << ',' << (c.convex_ok ? 1 : 0) << '\n';
        }
    }
}

/// Per-alpha summary plus the full cell table.
inline nlohmann::json to_json(const ConditionGrid& grid) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.alpha_axis.size(); ++i) {
        rows.push_back({{"alpha", grid.alpha_axis[i]},
                        {"local_opt_all_L", grid.local_opt_all_L(i)},
                        {"convex_all_L", grid.convex_all_L(i)}});
    }
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.alpha_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.L_axis.size(); ++j) {
            const auto& c = grid.at(i, j);
            nlohmann::json cell = {{"alpha", grid.alpha_axis[i]}, {"L", grid.L_axis[j]},
                                   {"local_opt_ok", c.local_opt_ok}, {"convex_ok", c.convex_ok},
                                   {"singular", c.singular}};
            if (!c.singular) {
                cell["local_opt_bracket"] = c.margin.local_opt_bracket;
                cell["convexity_margin"] = c.margin.convexity_margin;
            }
            cells.push_back(std::move(cell));
        }
    }
    const auto both = grid.alphas_with_both();
    nlohmann::json summary = {{"dropped_nonpositive_alphas", grid.dropped_nonpositive_alphas},
                              {"singular_cells", grid.singular_count()}};
    if (!both.empty()) {
        summary["both_all_L_min_alpha"] = both.front();
        summary["both_all_L_max_alpha"] = both.back();
    }
    return {{"summary", summary}, {"per_alpha", rows}, {"cells", cells}};
}

}  // namespace purify
