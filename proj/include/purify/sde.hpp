#pragma once

// Euler-Maruyama simulation of the measured-qubit impurity
//
//     dL = -4L { [1 - (1-2L) u^2] dt + sqrt(1-2L) u dW },
//
// and of the generalized class dl = -k l ([1 - beta^2] gamma dt + beta sqrt(gamma) dW).
// Every step is projected back onto the state domain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "purify/axis.hpp"
#include "purify/errors.hpp"
#include "purify/parallel.hpp"
#include "purify/renyi.hpp"
#include "purify/rng.hpp"

namespace purify {

/// A feedback law u(L, t). Only u^2 enters the dynamics, so values are
/// returned as |u| in [0, 1]; |u| > 1 is an error rather than a clamp.
class ControlProtocol {
public:
    using Rule = std::function<double(double L, double t)>;

    ControlProtocol(std::string name, Rule rule) : name_(std::move(name)), rule_(std::move(rule)) {}

    /// u = 0: Bloch vector kept unbiased with respect to the measured axis.
    static ControlProtocol jacobs() {
        return {"jacobs", [](double, double) { return 0.0; }};
    }
    /// u = 1: state kept diagonal in the measurement basis (null control).
    static ControlProtocol wiseman_ralph() {
        return {"wr", [](double, double) { return 1.0; }};
    }
    static ControlProtocol constant(double u) {
        if (!(std::abs(u) <= 1.0)) throw DomainError("control must satisfy |u| <= 1");
        return {"constant:" + detail::full_precision(u), [u](double, double) { return u; }};
    }

    const std::string& name() const { return name_; }

    double operator()(double L, double t) const {
        const double u = rule_(L, t);
        if (!(std::abs(u) <= 1.0)) {
            throw DomainError("protocol '" + name_ + "' returned |u| > 1 at L = " + detail::full_precision(L) +
                              ", t = " + detail::full_precision(t));
        }
        return std::abs(u);
    }

private:
    std::string name_;
    Rule rule_;
};

/// "jacobs", "wr" or "constant:<u>".
inline ControlProtocol parse_protocol(const std::string& text) {
    if (text == "jacobs") return ControlProtocol::jacobs();
    if (text == "wr") return ControlProtocol::wiseman_ralph();
    if (text.rfind("constant:", 0) == 0) {
        const std::string value = text.substr(9);
        std::size_t used = 0;
        double u = 0.0;
        try {
            u = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != value.size()) throw ConfigError("cannot parse control value '" + value + "'");
        return ControlProtocol::constant(u);
    }
    throw ConfigError("unknown protocol '" + text + "' (expected jacobs, wr or constant:<u>)");
}

inline double project_impurity(double L) { return std::clamp(L, 0.0, 0.5); }

/// One Euler-Maruyama step of the impurity SDE, projected onto [0, 1/2].
inline double step_impurity(double L, double u, double dt, double dW) {
    // Written through b = u sqrt(1 - 2L) so that the generalized stepper with
    // the qubit specialization reproduces it bit for bit.
    const double b = u * std::sqrt(std::max(0.0, 1.0 - 2.0 * L));
    const double next = L - 4.0 * L * ((1.0 - b * b) * dt + b * dW);
    return project_impurity(next);
}

struct GeneralizedSdeSpec {
    double k = 4.0;
    std::function<double(double t)> gamma;
    std::function<double(double u, double l, double t)> beta;
    double l_min = 0.0;
    double l_max = 0.5;
    /// A control for which beta vanishes identically.
    double deterministic_control = 0.0;

    /// The impurity SDE: k = 4, gamma = 1, beta = u sqrt(1 - 2l).
    static GeneralizedSdeSpec qubit() {
        GeneralizedSdeSpec spec;
        spec.gamma = [](double) { return 1.0; };
        spec.beta = [](double u, double l, double) { return u * std::sqrt(std::max(0.0, 1.0 - 2.0 * l)); };
        return spec;
    }

    /// Checks k > 0, gamma > 0 on the sampled times and beta(u~, l, t) = 0 on
    /// the sampled (l, t) lattice.
    void validate(std::span<const double> l_samples, std::span<const double> t_samples) const {
        if (!(k > 0.0)) throw ConfigError("generalized SDE needs k > 0");
        if (!gamma || !beta) throw ConfigError("generalized SDE needs gamma and beta");
        if (!(l_max > l_min)) throw ConfigError("generalized SDE needs a nonempty domain");
        for (double t : t_samples) {
            if (!(gamma(t) > 0.0)) throw ConfigError("gamma must be positive at t = " + detail::full_precision(t));
            for (double l : l_samples) {
                if (beta(deterministic_control, l, t) != 0.0) {
                    throw ConfigError("registered deterministic control does not zero beta");
                }
            }
        }
    }
};

inline double step_generalized(const GeneralizedSdeSpec& spec, double l, double u, double t, double dt, double dW) {
    if (!(l >= spec.l_min && l <= spec.l_max)) {
        throw DomainError("state " + detail::full_precision(l) + " outside the generalized SDE domain");
    }
    const double g = spec.gamma(t);
    const double b = spec.beta(u, l, t);
    const double next = l - spec.k * l * ((1.0 - b * b) * g * dt + b * std::sqrt(g) * dW);
    return std::clamp(next, spec.l_min, spec.l_max);
}

struct SimulationConfig {
    double L0 = 0.5;
    double t0 = 0.0;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    /// Store every path point; otherwise only terminal values are kept.
    bool keep_paths = false;
    unsigned threads = 0;
};

/// Number of Euler steps covering [t0, T]; dt must divide the horizon.
inline std::size_t step_count(double t0, double T, double dt) {
    if (!(T > t0) || !(t0 >= 0.0)) throw ConfigError("need 0 <= t0 < T");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const double ratio = (T - t0) / dt;
    const double steps = std::round(ratio);
    if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("dt does not divide T - t0");
    }
    return static_cast<std::size_t>(steps);
}

inline void validate(const SimulationConfig& config) {
    (void)Impurity(config.L0);
    step_count(config.t0, config.T, config.dt);
    if (config.n_paths < 1) throw ConfigError("need at least one path");
}

struct TrajectoryEnsemble {
    std::string protocol;
    double L0 = 0.0;
    double t0 = 0.0;
    double T = 0.0;
    double dt = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    std::vector<double> terminal;  ///< L(T) per path
    std::vector<double> paths;     ///< n_paths x (n_steps + 1), empty unless kept

    bool has_paths() const { return !paths.empty(); }
    double at(std::size_t path, std::size_t step) const { return paths[path * (n_steps + 1) + step]; }
    double time(std::size_t step) const { return t0 + static_cast<double>(step) * dt; }
};

namespace detail {

template <typename Step>
TrajectoryEnsemble run_ensemble(const std::string& name, const SimulationConfig& config, Step&& step) {
    validate(config);
    TrajectoryEnsemble ens;
    ens.protocol = name;
    ens.L0 = config.L0;
    ens.t0 = config.t0;
    ens.T = config.T;
    ens.dt = config.dt;
    ens.n_paths = config.n_paths;
    ens.n_steps = step_count(config.t0, config.T, config.dt);
    ens.seed = config.seed;
    ens.terminal.resize(ens.n_paths);
    if (config.keep_paths) ens.paths.resize(ens.n_paths * (ens.n_steps + 1));

    const double sqrt_dt = std::sqrt(config.dt);
    parallel_for(ens.n_paths, config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            PathNormalStream noise(config.seed, p);
            double L = config.L0;
            double* row = config.keep_paths ? &ens.paths[p * (ens.n_steps + 1)] : nullptr;
            if (row) row[0] = L;
            for (std::size_t s = 0; s < ens.n_steps; ++s) {
                const double t = ens.time(s);
                L = step(L, t, sqrt_dt * noise.normal(s));
                if (row) row[s + 1] = L;
            }
            ens.terminal[p] = L;
        }
    });
    return ens;
}

}  // namespace detail

/// N independent Euler-Maruyama paths of the impurity SDE under `protocol`.
inline TrajectoryEnsemble simulate_ensemble(const ControlProtocol& protocol, const SimulationConfig& config) {
    const double dt = config.dt;
    return detail::run_ensemble(protocol.name(), config, [&](double L, double t, double dW) {
        return step_impurity(L, protocol(L, t), dt, dW);
    });
}

/// Same as simulate_ensemble but stepping the generalized SDE.
inline TrajectoryEnsemble simulate_generalized(const GeneralizedSdeSpec& spec, const ControlProtocol& protocol,
                                               const SimulationConfig& config) {
    const double dt = config.dt;
    return detail::run_ensemble(protocol.name() + "/generalized", config, [&](double l, double t, double dW) {
        return step_generalized(spec, l, protocol(l, t), t, dt, dW);
    });
}

/// Pairwise (cascade) summation in a fixed order.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct Estimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Sample mean and standard error of the mean (sample variance, n - 1).
inline Estimate mean_and_standard_error(std::span<const double> x) {
    if (x.empty()) throw ConfigError("cannot average an empty sample");
    const double n = static_cast<double>(x.size());
    const double mean = pairwise_sum(x) / n;
    if (x.size() == 1) return {mean, 0.0};
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    return {mean, std::sqrt(pairwise_sum(sq) / (n - 1.0) / n)};
}

/// Mean and standard error of S_alpha(L(T)) over the ensemble.
inline Estimate expected_terminal_cost(const TrajectoryEnsemble& ens, RenyiOrder order) {
    if (ens.terminal.empty()) throw ConfigError("empty ensemble");
    std::vector<double> cost(ens.terminal.size());
    for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = renyi_entropy(order, Impurity(ens.terminal[i]));
    return mean_and_standard_error(cost);
}

struct DriftCheck {
    double empirical_drift = 0.0;  ///< (E[S(L')] - S(L)) / dt from one-step samples
    double formula_drift = 0.0;    ///< -4L S' + u^2 D[S]
    double standard_error = 0.0;   ///< Monte Carlo error of empirical_drift
    double discretization = 0.0;   ///< |drift(dt) - drift(dt/2)| on the same variates
    double z_score = 0.0;          ///< |empirical - formula| / hypot(standard_error, discretization)
};

/// Compares the one-step Monte Carlo drift of S_alpha with the Ito generator.
///
/// The one-step estimator carries an O(dt) bias (exactly so for u = 0, where
/// the step is deterministic and the Monte Carlo error vanishes). The bias is
/// estimated by repeating the step at dt/2 with the same standard normals and
/// is combined with the sampling error in the z-score denominator.
inline DriftCheck drift_check(const ControlProtocol& protocol, RenyiOrder order, double L, double t, double dt,
                              std::size_t n_samples, std::uint64_t seed = 0, unsigned threads = 0) {
    const Impurity state(L);
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (n_samples < 2) throw ConfigError("drift check needs at least two samples");
    const double u = protocol(L, t);
    const double S0 = renyi_entropy(order, state);

    DriftCheck out;
    if (L > 0.0) {
        const auto d = renyi_derivatives(order, state);
        const double dtilde = 4.0 * L * (1.0 - 2.0 * L) * (d.first + 2.0 * L * d.second);
        out.formula_drift = -4.0 * L * d.first + u * u * dtilde;
    }

    std::vector<double> full(n_samples), half(n_samples);
    const double sqrt_dt = std::sqrt(dt);
    const double sqrt_half = std::sqrt(0.5 * dt);
    parallel_for(n_samples, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            PathNormalStream noise(seed, i);
            const double xi = noise.normal(0);
            const double L1 = step_impurity(L, u, dt, sqrt_dt * xi);
            const double Lh = step_impurity(L, u, 0.5 * dt, sqrt_half * xi);
            full[i] = (renyi_entropy(order, Impurity(L1)) - S0) / dt;
            half[i] = (renyi_entropy(order, Impurity(Lh)) - S0) / (0.5 * dt);
        }
    });
    const Estimate e_full = mean_and_standard_error(full);
    const Estimate e_half = mean_and_standard_error(half);
    out.empirical_drift = e_full.mean;
    out.standard_error = e_full.standard_error;
    out.discretization = std::abs(e_full.mean - e_half.mean);
    const double diff = std::abs(out.empirical_drift - out.formula_drift);
    const double scale = std::hypot(out.standard_error, out.discretization);
    out.z_score = diff == 0.0 ? 0.0 : diff / scale;
    return out;
}

// ---------------------------------------------------------------------------
// Export

/// Long-format path table; large, so callers gate it.
inline void write_paths_csv(std::ostream& out, const TrajectoryEnsemble& ens) {
    if (!ens.has_paths()) throw ConfigError("ensemble was simulated without keep_paths");
    out << "path_id,step,t,L\n";
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
        for (std::size_t s = 0; s <= ens.n_steps; ++s) {
            out << p << ',' << s << ',' << detail::full_precision(ens.time(s)) << ','
                << detail::full_precision(ens.at(p, s)) << '\n';
        }
    }
}

inline nlohmann::json summary_json(const TrajectoryEnsemble& ens, std::span<const RenyiOrder> orders) {
    nlohmann::json costs = nlohmann::json::array();
    for (const auto& order : orders) {
        const auto e = expected_terminal_cost(ens, order);
        costs.push_back({{"alpha", order.is_infinite() ? nlohmann::json("inf") : nlohmann::json(order.value())},
                         {"mean", e.mean},
                         {"stderr", e.standard_error}});
    }
    const Estimate L_stats = mean_and_standard_error(ens.terminal);
    return {{"protocol", ens.protocol},
            {"config",
             {{"L0", ens.L0}, {"t0", ens.t0}, {"T", ens.T}, {"dt", ens.dt}, {"N", ens.n_paths}, {"seed", ens.seed},
              {"steps", ens.n_steps}}},
            {"terminal_L", {{"mean", L_stats.mean}, {"stderr", L_stats.standard_error}}},
            {"terminal_cost", costs}};
}

}  // namespace purify
