#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "purify/sde.hpp"

using namespace purify;

TEST(Philox, KnownAnswers) {
    // Reference vectors distributed with the Random123 library.
    auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathNormalStream, PureFunctionOfCounter) {
    PathNormalStream a(7, 3), b(7, 3);
    std::vector<double> forward;
    for (std::uint64_t s = 0; s < 10; ++s) forward.push_back(a.normal(s));
    for (std::uint64_t s = 10; s-- > 0;) EXPECT_EQ(b.normal(s), forward[s]);
    PathNormalStream other(7, 4);
    EXPECT_NE(other.normal(0), forward[0]);
}

TEST(PathNormalStream, StandardNormalMoments) {
    std::vector<double> x;
    for (std::uint64_t p = 0; p < 2000; ++p) {
        PathNormalStream s(11, p);
        for (std::uint64_t k = 0; k < 50; ++k) x.push_back(s.normal(k));
    }
    const auto e = mean_and_standard_error(x);
    EXPECT_LT(std::abs(e.mean), 4.0 * e.standard_error);
    double var = 0.0;
    for (double v : x) var += v * v;
    var /= static_cast<double>(x.size());
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(StepImpurity, Examples) {
    // u = 0 is deterministic: the noise coefficient vanishes.
    for (double dW : {-1.0, 0.0, 0.3}) EXPECT_NEAR(step_impurity(0.3, 0.0, 1e-3, dW), 0.3 * (1.0 - 4e-3), 1e-16);
    // Pure states are a fixed point.
    for (double u : {0.0, 0.5, 1.0}) EXPECT_EQ(step_impurity(0.0, u, 0.01, 0.7), 0.0);
    // At L = 1/2 the diffusion vanishes and the drift is -4L dt.
    EXPECT_NEAR(step_impurity(0.5, 1.0, 1e-3, 0.9), 0.5 - 2e-3, 1e-16);
}

TEST(StepImpurity, ProjectionKeepsDomain) {
    EXPECT_EQ(step_impurity(0.4, 1.0, 0.01, 10.0), 0.0);
    EXPECT_LE(step_impurity(0.45, 1.0, 0.01, -10.0), 0.5);
}

TEST(ControlProtocol, RejectsOutOfRangeControls) {
    ControlProtocol bad("bad", [](double, double) { return 1.5; });
    EXPECT_THROW(bad(0.2, 0.0), DomainError);
    EXPECT_THROW(ControlProtocol::constant(-2.0), DomainError);
    EXPECT_EQ(ControlProtocol::constant(-0.5)(0.1, 0.0), 0.5);
}

TEST(GeneralizedSde, Examples) {
    const auto qubit = GeneralizedSdeSpec::qubit();
    for (double l : {0.0, 0.1, 0.3, 0.5}) {
        for (double u : {0.0, 0.4, 1.0}) {
            EXPECT_EQ(step_generalized(qubit, l, u, 0.0, 1e-3, 0.02), step_impurity(l, u, 1e-3, 0.02));
        }
    }
    GeneralizedSdeSpec custom;
    custom.k = 2.0;
    custom.gamma = [](double t) { return 1.0 + t; };
    custom.beta = [](double u, double, double) { return u; };
    custom.l_max = 1.0;
    EXPECT_NEAR(step_generalized(custom, 0.6, 0.0, 0.5, 1e-2, 0.3), 0.6 * (1.0 - 2.0 * 1.5 * 1e-2), 1e-15);
    EXPECT_EQ(step_generalized(custom, 0.0, 1.0, 0.5, 1e-2, 0.3), 0.0);
    EXPECT_THROW(step_generalized(custom, 1.2, 0.0, 0.0, 1e-2, 0.0), DomainError);
}

TEST(GeneralizedSde, ValidatesConstraints) {
    const std::vector<double> ls{0.0, 0.25, 0.5}, ts{0.0, 1.0};
    EXPECT_NO_THROW(GeneralizedSdeSpec::qubit().validate(ls, ts));
    auto spec = GeneralizedSdeSpec::qubit();
    spec.gamma = [](double t) { return 1.0 - t; };
    EXPECT_THROW(spec.validate(ls, ts), ConfigError);
    spec = GeneralizedSdeSpec::qubit();
    spec.deterministic_control = 1.0;
    EXPECT_THROW(spec.validate(ls, ts), ConfigError);
}

TEST(GeneralizedSde, PathIdenticalToSpecializedEngine) {
    SimulationConfig config{.L0 = 0.4, .T = 0.5, .dt = 1e-3, .n_paths = 64, .seed = 99};
    config.keep_paths = true;
    const auto wr = ControlProtocol::wiseman_ralph();
    const auto a = simulate_ensemble(wr, config);
    const auto b = simulate_generalized(GeneralizedSdeSpec::qubit(), wr, config);
    EXPECT_EQ(a.paths, b.paths);
}

TEST(SimulateEnsemble, JacobsFollowsExponentialDecay) {
    SimulationConfig config{.L0 = 0.5, .T = 1.0, .dt = 1e-3, .n_paths = 4, .seed = 1};
    config.keep_paths = true;
    const auto ens = simulate_ensemble(ControlProtocol::jacobs(), config);
    double max_err = 0.0;
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
        for (std::size_t s = 0; s <= ens.n_steps; ++s) {
            EXPECT_EQ(ens.at(p, s), ens.at(0, s));
            max_err = std::max(max_err, std::abs(ens.at(p, s) - 0.5 * std::exp(-4.0 * ens.time(s))));
        }
    }
    EXPECT_LT(max_err, 1e-2 * 0.5);
    EXPECT_GT(max_err, 0.0);
}

TEST(SimulateEnsemble, JacobsEulerErrorIsFirstOrder) {
    auto max_error = [](double dt) {
        SimulationConfig config{.L0 = 0.3, .T = 1.0, .dt = dt, .n_paths = 1};
        config.keep_paths = true;
        const auto ens = simulate_ensemble(ControlProtocol::jacobs(), config);
        double err = 0.0;
        for (std::size_t s = 0; s <= ens.n_steps; ++s) {
            err = std::max(err, std::abs(ens.at(0, s) - 0.3 * std::exp(-4.0 * ens.time(s))));
        }
        return err;
    };
    const double ratio = max_error(1e-3) / max_error(5e-4);
    EXPECT_NEAR(ratio, 2.0, 0.05);
}

TEST(SimulateEnsemble, ReproducibleAndThreadIndependent) {
    SimulationConfig config{.L0 = 0.375, .T = 0.2, .dt = 1e-3, .n_paths = 500, .seed = 42};
    config.keep_paths = true;
    config.threads = 1;
    const auto a = simulate_ensemble(ControlProtocol::wiseman_ralph(), config);
    const auto b = simulate_ensemble(ControlProtocol::wiseman_ralph(), config);
    config.threads = 5;
    const auto c = simulate_ensemble(ControlProtocol::wiseman_ralph(), config);
    EXPECT_EQ(a.paths, b.paths);
    EXPECT_EQ(a.paths, c.paths);
    config.seed = 43;
    const auto d = simulate_ensemble(ControlProtocol::wiseman_ralph(), config);
    EXPECT_NE(a.terminal, d.terminal);
}

TEST(SimulateEnsemble, StaysInDomainAndPureIsAbsorbing) {
    SimulationConfig config{.L0 = 0.45, .T = 1.0, .dt = 1e-2, .n_paths = 2000, .seed = 5};
    config.keep_paths = true;
    const auto ens = simulate_ensemble(ControlProtocol::constant(0.7), config);
    for (double L : ens.paths) {
        EXPECT_GE(L, 0.0);
        EXPECT_LE(L, 0.5);
    }
    config.L0 = 0.0;
    const auto pure = simulate_ensemble(ControlProtocol::wiseman_ralph(), config);
    for (double L : pure.paths) EXPECT_EQ(L, 0.0);
    const auto cost = expected_terminal_cost(pure, RenyiOrder(2.0));
    EXPECT_EQ(cost.mean, 0.0);
    EXPECT_EQ(cost.standard_error, 0.0);
}

TEST(SimulateEnsemble, ConfigErrors) {
    SimulationConfig config{.L0 = 0.2, .T = 1.0, .dt = 0.3, .n_paths = 1};
    EXPECT_THROW(simulate_ensemble(ControlProtocol::jacobs(), config), ConfigError);
    config.dt = 0.1;
    config.n_paths = 0;
    EXPECT_THROW(simulate_ensemble(ControlProtocol::jacobs(), config), ConfigError);
    config.n_paths = 1;
    config.L0 = 0.7;
    EXPECT_THROW(simulate_ensemble(ControlProtocol::jacobs(), config), DomainError);
}

TEST(ExpectedTerminalCost, DeterministicEnsembleHasNoSpread) {
    SimulationConfig config{.L0 = 0.375, .T = 1.0, .dt = 1e-3, .n_paths = 1000};
    const auto ens = simulate_ensemble(ControlProtocol::jacobs(), config);
    const auto cost = expected_terminal_cost(ens, RenyiOrder(2.0));
    EXPECT_LT(cost.standard_error, 1e-12);
    EXPECT_NEAR(cost.mean, -std::log(1.0 - 0.375 * std::exp(-4.0)), 1e-4);
}

TEST(PairwiseSum, MatchesExactSumOfIntegers) {
    std::vector<double> x(1001);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    EXPECT_EQ(pairwise_sum(x), 500500.0);
}

TEST(DriftCheck, CollisionEntropyFormula) {
    const double L = 0.25;
    const double expected = -4.0 * L / (1.0 - L) + 4.0 * L * (1.0 - 2.0 * L) * (1.0 + L) / ((1.0 - L) * (1.0 - L));
    const auto check = drift_check(ControlProtocol::wiseman_ralph(), RenyiOrder(2.0), L, 0.0, 1e-4, 100);
    EXPECT_NEAR(check.formula_drift, expected, 1e-12);
}

TEST(DriftCheck, PureStateHasNoDrift) {
    const auto check = drift_check(ControlProtocol::wiseman_ralph(), RenyiOrder(2.0), 0.0, 0.0, 1e-4, 100);
    EXPECT_EQ(check.formula_drift, 0.0);
    EXPECT_EQ(check.empirical_drift, 0.0);
    EXPECT_EQ(check.z_score, 0.0);
}

TEST(DriftCheck, AgreesWithItoGenerator) {
    for (double alpha : {0.3, 2.0}) {
        for (double L : {0.1, 0.4}) {
            for (double u : {0.0, 0.6, 1.0}) {
                const auto check = drift_check(ControlProtocol::constant(u), RenyiOrder(alpha), L, 0.0, 1e-4,
                                               200000, 17);
                EXPECT_LT(check.z_score, 4.0) << alpha << ' ' << L << ' ' << u;
                // Without the O(dt) term the deterministic case would still be off by a lot.
                EXPECT_LT(std::abs(check.empirical_drift - check.formula_drift),
                          0.05 * std::abs(check.formula_drift) + 5.0 * check.standard_error);
            }
        }
    }
}

TEST(DriftCheck, DetectsWrongGenerator) {
    // The formula with the control term dropped must be rejected for u = 1.
    const auto check = drift_check(ControlProtocol::wiseman_ralph(), RenyiOrder(2.0), 0.25, 0.0, 1e-4, 1000000, 3);
    const auto d = renyi_derivatives(RenyiOrder(2.0), Impurity(0.25));
    const double wrong = -4.0 * 0.25 * d.first;
    EXPECT_GT(std::abs(check.empirical_drift - wrong) / std::hypot(check.standard_error, check.discretization), 4.0);
}

TEST(Export, PathsCsvAndSummary) {
    SimulationConfig config{.L0 = 0.5, .T = 0.002, .dt = 1e-3, .n_paths = 2, .seed = 8};
    config.keep_paths = true;
    const auto ens = simulate_ensemble(ControlProtocol::jacobs(), config);
    std::ostringstream out;
    write_paths_csv(out, ens);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "path_id,step,t,L");
    const std::vector<RenyiOrder> orders{RenyiOrder(2.0)};
    const auto j = summary_json(ens, orders);
    EXPECT_EQ(j["config"]["seed"], 8);
    EXPECT_EQ(j["terminal_cost"].size(), 1u);
}
