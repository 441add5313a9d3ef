#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "purify/bellman.hpp"

using namespace purify;

TEST(JacobsValue, Examples) {
    EXPECT_NEAR(jacobs_value(RenyiOrder(2.0), Impurity(0.375), 1.0), -std::log(1.0 - 0.375 * std::exp(-4.0)), 1e-15);
    // The quoted 0.006893 is rounded up from 0.0068921.
    EXPECT_NEAR(jacobs_value(RenyiOrder(2.0), Impurity(0.375), 1.0), 0.006893, 1e-6);
    EXPECT_EQ(jacobs_value(RenyiOrder(0.3), Impurity(0.2), 0.0), renyi_entropy(RenyiOrder(0.3), Impurity(0.2)));
    EXPECT_EQ(jacobs_value(RenyiOrder(0.3), Impurity(0.0), 2.0), 0.0);
}

TEST(JacobsValue, MatchesDeterministicSimulation) {
    SimulationConfig c;
    c.L0 = 0.375;
    c.T = 1.0;
    c.dt = 1e-4;
    c.n_paths = 1;
    const auto ens = simulate_ensemble(ControlProtocol::jacobs(), c);
    EXPECT_NEAR(expected_terminal_cost(ens, RenyiOrder(2.0)).mean, jacobs_value(RenyiOrder(2.0), Impurity(0.375), 1.0),
                1e-5);
}

TEST(ValueGrid, StencilPrecondition) {
    EXPECT_NO_THROW(build_value_grid(ValueSource::jacobs_closed_form, RenyiOrder(2.0), uniform_axis(0.1, 0.4, 5),
                                     uniform_axis(0.1, 1.0, 5)));
    EXPECT_THROW(build_value_grid(ValueSource::jacobs_closed_form, RenyiOrder(2.0), uniform_axis(0.1, 0.4, 4),
                                  uniform_axis(0.1, 1.0, 4)),
                 ConfigError);
    EXPECT_THROW(build_value_grid(ValueSource::jacobs_closed_form, RenyiOrder(2.0), {0.1, 0.2, 0.3, 0.35, 0.4},
                                  uniform_axis(0.1, 1.0, 5)),
                 ConfigError);
    EXPECT_THROW(build_value_grid(ValueSource::wr_quadrature, RenyiOrder(2.0), uniform_axis(0.1, 0.4, 5),
                                  uniform_axis(0.0, 1.0, 5)),
                 ConfigError);
}

TEST(ValueGrid, JacobsTerminalRow) {
    const auto g = build_value_grid(ValueSource::jacobs_closed_form, RenyiOrder(0.5), uniform_axis(0.0, 0.5, 11),
                                    uniform_axis(0.0, 1.0, 6));
    for (std::size_t i = 0; i < g.L_axis.size(); ++i) {
        EXPECT_EQ(g.at(i, 0), renyi_entropy(RenyiOrder(0.5), Impurity(g.L_axis[i])));
    }
}

TEST(ValueGrid, WrNonincreasingInTau) {
    const auto g = build_value_grid(ValueSource::wr_quadrature, RenyiOrder(0.3), uniform_axis(0.05, 0.45, 9),
                                    uniform_axis(0.1, 3.0, 30));
    for (std::size_t i = 0; i < g.L_axis.size(); ++i) {
        for (std::size_t j = 1; j < g.tau_axis.size(); ++j) EXPECT_LE(g.at(i, j), g.at(i, j - 1));
    }
    for (double v : g.V) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, std::log(2.0));
    }
}

TEST(ValueGrid, TerminalConsistency) {
    for (double L : {0.1, 0.3, 0.45}) {
        EXPECT_NEAR(wr_expected_entropy(RenyiOrder(0.3), Impurity(L), 1e-6),
                    renyi_entropy(RenyiOrder(0.3), Impurity(L)), 1e-4);
        EXPECT_NEAR(jacobs_value(RenyiOrder(0.3), Impurity(L), 1e-6), renyi_entropy(RenyiOrder(0.3), Impurity(L)),
                    1e-4);
    }
}

TEST(BellmanResidual, JacobsSecondOrderConvergence) {
    const auto study = refinement_study(ValueSource::jacobs_closed_form, RenyiOrder(2.0), uniform_axis(0.01, 0.49, 25),
                                        uniform_axis(0.05, 3.0, 16), 2);
    ASSERT_EQ(study.observed_order.size(), 2u);
    for (double p : study.observed_order) EXPECT_NEAR(p, 2.0, 0.2);
    EXPECT_LT(study.max_abs_residual.back(), study.base_noise_floor);
}

TEST(BellmanResidual, JacobsSatisfiedWithPositiveDtilde) {
    const auto g = build_value_grid(ValueSource::jacobs_closed_form, RenyiOrder(2.0), uniform_axis(0.01, 0.49, 25),
                                    uniform_axis(0.05, 3.0, 16));
    const auto r = bellman_residual(g, {DtildePrefactor::one_minus_2L, 2});
    EXPECT_EQ(r.verdict, Verdict::satisfied);
    EXPECT_EQ(r.count_sign(-1), 0u);
    EXPECT_LE(r.max_abs_residual, r.noise_floor * 1.01);
}

TEST(BellmanResidual, WrDtildeNegative) {
    const auto g = build_value_grid(ValueSource::wr_quadrature, RenyiOrder(0.3), uniform_axis(0.05, 0.45, 17),
                                    uniform_axis(0.2, 3.0, 15));
    const auto r = bellman_residual(g);
    EXPECT_EQ(r.count_sign(-1), 15u * 13u);
    EXPECT_EQ(optimal_control_for_sign(-1), 1.0);
    EXPECT_EQ(optimal_control_for_sign(1), 0.0);
}

TEST(BellmanResidual, PrefactorsShareSign) {
    const auto g = build_value_grid(ValueSource::wr_quadrature, RenyiOrder(0.3), uniform_axis(0.05, 0.45, 9),
                                    uniform_axis(0.2, 3.0, 8));
    const auto f = refine(g);
    const auto a = bellman_residual(g, f, {DtildePrefactor::one_minus_2L, 0});
    const auto b = bellman_residual(g, f, {DtildePrefactor::one_minus_L, 0});
    for (std::size_t i = 1; i + 1 < g.L_axis.size(); ++i) {
        for (std::size_t j = 1; j + 1 < g.tau_axis.size(); ++j) {
            const auto k = a.index(i, j);
            EXPECT_EQ(std::signbit(a.dtilde[k]), std::signbit(b.dtilde[k]));
            const double L = g.L_axis[i];
            EXPECT_NEAR(b.dtilde[k] * (1.0 - 2.0 * L), a.dtilde[k] * (1.0 - L), 1e-12);
        }
    }
}

TEST(BellmanResidual, ThreadIndependentAndExports) {
    const auto g1 = build_value_grid(ValueSource::wr_quadrature, RenyiOrder(0.45), uniform_axis(0.05, 0.45, 9),
                                     uniform_axis(0.2, 3.0, 8), 1);
    const auto g3 = build_value_grid(ValueSource::wr_quadrature, RenyiOrder(0.45), uniform_axis(0.05, 0.45, 9),
                                     uniform_axis(0.2, 3.0, 8), 3);
    EXPECT_EQ(g1.V, g3.V);
    const auto r = bellman_residual(g1);
    std::ostringstream csv;
    write_residual_csv(csv, r);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "L,tau,residual,dtilde,dtilde_sign");
    const auto j = to_json(r);
    EXPECT_EQ(j["source"], "wr-quadrature");
    EXPECT_TRUE(j.contains("noise_floor"));
    EXPECT_TRUE(j["argmax"].contains("tau"));
}

TEST(ProtocolCompare, Regimes) {
    const std::vector<RenyiOrder> orders{RenyiOrder(2.0), RenyiOrder(0.3)};
    const auto rows = protocol_compare(orders, Impurity(0.375), 1.0);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_LT(rows[0].jacobs, rows[0].wr);
    EXPECT_LT(rows[1].wr, rows[1].jacobs);
    EXPECT_TRUE(protocol_compare({}, Impurity(0.375), 1.0).empty());
}

TEST(ProtocolCompare, MonteCarloColumns) {
    SimulationConfig mc;
    mc.dt = 1e-3;
    mc.n_paths = 20000;
    mc.seed = 7;
    const std::vector<RenyiOrder> orders{RenyiOrder(2.0)};
    const std::vector<ControlProtocol> protocols{ControlProtocol::jacobs(), ControlProtocol::wiseman_ralph()};
    const auto rows = protocol_compare(orders, Impurity(0.375), 1.0, mc, protocols);
    ASSERT_EQ(rows[0].monte_carlo.size(), 2u);
    EXPECT_NEAR(rows[0].monte_carlo[0].cost.mean, rows[0].jacobs, 1e-4);
    const auto& wr = rows[0].monte_carlo[1].cost;
    EXPECT_NEAR(wr.mean, rows[0].wr, 4.0 * wr.standard_error + 1e-4);
    std::ostringstream csv;
    write_comparison_csv(csv, rows);
    EXPECT_NE(csv.str().find("2,wr,monte-carlo,"), std::string::npos);
}
