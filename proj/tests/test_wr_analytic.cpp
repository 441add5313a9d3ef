#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <sstream>
#include <vector>

#include "purify/wr_analytic.hpp"

using namespace purify;

TEST(GaussHermite, MomentsOfStandardNormal) {
    for (std::size_t n : {20u, 150u, 200u}) {
        const auto& rule = gauss_hermite_rule(n);
        double m0 = 0, m1 = 0, m2 = 0, m4 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rule.nodes[i], w = rule.weights[i];
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
            m4 += w * x * x * x * x;
        }
        EXPECT_NEAR(m0, 1.0, 1e-13) << n;
        EXPECT_NEAR(m1, 0.0, 1e-13) << n;
        EXPECT_NEAR(m2, 1.0, 1e-12) << n;
        EXPECT_NEAR(m4, 3.0, 1e-11) << n;
    }
}

TEST(WrWeight, NormalizedOnLattice) {
    for (double L0 : {0.0, 0.1, 0.25, 0.4, 0.5}) {
        for (double tau : {0.1, 0.5, 1.0, 2.0, 3.0}) {
            EXPECT_NEAR(wr_weight_integral(Impurity(L0), tau), 1.0, 1e-10) << L0 << ' ' << tau;
        }
    }
}

// Sampled within 5 sd of each mixture component that carries weight.
TEST(WrWeight, MatchesMixture) {
    for (double L0 : {0.0, 0.05, 0.1, 0.25, 0.3, 0.4, 0.5}) {
        const double c = std::sqrt(1.0 - 2.0 * L0);
        for (double tau : {0.1, 0.5, 1.0, 2.0, 3.0}) {
            for (double centre : {2.0 * tau, -2.0 * tau}) {
                if (centre < 0.0 && c == 1.0) continue;
                for (int k = -50; k <= 50; ++k) {
                    const double w = centre + 0.1 * k * std::sqrt(tau);
                    const double a = wr_weight(w, Impurity(L0), tau);
                    const double b = wr_weight_mixture(w, Impurity(L0), tau);
                    EXPECT_NEAR(a, b, 1e-12 * b) << L0 << ' ' << tau << ' ' << w;
                }
            }
        }
    }
    EXPECT_THROW(wr_weight(0.0, Impurity(0.2), 0.0), DomainError);
}

TEST(WrWeight, BlochComponent) {
    const Impurity L0(0.3);
    const double c = L0.bloch_radius();
    for (double w : {-1.0, -0.2, 0.0, 0.4, 1.5}) {
        const double direct = (c * std::cosh(2 * w) + std::sinh(2 * w)) / (std::cosh(2 * w) + c * std::sinh(2 * w));
        EXPECT_NEAR(z_of_w(w, L0), direct, 1e-14);
    }
    EXPECT_DOUBLE_EQ(z_of_w(0.0, L0), c);
}

TEST(WrExpectedEntropy, ShortTimeLimit) {
    for (double a : {0.3, 1.0, 2.0}) {
        for (double L0 : {0.1, 0.3, 0.5}) {
            EXPECT_NEAR(wr_expected_entropy(RenyiOrder(a), Impurity(L0), 1e-8),
                        renyi_entropy(RenyiOrder(a), Impurity(L0)), 1e-4);
        }
    }
}

TEST(WrExpectedEntropy, PureStateStaysPure) {
    for (double tau : {0.1, 1.0, 3.0}) {
        EXPECT_EQ(wr_expected_entropy(RenyiOrder(0.5), Impurity(0.0), tau), 0.0);
    }
}

TEST(WrExpectedEntropy, DecreasesWithTime) {
    for (double a : {0.2, 1.0, 2.0}) {
        for (double L0 : {0.1, 0.3, 0.5}) {
            double previous = renyi_entropy(RenyiOrder(a), Impurity(L0));
            for (double tau = 0.05; tau <= 3.0; tau += 0.05) {
                const double v = wr_expected_entropy(RenyiOrder(a), Impurity(L0), tau);
                EXPECT_LT(v, previous) << a << ' ' << L0 << ' ' << tau;
                previous = v;
            }
        }
    }
}

TEST(WrExpectedEntropy, AgreesWithAdaptiveRoute) {
    for (double a : {0.1, 0.45, 1.0, 2.0}) {
        for (double L0 : {0.02, 0.25, 0.5}) {
            for (double tau : {0.05, 0.5, 3.0}) {
                const RenyiOrder order(a);
                EXPECT_NEAR(wr_expected_entropy(order, Impurity(L0), tau),
                            wr_expected_entropy_adaptive(order, Impurity(L0), tau), 1e-8)
                    << a << ' ' << L0 << ' ' << tau;
            }
        }
    }
    const auto inf = RenyiOrder::infinity();
    EXPECT_NEAR(wr_expected_entropy(inf, Impurity(0.4), 1.0), wr_expected_entropy_adaptive(inf, Impurity(0.4), 1.0),
                1e-8);
}

TEST(WrExpectedEntropy, WorseThanJacobsForCollisionEntropy) {
    // alpha = 2 lies in the region where u = 0 is optimal.
    for (double L0 : {0.1, 0.3, 0.45}) {
        for (double tau : {0.5, 1.0}) {
            const double jacobs = renyi_entropy(RenyiOrder(2.0), Impurity(L0 * std::exp(-4.0 * tau)));
            EXPECT_GT(wr_expected_entropy(RenyiOrder(2.0), Impurity(L0), tau), jacobs);
        }
    }
}

TEST(WrExpectedEntropy, TableCsv) {
    std::ostringstream out;
    const std::vector<RenyiOrder> orders{RenyiOrder(0.5), RenyiOrder::infinity()};
    const std::vector<double> L0s{0.2, 0.4}, taus{0.5};
    write_wr_table_csv(out, orders, L0s, taus);
    const auto text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "alpha,L0,tau,expected_entropy");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_NE(text.find("inf,0.20000000000000001,0.5,"), std::string::npos);
}
