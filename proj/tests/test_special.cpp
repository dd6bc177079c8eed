#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fracsig/special.hpp"

using namespace fracsig::special;

TEST(LanczosGamma, MatchesStdTgammaOnUnitInterval) {
    for (int k = 1; k < 400; ++k) {
        const double x = 2.0 * k / 400.0;
        EXPECT_NEAR(lanczos_gamma(x) / std::tgamma(x), 1.0, 1e-12) << "x = " << x;
    }
}

TEST(LanczosGamma, KnownValues) {
    EXPECT_NEAR(lanczos_gamma(0.5), std::sqrt(std::numbers::pi), 1e-14);
    EXPECT_NEAR(lanczos_gamma(1.0), 1.0, 1e-14);
    EXPECT_NEAR(lanczos_gamma(5.0), 24.0, 1e-11);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    for (int n = 1; n <= 12; ++n) {
        const auto rule = gauss_legendre(n);
        for (int p = 0; p <= 2 * n - 1; ++p) {
            const double exact = (std::pow(2.0, p + 1) - std::pow(-1.0, p + 1)) / (p + 1);
            EXPECT_NEAR(integrate([p](double x) { return std::pow(x, p); }, -1.0, 2.0, rule), exact,
                        1e-12 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST(IncompleteGamma, MatchesQuadratureOracle) {
    // oracle: Gamma(p, x) = int_x^inf u^{p-1} e^{-u} du by composite Gauss on a
    // truncated, log-stretched interval
    const auto rule = gauss_legendre(20);
    for (double p : {-0.45, -0.2, 0.0, 0.25, 0.5, 0.9}) {
        for (double x : {0.05, 0.3, 1.0, 4.0}) {
            auto f = [p](double v) {
                const double u = std::exp(v);
                return std::pow(u, p) * std::exp(-u);
            };
            const double oracle = integrate_composite(f, std::log(x), std::log(60.0), 200, rule);
            EXPECT_NEAR(upper_incomplete_gamma(p, x), oracle, 1e-10 * std::max(1.0, oracle)) << p << " " << x;
        }
    }
}

TEST(HeatTimeIntegral, MatchesDirectQuadrature) {
    const auto rule = gauss_legendre(20);
    for (double a : {0.6, 1.0, 1.3}) {
        for (double b : {1e-3, 0.05, 0.4}) {
            const double t1 = 0.01, t2 = 0.3;
            auto f = [a, b](double v) {
                const double t = std::exp(v);
                return std::pow(t, 1.0 - a) * std::exp(-b / t);
            };
            const double oracle = integrate_composite(f, std::log(t1), std::log(t2), 400, rule);
            EXPECT_NEAR(heat_time_integral(a, b, t1, t2), oracle, 1e-9 * std::max(1.0, oracle));
        }
    }
    // t1 = 0 with a < 1 and b = 0
    EXPECT_NEAR(heat_time_integral(0.5, 0.0, 0.0, 4.0), 4.0, 1e-14);
}
