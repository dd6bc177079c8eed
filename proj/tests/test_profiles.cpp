#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fracsig/profiles.hpp"

using namespace fracsig;

TEST(SignoriniProfile, HalfOrderClosedForm) {
    SignoriniProfile p;
    p.s = 0.5;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> R(0.01, 3), A(0, std::numbers::pi);
    for (int k = 0; k < 200; ++k) {
        const double r = R(rng), th = A(rng);
        const double exact = 2.0 / 3.0 * std::pow(r, 1.5) * std::cos(1.5 * th);
        EXPECT_NEAR(eval_profile(p, r * std::cos(th), r * std::sin(th), 0.0), exact, 1e-12);
    }
}

TEST(SignoriniProfile, SpecialValues) {
    for (double s : {0.25, 0.5, 0.75}) {
        SignoriniProfile p;
        p.s = s;
        EXPECT_EQ(eval_profile(p, -1.3, 0.0, 0.0), 0.0);
        EXPECT_NEAR(eval_profile(p, 1.0, 0.0, 0.0), 1.0 / (1.0 + s), 1e-14);
        EXPECT_EQ(eval_profile(p, 0.0, 0.0, 0.0), 0.0);
    }
    SignoriniProfile q;
    q.s = 0.25;
    EXPECT_NEAR(eval_profile(q, 1.0, 0.0, 0.0), 0.8, 1e-14);
}

TEST(SignoriniProfile, HomogeneityAndEvenReflection) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> U(-2, 2), L(0.1, 4);
    for (double s : {0.25, 0.6}) {
        SignoriniProfile p;
        p.s = s;
        p.omega = 0.7;
        for (int k = 0; k < 100; ++k) {
            const double x = U(rng), y = U(rng), t = U(rng), lam = L(rng);
            const double a = eval_profile(p, lam * x, lam * y, lam * t);
            const double b = std::pow(lam, 1 + s) * eval_profile(p, x, y, t);
            EXPECT_NEAR(a, b, 1e-11 * std::max(1.0, std::abs(b)));
            EXPECT_EQ(eval_profile(p, x, y, t), eval_profile(p, x, -y, t));
        }
    }
}

TEST(SignoriniProfile, TravelsWithSpeedOmega) {
    SignoriniProfile p;
    p.s = 0.5;
    p.omega = 0.4;
    EXPECT_NEAR(p.free_boundary(1.0), -0.4, 1e-15);
    EXPECT_NEAR(eval_profile(p, 0.3 - 0.4, 0.2, 1.0), eval_profile(p, 0.3, 0.2, 0.0), 1e-15);
}

TEST(SignoriniProfile, GradientMatchesFiniteDifferences) {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> X(-1.5, 1.5), Y(0.05, 1.5);
    for (double s : {0.25, 0.5, 0.8}) {
        SignoriniProfile p;
        p.s = s;
        for (int k = 0; k < 100; ++k) {
            const double x = X(rng), y = Y(rng), h = 1e-6;
            const auto g = profile_gradient(p, x, y, 0.0);
            const double fx = (eval_profile(p, x + h, y, 0) - eval_profile(p, x - h, y, 0)) / (2 * h);
            const double fy = (eval_profile(p, x, y + h, 0) - eval_profile(p, x, y - h, 0)) / (2 * h);
            EXPECT_NEAR(g.dx, fx, 1e-6);
            EXPECT_NEAR(g.dy, fy, 1e-6);
        }
    }
}

TEST(SignoriniProfile, WeightedHarmonic) {
    // div(y^gamma grad u0) by central differences of the analytic gradient
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> X(-1.5, 1.5), Y(0.1, 1.5);
    for (double s : {0.25, 0.5, 0.75}) {
        SignoriniProfile p;
        p.s = s;
        const double g = p.gamma(), h = 1e-5;
        for (int k = 0; k < 100; ++k) {
            const double x = X(rng), y = Y(rng);
            if (std::hypot(x, y) < 0.2) continue;
            const double ddx = (profile_gradient(p, x + h, y, 0).dx - profile_gradient(p, x - h, y, 0).dx) / (2 * h);
            const double ddy = (std::pow(y + h, g) * profile_gradient(p, x, y + h, 0).dy -
                                std::pow(y - h, g) * profile_gradient(p, x, y - h, 0).dy) /
                               (2 * h * std::pow(y, g));
            EXPECT_NEAR(ddx + ddy, 0.0, 1e-5);
        }
    }
}

TEST(SignoriniProfile, BoundaryFluxIsTheZetaDerivative) {
    for (double s : {0.25, 0.5, 0.75}) {
        SignoriniProfile p;
        p.s = s;
        const double g = p.gamma();
        for (double x : {-1.0, -0.4, 0.3, 0.9}) {
            const double y = 1e-7;
            const double fd = (eval_profile(p, x, y, 0) - eval_profile(p, x, 0, 0)) / (std::pow(y, 1 - g) / (1 - g));
            EXPECT_NEAR(profile_boundary_flux(p, x, 0.0), fd, 2e-3) << s << " " << x;
            EXPECT_NEAR(profile_flux_field(p, x, 1e-9, 0.0), profile_boundary_flux(p, x, 0.0), 1e-3);
        }
    }
}

TEST(SignoriniProfile, ThinComplementarity) {
    for (double s : {0.25, 0.5, 0.75}) {
        SignoriniProfile p;
        p.s = s;
        for (double x = -1.0; x <= 1.0; x += 0.01) {
            const double u = eval_profile(p, x, 0.0, 0.0), w = profile_boundary_flux(p, x, 0.0);
            EXPECT_GE(u, 0.0);
            EXPECT_LE(w, 0.0);
            EXPECT_EQ(u * w, 0.0);
        }
    }
}

TEST(FluxCalibrator, ValuesAndDomain) {
    EXPECT_NEAR(eval_flux_calibrator(0.25, 0.5), 0.25, 1e-15);
    EXPECT_NEAR(eval_flux_calibrator(4.0, 0.25), 2.0, 1e-15);
    EXPECT_EQ(eval_flux_calibrator(0.0, 0.3), 0.0);
    EXPECT_THROW(eval_flux_calibrator(-0.1, 0.5), InvalidArgument);
}

TEST(CaloricQuadratic, CoefficientSolvesTheHeatEquation) {
    // u_t = -1 and L u = 2(n-1) - 2c(1+gamma); caloric iff the two agree
    for (int n = 2; n <= 5; ++n)
        for (double g : {-0.7, -0.2, 0.0, 0.4, 0.9}) {
            const double c = caloric_quadratic_coefficient(n, g);
            EXPECT_NEAR(2.0 * (n - 1) - 2.0 * c * (1 + g), -1.0, 1e-14);
        }
    EXPECT_NEAR(caloric_quadratic_coefficient(2, 0.0), 1.5, 1e-15);
    EXPECT_NEAR(caloric_quadratic_coefficient(2, 0.5), 1.0, 1e-15);
    EXPECT_NEAR(eval_caloric_quadratic(1.0, 1.0, 0.0, 2, 0.0), -0.5, 1e-15);
    EXPECT_THROW(eval_caloric_quadratic(0, 0, 0, 2, 1.0), InvalidArgument);
}
