#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fracsig/rayleigh.hpp"
#include "fracsig/regularity_lab.hpp"

using namespace fracsig;
using namespace fracsig::lab;

namespace {

GridPtr grid(double s, int nx, int ny, double X = 1.0, double Y = 1.0, Grading gr = Grading::xi_graded) {
    GridSpec g;
    g.x_extent = X;
    g.y_extent = Y;
    g.nx = nx;
    g.ny = ny;
    g.gamma = 1 - 2 * s;
    g.grading = gr;
    return build_grid(g);
}

std::vector<double> times(double t0, double t1, int n) {
    std::vector<double> t;
    for (int k = 0; k <= n; ++k) t.push_back(t0 + (t1 - t0) * k / n);
    return t;
}

Trajectory profile_trajectory(const GridPtr& g, double s, double omega, const std::vector<double>& ts) {
    SignoriniProfile p;
    p.s = s;
    p.omega = omega;
    return sample_trajectory(
        g, s, ts, [&](double x, double y, double t) { return eval_profile(p, x, y, t); },
        [&](double x, double t) { return profile_boundary_flux(p, x, t); }, [](double, double) { return 0.0; });
}

} // namespace

TEST(Fit, RecoversExactPowerLaw) {
    const auto r = log_radii(0.01, 0.5, 6);
    EXPECT_DOUBLE_EQ(r.front(), 0.01);
    EXPECT_NEAR(r.back(), 0.5, 1e-15);
    std::vector<double> v;
    for (double x : r) v.push_back(3.0 * std::pow(x, 1.37));
    const auto f = fit_power_law(r, v);
    EXPECT_NEAR(f.exponent, 1.37, 1e-12);
    EXPECT_NEAR(f.log_constant, std::log(3.0), 1e-12);
    EXPECT_LT(f.residual, 1e-12);
    EXPECT_EQ(f.status, "ok");
}

TEST(Fit, DegenerateAndInsufficient) {
    const auto r = log_radii(0.1, 0.4, 3);
    const auto z = fit_power_law(r, {0.0, 0.0, 0.0});
    EXPECT_TRUE(z.degenerate);
    EXPECT_EQ(z.status, "degenerate");
    const auto one = fit_power_law(r, {0.0, 0.0, 1.0});
    EXPECT_EQ(one.status, "insufficient");
    EXPECT_THROW(fit_power_law(r, {1.0}), InvalidArgument);
    EXPECT_THROW(log_radii(0.5, 0.1, 3), InvalidArgument);
}

TEST(Cylinder, FlavorsAndMembership) {
    for (auto f : {CylinderFlavor::Q, CylinderFlavor::Qtilde, CylinderFlavor::Bstar})
        EXPECT_EQ(flavor_from_string(to_string(f)), f);
    EXPECT_THROW(flavor_from_string("Z"), InvalidArgument);
    CylinderSpec c;
    c.center = {0.0, 1.0};
    c.r = 0.5;
    EXPECT_TRUE(c.contains(0.3, 0.3, 0.8));
    EXPECT_FALSE(c.contains(0.4, 0.4, 0.8));
    EXPECT_FALSE(c.contains(0.0, 0.0, 1.1));
    EXPECT_FALSE(c.contains(0.0, 0.0, 0.7));
    c.flavor = CylinderFlavor::Qtilde;
    c.C1 = 2.0;
    EXPECT_TRUE(c.contains(0.9, 0.4, 0.8));
    c.flavor = CylinderFlavor::Bstar;
    EXPECT_DOUBLE_EQ(c.window(), 0.5);
    EXPECT_TRUE(c.contains(0.0, 0.0, 0.6));
    EXPECT_FALSE(c.contains(0.3, 0.3, 0.6));
}

class ProfileExponents : public ::testing::TestWithParam<double> {};

TEST_P(ProfileExponents, GrowthAndFluxSlopes) {
    const double s = GetParam();
    const auto g = grid(s, 256, 128);
    const auto tr = profile_trajectory(g, s, 0.0, {0.25, 0.5});
    const auto radii = log_radii(1.0 / 32, 1.0 / 4, 4);
    const auto gr = fit_growth_exponent(tr, {0.0, 0.5}, radii);
    EXPECT_NEAR(gr.exponent, 1 + s, 0.02) << s;
    EXPECT_LT(gr.residual, 0.02);
    const auto fl = fit_flux_exponent(tr, {0.0, 0.5}, radii);
    EXPECT_NEAR(fl.exponent, 1 - s, 0.02) << s;
}

INSTANTIATE_TEST_SUITE_P(Orders, ProfileExponents, ::testing::Values(0.25, 0.5, 0.75));

TEST(Exponents, ScreensRadiiAndRejectsInteriorPoints) {
    const auto g = grid(0.5, 128, 32);
    const auto tr = profile_trajectory(g, 0.5, 0.0, {0.0, 0.25});
    EXPECT_THROW(fit_growth_exponent(tr, {0.5, 0.25}, {0.1, 0.2}), InvalidArgument);
    EXPECT_THROW(fit_flux_exponent(tr, {-0.5, 0.25}, {0.1, 0.2}), InvalidArgument);
    // 1/256 is below one cell, 0.8 overshoots the time window
    const auto f = fit_growth_exponent(tr, {0.0, 0.25}, {1.0 / 256, 0.1, 0.2, 0.8});
    EXPECT_FALSE(f.used[0]);
    EXPECT_TRUE(f.used[1]);
    EXPECT_TRUE(f.used[2]);
    EXPECT_FALSE(f.used[3]);
    EXPECT_FALSE(f.notes.empty());
}

TEST(Exponents, QtildeAndBstarAgreeOnHomogeneousProfile) {
    const auto g = grid(0.5, 256, 128);
    const auto tr = profile_trajectory(g, 0.5, 0.0, {0.5, 1.0});
    FitOptions o;
    o.flavor = CylinderFlavor::Qtilde;
    o.C1 = 1.5;
    EXPECT_NEAR(fit_growth_exponent(tr, {0.0, 1.0}, log_radii(1.0 / 32, 1.0 / 4, 4), o).exponent, 1.5, 0.02);
    o.flavor = CylinderFlavor::Bstar;
    EXPECT_NEAR(fit_growth_exponent(tr, {0.0, 1.0}, log_radii(1.0 / 32, 1.0 / 4, 4), o).exponent, 1.5, 0.02);
}

TEST(Density, HalfAtStationaryFreeBoundary) {
    const auto g = grid(0.5, 128, 16);
    const auto tr = profile_trajectory(g, 0.5, 0.0, {1.0});
    const double dx = 2.0 / 128;
    const auto rep = parabolic_density(tr, {0.0, 1.0}, {8 * dx, 16 * dx}, 0.1);
    // contact is x <= 0; the node at 0 owns a half cell of positivity
    EXPECT_NEAR(rep.ratios[0], (8 * dx + 0.5 * dx) / (16 * dx), 1e-12);
    EXPECT_NEAR(rep.ratios[1], (16 * dx + 0.5 * dx) / (32 * dx), 1e-12);
    EXPECT_TRUE(rep.positive);
    const auto free = parabolic_density(tr, {0.5, 1.0}, {0.1}, 0.1);
    EXPECT_DOUBLE_EQ(free.ratios[0], 0.0);
    EXPECT_FALSE(free.positive);
    EXPECT_THROW(parabolic_density(tr, {0.95, 1.0}, {0.1}, 0.1), InvalidArgument);
}

TEST(Density, TravelingFrontMatchesContinuumFraction) {
    // contact is x <= -omega t; over Q'_r at (-omega t0, t0) the fraction is 1/2 + omega r / 4
    const double omega = 0.3, t0 = 0.5, r = 0.25;
    const auto g = grid(0.5, 512, 8);
    const auto tr = profile_trajectory(g, 0.5, omega, times(0.0, t0, 256));
    const auto rep = parabolic_density(tr, {-omega * t0, t0}, {r}, 0.1);
    EXPECT_NEAR(rep.ratios[0], 0.5 + omega * r / 4, 2.0 / 512 / r);
    EXPECT_THROW(parabolic_density(tr, {-omega * t0, t0}, {0.8}, 0.1), InvalidArgument);
}

TEST(Frequency, HomogeneousFieldsGiveTheirDegree) {
    const double s = 0.25;
    const auto g = grid(s, 256, 128, 1.0, 1.0, Grading::uniform);
    SignoriniProfile p;
    p.s = s;
    const auto radii = log_radii(0.1, 0.5, 3);
    const auto u0 = almgren_frequency(sample_field(g, [&](double x, double y) { return eval_profile(p, x, y, 0); }), 0.0, radii);
    for (double v : u0.values) EXPECT_NEAR(v, 1 + s, 0.03 * (1 + s));
    const auto lin = almgren_frequency(sample_field(g, [](double x, double) { return x; }), 0.0, radii);
    for (double v : lin.values) EXPECT_NEAR(v, 1.0, 0.01);
    const auto cal = almgren_frequency(sample_field(g, [&](double, double y) { return eval_flux_calibrator(y, s); }), 0.0, radii);
    for (double v : cal.values) EXPECT_NEAR(v, 2 * s, 0.02);
    EXPECT_NEAR(cal.limit, cal.values[0], 0.0);
    const auto zero = almgren_frequency(Field(g), 0.0, radii);
    EXPECT_TRUE(zero.interior_zero);
}

TEST(Poincare, ConstantLinearAndRandomFields) {
    const auto g = grid(0.5, 128, 64);
    const auto c = poincare_ratio(sample_field(g, [](double, double) { return 3.0; }), 0.0, 0.5);
    EXPECT_TRUE(c.degenerate);
    EXPECT_EQ(c.ratio, 0.0);
    const auto lin = sample_field(g, [](double x, double) { return x; });
    const double a = poincare_ratio(lin, 0.0, 0.5).ratio, b = poincare_ratio(lin, 0.0, 0.25).ratio;
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a / b, 1.0, 0.02);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        const double c1 = U(rng), c2 = U(rng), c3 = U(rng), k = 1 + 3 * std::abs(U(rng));
        const auto v = sample_field(
            g, [&](double x, double y) { return c1 * std::sin(k * x) + c2 * y * y + c3 * std::cos(k * (x + y)); });
        const auto rep = poincare_ratio(v, 0.3 * U(rng), 0.4);
        EXPECT_FALSE(rep.inconsistent);
        EXPECT_TRUE(std::isfinite(rep.ratio));
        EXPECT_LT(rep.ratio, 5.0) << n;
    }
}

TEST(Harnack, ConstantAndSmoothPositiveSolutions) {
    const auto g = grid(0.5, 128, 64);
    const auto ts = times(0.0, 1.0, 2048);
    auto one = sample_trajectory(
        g, 0.5, ts, [](double, double, double) { return 1.0; }, [](double, double) { return 0.0; },
        [](double, double) { return -std::numeric_limits<double>::infinity(); });
    EXPECT_DOUBLE_EQ(harnack_ratio(one, {0.0, 1.0}, 0.5).ratio, 1.0);

    auto ex = sample_trajectory(
        g, 0.5, ts, [](double x, double, double t) { return std::exp(t) * (2 + x); },
        [](double, double) { return 0.0; }, [](double, double) { return -std::numeric_limits<double>::infinity(); });
    for (double R : {0.5, 0.25}) {
        const double Rm = R / 2, Rp = R / 4;
        const double cont = std::exp(-0.5 * Rm * Rm) * (2 + Rm) / (std::exp(-0.25 * Rp * Rp) * (2 - Rp));
        // the boxes are open, so node sampling stays within a cell of the continuum extremes
        EXPECT_NEAR(harnack_ratio(ex, {0.0, 1.0}, R).ratio / cont, 1.0, 0.04) << R;
    }
    auto neg = sample_trajectory(
        g, 0.5, ts, [](double x, double, double) { return x; }, [](double, double) { return 0.0; },
        [](double, double) { return -1.0; });
    EXPECT_THROW(harnack_ratio(neg, {0.0, 1.0}, 0.5), InvalidArgument);
    auto coarse = profile_trajectory(g, 0.5, 0.0, {0.0, 1.0});
    EXPECT_THROW(harnack_ratio(coarse, {0.5, 1.0}, 0.5), InvalidArgument);
}

TEST(FluxExtension, ReproducesProfileFluxField) {
    const double s = 0.5;
    const auto g = grid(s, 128, 64);
    SignoriniProfile p;
    p.s = s;
    const auto tr = profile_trajectory(g, s, 0.0, {0.0});
    const auto w = flux_extension(tr, 0);
    double err = 0.0;
    for (int j = 0; j <= g->ny(); ++j)
        for (int i = 0; i <= g->nx(); ++i)
            if (g->y(j) >= 0.1) err = std::max(err, std::abs(w.at(i, j) - profile_flux_field(p, g->x(i), g->y(j), 0)));
    EXPECT_LT(err, 0.02);
}

TEST(Phi, VanishesForZeroFlux) {
    const auto g = grid(0.5, 64, 32);
    auto tr = sample_trajectory(
        g, 0.5, {0.0, 0.5}, [](double, double, double) { return 0.0; }, [](double, double) { return 0.0; },
        [](double, double) { return 0.0; });
    const auto rep = monotonicity_phi(tr, {0.0, 0.5}, {0.1, 0.2});
    EXPECT_DOUBLE_EQ(rep.phi[0], 0.0);
    EXPECT_DOUBLE_EQ(rep.phi[1], 0.0);
    EXPECT_TRUE(rep.fit.degenerate);
}

TEST(Phi, BoundedOnStationaryProfile) {
    const double s = 0.5;
    const auto g = grid(s, 256, 128, 0.6, 0.6);
    const auto tr = profile_trajectory(g, s, 0.0, {1.0});
    PhiOptions o;
    o.alpha = 1 - s;
    o.delta = 0.05;
    const auto rep = monotonicity_phi(tr, {0.0, 1.0}, log_radii(1.0 / 16, 1.0 / 4, 3), o);
    EXPECT_TRUE(rep.bounded_regime);
    for (bool u : rep.under_resolved) EXPECT_FALSE(u);
    for (double v : rep.phi) EXPECT_GT(v, 0.0);
    EXPECT_LT(rep.max_min_ratio, 10.0);
}

TEST(Phi, SyntheticSingularFluxFollowsEnvelope) {
    // w = -rho^alpha has phi ~ r^{2 alpha - 1 - gamma}
    const double s = 0.5, alpha = 0.2;
    const auto g = grid(s, 512, 256, 0.6, 0.6);
    const auto w = sample_field(g, [&](double x, double y) { return -std::pow(std::hypot(x, y), alpha); });
    std::vector<double> radii = log_radii(1.0 / 64, 1.0 / 4, 5), phi;
    for (double r : radii) phi.push_back(monotonicity_phi({{&w, 0.0, r * r}}, 0.0, r, s));
    const auto f = fit_power_law(radii, phi);
    const double envelope = 2 * alpha + 0.05 - 1 - (1 - 2 * s);
    EXPECT_GE(f.exponent, envelope - 0.15);
    EXPECT_NEAR(f.exponent, 2 * alpha - 1, 0.05);
}

TEST(Rayleigh, InversePowerMatchesDenseEigensolver) {
    RayleighOptions o;
    o.nx = 12;
    o.ny = 6;
    o.extent = 6;
    for (double gamma : {-0.5, 0.0, 0.5}) {
        const auto sys = build_rayleigh_system(gamma, o);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sys.K), Eigen::MatrixXd(sys.M));
        ASSERT_EQ(es.info(), Eigen::Success);
        const auto res = rayleigh_lambda0(gamma, o);
        EXPECT_TRUE(res.converged);
        EXPECT_NEAR(res.lambda, es.eigenvalues()(0), 1e-8 * es.eigenvalues()(0)) << gamma;
    }
}

TEST(Rayleigh, HalfLaplacianValueAndRefinement) {
    const double lam = rayleigh_lambda0(0.0).lambda;
    EXPECT_NEAR(lam, 0.25, 0.02 * 0.25);
    RayleighOptions free;
    free.constrained = false;
    EXPECT_LT(rayleigh_lambda0(0.0, free).lambda, lam);
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {24, 48, 96}) {
        RayleighOptions o;
        o.nx = 2 * n;
        o.ny = n;
        const double v = rayleigh_lambda0(0.5, o).lambda;
        EXPECT_LE(v, prev + 1e-12);
        prev = v;
    }
}

TEST(FreeBoundary, TracksTravelingFront) {
    const double omega = 0.3;
    const auto g = grid(0.5, 128, 16);
    const auto tr = profile_trajectory(g, 0.5, omega, times(0.0, 1.0, 32));
    const auto pts = extract_free_boundary(tr, {2});
    ASSERT_EQ(pts.size(), tr.snapshots.size());
    for (const auto& p : pts) {
        EXPECT_EQ(p.curve, 0);
        EXPECT_NEAR(p.x, -omega * p.t, 1e-9);
        EXPECT_NEAR(p.slope, -omega, 1e-8);
        EXPECT_NEAR(std::hypot(p.normal_x, p.normal_t), 1.0, 1e-14);
        EXPECT_GT(p.normal_t, 0.0);
    }
    const auto q = free_boundary_point(pts, 0.49);
    ASSERT_TRUE(q.has_value());
    EXPECT_DOUBLE_EQ(q->t, 0.5);
    EXPECT_FALSE(free_boundary_point(pts, 0.5, 1).has_value());
    EXPECT_THROW(extract_free_boundary(tr, {0}), InvalidArgument);
}

TEST(FreeBoundary, TwoSidedContactGivesTwoCurves) {
    const auto g = grid(0.5, 64, 8);
    auto tr = sample_trajectory(
        g, 0.5, {0.0, 0.1}, [](double x, double, double) { return std::max(0.0, x * x - 0.25); },
        [](double, double) { return 0.0; }, [](double, double) { return 0.0; });
    // contact is |x| <= 1/2: a right interface (curve 1) then a left one (curve 0)
    const auto pts = extract_free_boundary(tr);
    ASSERT_EQ(pts.size(), 4u);
    EXPECT_EQ(pts[0].curve, 1);
    EXPECT_NEAR(pts[0].x, -0.5, 2.0 / 64);
    EXPECT_EQ(pts[1].curve, 0);
    EXPECT_NEAR(pts[1].x, 0.5, 2.0 / 64);
}

TEST(Blowup, RecoversTravelingSpeed) {
    const double omega = 0.3, t0 = 0.75;
    const auto g = grid(0.5, 256, 64);
    const auto tr = profile_trajectory(g, 0.5, omega, times(0.0, 1.0, 64));
    const auto res = blowup_compare(tr, {-omega * t0, t0}, 0.25, 0.5);
    EXPECT_NEAR(res.omega_hat, omega, 0.02);
    EXPECT_LE(res.linf_error, 1e-3);
    EXPECT_GT(res.samples, 100u);

    const auto st = profile_trajectory(g, 0.5, 0.0, times(0.0, 1.0, 16));
    const auto r0 = blowup_compare(st, {0.0, 1.0}, 0.25, 0.5);
    EXPECT_NEAR(r0.omega_hat, 0.0, 1e-3);
    EXPECT_THROW(blowup_compare(st, {0.9, 1.0}, 0.25, 0.5), InvalidArgument);
}

TEST(TimeDecay, RefusesLowDensityAndHandlesStationaryData) {
    const auto g = grid(0.5, 128, 32);
    const auto st = profile_trajectory(g, 0.5, 0.0, times(0.0, 1.0, 64));
    EXPECT_THROW(time_derivative_decay(st, {0.5, 1.0}, {0.1, 0.2}), InvalidArgument);
    const auto f = time_derivative_decay(st, {0.0, 1.0}, {0.1, 0.2});
    EXPECT_TRUE(f.degenerate);

    const double omega = 0.3;
    const auto tr = profile_trajectory(g, 0.5, omega, times(0.0, 1.0, 256));
    const auto d = time_derivative_decay(tr, {-omega, 1.0}, log_radii(1.0 / 16, 1.0 / 4, 3));
    // u_t = omega d_x u0 grows like r^s
    EXPECT_NEAR(d.exponent, 0.5, 0.1);
}
