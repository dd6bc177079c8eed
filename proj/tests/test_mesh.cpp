#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "fracsig/grid_io.hpp"
#include "fracsig/mesh.hpp"

using namespace fracsig;

namespace {

GridSpec spec(double X, double Y, int nx, int ny, double gamma, Grading gr) {
    GridSpec s;
    s.x_extent = X;
    s.y_extent = Y;
    s.nx = nx;
    s.ny = ny;
    s.gamma = gamma;
    s.grading = gr;
    return s;
}

} // namespace

TEST(BuildGrid, UniformNodes) {
    auto g = build_grid(spec(1, 1, 4, 4, 0.0, Grading::uniform));
    const std::vector<double> expect = {0, 0.25, 0.5, 0.75, 1};
    ASSERT_EQ(g->y_nodes().size(), expect.size());
    for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_DOUBLE_EQ(g->y(static_cast<int>(j)), expect[j]);
    EXPECT_DOUBLE_EQ(g->x(0), -1.0);
    EXPECT_DOUBLE_EQ(g->x(4), 1.0);
}

TEST(BuildGrid, XiGradedFirstNode) {
    auto g = build_grid(spec(1, 1, 4, 2, 0.5, Grading::xi_graded));
    EXPECT_NEAR(g->y(1), std::pow(0.5, 1.0 / 1.5), 1e-15);
    EXPECT_NEAR(g->y(1), 0.6300, 5e-5);
    EXPECT_EQ(g->y(0), 0.0);
}

TEST(BuildGrid, TotalWeightedMeasure) {
    auto g = build_grid(spec(1, 1, 8, 8, -0.5, Grading::xi_graded));
    EXPECT_NEAR(g->total_measure(), 4.0, 4.0 * 1e-12);
}

TEST(BuildGrid, RejectsBadSpecs) {
    EXPECT_THROW(build_grid(spec(1, 1, 4, 4, 1.0, Grading::uniform)), InvalidArgument);
    EXPECT_THROW(build_grid(spec(1, 1, 4, 4, -1.0, Grading::uniform)), InvalidArgument);
    EXPECT_THROW(build_grid(spec(0, 1, 4, 4, 0.0, Grading::uniform)), InvalidArgument);
    EXPECT_THROW(build_grid(spec(1, -2, 4, 4, 0.0, Grading::uniform)), InvalidArgument);
}

TEST(WeightedCellMeasure, ClosedForms) {
    // on [-1,1]x[0,2] with 2x2 cells, cell (1,0) is [0,1]x[0,1] and (1,1) is [0,1]x[1,2]
    GridSpec unit = spec(1, 1, 2, 2, 0.0, Grading::uniform);
    unit.ny = 2;
    unit.y_extent = 2.0;  // rows [0,1], [1,2]
    auto g = build_grid(unit);
    EXPECT_NEAR(weighted_cell_measure(*g, 1), 1.0, 1e-15);

    unit.gamma = 0.5;
    g = build_grid(unit);
    EXPECT_NEAR(g->cell_measure(1, 0), 1.0 / 1.5, 1e-15);

    unit.gamma = -0.5;
    g = build_grid(unit);
    EXPECT_NEAR(g->cell_measure(1, 1), 2.0 * (std::sqrt(2.0) - 1.0), 1e-14);
    EXPECT_NEAR(g->cell_measure(1, 1), 0.8284, 5e-5);

    EXPECT_THROW(weighted_cell_measure(*g, g->cell_count()), InvalidArgument);
}

TEST(GridProperties, RefinementKeepsTotalMeasure) {
    for (double gamma : {-0.7, -0.2, 0.0, 0.4, 0.9}) {
        auto a = build_grid(spec(1.5, 0.8, 10, 7, gamma, Grading::xi_graded));
        auto b = build_grid(spec(1.5, 0.8, 20, 14, gamma, Grading::xi_graded));
        const double exact = 2 * 1.5 * std::pow(0.8, 1 + gamma) / (1 + gamma);
        EXPECT_NEAR(a->total_measure() / exact, 1.0, 1e-12);
        EXPECT_NEAR(b->total_measure() / a->total_measure(), 1.0, 1e-12);
    }
}

TEST(GridProperties, XiSpacingIsUniform) {
    for (double gamma : {-0.5, 0.3, 0.8}) {
        auto g = build_grid(spec(1, 2, 4, 16, gamma, Grading::xi_graded));
        const double step = std::pow(2.0, 1 + gamma) / 16;
        for (int j = 0; j < 16; ++j)
            EXPECT_NEAR(std::pow(g->y(j + 1), 1 + gamma) - std::pow(g->y(j), 1 + gamma), step, 1e-12);
    }
}

TEST(GridProperties, FaceWeightsFiniteAndNonnegative) {
    for (double gamma : {-0.95, -0.5, 0.5, 0.95}) {
        auto g = build_grid(spec(1, 1, 8, 64, gamma, Grading::xi_graded));
        for (int j = 0; j <= g->ny(); ++j) {
            EXPECT_TRUE(std::isfinite(g->lateral_face_weight(j)));
            EXPECT_GT(g->lateral_face_weight(j), 0.0);
        }
        for (int j = 0; j < g->ny(); ++j) {
            EXPECT_TRUE(std::isfinite(g->zeta_gap(j)));
            EXPECT_GT(g->zeta_gap(j), 0.0);
        }
        for (double m : g->cell_measures()) {
            EXPECT_TRUE(std::isfinite(m));
            EXPECT_GT(m, 0.0);
        }
    }
}

TEST(GridIo, BlobLayoutAndRoundTrip) {
    auto g = build_grid(spec(1.25, 0.5, 6, 5, 0.3, Grading::xi_graded));
    const std::string bytes = io::encode(io::grid_blob(*g));
    // little-endian length prefix followed by the JSON text
    std::uint64_t len = 0;
    for (int b = 7; b >= 0; --b) len = (len << 8) | static_cast<unsigned char>(bytes[b]);
    ASSERT_LT(8 + len, bytes.size());
    EXPECT_EQ(bytes[8], '{');
    EXPECT_EQ(bytes.size(), 8 + len + 8 * (7 + 6));
    auto back = io::grid_from_blob(io::decode(bytes));
    EXPECT_EQ(back->nx(), 6);
    EXPECT_EQ(back->y_nodes(), g->y_nodes());
    EXPECT_DOUBLE_EQ(back->gamma(), 0.3);

    std::string bad = bytes;
    bad.resize(bytes.size() - 3);
    EXPECT_THROW(io::decode(bad), Error);
}
