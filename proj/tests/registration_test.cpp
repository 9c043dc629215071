#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "phasereg/registration.hpp"
#include "test_support.hpp"

namespace phasereg {
namespace {

using testing::disc_indicator;

TEST(ComponentCount, BasicShapes) {
    const GridSpec g = build_grid(41, 1.0, 3, 0.1);
    EXPECT_EQ(component_count(g.zeros(), 0.5), 0);
    EXPECT_EQ(component_count(Field(41, 41, 1.0), 0.5), 1);
    Field two = disc_indicator(g, -0.5, 0.0, 0.3);
    two += disc_indicator(g, 0.5, 0.1, 0.3);
    EXPECT_EQ(component_count(two, 0.5), 2);

    // diagonal neighbours are separate components
    Field diag = g.zeros();
    diag(10, 10) = 1.0;
    diag(11, 11) = 1.0;
    EXPECT_EQ(component_count(diag, 0.5), 2);
    int n = 0;
    const std::vector<int> labels = component_labels(diag, 0.5, &n);
    EXPECT_EQ(n, 2);
    EXPECT_EQ(labels[10 * 41 + 10], 1);
    EXPECT_EQ(labels[11 * 41 + 11], 2);
    EXPECT_EQ(labels[0], 0);
}

TEST(ComponentCount, PinchedNeck) {
    const GridSpec g = build_grid(41, 1.0, 3, 0.1);
    Field f = disc_indicator(g, -0.45, 0.0, 0.35);
    f += disc_indicator(g, 0.45, 0.0, 0.35);
    const int mid = g.center();
    // one-cell-wide neck along x1 through the middle row
    for (int i = 0; i < g.n; ++i)
        if (std::abs(g.coord(i)) < 0.2) f(i, mid) = 1.0;
    EXPECT_EQ(component_count(f, 0.5), 1);
    f(mid, mid) = 0.0;
    EXPECT_EQ(component_count(f, 0.5), 2);
}

TEST(Contour, EmptyAndConstantFieldsHaveNone) {
    const GridSpec g = build_grid(21, 1.0, 3, 0.1);
    EXPECT_TRUE(contour(g.zeros(), 0.5, g).empty());
    EXPECT_TRUE(contour(Field(21, 21, 1.0), 0.5, g).empty());
}

TEST(Contour, DiscGivesOneClosedCircle) {
    const GridSpec g = build_grid(65, 1.0, 3, 0.1);
    const double r = 0.45;
    const auto lines = contour(disc_indicator(g, 0.1, -0.05, r), 0.5, g);
    ASSERT_EQ(lines.size(), 1u);
    const Polyline& c = lines[0];
    ASSERT_GT(c.size(), 20u);
    EXPECT_EQ(c.front().x1, c.back().x1);
    EXPECT_EQ(c.front().x2, c.back().x2);
    for (const Point& p : c) EXPECT_NEAR(std::hypot(p.x1 - 0.1, p.x2 + 0.05), r, g.dx);
}

TEST(Contour, RowStepGivesSingleStraightChain) {
    const GridSpec g = build_grid(21, 1.0, 3, 0.1);
    Field f = g.zeros();
    for (int i = 0; i < g.n; ++i)
        for (int j = 12; j < g.n; ++j) f(i, j) = 1.0;
    const auto lines = contour(f, 0.5, g);
    ASSERT_EQ(lines.size(), 1u);
    const double x2 = 0.5 * (g.coord(11) + g.coord(12));
    EXPECT_EQ(lines[0].size(), static_cast<std::size_t>(g.n));
    for (const Point& p : lines[0]) EXPECT_NEAR(p.x2, x2, 1e-15);
    // open chain from one side of the domain to the other
    EXPECT_NEAR(std::abs(lines[0].front().x1 - lines[0].back().x1), 2.0 * g.half_width, 1e-12);
}

TEST(Contour, TwoDiscsGiveTwoLoops) {
    const GridSpec g = build_grid(65, 1.0, 3, 0.1);
    Field f = disc_indicator(g, -0.5, 0.0, 0.3);
    f += disc_indicator(g, 0.5, 0.0, 0.3);
    EXPECT_EQ(contour(f, 0.5, g).size(), 2u);
}

TEST(LevelSetArea, LinearFieldsAreExact) {
    const GridSpec g = build_grid(21, 1.0, 3, 0.1);
    // f = 0.5 + x1: above level on x1 > 0, half the domain
    Field f = g.zeros();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f(i, j) = 0.5 + g.coord(i) + 1e-3;
    EXPECT_NEAR(level_set_area(f, 0.5, g), 2.0 * (1.0 + 1e-3), 1e-12);
    EXPECT_EQ(level_set_area(g.zeros(), 0.5, g), 0.0);
    EXPECT_NEAR(level_set_area(Field(21, 21, 1.0), 0.5, g), 4.0, 1e-12);

    // diagonal: f = x1 + x2 > 0.3 cuts a triangle-free straight line
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f(i, j) = g.coord(i) + g.coord(j);
    const double c = 0.3;
    const double side = 2.0 - c;  // legs of the triangle {x1 + x2 > c} in [-1, 1]^2
    EXPECT_NEAR(level_set_area(f, c, g), 0.5 * side * side, 1e-12);
}

TEST(LevelSetArea, SmoothDiscConvergesToCircleArea) {
    for (int n : {65, 129}) {
        const GridSpec g = build_grid(n, 1.0, 3, 0.1);
        Field f = g.zeros();
        const double r = 0.5;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) f(i, j) = 0.5 - (std::hypot(g.coord(i), g.coord(j)) - r);
        EXPECT_NEAR(level_set_area(f, 0.5, g), std::numbers::pi * r * r, 2.0 * g.dx * g.dx) << n;
    }
}

TEST(Flow, BilinearSampleReproducesAffineFields) {
    const GridSpec g = build_grid(21, 1.0, 3, 0.1);
    Field f = g.zeros();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f(i, j) = 2.0 - 0.3 * g.coord(i) + 0.7 * g.coord(j);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const Point p{u(rng), u(rng)};
        EXPECT_NEAR(sample_bilinear(f, g, p), 2.0 - 0.3 * p.x1 + 0.7 * p.x2, 1e-12);
    }
    EXPECT_EQ(sample_bilinear(f, g, {1.2, 0.0}), 0.0);
    EXPECT_EQ(sample_bilinear(f, g, {0.0, -1.0 - 1e-9}), 0.0);
}

TEST(Flow, ZeroVelocityLeavesParticlesInPlace) {
    const GridSpec g = build_grid(21, 1.0, 6, 0.1);
    const std::vector<Field> zero(5, g.zeros());
    const std::vector<Point> start{{0.1, 0.2}, {-0.5, 0.9}};
    const auto path = flow_particles(zero, zero, g, start);
    ASSERT_EQ(path.size(), 6u);
    for (const auto& step : path)
        for (std::size_t k = 0; k < start.size(); ++k) {
            EXPECT_EQ(step[k].x1, start[k].x1);
            EXPECT_EQ(step[k].x2, start[k].x2);
        }
    const Field disc = disc_indicator(g, 0.0, 0.0, 0.5);
    EXPECT_EQ(advect_by_flow(disc, zero, zero, g), disc);
}

TEST(Flow, ConstantVelocityTranslatesUniformly) {
    const GridSpec g = build_grid(41, 1.0, 11, 0.1);
    const double c = 0.3;
    const std::vector<Field> v1(10, Field(41, 41, c)), v2(10, g.zeros());
    const auto path = flow_particles(v1, v2, g, {{-0.4, 0.1}, {0.0, -0.3}});
    // ten Euler steps of dt = 1/10 over unit time
    EXPECT_NEAR(path.back()[0].x1, -0.4 + c, 1e-12);
    EXPECT_NEAR(path.back()[1].x1, c, 1e-12);
    EXPECT_EQ(path.back()[0].x2, 0.1);

    // a shift of exactly six cells moves the indicator by six nodes
    const double shift = 6.0 * g.dx;
    const std::vector<Field> w1(10, Field(41, 41, shift));
    const Field disc = disc_indicator(g, -0.2, 0.0, 0.3);
    const Field moved = advect_by_flow(disc, w1, v2, g);
    for (int i = 6; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) EXPECT_NEAR(moved(i, j), disc(i - 6, j), 1e-9);
}

RegistrationProblem small_problem(const Field& a, const Field& b, const GridSpec& g) {
    RegistrationProblem p;
    p.grid = g;
    p.initial = a;
    p.target = b;
    p.c_top = 1.0;
    p.c_end = 100.0;
    p.optimizer.max_iters = 15;
    return p;
}

TEST(Registration, ValidateRejectsBadProblems) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    RegistrationProblem p = small_problem(g.zeros(), g.zeros(), g);
    EXPECT_NO_THROW(p.validate());
    p.c_end = 0.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = small_problem(g.zeros(), Field(15, 15), g);
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = small_problem(g.zeros(), g.zeros(), g);
    p.c_top = -1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Registration, IdenticalShapesGiveZeroRho) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    const Field disc = disc_indicator(g, 0.0, 0.0, 0.2);
    const SolveResult r = solve(small_problem(disc, disc, g));
    EXPECT_EQ(r.rho, 0.0);
    EXPECT_EQ(r.report.iterations, 0);
    const DiscrepancyResult d = discrepancy(disc, disc, small_problem(disc, disc, g));
    EXPECT_EQ(d.d_sigma, 0.0);
    EXPECT_FALSE(d.partial);
}

TEST(Registration, DiscrepancyIsSymmetricAndBoundedByZeroControlCost) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    const Field a = disc_indicator(g, -0.05, 0.0, 0.18);
    const Field b = disc_indicator(g, 0.08, 0.02, 0.13);
    const RegistrationProblem p = small_problem(a, b, g);
    const DiscrepancyResult ab = discrepancy(a, b, p);
    const DiscrepancyResult ba = discrepancy(b, a, p);
    EXPECT_EQ(ab.d_sigma, ba.d_sigma);
    EXPECT_EQ(ab.rho_forward, ba.rho_backward);
    EXPECT_EQ(ab.d_sigma, std::min(ab.rho_forward, ab.rho_backward));
    ASSERT_TRUE(ab.forward && ab.backward);
    EXPECT_GT(ab.rho_forward, 0.0);
    EXPECT_LT(ab.rho_forward, ab.forward->zero_control.total());
    EXPECT_LT(ab.rho_backward, ab.backward->zero_control.total());
}

TEST(Registration, ConcurrentDiscrepancyMatchesSequential) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    const Field a = disc_indicator(g, -0.05, 0.0, 0.18);
    const Field b = disc_indicator(g, 0.08, 0.02, 0.13);
    const RegistrationProblem p = small_problem(a, b, g);
    const DiscrepancyResult seq = discrepancy(a, b, p, 1);
    const DiscrepancyResult par = discrepancy(a, b, p, 2);
    EXPECT_EQ(seq.rho_forward, par.rho_forward);
    EXPECT_EQ(seq.rho_backward, par.rho_backward);
    ASSERT_TRUE(par.forward && par.backward);
    EXPECT_EQ(seq.forward->report.E_trace, par.forward->report.E_trace);
    EXPECT_EQ(seq.backward->report.E_trace, par.backward->report.E_trace);
}

TEST(Registration, RestartsNeverWorsenRhoAndAreSeeded) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    RegistrationProblem p = small_problem(disc_indicator(g, -0.05, 0.0, 0.18), disc_indicator(g, 0.08, 0.02, 0.13), g);
    p.optimizer.max_iters = 5;
    const double single = solve(p).rho;
    p.restarts = 2;
    p.seed = 11;
    p.restart_scale = 0.05;
    const SolveResult a = solve(p);
    const SolveResult b = solve(p);
    EXPECT_LE(a.rho, single);
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.start, b.start);
    EXPECT_EQ(a.report.E_trace, b.report.E_trace);
    p.restarts = -1;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Registration, EmptyTargetCostsLessThanLeavingTheDisc) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    const SolveResult r = solve(small_problem(disc_indicator(g, 0.0, 0.0, 0.2), g.zeros(), g));
    EXPECT_GT(r.rho, 0.0);
    EXPECT_LT(r.rho, r.zero_control.endpoint);
    EXPECT_GT(r.report.final_energy.u_cost + r.report.final_energy.v_cost, 0.0);
}

TEST(Decompose, SplitsControlsAndKeepsTopologyUnderTheFlow) {
    const GridSpec g = build_grid(17, 0.4, 5, 0.1);
    const Field a = disc_indicator(g, -0.05, 0.0, 0.18);
    const Field b = disc_indicator(g, 0.08, 0.02, 0.13);
    const RegistrationProblem p = small_problem(a, b, g);
    const SolveResult r = solve(p);
    const Decomposition d = decompose(r.report, p);
    ASSERT_EQ(d.particles.size(), static_cast<std::size_t>(g.time_steps));
    EXPECT_EQ(d.particles.front().size(), a.size());
    EXPECT_EQ(d.initial_components, 1);
    EXPECT_EQ(d.advected_components, d.initial_components);
    EXPECT_EQ(d.seed_component.size(), a.size());

    // u-only and v-only endpoints match evolving the split controls by hand
    ControlSet u_only = r.report.final_controls;
    for (auto* block : {&u_only.m.m1, &u_only.m.m2})
        for (Field& s : *block) s = g.zeros();
    EXPECT_EQ(d.u_only_endpoint, evolve(a, u_only, p.model()).final_smoothed());

    // no velocity: particles stay put
    OptimizationReport still = r.report;
    for (auto* block : {&still.final_controls.m.m1, &still.final_controls.m.m2})
        for (Field& s : *block) s = g.zeros();
    const Decomposition s = decompose(still, p);
    for (std::size_t k = 0; k < s.particles.front().size(); ++k) {
        EXPECT_EQ(s.particles.back()[k].x1, s.particles.front()[k].x1);
        EXPECT_EQ(s.particles.back()[k].x2, s.particles.front()[k].x2);
    }
    EXPECT_EQ(s.advected_indicator, a);
}

}  // namespace
}  // namespace phasereg
