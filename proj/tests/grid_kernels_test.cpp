#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "phasereg/grid.hpp"
#include "test_support.hpp"

namespace phasereg {
namespace {

using testing::max_abs_diff;
using testing::random_field;

TEST(BuildGrid, DerivedQuantities) {
    const GridSpec g = build_grid(151, 1.0, 30, 0.1);
    EXPECT_EQ(g.n, 151);
    EXPECT_DOUBLE_EQ(g.dx, 2.0 / 150.0);
    EXPECT_DOUBLE_EQ(g.dt, 1.0 / 29.0);
    EXPECT_EQ(g.tau, 0.1 * std::sqrt(1.0 / 29.0));
    EXPECT_EQ(g.coord(g.center()), 0.0);
    EXPECT_DOUBLE_EQ(g.coord(0), -1.0);
    EXPECT_DOUBLE_EQ(g.coord(150), 1.0);
}

TEST(BuildGrid, SmallestLegalGrid) {
    const GridSpec g = build_grid(3, 1.0, 2, 1.0);
    EXPECT_EQ(g.coord(0), -1.0);
    EXPECT_EQ(g.coord(1), 0.0);
    EXPECT_EQ(g.coord(2), 1.0);
    EXPECT_EQ(g.dt, 1.0);
    EXPECT_EQ(g.tau, 1.0);
}

TEST(BuildGrid, RejectsInvalidInput) {
    EXPECT_THROW(build_grid(4, 1.0, 10, 0.1), std::invalid_argument);
    EXPECT_THROW(build_grid(150, 1.0, 30, 0.1), std::invalid_argument);
    EXPECT_THROW(build_grid(1, 1.0, 10, 0.1), std::invalid_argument);
    EXPECT_THROW(build_grid(5, 0.0, 10, 0.1), std::invalid_argument);
    EXPECT_THROW(build_grid(5, 1.0, 1, 0.1), std::invalid_argument);
    EXPECT_THROW(build_grid(5, 1.0, 10, -0.1), std::invalid_argument);
}

TEST(BuildKernels, CentreEntriesAndSymmetry) {
    const GridSpec g = build_grid(41, 1.0, 5, 0.2);
    const KernelSet ks = build_kernels(g, {});
    const int c = g.center();
    EXPECT_DOUBLE_EQ(ks.heat(c, c), g.dx * g.dx / (2.0 * std::numbers::pi * g.tau * g.tau));
    EXPECT_EQ(ks.heat_dx(c, c), 0.0);
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            const int fi = g.n - 1 - i, fj = g.n - 1 - j;
            EXPECT_EQ(ks.heat(i, j), ks.heat(fi, j));
            EXPECT_EQ(ks.heat(i, j), ks.heat(i, fj));
            EXPECT_EQ(ks.heat(i, j), ks.heat(j, i));
            EXPECT_EQ(ks.heat_dx(i, j), -ks.heat_dx(fi, j));
            EXPECT_EQ(ks.heat_dx(i, j), ks.heat_dx(i, fj));
            EXPECT_EQ(ks.heat_dy(i, j), ks.heat_dx(j, i));
        }
    }
    EXPECT_EQ(ks.rkhs.rows(), static_cast<std::size_t>(2 * g.n - 1));
    EXPECT_EQ(ks.rkhs(g.n - 1, g.n - 1), 1.0);
}

// Oracle: the same Gaussian integrated by a midpoint rule at twice the
// resolution over a wider window, which converges to the exact mass 1.
double gaussian_mass_oracle(double tau, double half_width, double h) {
    double s = 0.0;
    const int m = static_cast<int>(std::ceil(half_width / h));
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j) {
            const double x = i * h, y = j * h;
            s += std::exp(-(x * x + y * y) / (2.0 * tau * tau));
        }
    return s * h * h / (2.0 * std::numbers::pi * tau * tau);
}

TEST(BuildKernels, MassIsOneForResolvedTau) {
    // N = 101, L = 1, tau = 0.1 (sigma = 0.1, dt = 1)
    const GridSpec g = build_grid(101, 1.0, 2, 0.1);
    ASSERT_DOUBLE_EQ(g.tau, 0.1);
    const KernelSet ks = build_kernels(g, {});
    const double oracle = gaussian_mass_oracle(g.tau, 2.0, g.dx / 2.0);
    EXPECT_NEAR(oracle, 1.0, 1e-9);
    EXPECT_NEAR(ks.heat.sum(), 1.0, 1e-6);
    EXPECT_NEAR(ks.heat.sum(), oracle, 1e-6);
}

TEST(BuildKernels, MassToleranceAcrossWidths) {
    for (double ratio : {3.0, 4.0, 5.0, 8.0}) {
        const double dx = 2.0 / 100.0;
        const GridSpec g = build_grid(101, 1.0, 2, ratio * dx);
        const KernelSet ks = build_kernels(g, {});
        EXPECT_LE(std::abs(ks.heat.sum() - 1.0), 1e-3) << ratio;
        if (ratio >= 5.0) EXPECT_LE(std::abs(ks.heat.sum() - 1.0), 1e-6) << ratio;
    }
}

TEST(Convolve, ZeroAndDelta) {
    const GridSpec g = build_grid(31, 1.0, 5, 0.2);
    const KernelSet ks = build_kernels(g, {});
    const Field zero = g.zeros();
    EXPECT_EQ(convolve(ks.heat, zero).max_abs(), 0.0);

    Field delta = g.zeros();
    delta(g.center(), g.center()) = 1.0;
    EXPECT_LE(max_abs_diff(convolve(ks.heat, delta), ks.heat), 1e-15);
    EXPECT_LE(max_abs_diff(ks.heat_op.apply(delta), ks.heat), 1e-15);
}

TEST(Convolve, ConstantFieldNearOneInInterior) {
    const GridSpec g = build_grid(61, 1.0, 2, 0.1);
    const KernelSet ks = build_kernels(g, {});
    const Field ones = Field::square(61, 1.0);
    const Field fast = convolve(ks.heat, ones);
    const Field direct = convolve_direct(ks.heat, ones);
    EXPECT_LE(max_abs_diff(fast, direct), 1e-12);
    const int c = g.center();
    EXPECT_NEAR(direct(c, c), 1.0, 1e-6);
    EXPECT_NEAR(direct(c + 10, c - 12), 1.0, 1e-6);
    // at the corner a quarter of the kernel plus half of the two edge rows overlaps
    const double half_line = 0.5 + 0.5 * g.dx / (std::sqrt(2.0 * std::numbers::pi) * g.tau);
    EXPECT_NEAR(direct(0, 0), half_line * half_line, 1e-6);
}

TEST(Convolve, FastMatchesDirectOnRandomInputs) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t kr = trial % 2 ? 31 : 33;
        const std::size_t kc = trial < 2 ? 33 : 7;
        const Field kernel = random_field(kr, kc, rng);
        const Field field = random_field(32, 32, rng);
        const Field fast = convolve(kernel, field);
        const Field direct = convolve_direct(kernel, field);
        EXPECT_LE(max_abs_diff(fast, direct), 1e-10 * direct.max_abs());
        const Field fast_adj = adjoint_convolve(kernel, field);
        const Field direct_adj = adjoint_convolve_direct(kernel, field);
        EXPECT_LE(max_abs_diff(fast_adj, direct_adj), 1e-10 * direct_adj.max_abs());
    }
}

TEST(Convolve, AdjointOfSymmetricAndAntisymmetricKernels) {
    std::mt19937_64 rng(11);
    const GridSpec g = build_grid(25, 1.0, 5, 0.3);
    const KernelSet ks = build_kernels(g, {});
    const Field b = random_field(25, 25, rng);
    EXPECT_LE(max_abs_diff(adjoint_convolve(ks.heat, b), convolve(ks.heat, b)), 1e-14);
    const Field a1 = adjoint_convolve(ks.heat_dx, b);
    const Field a2 = convolve(ks.heat_dx, b);
    EXPECT_LE(max_abs_diff(a1, -1.0 * a2), 1e-13);
}

TEST(Convolve, AdjointInnerProductIdentity) {
    std::mt19937_64 rng(3);
    const Field kernel = random_field(15, 15, rng);
    const Field a = random_field(16, 16, rng);
    const Field b = random_field(16, 16, rng);
    // direct evaluation of both sides
    const double lhs = dot(convolve_direct(kernel, a), b);
    const double rhs = dot(a, adjoint_convolve_direct(kernel, b));
    EXPECT_LE(testing::relative_error(lhs, rhs), 1e-10);
    const double rhs_fast = dot(a, adjoint_convolve(kernel, b));
    EXPECT_LE(testing::relative_error(lhs, rhs_fast), 1e-10);

    const Convolution op(kernel, 16, 16);
    EXPECT_LE(testing::relative_error(dot(op.apply(a), b), dot(a, op.apply_adjoint(b))), 1e-10);
}

TEST(Convolve, MaxNormContraction) {
    std::mt19937_64 rng(5);
    const GridSpec g = build_grid(33, 1.0, 5, 0.2);
    const KernelSet ks = build_kernels(g, {});
    for (int t = 0; t < 5; ++t) {
        const Field h = random_field(33, 33, rng, -3.0, 3.0);
        EXPECT_LE(ks.heat_op.apply(h).max_abs(), ks.heat.sum() * h.max_abs() * (1.0 + 1e-12));
    }
}

TEST(Convolve, DerivativeKernelRecoversRampSlope) {
    const GridSpec g = build_grid(101, 1.0, 2, 0.1);
    const KernelSet ks = build_kernels(g, {});
    Field ramp = g.zeros();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) ramp(i, j) = g.coord(i);
    const Field d1 = ks.heat_dx_op.apply(ramp);
    const Field d2 = ks.heat_dy_op.apply(ramp);
    const int margin = static_cast<int>(std::ceil(6.0 * g.tau / g.dx));
    for (int i = margin; i < g.n - margin; ++i)
        for (int j = margin; j < g.n - margin; ++j) {
            EXPECT_NEAR(d1(i, j), 1.0, 1e-3);
            EXPECT_NEAR(d2(i, j), 0.0, 1e-3);
        }
}

TEST(Convolve, RejectsBadShapes) {
    const Field even_kernel(4, 4, 1.0);
    const Field field(8, 8, 1.0);
    EXPECT_THROW(convolve(even_kernel, field), std::invalid_argument);
    EXPECT_THROW(convolve_direct(even_kernel, field), std::invalid_argument);
    const Convolution op(Field(5, 5, 1.0), 8, 8);
    EXPECT_THROW(op.apply(Field(9, 8)), std::invalid_argument);
}

}  // namespace
}  // namespace phasereg
