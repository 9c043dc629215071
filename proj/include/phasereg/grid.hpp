#pragma once

#include <memory>
#include <optional>

#include "phasereg/field.hpp"

namespace phasereg {

/// Uniform N x N sampling of [-L, L]^2 together with the time step.
///
/// Grid index i (0-based) maps to x_i = -L + dx * i, so the centre index
/// (N - 1) / 2 lands exactly on the origin. The time axis has T samples on
/// [0, 1], hence dt = 1 / (T - 1), and the per-step heat kernel width is
/// tau = sigma * sqrt(dt).
struct GridSpec {
    int n = 0;
    double half_width = 0.0;
    double dx = 0.0;
    int time_steps = 0;
    double dt = 0.0;
    double sigma = 0.0;
    double tau = 0.0;

    double coord(int i) const;
    int center() const { return (n - 1) / 2; }
    double cell_area() const { return dx * dx; }
    Field zeros() const { return Field::square(static_cast<std::size_t>(n)); }
};

/// Validates and derives a GridSpec. Throws std::invalid_argument on even or
/// too-small N, non-positive L or sigma, or T < 2.
GridSpec build_grid(int n, double half_width, int time_steps, double sigma);

/// Radial kernel used for the velocity RKHS: kappa(rho) = exp(-rho^2 / (2 s^2)).
/// An unset width means 10 * dx.
struct RadialKernelSpec {
    std::optional<double> width;

    double resolved_width(const GridSpec& grid) const;
    double operator()(double rho, const GridSpec& grid) const;
};

/// Linear (zero-padded) convolution by a fixed kernel, evaluated through a
/// cached real FFT of the padded kernel. The output is the central
/// rows x cols slice, with the kernel's centre sample acting as the origin.
///
/// Instances are immutable and may be shared across threads.
class Convolution {
public:
    Convolution() = default;
    Convolution(const Field& kernel, std::size_t rows, std::size_t cols);

    Field apply(const Field& field) const;
    /// Transpose of apply() for the Euclidean inner product; equals
    /// convolution with the kernel flipped along both axes.
    Field apply_adjoint(const Field& field) const;

    bool valid() const { return impl_ != nullptr; }

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

/// Precomputed kernels for one grid: the discrete heat kernel, its x1
/// derivative (x2 derivative is the transpose) and the RKHS kernel sampled
/// at every lattice offset in [-(N-1), N-1]^2.
struct KernelSet {
    GridSpec grid;
    Field heat;      // M, N x N, includes the dx^2 quadrature weight
    Field heat_dx;   // DM
    Field heat_dy;   // DM^T
    Field rkhs;      // (2N-1) x (2N-1)
    Convolution heat_op;
    Convolution heat_dx_op;
    Convolution heat_dy_op;
    Convolution rkhs_op;
};

KernelSet build_kernels(const GridSpec& grid, const RadialKernelSpec& kappa);

/// Same-size linear convolution through the FFT path. The kernel must have
/// odd extents; the field may have any shape.
Field convolve(const Field& kernel, const Field& field);
Field adjoint_convolve(const Field& kernel, const Field& field);

/// Nested-loop reference implementations of the two operations above.
Field convolve_direct(const Field& kernel, const Field& field);
Field adjoint_convolve_direct(const Field& kernel, const Field& field);

}  // namespace phasereg
