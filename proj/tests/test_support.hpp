#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <random>

#include "phasereg/field.hpp"
#include "phasereg/grid.hpp"

namespace phasereg::testing {

inline Field random_field(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Field f(rows, cols);
    for (double& v : f.values()) v = dist(rng);
    return f;
}

/// Sum of a few random Gaussian bumps; smooth on the scale of `width`.
inline Field smooth_random_field(const GridSpec& grid, std::mt19937_64& rng, double amplitude, double width,
                                 int bumps = 4) {
    std::uniform_real_distribution<double> pos(-0.6 * grid.half_width, 0.6 * grid.half_width);
    std::uniform_real_distribution<double> amp(-amplitude, amplitude);
    Field f = grid.zeros();
    for (int b = 0; b < bumps; ++b) {
        const double cx = pos(rng), cy = pos(rng), a = amp(rng);
        for (int i = 0; i < grid.n; ++i)
            for (int j = 0; j < grid.n; ++j) {
                const double dx = grid.coord(i) - cx, dy = grid.coord(j) - cy;
                f(i, j) += a * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
            }
    }
    return f;
}

inline Field disc_indicator(const GridSpec& grid, double cx, double cy, double radius) {
    Field f = grid.zeros();
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) {
            const double dx = grid.coord(i) - cx, dy = grid.coord(j) - cy;
            if (dx * dx + dy * dy <= radius * radius) f(i, j) = 1.0;
        }
    return f;
}

inline double relative_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

inline double max_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace phasereg::testing
