#include "phasereg/controls.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phasereg {

NormPowers::NormPowers(double p, double r) : p_(p), r_(r) {
    if (!(p > 2.0)) throw std::invalid_argument("NormPowers: p must exceed 2");
    const double r_min = 2.0 * p / (p - 2.0);
    if (!(r > r_min)) {
        throw std::invalid_argument("NormPowers: r must exceed 2p/(p-2) = " + std::to_string(r_min));
    }
}

ControlSet ControlSet::zeros(const GridSpec& grid) {
    const auto steps = static_cast<std::size_t>(grid.time_steps - 1);
    ControlSet c;
    c.u.slices.assign(steps, grid.zeros());
    c.m.m1.assign(steps, grid.zeros());
    c.m.m2.assign(steps, grid.zeros());
    return c;
}

std::size_t ControlSet::flat_size() const {
    std::size_t total = 0;
    for (const auto& s : u.slices) total += s.size();
    for (const auto& s : m.m1) total += s.size();
    for (const auto& s : m.m2) total += s.size();
    return total;
}

std::vector<double> ControlSet::flatten() const {
    std::vector<double> x;
    x.reserve(flat_size());
    for (const auto* block : {&u.slices, &m.m1, &m.m2})
        for (const auto& s : *block) x.insert(x.end(), s.values().begin(), s.values().end());
    return x;
}

ControlSet ControlSet::unflatten(std::span<const double> x, const GridSpec& grid) {
    ControlSet c = zeros(grid);
    if (x.size() != c.flat_size()) {
        throw std::invalid_argument("ControlSet::unflatten: expected " + std::to_string(c.flat_size()) +
                                    " values, got " + std::to_string(x.size()));
    }
    std::size_t offset = 0;
    for (auto* block : {&c.u.slices, &c.m.m1, &c.m.m2}) {
        for (auto& s : *block) {
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(offset), s.size(), s.data());
            offset += s.size();
        }
    }
    return c;
}

void ControlSet::validate(const GridSpec& grid) const {
    const auto steps = static_cast<std::size_t>(grid.time_steps - 1);
    const auto n = static_cast<std::size_t>(grid.n);
    for (const auto* block : {&u.slices, &m.m1, &m.m2}) {
        if (block->size() != steps)
            throw std::invalid_argument("ControlSet: expected " + std::to_string(steps) + " time slots");
        for (std::size_t k = 0; k < steps; ++k) {
            const Field& s = (*block)[k];
            if (s.rows() != n || s.cols() != n)
                throw std::invalid_argument("ControlSet: slot " + std::to_string(k) + " has wrong shape");
            for (double v : s.values()) {
                if (!std::isfinite(v))
                    throw std::invalid_argument("ControlSet: non-finite entry in slot " + std::to_string(k));
                if (k == 0 && v != 0.0)
                    throw std::invalid_argument("ControlSet: slot 0 must be identically zero");
            }
        }
    }
}

double u_norm_p(const NormalControl& u, const NormPowers& powers, const GridSpec& grid) {
    double total = 0.0;
    for (const Field& s : u.slices) {
        double acc = 0.0;
        for (double v : s.values()) acc += std::pow(std::abs(v), powers.r());
        total += std::pow(grid.cell_area() * acc, powers.p() / powers.r());
    }
    return grid.dt * total;
}

std::pair<Field, Field> momenta_to_velocity(const MomentaField& m, std::size_t k, const KernelSet& kernels) {
    if (k >= m.m1.size() || k >= m.m2.size())
        throw std::out_of_range("momenta_to_velocity: time index " + std::to_string(k) + " out of range");
    return {kernels.rkhs_op.apply(m.m1[k]), kernels.rkhs_op.apply(m.m2[k])};
}

VNormResult v_norm_sq(const MomentaField& m, std::size_t k, const KernelSet& kernels) {
    auto [v1, v2] = momenta_to_velocity(m, k, kernels);
    VNormResult res;
    res.value = dot(m.m1[k], v1) + dot(m.m2[k], v2);
    res.negative_warning = res.value < -1e-10;
    return res;
}

double velocity_cost(const MomentaField& m, const NormPowers& powers, const KernelSet& kernels) {
    double total = 0.0;
    for (std::size_t k = 0; k < m.m1.size(); ++k) {
        const double q = std::max(0.0, v_norm_sq(m, k, kernels).value);
        total += std::pow(q, powers.p() / 2.0);
    }
    return kernels.grid.dt * total;
}

double running_cost(const ControlSet& c, const NormPowers& powers, double c_top, const KernelSet& kernels) {
    return c_top * u_norm_p(c.u, powers, kernels.grid) + velocity_cost(c.m, powers, kernels);
}

}  // namespace phasereg
