#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "phasereg/field.hpp"
#include "phasereg/grid.hpp"

namespace phasereg {

/// Time exponent p and spatial exponent r of the control norms. Construction
/// enforces p > 2 and r > 2p / (p - 2) (planar domain).
class NormPowers {
public:
    NormPowers() : NormPowers(4.0, 6.0) {}
    NormPowers(double p, double r);

    double p() const { return p_; }
    double r() const { return r_; }
    double r_star() const { return r_ / (r_ - 1.0); }

private:
    double p_;
    double r_;
};

/// Per-step control slices over the T - 1 time intervals. Slot 0 (the first
/// interval) carries no control and is kept identically zero.
struct NormalControl {
    std::vector<Field> slices;
};

struct MomentaField {
    std::vector<Field> m1;
    std::vector<Field> m2;
};

struct ControlSet {
    NormalControl u;
    MomentaField m;

    static ControlSet zeros(const GridSpec& grid);

    std::size_t steps() const { return u.slices.size(); }
    /// Number of doubles in the stacked representation.
    std::size_t flat_size() const;

    /// Stacking order: all u slices, then all m1, then all m2, time-major,
    /// each slice row-major.
    std::vector<double> flatten() const;
    static ControlSet unflatten(std::span<const double> x, const GridSpec& grid);

    /// Throws if shapes disagree with the grid, an entry is non-finite, or slot 0 is nonzero.
    void validate(const GridSpec& grid) const;
};

/// ||u||_U^p = dt * sum_k (dx^2 sum_ij |u_ij^k|^r)^(p/r)
double u_norm_p(const NormalControl& u, const NormPowers& powers, const GridSpec& grid);

/// v^(n) = K~ * m^(n) at step k.
std::pair<Field, Field> momenta_to_velocity(const MomentaField& m, std::size_t k, const KernelSet& kernels);

struct VNormResult {
    double value = 0.0;
    /// Set when the quadratic form came out below -1e-10 (non positive-definite kernel).
    bool negative_warning = false;
};

/// sum_n <m^(n)_k, K~ * m^(n)_k>
VNormResult v_norm_sq(const MomentaField& m, std::size_t k, const KernelSet& kernels);

/// C_top ||u||_U^p + dt * sum_k (||v_k||_V^2)^(p/2)
double running_cost(const ControlSet& c, const NormPowers& powers, double c_top, const KernelSet& kernels);

/// The velocity part of running_cost alone.
double velocity_cost(const MomentaField& m, const NormPowers& powers, const KernelSet& kernels);

}  // namespace phasereg
