#pragma once

#include <utility>

#include "phasereg/field.hpp"

namespace phasereg {

/// Double-well reaction I(xi) = W xi^2 (xi - 1)^2 (xi - 1/2) on [0, 1], zero outside.
struct ReactionSpec {
    double well_depth = 100.0;

    double operator()(double xi) const;
    double derivative(double xi) const;
};

Field reaction(const Field& f, const ReactionSpec& spec);
Field reaction_prime(const Field& f, const ReactionSpec& spec);

/// Smoothed gradient magnitude chi(z) = sqrt(|z|^2 + psi^2).
struct ChiSpec {
    double psi = 1e-8;

    /// psi^2 = dt * eps, the regularisation used by the discrete drift.
    static ChiSpec from_time_step(double dt, double eps = 1e-16);
};

Field chi(const Field& gx, const Field& gy, const ChiSpec& spec);
std::pair<Field, Field> chi_grad(const Field& gx, const Field& gy, const ChiSpec& spec);

/// Range-preserving substitution g(x) = 1/2 + mu log((x + a) / (1 + a - x))
/// on (-a, 1 + a), with its inverse and first two derivatives.
class MbpMap {
public:
    /// Distance kept from the open-interval endpoints when clamping.
    static constexpr double kDomainMargin = 1e-14;

    MbpMap() : MbpMap(0.01, 0.05) {}
    MbpMap(double a, double mu);

    double a() const { return a_; }
    double mu() const { return mu_; }
    double lower() const { return -a_; }
    double upper() const { return 1.0 + a_; }

    bool in_domain(double x) const;
    double clamp(double x) const;

    double g(double x) const;
    double g_prime(double x) const;
    double g_second(double x) const;
    /// Always lands in [-a, 1 + a], for any finite y.
    double g_inv(double y) const;
    double g_inv_prime(double y) const;

    /// Grid lifts; the forward maps throw std::domain_error naming the first
    /// offending (i, j) when an entry lies outside the clamped domain.
    Field g(const Field& x) const;
    Field g_prime(const Field& x) const;
    Field g_inv(const Field& y) const;

private:
    void check_domain(const Field& x, const char* what) const;

    double a_;
    double mu_;
};

}  // namespace phasereg
