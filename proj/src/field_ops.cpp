#include "phasereg/field_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phasereg {

double ReactionSpec::operator()(double xi) const {
    if (xi < 0.0 || xi > 1.0) return 0.0;
    const double b = xi * (xi - 1.0);
    return well_depth * b * b * (xi - 0.5);
}

double ReactionSpec::derivative(double xi) const {
    // d/dxi [b^2 (xi - 1/2)] with b = xi (xi - 1), b' = 2 xi - 1
    if (xi <= 0.0 || xi >= 1.0) return 0.0;
    const double b = xi * (xi - 1.0);
    const double c = xi - 0.5;
    return well_depth * (2.0 * b * (2.0 * xi - 1.0) * c + b * b);
}

Field reaction(const Field& f, const ReactionSpec& spec) {
    Field out(f.rows(), f.cols());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = spec(f[k]);
    return out;
}

Field reaction_prime(const Field& f, const ReactionSpec& spec) {
    Field out(f.rows(), f.cols());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = spec.derivative(f[k]);
    return out;
}

ChiSpec ChiSpec::from_time_step(double dt, double eps) { return ChiSpec{std::sqrt(dt * eps)}; }

Field chi(const Field& gx, const Field& gy, const ChiSpec& spec) {
    require_same_shape(gx, gy, "chi");
    const double psi2 = spec.psi * spec.psi;
    Field out(gx.rows(), gx.cols());
    for (std::size_t k = 0; k < gx.size(); ++k) out[k] = std::sqrt(gx[k] * gx[k] + gy[k] * gy[k] + psi2);
    return out;
}

std::pair<Field, Field> chi_grad(const Field& gx, const Field& gy, const ChiSpec& spec) {
    require_same_shape(gx, gy, "chi_grad");
    const double psi2 = spec.psi * spec.psi;
    Field ox(gx.rows(), gx.cols());
    Field oy(gx.rows(), gx.cols());
    for (std::size_t k = 0; k < gx.size(); ++k) {
        const double c = std::sqrt(gx[k] * gx[k] + gy[k] * gy[k] + psi2);
        ox[k] = gx[k] / c;
        oy[k] = gy[k] / c;
    }
    return {std::move(ox), std::move(oy)};
}

MbpMap::MbpMap(double a, double mu) : a_(a), mu_(mu) {
    if (!(a >= 0.0)) throw std::invalid_argument("MbpMap: a must be nonnegative");
    if (!(mu > 0.0)) throw std::invalid_argument("MbpMap: mu must be positive");
}

bool MbpMap::in_domain(double x) const {
    return x >= lower() + kDomainMargin && x <= upper() - kDomainMargin;
}

double MbpMap::clamp(double x) const {
    return std::clamp(x, lower() + kDomainMargin, upper() - kDomainMargin);
}

double MbpMap::g(double x) const { return 0.5 + mu_ * std::log((x + a_) / (1.0 + a_ - x)); }

double MbpMap::g_prime(double x) const {
    return mu_ * (1.0 + 2.0 * a_) / ((x + a_) * (1.0 + a_ - x));
}

double MbpMap::g_second(double x) const {
    const double lo = x + a_;
    const double hi = 1.0 + a_ - x;
    return mu_ * (1.0 / (hi * hi) - 1.0 / (lo * lo));
}

double MbpMap::g_inv(double y) const {
    // logistic s in [0, 1]; x = s (1 + a) - (1 - s) a stays inside [-a, 1 + a]
    // under rounding because both products are bounded by their factors.
    const double z = (y - 0.5) / mu_;
    double s;
    double one_minus_s;
    if (z >= 0.0) {
        const double e = std::exp(-z);
        s = 1.0 / (1.0 + e);
        one_minus_s = e / (1.0 + e);
    } else {
        const double e = std::exp(z);
        s = e / (1.0 + e);
        one_minus_s = 1.0 / (1.0 + e);
    }
    return s * (1.0 + a_) - one_minus_s * a_;
}

double MbpMap::g_inv_prime(double y) const {
    const double e = std::exp(-std::abs((y - 0.5) / mu_));
    const double s_one_minus_s = e / ((1.0 + e) * (1.0 + e));
    return (1.0 + 2.0 * a_) * s_one_minus_s / mu_;
}

void MbpMap::check_domain(const Field& x, const char* what) const {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!in_domain(x(i, j))) {
                throw std::domain_error(std::string(what) + ": entry (" + std::to_string(i) + ", " +
                                        std::to_string(j) + ") = " + std::to_string(x(i, j)) +
                                        " outside (-a, 1 + a)");
            }
        }
    }
}

Field MbpMap::g(const Field& x) const {
    check_domain(x, "mbp g");
    Field out(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = g(x[k]);
    return out;
}

Field MbpMap::g_prime(const Field& x) const {
    check_domain(x, "mbp g'");
    Field out(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = g_prime(x[k]);
    return out;
}

Field MbpMap::g_inv(const Field& y) const {
    Field out(y.rows(), y.cols());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = g_inv(y[k]);
    return out;
}

}  // namespace phasereg
