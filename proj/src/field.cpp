#include "phasereg/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace phasereg {

Field& Field::operator+=(const Field& other) {
    require_same_shape(*this, other, "Field::operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_shape(*this, other, "Field::operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Field Field::transposed() const {
    Field out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

double Field::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Field::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Field::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::min(m, v);
    return m;
}

double Field::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double dot(const Field& a, const Field& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

Field hadamard(const Field& a, const Field& b) {
    require_same_shape(a, b, "hadamard");
    Field out(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
    return out;
}

void require_same_shape(const Field& a, const Field& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(what + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()) + ")");
    }
}

}  // namespace phasereg
