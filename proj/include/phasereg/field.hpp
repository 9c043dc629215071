#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasereg {

/// Dense row-major 2D array of doubles. Index (i, j) addresses the i-th
/// sample along x1 and the j-th along x2.
class Field {
public:
    Field() = default;
    Field(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static Field square(std::size_t n, double value = 0.0) { return Field(n, n, value); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Field& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s);

    Field transposed() const;
    double sum() const;
    double max_abs() const;
    double min() const;
    double max() const;

    friend bool operator==(const Field&, const Field&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Euclidean inner product over all entries (no quadrature weight).
double dot(const Field& a, const Field& b);

/// Entrywise product.
Field hadamard(const Field& a, const Field& b);

/// Throws std::invalid_argument naming `what` when the shapes differ.
void require_same_shape(const Field& a, const Field& b, const std::string& what);

}  // namespace phasereg
