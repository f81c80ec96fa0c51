#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace uad {

/// Dense row-major matrix of doubles. No invariants beyond shape.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    /// Copy of the listed rows, in the given order.
    Matrix gather_rows(std::span<const std::size_t> idx) const;

    bool operator==(const Matrix&) const = default;
};

/// n x K pre-softmax outputs. Always n >= 1, K >= 2 and every value finite.
class LogitMatrix {
public:
    LogitMatrix(std::size_t rows, std::size_t classes, std::vector<double> values);
    explicit LogitMatrix(Matrix m);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t classes() const noexcept { return classes_; }

    double operator()(std::size_t i, std::size_t k) const { return values_[i * classes_ + k]; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * classes_, classes_}; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const LogitMatrix&) const = default;

private:
    std::size_t rows_;
    std::size_t classes_;
    std::vector<double> values_;
};

}  // namespace uad
