#include "uad/matrix.hpp"

#include <cmath>
#include <string>

#include "uad/error.hpp"

namespace uad {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
        throw InvalidInput("matrix: expected " + std::to_string(r * c) + " values, got " +
                           std::to_string(data.size()));
    }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

LogitMatrix::LogitMatrix(std::size_t rows, std::size_t classes, std::vector<double> values)
    : rows_(rows), classes_(classes), values_(std::move(values)) {
    if (rows_ < 1) throw InvalidInput("logit matrix needs at least one row");
    if (classes_ < 2) throw InvalidInput("logit matrix needs at least two classes");
    if (values_.size() != rows_ * classes_) {
        throw InvalidInput("logit matrix: expected " + std::to_string(rows_ * classes_) +
                           " values, got " + std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InvalidInput("logit matrix: non-finite value at row " + std::to_string(i / classes_));
        }
    }
}

LogitMatrix::LogitMatrix(Matrix m) : LogitMatrix(m.rows, m.cols, std::move(m.data)) {}

}  // namespace uad
