#pragma once

// Probability and margin primitives shared by every other module.
// All functions are pure; reductions run left to right.

#include <cstddef>
#include <span>
#include <vector>

#include "uad/matrix.hpp"

namespace uad {

/// Stable softmax written into `out` (same length as `logits`).
/// Throws InvalidInput on K < 2 or a non-finite entry.
void softmax_into(std::span<const double> logits, std::span<double> out);

std::vector<double> softmax(std::span<const double> logits);

/// Top-1 minus top-2 probability. Exactly 0 when the two largest entries tie.
double margin(std::span<const double> probs);

/// Index of the first maximal entry.
std::size_t argmax(std::span<const double> values);

/// margin(softmax(row i)) for every row.
std::vector<double> margin_matrix(const LogitMatrix& logits);

double mean_margin(std::span<const double> margins);

/// Unchecked row kernel: margin of softmax(row / temperature). `scratch` holds K doubles.
/// Callers guarantee finite input and temperature > 0.
double row_margin(std::span<const double> row, double temperature, std::span<double> scratch);

/// 1 - margin of softmax(row / temperature), computed without cancellation so that
/// rows whose margin rounds to 1 still order correctly. Same contract as row_margin.
double row_margin_complement(std::span<const double> row, double temperature);

}  // namespace uad
