#pragma once

// Data-parallel inner loops. Every kernel exists twice with identical
// signatures: `serial` is the reference used by tests, `omp` is the
// OpenMP version used by the library. Work is split by row only and each
// row is reduced in a fixed order, so both produce bit-identical output.

#include <cstddef>
#include <span>
#include <vector>

#include "uad/matrix.hpp"

namespace uad::kernels {

#define UAD_KERNEL_DECLS                                                                        \
    /* out[i] = margin(softmax(row_i / temperature)) */                                         \
    void calibrated_margins(std::span<const double> logits, std::size_t classes,                \
                            double temperature, std::span<double> out);                         \
    /* out[i] = 1 - margin(softmax(row_i / temperature)), cancellation-free */                 \
    void calibrated_complements(std::span<const double> logits, std::size_t classes,            \
                                double temperature, std::span<double> out);                     \
    /* first-max class index per row */                                                        \
    void row_argmax(std::span<const double> logits, std::size_t classes,                        \
                    std::span<std::size_t> out);                                                \
    /* out = act(in * W^T + b), W is out_dim x in.cols row-major */                             \
    void dense_layer(const Matrix& in, std::span<const double> weights,                         \
                     std::span<const double> bias, bool relu, Matrix& out);                     \
    /* complements is models x n (model-major); out[i] = first model with the smallest one */   \
    void best_teacher(std::span<const double> complements, std::size_t models,                  \
                      std::span<std::size_t> out);                                              \
    /* argmax of the mean softmax over models; each span is one model's n x K logits */         \
    void mean_softmax_argmax(std::span<const std::span<const double>> logits,                   \
                             std::size_t classes, std::span<std::size_t> out);

namespace serial {
UAD_KERNEL_DECLS
}

namespace omp {
UAD_KERNEL_DECLS
/// Threads the OpenMP kernels will use (1 when built without OpenMP).
int max_threads();
}

#undef UAD_KERNEL_DECLS

}  // namespace uad::kernels
