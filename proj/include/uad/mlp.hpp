#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uad/matrix.hpp"

namespace uad {

/// out x in weights (row-major) and out biases.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    bool operator==(const DenseLayer&) const = default;
};

/// Same shapes as a model's layers; used for gradients and momentum buffers.
using ParameterSet = std::vector<DenseLayer>;

/// Feed-forward classifier: rectifier on hidden layers, identity on the output.
class MlpClassifier {
public:
    MlpClassifier() = default;
    explicit MlpClassifier(std::vector<DenseLayer> layers);

    /// He-style init, N(0, 2/fan_in) weights and zero biases.
    static MlpClassifier init(const std::vector<std::size_t>& dims, std::uint64_t seed);
    static MlpClassifier zeros(const std::vector<std::size_t>& dims);

    std::vector<std::size_t> dims() const;
    std::size_t input_dim() const { return layers_.front().in; }
    std::size_t classes() const { return layers_.back().out; }

    const ParameterSet& layers() const noexcept { return layers_; }
    ParameterSet& layers() noexcept { return layers_; }

    ParameterSet zeros_like() const;

    bool operator==(const MlpClassifier&) const = default;

private:
    ParameterSet layers_;
};

/// batch x K logits. Throws InvalidInput on a width mismatch.
Matrix forward_matrix(const MlpClassifier& model, const Matrix& features);
LogitMatrix forward(const MlpClassifier& model, const Matrix& features);

/// Loop-based reference forward pass used by tests and the benchmark.
Matrix forward_reference(const MlpClassifier& model, const Matrix& features);

/// Label-smoothed cross-entropy and its gradient w.r.t. every parameter, averaged over the batch.
double loss_and_gradients(const MlpClassifier& model, const Matrix& features, const std::vector<std::size_t>& labels,
                          double smoothing, ParameterSet& grads);

/// Binary checkpoint: "UADM", u16 version, u32 layer count, u32 dims, f64 parameters (LE).
void save_checkpoint(const MlpClassifier& model, const std::filesystem::path& path);
MlpClassifier load_checkpoint(const std::filesystem::path& path);

}  // namespace uad
