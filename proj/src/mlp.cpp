#include "uad/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "binio.hpp"
#include "uad/core_math.hpp"
#include "uad/error.hpp"
#include "uad/kernels.hpp"

namespace uad {

namespace {
constexpr std::uint16_t kCheckpointVersion = 1;
}

MlpClassifier::MlpClassifier(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidInput("classifier needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in == 0 || layer.out == 0) throw InvalidInput("layer dimensions must be positive");
        if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
            throw InvalidInput("layer " + std::to_string(l) + " parameter size mismatch");
        }
        if (l > 0 && layer.in != layers_[l - 1].out) {
            throw InvalidInput("layer " + std::to_string(l) + " input does not match previous output");
        }
        for (double w : layer.weights) {
            if (!std::isfinite(w)) throw InvalidInput("non-finite weight in layer " + std::to_string(l));
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) throw InvalidInput("non-finite bias in layer " + std::to_string(l));
        }
    }
    if (layers_.back().out < 2) throw InvalidInput("classifier needs at least two output classes");
}

MlpClassifier MlpClassifier::zeros(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw InvalidInput("dims need an input and an output width");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) layers.emplace_back(dims[l], dims[l + 1]);
    return MlpClassifier(std::move(layers));
}

MlpClassifier MlpClassifier::init(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    MlpClassifier model = zeros(dims);
    std::mt19937_64 rng(seed);
    for (auto& layer : model.layers_) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
        for (auto& w : layer.weights) w = dist(rng);
    }
    return model;
}

std::vector<std::size_t> MlpClassifier::dims() const {
    std::vector<std::size_t> d{layers_.front().in};
    for (const auto& layer : layers_) d.push_back(layer.out);
    return d;
}

ParameterSet MlpClassifier::zeros_like() const {
    ParameterSet out;
    out.reserve(layers_.size());
    for (const auto& layer : layers_) out.emplace_back(layer.in, layer.out);
    return out;
}

namespace {

template <typename Layer>
Matrix run_forward(const MlpClassifier& model, const Matrix& features, Layer dense) {
    if (features.cols != model.input_dim()) {
        throw InvalidInput("feature width " + std::to_string(features.cols) + " does not match model input " +
                           std::to_string(model.input_dim()));
    }
    Matrix act = features;
    const auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix next(act.rows, layers[l].out);
        dense(act, layers[l].weights, layers[l].bias, l + 1 < layers.size(), next);
        act = std::move(next);
    }
    return act;
}

}  // namespace

Matrix forward_matrix(const MlpClassifier& model, const Matrix& features) {
    return run_forward(model, features, kernels::omp::dense_layer);
}

LogitMatrix forward(const MlpClassifier& model, const Matrix& features) {
    return LogitMatrix(forward_matrix(model, features));
}

Matrix forward_reference(const MlpClassifier& model, const Matrix& features) {
    return run_forward(model, features, kernels::serial::dense_layer);
}

double loss_and_gradients(const MlpClassifier& model, const Matrix& features, const std::vector<std::size_t>& labels,
                          double smoothing, ParameterSet& grads) {
    const auto& layers = model.layers();
    const std::size_t batch = features.rows;
    if (labels.size() != batch) throw InvalidInput("labels and features differ in row count");
    if (batch == 0) throw InvalidInput("empty batch");
    if (features.cols != model.input_dim()) throw InvalidInput("feature width does not match model input");

    // Keep every layer's pre-activation for the backward pass.
    std::vector<Matrix> acts{features};
    std::vector<Matrix> pre;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z(batch, layers[l].out);
        kernels::serial::dense_layer(acts.back(), layers[l].weights, layers[l].bias, false, z);
        pre.push_back(z);
        if (l + 1 < layers.size()) {
            for (auto& v : z.data) v = std::max(v, 0.0);
        }
        acts.push_back(std::move(z));
    }

    const std::size_t k = model.classes();
    const double inv_batch = 1.0 / static_cast<double>(batch);
    const double off = smoothing / static_cast<double>(k);
    const double on = 1.0 - smoothing + off;
    Matrix delta(batch, k);
    std::vector<double> probs(k);
    double loss = 0.0;
    const Matrix& logits = acts.back();
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] >= k) throw InvalidInput("label out of range: " + std::to_string(labels[i]));
        auto row = logits.row(i);
        double hi = row[0];
        for (double v : row) hi = std::max(hi, v);
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - hi);
        const double log_sum = std::log(sum);
        double row_loss = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double log_p = row[c] - hi - log_sum;
            const double q = c == labels[i] ? on : off;
            row_loss -= q * log_p;
            delta(i, c) = (std::exp(log_p) - q) * inv_batch;
        }
        loss += row_loss;
    }
    loss *= inv_batch;

    grads = model.zeros_like();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        const Matrix& input = acts[l];
        auto& g = grads[l];
        for (std::size_t i = 0; i < batch; ++i) {
            const double* x = input.data.data() + i * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta(i, o);
                g.bias[o] += d;
                double* gw = g.weights.data() + o * layer.in;
                for (std::size_t j = 0; j < layer.in; ++j) gw[j] += d * x[j];
            }
        }
        if (l == 0) break;
        Matrix prev(batch, layer.in);
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta(i, o);
                const double* w = layer.weights.data() + o * layer.in;
                for (std::size_t j = 0; j < layer.in; ++j) prev(i, j) += d * w[j];
            }
            for (std::size_t j = 0; j < layer.in; ++j) {
                if (pre[l - 1](i, j) <= 0.0) prev(i, j) = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return loss;
}

void save_checkpoint(const MlpClassifier& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    binio::put_magic(out, "UADM");
    binio::put_le<std::uint16_t>(out, kCheckpointVersion);
    const auto dims = model.dims();
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers().size()));
    for (auto d : dims) binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (const auto& layer : model.layers()) {
        for (double w : layer.weights) binio::put_f64(out, w);
        for (double b : layer.bias) binio::put_f64(out, b);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

MlpClassifier load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    binio::expect_magic(in, "UADM", path.string());
    const auto version = binio::get_le<std::uint16_t>(in);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto layer_count = binio::get_le<std::uint32_t>(in);
    if (layer_count == 0 || layer_count > 1024) throw IoError("implausible layer count in " + path.string());
    std::vector<std::size_t> dims(layer_count + 1);
    for (auto& d : dims) d = binio::get_le<std::uint32_t>(in);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < layer_count; ++l) {
        DenseLayer layer(dims[l], dims[l + 1]);
        for (auto& w : layer.weights) w = binio::get_f64(in);
        for (auto& b : layer.bias) b = binio::get_f64(in);
        layers.push_back(std::move(layer));
    }
    return MlpClassifier(std::move(layers));
}

}  // namespace uad
