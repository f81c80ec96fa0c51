#include <algorithm>
#include <cmath>

#include "uad/core_math.hpp"
#include "uad/kernels.hpp"

namespace uad::kernels::serial {

void calibrated_margins(std::span<const double> logits, std::size_t classes, double temperature,
                        std::span<double> out) {
    std::vector<double> scratch(classes);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = row_margin(logits.subspan(i * classes, classes), temperature, scratch);
    }
}

void calibrated_complements(std::span<const double> logits, std::size_t classes, double temperature,
                            std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = row_margin_complement(logits.subspan(i * classes, classes), temperature);
    }
}

void row_argmax(std::span<const double> logits, std::size_t classes, std::span<std::size_t> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = argmax(logits.subspan(i * classes, classes));
    }
}

void dense_layer(const Matrix& in, std::span<const double> weights, std::span<const double> bias,
                 bool relu, Matrix& out) {
    const std::size_t width = in.cols;
    const std::size_t out_dim = bias.size();
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double* x = in.data.data() + i * width;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* w = weights.data() + o * width;
            double acc = bias[o];
            for (std::size_t j = 0; j < width; ++j) acc += w[j] * x[j];
            out(i, o) = relu ? std::max(acc, 0.0) : acc;
        }
    }
}

void best_teacher(std::span<const double> complements, std::size_t models, std::span<std::size_t> out) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < models; ++j) {
            if (complements[j * n + i] < complements[best * n + i]) best = j;
        }
        out[i] = best;
    }
}

void mean_softmax_argmax(std::span<const std::span<const double>> logits, std::size_t classes,
                         std::span<std::size_t> out) {
    std::vector<double> probs(classes);
    std::vector<double> mean(classes);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (const auto& model : logits) {
            softmax_into(model.subspan(i * classes, classes), probs);
            for (std::size_t k = 0; k < classes; ++k) mean[k] += probs[k];
        }
        for (auto& p : mean) p /= static_cast<double>(logits.size());
        out[i] = argmax(mean);
    }
}

}  // namespace uad::kernels::serial
