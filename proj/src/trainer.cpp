#include "uad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "uad/error.hpp"
#include "uad/kernels.hpp"

namespace uad {

void TrainerConfig::validate() const {
    if (!(base_lr > 0.0)) throw InvalidConfig("base_lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw InvalidConfig("weight_decay must be non-negative");
    if (batch_size == 0) throw InvalidConfig("batch_size must be positive");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw InvalidConfig("label smoothing must be in [0,1)");
    if (!(lr_alpha > 0.0) || !(lr_beta > 0.0)) throw InvalidConfig("schedule alpha and beta must be positive");
    for (auto h : hidden) {
        if (h == 0) throw InvalidConfig("hidden layer width must be positive");
    }
}

void LabeledDataset::validate() const {
    if (labels.empty()) throw InvalidInput("dataset is empty");
    if (features.rows != labels.size()) throw InvalidInput("features and labels differ in row count");
    if (features.cols == 0) throw InvalidInput("dataset has zero feature columns");
    if (classes < 2) throw InvalidInput("dataset needs at least two classes");
    for (auto y : labels) {
        if (y >= classes) throw InvalidInput("label out of range: " + std::to_string(y));
    }
    for (double v : features.data) {
        if (!std::isfinite(v)) throw InvalidInput("non-finite feature value");
    }
}

double ce_loss_smoothed(const Matrix& logits, const std::vector<std::size_t>& labels, double smoothing) {
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw InvalidInput("label smoothing must be in [0,1)");
    if (labels.size() != logits.rows || logits.rows == 0) throw InvalidInput("labels and logits differ in row count");
    const std::size_t k = logits.cols;
    const double off = smoothing / static_cast<double>(k);
    const double on = 1.0 - smoothing + off;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (labels[i] >= k) throw InvalidInput("label out of range: " + std::to_string(labels[i]));
        auto row = logits.row(i);
        const double hi = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - hi);
        const double log_sum = std::log(sum);
        for (std::size_t c = 0; c < k; ++c) {
            const double q = c == labels[i] ? on : off;
            if (q != 0.0) total -= q * (row[c] - hi - log_sum);
        }
    }
    return total / static_cast<double>(logits.rows);
}

void sgd_step(MlpClassifier& model, const ParameterSet& grads, ParameterSet& velocity, double lr,
              const TrainerConfig& cfg) {
    auto& layers = model.layers();
    if (grads.size() != layers.size() || velocity.size() != layers.size()) {
        throw InvalidInput("gradient or velocity layer count does not match the model");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads[l].weights.size() != layers[l].weights.size() || grads[l].bias.size() != layers[l].bias.size() ||
            velocity[l].weights.size() != layers[l].weights.size() ||
            velocity[l].bias.size() != layers[l].bias.size()) {
            throw InvalidInput("gradient shape mismatch in layer " + std::to_string(l));
        }
        for (double g : grads[l].weights) {
            if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in layer " + std::to_string(l));
        }
        for (double g : grads[l].bias) {
            if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in layer " + std::to_string(l));
        }
    }
    auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = cfg.momentum * v[i] + g[i] + cfg.weight_decay * w[i];
            w[i] -= lr * v[i];
        }
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grads[l].weights, velocity[l].weights);
        update(layers[l].bias, grads[l].bias, velocity[l].bias);
    }
}

double lr_at(double progress, const TrainerConfig& cfg) {
    const double p = std::clamp(progress, 0.0, 1.0);
    return cfg.base_lr / std::pow(1.0 + cfg.lr_alpha * p, cfg.lr_beta);
}

namespace {

// Shuffled mini-batch SGD with the LR schedule over global progress.
// The last incomplete batch is kept.
class SgdRunner {
public:
    SgdRunner(const TrainerConfig& cfg, std::size_t rows_per_epoch, std::size_t epochs)
        : cfg_(cfg), shuffle_rng_(cfg.seed ^ 0x9E3779B97F4A7C15ULL) {
        const std::size_t per_epoch = (rows_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
        total_iterations_ = std::max<std::size_t>(1, per_epoch * epochs);
    }

    double run_epoch(MlpClassifier& model, ParameterSet& velocity, const Matrix& features,
                     const std::vector<std::size_t>& labels, std::size_t epoch) {
        std::vector<std::size_t> order(labels.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), shuffle_rng_);

        ParameterSet grads;
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix x = features.gather_rows(idx);
            std::vector<std::size_t> y(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];

            const double loss = loss_and_gradients(model, x, y, cfg_.smoothing, grads);
            if (!std::isfinite(loss)) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index));
            }
            const double progress = static_cast<double>(completed_) / static_cast<double>(total_iterations_);
            try {
                sgd_step(model, grads, velocity, lr_at(progress, cfg_), cfg_);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index));
            }
            ++completed_;
            loss_sum += loss * static_cast<double>(idx.size());
        }
        return loss_sum / static_cast<double>(order.size());
    }

private:
    const TrainerConfig& cfg_;
    std::mt19937_64 shuffle_rng_;
    std::size_t total_iterations_ = 1;
    std::size_t completed_ = 0;
};

}  // namespace

MlpClassifier train_source(const LabeledDataset& data, const TrainerConfig& cfg, const EpochObserver& observer) {
    data.validate();
    cfg.validate();
    std::vector<std::size_t> dims{data.features.cols};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(data.classes);
    MlpClassifier model = MlpClassifier::init(dims, cfg.seed);
    return fine_tune(std::move(model), data.features, data.labels, cfg, observer);
}

MlpClassifier fine_tune(MlpClassifier model, const Matrix& features, const std::vector<std::size_t>& labels,
                        const TrainerConfig& cfg, const EpochObserver& observer) {
    cfg.validate();
    if (features.rows != labels.size() || labels.empty()) throw InvalidInput("features and labels differ in row count");
    ParameterSet velocity = model.zeros_like();
    SgdRunner runner(cfg, labels.size(), cfg.epochs);
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
        const double loss = runner.run_epoch(model, velocity, features, labels, e);
        if (observer) observer(EpochStats{e, loss}, model);
    }
    return model;
}

MlpClassifier adapt_target(const MlpClassifier& init, const Matrix& target, const ModelZoo& zoo,
                           const TrainerConfig& cfg, const AdaptOptions& options, const AdaptObserver& observer) {
    cfg.validate();
    if (zoo.empty()) throw InvalidInput("adaptation needs a non-empty zoo");
    if (init.classes() != zoo.classes()) throw InvalidInput("model output width does not match the zoo classes");
    if (target.rows != zoo.rows()) throw InvalidInput("target rows do not match the zoo logits");
    if (target.cols != init.input_dim()) throw InvalidInput("target feature width does not match the model");

    MlpClassifier model = init;
    ParameterSet velocity = model.zeros_like();
    SgdRunner runner(cfg, target.rows, cfg.epochs);
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
        std::optional<LogitMatrix> current;
        if (options.refresh_with_target && e >= 2) current = forward(model, target);
        PseudoLabelSet pseudo = refresh_pseudo_labels(zoo, current);

        const auto keep = confident_instances(pseudo, options.pseudo_label_threshold);
        double loss = 0.0;
        if (!keep.empty()) {
            if (keep.size() == pseudo.size()) {
                loss = runner.run_epoch(model, velocity, target, pseudo.labels, e);
            } else {
                const Matrix x = target.gather_rows(keep);
                std::vector<std::size_t> y(keep.size());
                for (std::size_t i = 0; i < keep.size(); ++i) y[i] = pseudo.labels[keep[i]];
                loss = runner.run_epoch(model, velocity, x, y, e);
            }
        }
        if (observer) observer(AdaptEpoch{EpochStats{e, loss}, std::move(pseudo)}, model);
    }
    return model;
}

std::vector<std::size_t> predict(const MlpClassifier& model, const Matrix& features) {
    const Matrix logits = forward_matrix(model, features);
    std::vector<std::size_t> out(features.rows);
    kernels::omp::row_argmax(logits.data, logits.cols, out);
    return out;
}

}  // namespace uad
