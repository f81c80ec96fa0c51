#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "uad/matrix.hpp"
#include "uad/mlp.hpp"
#include "uad/selection.hpp"
#include "uad/zoo.hpp"

namespace uad {

struct TrainerConfig {
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    double smoothing = 0.1;
    double lr_alpha = 10.0;
    double lr_beta = 0.75;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden = {64};

    /// Throws InvalidConfig on out-of-range values.
    void validate() const;
};

struct LabeledDataset {
    Matrix features;
    std::vector<std::size_t> labels;
    std::size_t classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    /// Throws InvalidInput unless n >= 1, shapes agree and labels < classes.
    void validate() const;
    bool operator==(const LabeledDataset&) const = default;
};

/// Mean over the batch of the cross-entropy against (1 - eps) one-hot + eps / K.
double ce_loss_smoothed(const Matrix& logits, const std::vector<std::size_t>& labels, double smoothing);

/// v <- momentum v + g + wd w ; w <- w - lr v. Throws DivergenceError on a non-finite gradient.
void sgd_step(MlpClassifier& model, const ParameterSet& grads, ParameterSet& velocity, double lr,
              const TrainerConfig& cfg);

/// lr0 / (1 + alpha p)^beta for p in [0,1].
double lr_at(double progress, const TrainerConfig& cfg);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
};

using EpochObserver = std::function<void(const EpochStats&, const MlpClassifier&)>;

/// Seeded He init, then cfg.epochs of shuffled mini-batch SGD on label-smoothed CE.
MlpClassifier train_source(const LabeledDataset& data, const TrainerConfig& cfg, const EpochObserver& observer = {});

/// Continues training `model` on fixed labels for cfg.epochs (no re-initialization).
MlpClassifier fine_tune(MlpClassifier model, const Matrix& features, const std::vector<std::size_t>& labels,
                        const TrainerConfig& cfg, const EpochObserver& observer = {});

struct AdaptOptions {
    // The target model joins the teacher pool from epoch 2 onward.
    bool refresh_with_target = true;
    double pseudo_label_threshold = 0.0;
};

struct AdaptEpoch {
    EpochStats stats;
    PseudoLabelSet pseudo_labels;  // labels used for this epoch
};

using AdaptObserver = std::function<void(const AdaptEpoch&, const MlpClassifier&)>;

/// Pseudo-label self-training of `init` on the target features; pseudo-labels
/// are refreshed at the start of each epoch. cfg.smoothing applies (0 for plain CE).
MlpClassifier adapt_target(const MlpClassifier& init, const Matrix& target, const ModelZoo& zoo,
                           const TrainerConfig& cfg, const AdaptOptions& options = {},
                           const AdaptObserver& observer = {});

/// Argmax prediction per row.
std::vector<std::size_t> predict(const MlpClassifier& model, const Matrix& features);

}  // namespace uad
