#pragma once

// Model-level and instance-level teacher selection from calibrated margins.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uad/matrix.hpp"
#include "uad/zoo.hpp"

namespace uad {

inline constexpr const char* kTargetModelId = "__target__";

struct PseudoLabelSet {
    std::vector<std::size_t> labels;
    std::vector<std::string> teacher_ids;
    std::vector<double> winning_margins;

    std::size_t size() const noexcept { return labels.size(); }
    bool operator==(const PseudoLabelSet&) const = default;
};

/// models x n matrix (model-major) of margins on temperature-scaled logits.
Matrix calibrated_margin_table(const ModelZoo& zoo);

/// models x n table of 1 - margin, used for ranking (see row_margin_complement).
Matrix calibrated_complement_table(const ModelZoo& zoo);

/// Mean calibrated margin per zoo entry.
std::vector<double> model_mean_margins(const ModelZoo& zoo);

/// Zoo index with the largest mean calibrated margin; ties go to the smallest index.
std::size_t select_source_index(const ModelZoo& zoo);
std::string select_source_model(const ModelZoo& zoo);

/// Per instance, the zoo index with the largest calibrated margin (smallest index on ties).
std::vector<std::size_t> select_instance_teachers(const ModelZoo& zoo);

PseudoLabelSet generate_pseudo_labels(const ModelZoo& zoo);

/// As generate_pseudo_labels, with the current target model (T = 1, id "__target__")
/// appended to the pool when its logits are given.
PseudoLabelSet refresh_pseudo_labels(const ModelZoo& zoo, const std::optional<LogitMatrix>& target_logits);

/// Instances whose winning margin is >= threshold. Threshold 0 keeps everything.
std::vector<std::size_t> confident_instances(const PseudoLabelSet& set, double threshold);

/// Columns: instance_index,label,teacher_id,margin
void write_pseudo_labels_csv(const PseudoLabelSet& set, const std::filesystem::path& path);

}  // namespace uad
