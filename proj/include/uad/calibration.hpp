#pragma once

// Temperature scaling fitted by minimising expected calibration error,
// and the reliability binning that ECE is built on.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uad/matrix.hpp"
#include "uad/zoo.hpp"

namespace uad {

/// Every entry divided by T. Throws InvalidTemperature if T <= 0.
LogitMatrix apply_temperature(const LogitMatrix& logits, double temperature);
LogitMatrix apply_temperature(const LogitMatrix& logits, const Temperature& temperature);

/// M equal-width confidence bins; bin m (1-based) covers ((m-1)/M, m/M], bin 1 also takes 0.
struct ReliabilityBins {
    std::size_t bin_count = 0;
    std::vector<std::size_t> counts;
    std::vector<double> confidence_sum;
    std::vector<double> correct_sum;

    std::size_t total() const;
    double low(std::size_t m) const { return static_cast<double>(m) / static_cast<double>(bin_count); }
    double high(std::size_t m) const { return static_cast<double>(m + 1) / static_cast<double>(bin_count); }
};

/// 1-based bin index for confidence c in [0,1].
std::size_t bin_index(double confidence, std::size_t bin_count);

ReliabilityBins assign_bins(std::span<const double> confidences, std::span<const bool> correct,
                            std::size_t bin_count);
// vector<bool> has no contiguous storage
ReliabilityBins assign_bins(std::span<const double> confidences, const std::vector<bool>& correct,
                            std::size_t bin_count);

double compute_ece(const ReliabilityBins& bins);

/// Bins of top-1 confidence of softmax(logits / T) against `labels`.
ReliabilityBins reliability_bins(const LogitMatrix& logits, std::span<const std::size_t> labels,
                                 double temperature, std::size_t bin_count);

double ece_at(const LogitMatrix& logits, std::span<const std::size_t> labels, double temperature,
              std::size_t bin_count);

/// `points` log-spaced temperatures over [lo, hi] with 1, 2/3 and 1.5 inserted; sorted, unique.
std::vector<double> default_temperature_grid(double lo = 0.05, double hi = 10.0, std::size_t points = 200);

struct FitConfig {
    std::size_t bins = 10;
    std::vector<double> grid = default_temperature_grid();
};

/// Grid search over cfg.grid, then golden-section refinement inside the
/// cells around the best grid point. Equal ECE resolves to the T nearest 1.
Temperature fit_temperature(const LogitMatrix& logits, std::span<const std::size_t> labels,
                            const FitConfig& cfg = {});

enum class LabelSource { Oracle, ProxyConsensus };

std::string to_string(LabelSource source);
LabelSource label_source_from_string(const std::string& name);

struct CalibrationReport {
    std::string model_id;
    Temperature temperature;
    double ece_before = 0.0;
    double ece_after = 0.0;
    LabelSource label_source = LabelSource::ProxyConsensus;
    // Single-model zoo in consensus mode: labels are the model's own argmax.
    bool degenerate_consensus = false;
};

/// Per-instance majority vote of every model's uncalibrated argmax; ties go to the smallest class.
std::vector<std::size_t> consensus_labels(const ModelZoo& zoo);

/// Fits one temperature per model. Oracle mode requires `labels`.
std::vector<CalibrationReport> calibrate_zoo(const ModelZoo& zoo, LabelSource source,
                                             const FitConfig& cfg = {},
                                             std::optional<std::span<const std::size_t>> labels = std::nullopt);

/// Copies the fitted temperatures into the zoo (matched by position).
void apply_reports(ModelZoo& zoo, std::span<const CalibrationReport> reports);

}  // namespace uad
