#pragma once

// End-to-end orchestration: data, source training, calibration, selection,
// adaptation, evaluation and reports.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uad/calibration.hpp"
#include "uad/mlp.hpp"
#include "uad/selection.hpp"
#include "uad/synth.hpp"
#include "uad/trainer.hpp"
#include "uad/zoo.hpp"

namespace uad {

inline constexpr const char* kReportSchema = "uad_report_v1";

struct Ablation {
    bool model_level = true;
    bool instance_level = true;
    bool temperature_scaling = true;
    // Report pseudo-label accuracy of the enabled selection levels instead of training.
    bool score_only = false;
};

struct PipelineConfig {
    // Synthetic benchmark, used when no dataset paths are given.
    BenchmarkOptions benchmark{3, ShiftProfile::Strong, 0, 4, 8, 500};
    std::vector<std::filesystem::path> source_data;
    std::filesystem::path target_data;

    TrainerConfig source_trainer = default_source_trainer();
    TrainerConfig adapt_trainer = default_adapt_trainer();

    std::size_t ece_bins = 10;
    double grid_min = 0.05;
    double grid_max = 10.0;
    std::size_t grid_points = 200;
    LabelSource label_source = LabelSource::ProxyConsensus;

    Ablation ablation;
    bool refresh_with_target = true;
    double pseudo_label_threshold = 0.0;

    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir;
    std::filesystem::path cache_dir;  // empty: <out_dir>/cache

    static TrainerConfig default_source_trainer();
    static TrainerConfig default_adapt_trainer();

    FitConfig fit_config() const;

    /// Throws InvalidConfig. `for_adapt` also requires a selection level.
    void validate(bool for_adapt = false) const;

    /// Settings that determine results (paths to outputs excluded).
    nlohmann::ordered_json to_json() const;
};

/// key=value lines, '#' comments. Unknown keys and bad values throw InvalidConfig.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

struct Evaluation {
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Evaluation evaluate(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t classes);
Evaluation evaluate(const MlpClassifier& model, const LabeledDataset& data);

/// Per instance, argmax of the mean uncalibrated softmax over the zoo (smallest class on ties).
std::vector<std::size_t> ensemble_average_baseline(const ModelZoo& zoo);

/// Columns bin_low,bin_high,count,mean_conf,mean_acc; one row per bin, empty bins as zeros.
void emit_reliability_csv(const ReliabilityBins& bins, const std::filesystem::path& path);
ReliabilityBins read_reliability_csv(const std::filesystem::path& path);

struct SourceSummary {
    std::string id;
    double target_accuracy = 0.0;
    double mean_margin_raw = 0.0;
    double mean_margin_calibrated = 0.0;
    double temperature = 1.0;
};

struct AdaptationEpoch {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double pseudo_label_accuracy = 0.0;
};

struct RunReport {
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;
    std::vector<SourceSummary> sources;
    std::vector<CalibrationReport> calibration;
    std::optional<std::string> init_model;
    std::optional<std::string> mode;  // "adapt", "fine-tune" or "score-only"
    std::optional<double> pseudo_label_accuracy;
    std::vector<AdaptationEpoch> adaptation;
    std::optional<double> final_accuracy;
    double ensemble_average_accuracy = 0.0;
    double best_source_accuracy = 0.0;

    nlohmann::ordered_json to_json() const;
    std::string dump() const;
};

nlohmann::ordered_json to_json(const CalibrationReport& report);

struct PipelineResult {
    RunReport report;
    std::optional<MlpClassifier> target_model;
};

/// Runs every stage and writes report.json, checkpoints, logits and CSVs under cfg.out_dir
/// (skipped when out_dir is empty). Stage failures carry the stage name.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// JSON sidecar written next to a checkpoint.
void write_checkpoint_sidecar(const std::filesystem::path& path, const TrainerConfig& cfg,
                              const nlohmann::ordered_json& extra = {});
nlohmann::ordered_json trainer_config_json(const TrainerConfig& cfg);

}  // namespace uad
