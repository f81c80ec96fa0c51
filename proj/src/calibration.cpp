#include "uad/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "uad/core_math.hpp"
#include "uad/error.hpp"
#include "uad/kernels.hpp"

namespace uad {

LogitMatrix apply_temperature(const LogitMatrix& logits, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvalidTemperature("temperature must be positive, got " + std::to_string(temperature));
    }
    std::vector<double> scaled(logits.values().begin(), logits.values().end());
    for (auto& v : scaled) v /= temperature;
    return LogitMatrix(logits.rows(), logits.classes(), std::move(scaled));
}

LogitMatrix apply_temperature(const LogitMatrix& logits, const Temperature& temperature) {
    return apply_temperature(logits, temperature.value());
}

std::size_t ReliabilityBins::total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

std::size_t bin_index(double confidence, std::size_t bin_count) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw InvalidInput("confidence outside [0,1]: " + std::to_string(confidence));
    }
    if (bin_count < 1) throw InvalidConfig("bin count must be at least 1");
    const auto m = static_cast<double>(bin_count);
    auto b = static_cast<std::size_t>(std::ceil(confidence * m));
    // c*M can round across an edge; settle against the edges as computed by low()/high().
    while (b > 1 && confidence <= static_cast<double>(b - 1) / m) --b;
    while (b < bin_count && confidence > static_cast<double>(b) / m) ++b;
    return std::clamp<std::size_t>(b, 1, bin_count);
}

namespace {

template <typename CorrectAt>
ReliabilityBins bin_samples(std::span<const double> confidences, std::size_t n_correct, CorrectAt correct_at,
                            std::size_t bin_count) {
    if (bin_count < 1) throw InvalidConfig("bin count must be at least 1");
    if (n_correct != confidences.size()) throw InvalidInput("confidences and correctness differ in length");
    ReliabilityBins bins{bin_count, std::vector<std::size_t>(bin_count, 0), std::vector<double>(bin_count, 0.0),
                         std::vector<double>(bin_count, 0.0)};
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const std::size_t m = bin_index(confidences[i], bin_count) - 1;
        bins.counts[m] += 1;
        bins.confidence_sum[m] += confidences[i];
        bins.correct_sum[m] += correct_at(i) ? 1.0 : 0.0;
    }
    return bins;
}

}  // namespace

ReliabilityBins assign_bins(std::span<const double> confidences, std::span<const bool> correct,
                            std::size_t bin_count) {
    return bin_samples(confidences, correct.size(), [&](std::size_t i) { return correct[i]; }, bin_count);
}

ReliabilityBins assign_bins(std::span<const double> confidences, const std::vector<bool>& correct,
                            std::size_t bin_count) {
    return bin_samples(confidences, correct.size(), [&](std::size_t i) { return correct[i]; }, bin_count);
}

double compute_ece(const ReliabilityBins& bins) {
    const std::size_t n = bins.total();
    if (n == 0) throw InvalidInput("ECE of an empty bin set");
    double ece = 0.0;
    for (std::size_t m = 0; m < bins.bin_count; ++m) {
        if (bins.counts[m] == 0) continue;
        const auto count = static_cast<double>(bins.counts[m]);
        const double acc = bins.correct_sum[m] / count;
        const double conf = bins.confidence_sum[m] / count;
        ece += count / static_cast<double>(n) * std::abs(acc - conf);
    }
    return ece;
}

ReliabilityBins reliability_bins(const LogitMatrix& logits, std::span<const std::size_t> labels,
                                 double temperature, std::size_t bin_count) {
    if (labels.size() != logits.rows()) throw InvalidInput("labels and logits differ in row count");
    if (!(temperature > 0.0)) throw InvalidTemperature("temperature must be positive");
    const std::size_t k = logits.classes();
    std::vector<double> scaled(k);
    std::vector<double> probs(k);
    std::vector<double> conf(logits.rows());
    std::vector<bool> correct(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        for (std::size_t c = 0; c < k; ++c) scaled[c] = row[c] / temperature;
        softmax_into(scaled, probs);
        const std::size_t pred = argmax(probs);
        conf[i] = probs[pred];
        correct[i] = pred == labels[i];
    }
    return assign_bins(conf, correct, bin_count);
}

double ece_at(const LogitMatrix& logits, std::span<const std::size_t> labels, double temperature,
              std::size_t bin_count) {
    return compute_ece(reliability_bins(logits, labels, temperature, bin_count));
}

std::vector<double> default_temperature_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2) throw InvalidConfig("temperature grid needs 0 < lo < hi, points >= 2");
    std::vector<double> grid;
    grid.reserve(points + 3);
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < points; ++i) {
        grid.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1)));
    }
    grid.front() = lo;
    grid.back() = hi;
    grid.push_back(1.0);
    grid.push_back(2.0 / 3.0);  // exp(log(1/1.5))
    grid.push_back(1.5);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

Temperature fit_temperature(const LogitMatrix& logits, std::span<const std::size_t> labels, const FitConfig& cfg) {
    if (cfg.grid.empty()) throw InvalidConfig("empty temperature grid");
    if (cfg.bins < 1) throw InvalidConfig("bin count must be at least 1");
    for (double t : cfg.grid) {
        if (!(t > 0.0) || !std::isfinite(t)) throw InvalidTemperature("grid temperature must be positive");
    }
    if (labels.size() != logits.rows()) throw InvalidInput("labels and logits differ in row count");
    for (auto y : labels) {
        if (y >= logits.classes()) throw InvalidInput("label out of range: " + std::to_string(y));
    }

    auto closer_to_one = [](double a, double b) { return std::abs(a - 1.0) < std::abs(b - 1.0); };

    std::vector<double> grid = cfg.grid;
    std::sort(grid.begin(), grid.end());
    std::size_t best = 0;
    double best_ece = ece_at(logits, labels, grid[0], cfg.bins);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double e = ece_at(logits, labels, grid[i], cfg.bins);
        if (e < best_ece || (e == best_ece && closer_to_one(grid[i], grid[best]))) {
            best = i;
            best_ece = e;
        }
    }

    double best_t = grid[best];
    if (grid.size() > 1) {
        // Golden-section in log T over the two cells around the best grid point.
        double lo = std::log(grid[best == 0 ? 0 : best - 1]);
        double hi = std::log(grid[std::min(best + 1, grid.size() - 1)]);
        const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - ratio * (hi - lo);
        double x2 = lo + ratio * (hi - lo);
        double f1 = ece_at(logits, labels, std::exp(x1), cfg.bins);
        double f2 = ece_at(logits, labels, std::exp(x2), cfg.bins);
        double refined_t = best_t;
        double refined_ece = best_ece;
        auto consider = [&](double x, double f) {
            if (f < refined_ece) {
                refined_ece = f;
                refined_t = std::exp(x);
            }
        };
        consider(x1, f1);
        consider(x2, f2);
        for (int it = 0; it < 40; ++it) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = ece_at(logits, labels, std::exp(x1), cfg.bins);
                consider(x1, f1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = ece_at(logits, labels, std::exp(x2), cfg.bins);
                consider(x2, f2);
            }
        }
        best_t = refined_t;
    }
    return Temperature::from_value(best_t);
}

std::string to_string(LabelSource source) {
    return source == LabelSource::Oracle ? "oracle" : "proxy-consensus";
}

LabelSource label_source_from_string(const std::string& name) {
    if (name == "oracle") return LabelSource::Oracle;
    if (name == "proxy-consensus") return LabelSource::ProxyConsensus;
    throw InvalidConfig("unknown label source '" + name + "' (expected oracle or proxy-consensus)");
}

std::vector<std::size_t> consensus_labels(const ModelZoo& zoo) {
    const std::size_t n = zoo.rows();
    const std::size_t k = zoo.classes();
    std::vector<std::vector<std::size_t>> preds(zoo.size(), std::vector<std::size_t>(n));
    for (std::size_t j = 0; j < zoo.size(); ++j) {
        kernels::omp::row_argmax(zoo[j].logits.values(), k, preds[j]);
    }
    std::vector<std::size_t> labels(n);
    std::vector<std::size_t> votes(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& p : preds) votes[p[i]] += 1;
        labels[i] = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return labels;
}

std::vector<CalibrationReport> calibrate_zoo(const ModelZoo& zoo, LabelSource source, const FitConfig& cfg,
                                             std::optional<std::span<const std::size_t>> labels) {
    if (zoo.empty()) throw InvalidInput("cannot calibrate an empty zoo");
    std::vector<std::size_t> target_labels;
    if (source == LabelSource::Oracle) {
        if (!labels) throw InvalidConfig("oracle calibration needs labels");
        target_labels.assign(labels->begin(), labels->end());
    } else {
        target_labels = consensus_labels(zoo);
    }
    const bool degenerate = source == LabelSource::ProxyConsensus && zoo.size() == 1;

    std::vector<CalibrationReport> reports(zoo.size());
    std::vector<std::exception_ptr> errors(zoo.size());
    const auto models = static_cast<std::ptrdiff_t>(zoo.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < models; ++j) {
        try {
            const auto& entry = zoo[j];
            CalibrationReport r;
            r.model_id = entry.id;
            r.label_source = source;
            r.degenerate_consensus = degenerate;
            r.temperature = fit_temperature(entry.logits, target_labels, cfg);
            r.ece_before = ece_at(entry.logits, target_labels, 1.0, cfg.bins);
            r.ece_after = ece_at(entry.logits, target_labels, r.temperature.value(), cfg.bins);
            reports[j] = std::move(r);
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return reports;
}

void apply_reports(ModelZoo& zoo, std::span<const CalibrationReport> reports) {
    if (reports.size() != zoo.size()) throw InvalidInput("report count does not match zoo size");
    for (std::size_t j = 0; j < reports.size(); ++j) {
        if (reports[j].model_id != zoo[j].id) throw InvalidInput("report order does not match zoo");
        zoo.set_temperature(j, reports[j].temperature);
    }
}

}  // namespace uad
