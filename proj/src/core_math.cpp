#include "uad/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uad/error.hpp"
#include "uad/kernels.hpp"

namespace uad {

namespace {

void stable_softmax(std::span<const double> logits, double temperature, std::span<double> out) {
    double hi = logits[0] / temperature;
    for (std::size_t k = 1; k < logits.size(); ++k) hi = std::max(hi, logits[k] / temperature);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] / temperature - hi);
        sum += out[k];
    }
    for (auto& p : out) p /= sum;
}

}  // namespace

void softmax_into(std::span<const double> logits, std::span<double> out) {
    if (logits.size() < 2) throw InvalidInput("softmax needs at least two classes");
    if (out.size() != logits.size()) throw InvalidInput("softmax output size mismatch");
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (!std::isfinite(logits[k])) {
            throw InvalidInput("softmax: non-finite logit at class " + std::to_string(k));
        }
    }
    stable_softmax(logits, 1.0, out);
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

double margin(std::span<const double> probs) {
    if (probs.size() < 2) throw InvalidInput("margin needs at least two classes");
    double top1 = probs[0];
    double top2 = probs[1];
    if (top2 > top1) std::swap(top1, top2);
    for (std::size_t k = 2; k < probs.size(); ++k) {
        if (probs[k] > top1) {
            top2 = top1;
            top1 = probs[k];
        } else if (probs[k] > top2) {
            top2 = probs[k];
        }
    }
    return top1 - top2;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

double row_margin(std::span<const double> row, double temperature, std::span<double> scratch) {
    stable_softmax(row, temperature, scratch);
    return margin(scratch);
}

double row_margin_complement(std::span<const double> row, double temperature) {
    std::size_t top = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
        if (row[k] / temperature > row[top] / temperature) top = k;
    }
    const double hi = row[top] / temperature;
    // With the top entry scaled to 1: complement = (sum of the others + second) / total.
    double rest = 0.0;
    double second = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k == top) continue;
        const double e = std::exp(row[k] / temperature - hi);
        rest += e;
        second = std::max(second, e);
    }
    return (rest + second) / (1.0 + rest);
}

std::vector<double> margin_matrix(const LogitMatrix& logits) {
    std::vector<double> out(logits.rows());
    kernels::omp::calibrated_margins(logits.values(), logits.classes(), 1.0, out);
    return out;
}

double mean_margin(std::span<const double> margins) {
    if (margins.empty()) throw InvalidInput("mean_margin of an empty vector");
    double sum = 0.0;
    for (double m : margins) sum += m;
    return sum / static_cast<double>(margins.size());
}

}  // namespace uad
