#include "uad/selection.hpp"

#include <fstream>
#include <iomanip>

#include "uad/error.hpp"
#include "uad/kernels.hpp"

namespace uad {

Matrix calibrated_margin_table(const ModelZoo& zoo) {
    if (zoo.empty()) throw InvalidInput("empty model zoo");
    const std::size_t n = zoo.rows();
    Matrix table(zoo.size(), n);
    for (std::size_t j = 0; j < zoo.size(); ++j) {
        const auto& e = zoo[j];
        kernels::omp::calibrated_margins(e.logits.values(), e.logits.classes(), e.temperature.value(),
                                         table.row(j));
    }
    return table;
}

Matrix calibrated_complement_table(const ModelZoo& zoo) {
    if (zoo.empty()) throw InvalidInput("empty model zoo");
    Matrix table(zoo.size(), zoo.rows());
    for (std::size_t j = 0; j < zoo.size(); ++j) {
        const auto& e = zoo[j];
        kernels::omp::calibrated_complements(e.logits.values(), e.logits.classes(), e.temperature.value(),
                                             table.row(j));
    }
    return table;
}

std::vector<double> model_mean_margins(const ModelZoo& zoo) {
    const Matrix table = calibrated_margin_table(zoo);
    std::vector<double> means(zoo.size());
    for (std::size_t j = 0; j < zoo.size(); ++j) {
        double sum = 0.0;
        for (double m : table.row(j)) sum += m;
        means[j] = sum / static_cast<double>(table.cols);
    }
    return means;
}

std::size_t select_source_index(const ModelZoo& zoo) {
    // Largest mean margin == smallest mean complement; the complement keeps saturated models apart.
    const Matrix table = calibrated_complement_table(zoo);
    std::vector<double> means(zoo.size());
    for (std::size_t j = 0; j < zoo.size(); ++j) {
        double sum = 0.0;
        for (double c : table.row(j)) sum += c;
        means[j] = sum / static_cast<double>(table.cols);
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < means.size(); ++j) {
        if (means[j] < means[best]) best = j;
    }
    return best;
}

std::string select_source_model(const ModelZoo& zoo) { return zoo[select_source_index(zoo)].id; }

std::vector<std::size_t> select_instance_teachers(const ModelZoo& zoo) {
    const Matrix table = calibrated_complement_table(zoo);
    std::vector<std::size_t> teachers(zoo.rows());
    kernels::omp::best_teacher(table.data, zoo.size(), teachers);
    return teachers;
}

PseudoLabelSet generate_pseudo_labels(const ModelZoo& zoo) {
    const Matrix table = calibrated_margin_table(zoo);
    const std::size_t n = zoo.rows();
    const std::size_t k = zoo.classes();
    std::vector<std::size_t> teachers(n);
    kernels::omp::best_teacher(calibrated_complement_table(zoo).data, zoo.size(), teachers);

    // Argmax is invariant under a positive temperature, so the raw row gives the calibrated label.
    std::vector<std::vector<std::size_t>> preds(zoo.size(), std::vector<std::size_t>(n));
    for (std::size_t j = 0; j < zoo.size(); ++j) kernels::omp::row_argmax(zoo[j].logits.values(), k, preds[j]);

    PseudoLabelSet set;
    set.labels.resize(n);
    set.teacher_ids.resize(n);
    set.winning_margins.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = teachers[i];
        set.labels[i] = preds[t][i];
        set.teacher_ids[i] = zoo[t].id;
        set.winning_margins[i] = table(t, i);
    }
    return set;
}

PseudoLabelSet refresh_pseudo_labels(const ModelZoo& zoo, const std::optional<LogitMatrix>& target_logits) {
    if (!target_logits) return generate_pseudo_labels(zoo);
    if (target_logits->rows() != zoo.rows() || target_logits->classes() != zoo.classes()) {
        throw InvalidInput("target logits shape does not match the zoo");
    }
    ModelZoo pool = zoo;
    pool.add(kTargetModelId, *target_logits);
    return generate_pseudo_labels(pool);
}

std::vector<std::size_t> confident_instances(const PseudoLabelSet& set, double threshold) {
    std::vector<std::size_t> keep;
    keep.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.winning_margins[i] >= threshold) keep.push_back(i);
    }
    return keep;
}

void write_pseudo_labels_csv(const PseudoLabelSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "instance_index,label,teacher_id,margin\n" << std::setprecision(17);
    for (std::size_t i = 0; i < set.size(); ++i) {
        out << i << ',' << set.labels[i] << ',' << set.teacher_ids[i] << ',' << set.winning_margins[i] << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace uad
