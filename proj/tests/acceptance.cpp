// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "test_util.hpp"
#include "uad/calibration.hpp"
#include "uad/core_math.hpp"
#include "uad/mlp.hpp"
#include "uad/pipeline.hpp"
#include "uad/selection.hpp"
#include "uad/trainer.hpp"

using namespace uad;
using namespace uad::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome unit_values() {
    Outcome o;
    auto p = softmax(std::vector<double>{2, 1, 0});
    o.require(near(p[0], 0.665241, 1e-5) && near(p[1], 0.244728, 1e-5) && near(p[2], 0.090031, 1e-5), "softmax");
    o.require(near(margin(p), 0.420513, 1e-5), "margin");
    o.require(near(margin(std::vector<double>{0.665241, 0.244728, 0.090031}), 0.420513, 1e-5), "margin literal");
    auto mm = margin_matrix(LogitMatrix(2, 2, {0, 0, 5, -5}));
    o.require(near(mm[0], 0.0, 1e-5) && near(mm[1], 0.999909, 1e-5), "margin_matrix");
    o.require(near(mean_margin(mm), 0.499954, 1e-5), "mean_margin");
    auto hot = apply_temperature(LogitMatrix(1, 3, {2, 1, 0}), 2.0);
    o.require(near(margin(softmax(hot.row(0))), 0.199281, 1e-5), "temperature margin");

    std::vector<double> c1{0.95, 0.95};
    std::vector<bool> k1{true, false};
    o.require(near(compute_ece(assign_bins(c1, k1, 10)), 0.45, 1e-9), "ece 0.45");
    std::vector<double> c2{0.75, 0.75, 0.55, 0.55};
    std::vector<bool> k2{true, true, false, false};
    o.require(near(compute_ece(assign_bins(c2, k2, 10)), 0.40, 1e-9), "ece 0.40");

    TrainerConfig cfg;
    o.require(lr_at(0.0, cfg) == 0.01, "lr p=0");
    o.require(near(lr_at(1.0, cfg), 0.0016556, 1e-6), "lr p=1");
    o.require(near(lr_at(0.5, cfg), 0.0026085, 1e-6), "lr p=0.5");
    o.require(near(ce_loss_smoothed(Matrix(1, 2, {std::log(0.9), std::log(0.1)}), {0}, 0.1), 0.215222, 1e-5),
              "smoothed ce");
    o.require(near(ce_loss_smoothed(Matrix(1, 2, {0.0, 0.0}), {0}, 0.0), std::log(2.0), 1e-12), "ce ln2");
    if (o.pass) o.detail = "softmax, margin, ECE, lr and loss values within tolerance";
    return o;
}

Outcome calibration_invariants() {
    Outcome o;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> logt(-8.0, 8.0);
    auto rows = random_logits(rng, 1000, 5);
    std::size_t flips = 0, hot_fail = 0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        auto base = scalar_argmax(rows.row(i));
        for (int r = 0; r < 5; ++r) {
            auto scaled = apply_temperature(rows, std::exp(logt(rng)));
            flips += argmax(softmax(scaled.row(i))) != base;
        }
        hot_fail += !(margin(softmax(apply_temperature(rows, 1e6).row(i))) < 1e-5);
    }
    o.require(flips == 0, std::to_string(flips) + " argmax changes under T");
    o.require(hot_fail == 0, std::to_string(hot_fail) + " rows with margin >= 1e-5 at T=1e6");

    std::size_t worse = 0;
    std::uniform_int_distribution<std::size_t> cls(0, 3);
    for (int problem = 0; problem < 50; ++problem) {
        auto l = random_logits(rng, 500, 4, 1.0 + 0.1 * problem);
        std::vector<std::size_t> labels(500);
        for (std::size_t i = 0; i < 500; ++i) labels[i] = (rng() % 4 == 0) ? cls(rng) : scalar_argmax(l.row(i));
        auto t = fit_temperature(l, labels);
        worse += scalar_ece_at(l, labels, t.value(), 10) > scalar_ece_at(l, labels, 1.0, 10) + 1e-12;
    }
    o.require(worse == 0, std::to_string(worse) + "/50 fits worse than T=1");
    if (o.pass) o.detail = "argmax invariant on 1000 rows, margin<1e-5 at T=1e6, ECE(fit)<=ECE(1) on 50/50";
    return o;
}

Outcome gradient_check() {
    Outcome o;
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0;
    const double h = 1e-5;
    for (int net = 0; net < 20; ++net) {
        std::size_t d = 2 + rng() % 7, k = 2 + rng() % 3, depth = rng() % 3;
        std::vector<std::size_t> dims{d};
        for (std::size_t l = 0; l < depth; ++l) dims.push_back(2 + rng() % 7);
        dims.push_back(k);
        auto model = MlpClassifier::init(dims, rng());
        for (auto& layer : model.layers())
            for (auto& b : layer.bias) b = 0.3 * nd(rng);
        Matrix x(6, d);
        for (auto& v : x.data) v = nd(rng);
        std::vector<std::size_t> y(6);
        for (auto& v : y) v = rng() % k;
        const double eps = (net % 2) ? 0.1 : 0.0;

        auto grads = model.zeros_like();
        loss_and_gradients(model, x, y, eps, grads);
        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t l = 0; l < model.layers().size(); ++l) {
            auto probe = [&](double& param, double analytic) {
                const double saved = param;
                param = saved + h;
                const double up = ce_loss_smoothed(forward_matrix(model, x), y, eps);
                param = saved - h;
                const double down = ce_loss_smoothed(forward_matrix(model, x), y, eps);
                param = saved;
                const double numeric = (up - down) / (2 * h);
                diff2 += (analytic - numeric) * (analytic - numeric);
                norm2 += std::pow(std::abs(analytic) + std::abs(numeric), 2);
            };
            auto& layer = model.layers()[l];
            for (std::size_t i = 0; i < layer.weights.size(); ++i) probe(layer.weights[i], grads[l].weights[i]);
            for (std::size_t i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i], grads[l].bias[i]);
        }
        worst = std::max(worst, std::sqrt(diff2) / std::sqrt(norm2));
    }
    o.require(worst < 1e-4, fmt("worst relative error %.3g", worst));
    if (o.pass) o.detail = fmt("20 networks, worst relative error %.3g", worst);
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t models = 1 + rng() % 5, n = 1 + rng() % 100, k = 2 + rng() % 5;
        auto zoo = random_zoo(rng, models, n, k);

        std::vector<std::vector<double>> m(models, std::vector<double>(n));
        std::vector<double> means(models, 0.0);
        for (std::size_t j = 0; j < models; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                m[j][i] = scalar_margin(zoo[j].logits.row(i), zoo[j].temperature.value());
                means[j] += m[j][i] / static_cast<double>(n);
            }
        }
        // Exactly tied margins (saturated rows) may legitimately pick any tied model.
        auto src = select_source_index(zoo);
        double best_mean = *std::max_element(means.begin(), means.end());
        mismatches += means[src] < best_mean - 1e-15;

        auto set = generate_pseudo_labels(zoo);
        auto teachers = select_instance_teachers(zoo);
        for (std::size_t i = 0; i < n; ++i) {
            double best = 0.0;
            for (std::size_t j = 0; j < models; ++j) best = std::max(best, m[j][i]);
            mismatches += m[teachers[i]][i] < best - 1e-15;
            mismatches += set.labels[i] != scalar_argmax(zoo[teachers[i]].logits.row(i));
            mismatches += set.teacher_ids[i] != zoo[teachers[i]].id;
        }

        auto ens = ensemble_average_baseline(zoo);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> mean(k, 0.0);
            for (std::size_t j = 0; j < models; ++j) {
                std::vector<double> row(zoo[j].logits.row(i).begin(), zoo[j].logits.row(i).end());
                const double mx = *std::max_element(row.begin(), row.end());
                for (auto& v : row) v -= mx;
                auto p = naive_softmax(row);
                for (std::size_t c = 0; c < k; ++c) mean[c] += p[c] / static_cast<double>(models);
            }
            mismatches += ens[i] != scalar_argmax(mean);
        }
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    if (o.pass) o.detail = "100 random zoos: model/instance selection, pseudo-labels, ensemble all match";
    return o;
}

PipelineConfig benchmark_config(ShiftProfile profile, std::uint64_t seed, const fs::path& cache) {
    PipelineConfig cfg;
    cfg.benchmark = {3, profile, seed, 4, 8, 500};
    cfg.seed = seed;
    cfg.cache_dir = cache;
    return cfg;
}

Outcome ablation_ordering(const fs::path& scratch) {
    Outcome o;
    double m_only = 0, mi = 0, mits = 0, ens = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        const fs::path cache = scratch / ("strong_" + std::to_string(s));
        auto cfg = benchmark_config(ShiftProfile::Strong, seed, cache);

        cfg.ablation = {true, true, true, false};
        auto full = run_pipeline(cfg).report;
        cfg.ablation = {true, true, false, false};
        auto no_ts = run_pipeline(cfg).report;
        cfg.ablation = {true, false, false, false};
        auto model_only = run_pipeline(cfg).report;

        mits += *full.final_accuracy / seeds;
        mi += *no_ts.final_accuracy / seeds;
        m_only += *model_only.final_accuracy / seeds;
        ens += full.ensemble_average_accuracy / seeds;
    }
    o.require(mits >= mi - 0.005, "M+I+TS < M+I - 0.5pp");
    o.require(mi >= m_only - 0.005, "M+I < M-only - 0.5pp");
    o.require(mits >= ens + 0.01, "full < ensemble + 1pp");
    o.detail += (o.detail.empty() ? "" : " | ") +
                fmt("M %.4f, M+I %.4f, M+I+TS %.4f, ensemble %.4f", m_only, mi, mits, ens);
    return o;
}

Outcome negative_transfer(const fs::path& scratch) {
    Outcome o;
    double full_acc = 0, ens = 0;
    int picked_permuted = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        auto cfg = benchmark_config(ShiftProfile::AdversarialOne, seed, scratch / ("adv_" + std::to_string(s)));
        auto bundle_specs = benchmark_specs(cfg.benchmark);
        std::string permuted;
        for (const auto& spec : bundle_specs)
            if (spec.label_permutation) permuted = spec.id;
        auto r = run_pipeline(cfg).report;
        picked_permuted += *r.init_model == permuted;
        full_acc += *r.final_accuracy / seeds;
        ens += r.ensemble_average_accuracy / seeds;
    }
    o.require(picked_permuted == 0, std::to_string(picked_permuted) + "/10 runs picked the permuted source");
    o.require(full_acc >= ens + 0.05, "gain over ensemble < 5pp");
    o.detail += (o.detail.empty() ? "" : " | ") +
                fmt("permuted source picked %g/10, full %.4f vs ensemble %.4f (%+.2f pp)", picked_permuted,
                    full_acc, ens, 100.0 * (full_acc - ens));
    return o;
}

Outcome determinism(const fs::path& scratch) {
    Outcome o;
    std::vector<fs::path> outs{scratch / "det_a", scratch / "det_b"};
    for (const auto& out : outs) {
        PipelineConfig cfg;
        cfg.seed = 11;
        cfg.out_dir = out;  // each run trains into its own cache
        run_pipeline(cfg);
    }
    std::size_t compared = 0;
    auto same = [&](const fs::path& rel) {
        ++compared;
        const auto a = read_bytes(outs[0] / rel), b = read_bytes(outs[1] / rel);
        o.require(!a.empty() && a == b, rel.string() + " differs");
    };
    same("report.json");
    same("target_model.uadm");
    same("target_model.json");
    for (const auto& entry : fs::directory_iterator(outs[0] / "cache")) {
        same(fs::path("cache") / entry.path().filename());
    }
    if (o.pass) o.detail = std::to_string(compared) + " files byte-identical (report, checkpoints, sidecars)";
    return o;
}

}  // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / "uad_acceptance";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"unit-values", 1.0, unit_values},
        {"calibration-invariants", 10.0, calibration_invariants},
        {"gradient-check", 10.0, gradient_check},
        {"oracle-equivalence", 10.0, oracle_equivalence},
        {"ablation-ordering", 300.0, [&] { return ablation_ordering(scratch); }},
        {"negative-transfer", 300.0, [&] { return negative_transfer(scratch); }},
        {"determinism", 0.0, [&] { return determinism(scratch); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_s > 0 && secs > c.limit_s) o.require(false, fmt("took %.1f s, limit %.0f s", secs, c.limit_s));
        failed += !o.pass;
        std::printf("%s  %-24s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(scratch);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
