#include "uad/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uad/core_math.hpp"
#include "uad/error.hpp"
#include "uad/io.hpp"
#include "uad/kernels.hpp"

namespace uad {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TrainerConfig PipelineConfig::default_source_trainer() {
    TrainerConfig t;
    t.epochs = 100;
    t.smoothing = 0.1;
    return t;
}

TrainerConfig PipelineConfig::default_adapt_trainer() {
    TrainerConfig t;
    t.epochs = 15;
    t.smoothing = 0.0;
    return t;
}

FitConfig PipelineConfig::fit_config() const {
    return FitConfig{ece_bins, default_temperature_grid(grid_min, grid_max, grid_points)};
}

void PipelineConfig::validate(bool for_adapt) const {
    if (!seed) throw InvalidConfig("a seed is required (config key 'seed' or --seed)");
    if (for_adapt && !ablation.model_level && !ablation.instance_level) {
        throw InvalidConfig("adapt needs at least one of model_level / instance_level");
    }
    if (source_data.empty() != target_data.empty()) {
        throw InvalidConfig("source_data and target_data must be given together");
    }
    if (source_data.empty()) {
        if (benchmark.n_sources < 1) throw InvalidConfig("sources must be >= 1");
        if (benchmark.classes < 2) throw InvalidConfig("classes must be >= 2");
        if (benchmark.dim < 1) throw InvalidConfig("dim must be >= 1");
        if (benchmark.samples_per_class < 1) throw InvalidConfig("samples_per_class must be >= 1");
    }
    if (ece_bins < 1) throw InvalidConfig("ece_bins must be >= 1");
    if (!(grid_min > 0.0) || !(grid_max > grid_min) || grid_points < 2) {
        throw InvalidConfig("temperature grid needs 0 < grid_min < grid_max and grid_points >= 2");
    }
    if (!(pseudo_label_threshold >= 0.0 && pseudo_label_threshold < 1.0)) {
        throw InvalidConfig("pseudo_label_threshold must be in [0,1)");
    }
    source_trainer.validate();
    adapt_trainer.validate();
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw InvalidConfig("bad value for '" + key + "': '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidConfig("bad boolean for '" + key + "': '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& config_setters() {
    static const std::map<std::string, Setter> setters = [] {
        std::map<std::string, Setter> s;
        s["sources"] = [](auto& c, auto& k, auto& v) { c.benchmark.n_sources = parse_number<std::size_t>(k, v); };
        s["profile"] = [](auto& c, auto&, auto& v) { c.benchmark.profile = shift_profile_from_string(v); };
        s["classes"] = [](auto& c, auto& k, auto& v) { c.benchmark.classes = parse_number<std::size_t>(k, v); };
        s["dim"] = [](auto& c, auto& k, auto& v) { c.benchmark.dim = parse_number<std::size_t>(k, v); };
        s["samples_per_class"] = [](auto& c, auto& k, auto& v) {
            c.benchmark.samples_per_class = parse_number<std::size_t>(k, v);
        };
        s["source_data"] = [](auto& c, auto&, auto& v) {
            c.source_data.clear();
            for (auto& p : split_list(v)) c.source_data.emplace_back(p);
        };
        s["target_data"] = [](auto& c, auto&, auto& v) { c.target_data = v; };
        s["hidden"] = [](auto& c, auto& k, auto& v) {
            std::vector<std::size_t> h;
            for (auto& item : split_list(v)) h.push_back(parse_number<std::size_t>(k, item));
            c.source_trainer.hidden = h;
            c.adapt_trainer.hidden = h;
        };
        s["base_lr"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.base_lr = c.adapt_trainer.base_lr = parse_number<double>(k, v);
        };
        s["momentum"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.momentum = c.adapt_trainer.momentum = parse_number<double>(k, v);
        };
        s["weight_decay"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.weight_decay = c.adapt_trainer.weight_decay = parse_number<double>(k, v);
        };
        s["batch_size"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.batch_size = c.adapt_trainer.batch_size = parse_number<std::size_t>(k, v);
        };
        s["lr_alpha"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.lr_alpha = c.adapt_trainer.lr_alpha = parse_number<double>(k, v);
        };
        s["lr_beta"] = [](auto& c, auto& k, auto& v) {
            c.source_trainer.lr_beta = c.adapt_trainer.lr_beta = parse_number<double>(k, v);
        };
        s["source_epochs"] = [](auto& c, auto& k, auto& v) { c.source_trainer.epochs = parse_number<std::size_t>(k, v); };
        s["adapt_epochs"] = [](auto& c, auto& k, auto& v) { c.adapt_trainer.epochs = parse_number<std::size_t>(k, v); };
        s["source_smoothing"] = [](auto& c, auto& k, auto& v) { c.source_trainer.smoothing = parse_number<double>(k, v); };
        s["adapt_smoothing"] = [](auto& c, auto& k, auto& v) { c.adapt_trainer.smoothing = parse_number<double>(k, v); };
        s["ece_bins"] = [](auto& c, auto& k, auto& v) { c.ece_bins = parse_number<std::size_t>(k, v); };
        s["grid_min"] = [](auto& c, auto& k, auto& v) { c.grid_min = parse_number<double>(k, v); };
        s["grid_max"] = [](auto& c, auto& k, auto& v) { c.grid_max = parse_number<double>(k, v); };
        s["grid_points"] = [](auto& c, auto& k, auto& v) { c.grid_points = parse_number<std::size_t>(k, v); };
        s["label_source"] = [](auto& c, auto&, auto& v) { c.label_source = label_source_from_string(v); };
        s["model_level"] = [](auto& c, auto& k, auto& v) { c.ablation.model_level = parse_bool(k, v); };
        s["instance_level"] = [](auto& c, auto& k, auto& v) { c.ablation.instance_level = parse_bool(k, v); };
        s["temperature_scaling"] = [](auto& c, auto& k, auto& v) { c.ablation.temperature_scaling = parse_bool(k, v); };
        s["score_only"] = [](auto& c, auto& k, auto& v) { c.ablation.score_only = parse_bool(k, v); };
        s["refresh_with_target"] = [](auto& c, auto& k, auto& v) { c.refresh_with_target = parse_bool(k, v); };
        s["pseudo_label_threshold"] = [](auto& c, auto& k, auto& v) {
            c.pseudo_label_threshold = parse_number<double>(k, v);
        };
        s["seed"] = [](auto& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); };
        s["out"] = [](auto& c, auto&, auto& v) { c.out_dir = v; };
        s["cache_dir"] = [](auto& c, auto&, auto& v) { c.cache_dir = v; };
        return s;
    }();
    return setters;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, PipelineConfig cfg) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& setters = config_setters();
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    return cfg;
}

PipelineConfig load_config(const fs::path& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

ordered_json trainer_config_json(const TrainerConfig& cfg) {
    ordered_json j;
    j["base_lr"] = cfg.base_lr;
    j["momentum"] = cfg.momentum;
    j["weight_decay"] = cfg.weight_decay;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["smoothing"] = cfg.smoothing;
    j["lr_alpha"] = cfg.lr_alpha;
    j["lr_beta"] = cfg.lr_beta;
    j["hidden"] = cfg.hidden;
    j["seed"] = cfg.seed;
    return j;
}

ordered_json PipelineConfig::to_json() const {
    ordered_json j;
    if (source_data.empty()) {
        j["benchmark"] = {{"sources", benchmark.n_sources},
                          {"profile", to_string(benchmark.profile)},
                          {"classes", benchmark.classes},
                          {"dim", benchmark.dim},
                          {"samples_per_class", benchmark.samples_per_class}};
    } else {
        std::vector<std::string> paths;
        for (const auto& p : source_data) paths.push_back(p.string());
        j["source_data"] = paths;
        j["target_data"] = target_data.string();
    }
    j["source_trainer"] = trainer_config_json(source_trainer);
    j["adapt_trainer"] = trainer_config_json(adapt_trainer);
    j["calibration"] = {{"ece_bins", ece_bins},
                        {"grid_min", grid_min},
                        {"grid_max", grid_max},
                        {"grid_points", grid_points},
                        {"label_source", to_string(label_source)}};
    j["ablation"] = {{"model_level", ablation.model_level},
                     {"instance_level", ablation.instance_level},
                     {"temperature_scaling", ablation.temperature_scaling},
                     {"score_only", ablation.score_only}};
    j["refresh_with_target"] = refresh_with_target;
    j["pseudo_label_threshold"] = pseudo_label_threshold;
    if (seed) j["seed"] = *seed;
    return j;
}

// ---------------------------------------------------------------------------
// Evaluation and baselines
// ---------------------------------------------------------------------------

Evaluation evaluate(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t classes) {
    if (labels.empty()) throw InvalidInput("cannot evaluate on empty data");
    if (predictions.size() != labels.size()) throw InvalidInput("predictions and labels differ in length");
    Evaluation ev;
    ev.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes || predictions[i] >= classes) throw InvalidInput("class index out of range");
        ev.confusion[labels[i]][predictions[i]] += 1;
        if (labels[i] == predictions[i]) ++correct;
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    return ev;
}

Evaluation evaluate(const MlpClassifier& model, const LabeledDataset& data) {
    return evaluate(predict(model, data.features), data.labels, data.classes);
}

std::vector<std::size_t> ensemble_average_baseline(const ModelZoo& zoo) {
    if (zoo.empty()) throw InvalidInput("empty model zoo");
    std::vector<std::span<const double>> logits;
    for (const auto& e : zoo.entries()) logits.push_back(e.logits.values());
    std::vector<std::size_t> out(zoo.rows());
    kernels::omp::mean_softmax_argmax(logits, zoo.classes(), out);
    return out;
}

namespace {

std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

void emit_reliability_csv(const ReliabilityBins& bins, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "bin_low,bin_high,count,mean_conf,mean_acc\n";
    for (std::size_t m = 0; m < bins.bin_count; ++m) {
        const auto count = bins.counts[m];
        const double conf = count ? bins.confidence_sum[m] / static_cast<double>(count) : 0.0;
        const double acc = count ? bins.correct_sum[m] / static_cast<double>(count) : 0.0;
        out << shortest(bins.low(m)) << ',' << shortest(bins.high(m)) << ',' << count << ',' << shortest(conf) << ','
            << shortest(acc) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

ReliabilityBins read_reliability_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (trim(line) != "bin_low,bin_high,count,mean_conf,mean_acc") throw IoError(path.string() + ": bad header");
    ReliabilityBins bins;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 5) throw IoError(path.string() + ": wrong column count");
        const auto count = parse_number<std::size_t>("count", f[2]);
        const double conf = parse_number<double>("mean_conf", f[3]);
        const double acc = parse_number<double>("mean_acc", f[4]);
        bins.counts.push_back(count);
        bins.confidence_sum.push_back(conf * static_cast<double>(count));
        bins.correct_sum.push_back(acc * static_cast<double>(count));
    }
    bins.bin_count = bins.counts.size();
    return bins;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ordered_json to_json(const CalibrationReport& r) {
    ordered_json j;
    j["model_id"] = r.model_id;
    j["temperature"] = r.temperature.value();
    j["ece_before"] = r.ece_before;
    j["ece_after"] = r.ece_after;
    j["label_source"] = to_string(r.label_source);
    if (r.degenerate_consensus) j["warning"] = "degenerate-consensus";
    return j;
}

ordered_json RunReport::to_json() const {
    ordered_json j;
    j["schema"] = kReportSchema;
    j["seed"] = seed;
    j["config"] = config;
    ordered_json src = ordered_json::array();
    for (const auto& s : sources) {
        src.push_back({{"id", s.id},
                       {"target_accuracy", s.target_accuracy},
                       {"mean_margin_raw", s.mean_margin_raw},
                       {"mean_margin_calibrated", s.mean_margin_calibrated},
                       {"temperature", s.temperature}});
    }
    j["sources"] = src;
    ordered_json cal = ordered_json::array();
    for (const auto& c : calibration) cal.push_back(uad::to_json(c));
    j["calibration"] = cal;
    if (init_model) j["init_model"] = *init_model;
    if (mode) j["mode"] = *mode;
    if (pseudo_label_accuracy) j["pseudo_label_accuracy"] = *pseudo_label_accuracy;
    if (!adaptation.empty()) {
        ordered_json epochs = ordered_json::array();
        for (const auto& e : adaptation) {
            epochs.push_back({{"epoch", e.epoch},
                              {"loss", e.loss},
                              {"accuracy", e.accuracy},
                              {"pseudo_label_accuracy", e.pseudo_label_accuracy}});
        }
        j["adaptation"] = epochs;
    }
    if (final_accuracy) j["final_accuracy"] = *final_accuracy;
    j["baselines"] = {{"ensemble_average", ensemble_average_accuracy}, {"best_source", best_source_accuracy}};
    return j;
}

std::string RunReport::dump() const { return to_json().dump(2) + "\n"; }

void write_checkpoint_sidecar(const fs::path& path, const TrainerConfig& cfg, const ordered_json& extra) {
    ordered_json j;
    j["format"] = "UADM";
    j["version"] = 1;
    j["trainer"] = trainer_config_json(cfg);
    j["seed"] = cfg.seed;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw_error(e.kind(), std::string("stage '") + name + "': " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw IoError(std::string("stage '") + name + "': " + e.what());
    }
}

std::uint64_t fingerprint(const LabeledDataset& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    };
    mix(data.features.rows);
    mix(data.features.cols);
    mix(data.classes);
    for (double v : data.features.data) mix(std::bit_cast<std::uint64_t>(v));
    for (auto y : data.labels) mix(y);
    return h;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Domains {
    std::vector<std::string> ids;
    std::vector<LabeledDataset> sources;
    LabeledDataset target;
};

Domains load_domains(const PipelineConfig& cfg) {
    Domains d;
    if (cfg.source_data.empty()) {
        BenchmarkOptions opts = cfg.benchmark;
        opts.seed = *cfg.seed;
        auto bundle = make_benchmark(opts);
        for (const auto& s : bundle.source_specs) d.ids.push_back(s.id);
        d.sources = std::move(bundle.sources);
        d.target = std::move(bundle.target);
    } else {
        for (const auto& p : cfg.source_data) {
            d.ids.push_back(p.stem().string());
            d.sources.push_back(read_dataset(p));
        }
        d.target = read_dataset(cfg.target_data);
        const std::size_t k = std::max_element(d.sources.begin(), d.sources.end(), [](auto& a, auto& b) {
                                  return a.classes < b.classes;
                              })->classes;
        for (auto& s : d.sources) s.classes = std::max(s.classes, std::max(k, d.target.classes));
        d.target.classes = d.sources.front().classes;
    }
    for (std::size_t j = 0; j < d.ids.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (d.ids[i] == d.ids[j]) throw InvalidConfig("duplicate source id '" + d.ids[j] + "'");
        }
    }
    for (const auto& s : d.sources) {
        if (s.features.cols != d.target.features.cols || s.classes != d.target.classes) {
            throw InvalidInput("all domains must share feature width and class count");
        }
    }
    return d;
}

std::vector<MlpClassifier> train_sources(const PipelineConfig& cfg, const Domains& d, const fs::path& cache_dir) {
    const std::size_t n = d.sources.size();
    std::vector<MlpClassifier> models(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < count; ++j) {
        try {
            TrainerConfig tc = cfg.source_trainer;
            tc.seed = derive_seed(*cfg.seed, 100 + static_cast<std::uint64_t>(j));
            const ordered_json extra = {{"source_id", d.ids[j]},
                                        {"data_fingerprint", fingerprint(d.sources[j])}};
            if (cache_dir.empty()) {
                models[j] = train_source(d.sources[j], tc);
                continue;
            }
            const fs::path model_path = cache_dir / (d.ids[j] + ".uadm");
            const fs::path sidecar_path = cache_dir / (d.ids[j] + ".json");
            const fs::path expected_path = cache_dir / (d.ids[j] + ".json.tmp");
            write_checkpoint_sidecar(expected_path, tc, extra);
            const std::string expected = read_file(expected_path);
            fs::remove(expected_path);
            if (fs::exists(model_path) && fs::exists(sidecar_path) && read_file(sidecar_path) == expected) {
                models[j] = load_checkpoint(model_path);
            } else {
                models[j] = train_source(d.sources[j], tc);
                save_checkpoint(models[j], model_path);
                write_checkpoint_sidecar(sidecar_path, tc, extra);
            }
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return models;
}

double label_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    run_stage("config", [&] { cfg.validate(); });
    const std::uint64_t seed = *cfg.seed;
    const bool write = !cfg.out_dir.empty();
    const fs::path cache_dir = cfg.cache_dir.empty() ? (write ? cfg.out_dir / "cache" : fs::path()) : cfg.cache_dir;

    run_stage("output", [&] {
        if (write) fs::create_directories(cfg.out_dir / "logits");
        if (!cache_dir.empty()) fs::create_directories(cache_dir);
    });

    PipelineResult result;
    RunReport& report = result.report;
    report.seed = seed;
    report.config = cfg.to_json();

    const Domains domains = run_stage("data", [&] { return load_domains(cfg); });
    const LabeledDataset& target = domains.target;

    const auto sources = run_stage("train-sources", [&] { return train_sources(cfg, domains, cache_dir); });

    ModelZoo zoo = run_stage("logits", [&] {
        ModelZoo z;
        for (std::size_t j = 0; j < sources.size(); ++j) {
            z.add(domains.ids[j], forward(sources[j], target.features));
            if (write) write_logits_bin(z[j].logits, cfg.out_dir / "logits" / (domains.ids[j] + ".uadl"));
        }
        return z;
    });

    std::vector<double> raw_means;
    run_stage("calibration", [&] {
        raw_means = model_mean_margins(zoo);
        if (!cfg.ablation.temperature_scaling) return;
        const FitConfig fit = cfg.fit_config();
        std::vector<std::size_t> labels;
        if (cfg.label_source == LabelSource::Oracle) {
            labels = target.labels;
            report.calibration = calibrate_zoo(zoo, LabelSource::Oracle, fit, std::span<const std::size_t>(labels));
        } else {
            labels = consensus_labels(zoo);
            report.calibration = calibrate_zoo(zoo, LabelSource::ProxyConsensus, fit);
        }
        apply_reports(zoo, report.calibration);
        if (write) {
            for (const auto& e : zoo.entries()) {
                emit_reliability_csv(reliability_bins(e.logits, labels, e.temperature.value(), fit.bins),
                                     cfg.out_dir / ("reliability_" + e.id + ".csv"));
            }
        }
    });

    run_stage("evaluation", [&] {
        const auto calibrated_means = model_mean_margins(zoo);
        for (std::size_t j = 0; j < zoo.size(); ++j) {
            std::vector<std::size_t> preds(zoo.rows());
            kernels::omp::row_argmax(zoo[j].logits.values(), zoo.classes(), preds);
            SourceSummary s;
            s.id = zoo[j].id;
            s.target_accuracy = label_accuracy(preds, target.labels);
            s.mean_margin_raw = raw_means[j];
            s.mean_margin_calibrated = calibrated_means[j];
            s.temperature = zoo[j].temperature.value();
            report.best_source_accuracy = std::max(report.best_source_accuracy, s.target_accuracy);
            report.sources.push_back(std::move(s));
        }
        report.ensemble_average_accuracy = label_accuracy(ensemble_average_baseline(zoo), target.labels);
    });

    const Ablation& ab = cfg.ablation;
    if (!ab.model_level && !ab.instance_level) {
        if (write) run_stage("report", [&] {
            std::ofstream(cfg.out_dir / "report.json") << report.dump();
        });
        return result;
    }

    const std::size_t init_index = run_stage("selection", [&] {
        return ab.model_level ? select_source_index(zoo) : std::size_t{0};
    });
    report.init_model = zoo[init_index].id;

    TrainerConfig tc = cfg.adapt_trainer;
    tc.seed = derive_seed(seed, 200);

    run_stage("adaptation", [&] {
        // Labels of the first epoch: per-instance teachers, or the initialization teacher alone.
        std::vector<std::size_t> initial_labels(zoo.rows());
        PseudoLabelSet initial;
        if (ab.instance_level) {
            initial = generate_pseudo_labels(zoo);
            initial_labels = initial.labels;
        } else {
            kernels::omp::row_argmax(zoo[init_index].logits.values(), zoo.classes(), initial_labels);
            initial.labels = initial_labels;
            initial.teacher_ids.assign(zoo.rows(), zoo[init_index].id);
            const Matrix table = calibrated_margin_table(zoo);
            initial.winning_margins.assign(table.row(init_index).begin(), table.row(init_index).end());
        }
        report.pseudo_label_accuracy = label_accuracy(initial_labels, target.labels);
        if (write) write_pseudo_labels_csv(initial, cfg.out_dir / "pseudo_labels.csv");

        if (ab.score_only) {
            report.mode = "score-only";
            report.final_accuracy = report.pseudo_label_accuracy;
            return;
        }

        auto record = [&](std::size_t epoch, double loss, const MlpClassifier& m, double pl_acc) {
            report.adaptation.push_back({epoch, loss, evaluate(m, target).accuracy, pl_acc});
        };
        const MlpClassifier& init = sources[init_index];
        if (ab.instance_level) {
            report.mode = "adapt";
            AdaptOptions opts;
            opts.refresh_with_target = cfg.refresh_with_target;
            opts.pseudo_label_threshold = cfg.pseudo_label_threshold;
            result.target_model = adapt_target(init, target.features, zoo, tc, opts,
                                               [&](const AdaptEpoch& e, const MlpClassifier& m) {
                                                   record(e.stats.epoch, e.stats.mean_loss, m,
                                                          label_accuracy(e.pseudo_labels.labels, target.labels));
                                               });
        } else {
            report.mode = "fine-tune";
            const double pl_acc = *report.pseudo_label_accuracy;
            result.target_model = fine_tune(init, target.features, initial_labels, tc,
                                            [&](const EpochStats& s, const MlpClassifier& m) {
                                                record(s.epoch, s.mean_loss, m, pl_acc);
                                            });
        }
        report.final_accuracy = evaluate(*result.target_model, target).accuracy;
    });

    if (write) {
        run_stage("report", [&] {
            if (result.target_model) {
                save_checkpoint(*result.target_model, cfg.out_dir / "target_model.uadm");
                write_checkpoint_sidecar(cfg.out_dir / "target_model.json", tc, {{"init_model", *report.init_model}});
            }
            std::ofstream out(cfg.out_dir / "report.json");
            out << report.dump();
            if (!out) throw IoError("cannot write report.json");
        });
    }
    return result;
}

}  // namespace uad
