// uad command-line driver.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uad/calibration.hpp"
#include "uad/core_math.hpp"
#include "uad/error.hpp"
#include "uad/io.hpp"
#include "uad/mlp.hpp"
#include "uad/pipeline.hpp"
#include "uad/selection.hpp"
#include "uad/synth.hpp"
#include "uad/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace uad;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

PipelineConfig resolve_config(const Globals& g) {
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
    if (g.seed) cfg.seed = g.seed;
    if (!g.out.empty()) cfg.out_dir = g.out;
    return cfg;
}

fs::path out_dir(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw InvalidConfig("an output directory is required (--out or out=)");
    fs::create_directories(cfg.out_dir);
    return cfg.out_dir;
}

std::uint64_t require_seed(const PipelineConfig& cfg) {
    if (!cfg.seed) throw InvalidConfig("a seed is required (--seed or seed=)");
    return *cfg.seed;
}

void write_json(const fs::path& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// Zoo from logit files, ids are the file stems. Temperatures come from a calibrate output if given.
ModelZoo load_zoo(const std::vector<std::string>& files, const std::string& calibration) {
    ModelZoo zoo;
    for (const auto& f : files) zoo.add(fs::path(f).stem().string(), read_logits(f));
    if (!calibration.empty()) {
        const auto j = read_json(calibration);
        for (const auto& m : j.at("models")) {
            const auto id = m.at("model_id").get<std::string>();
            zoo.set_temperature(zoo.index_of(id), Temperature::from_value(m.at("temperature").get<double>()));
        }
    }
    return zoo;
}

void print_report_summary(const ordered_json& r) {
    std::printf("seed %llu\n", static_cast<unsigned long long>(r.at("seed").get<std::uint64_t>()));
    for (const auto& s : r.at("sources")) {
        std::printf("  %-16s acc %.4f  margin %.4f -> %.4f  T %.4g\n", s.at("id").get<std::string>().c_str(),
                    s.at("target_accuracy").get<double>(), s.at("mean_margin_raw").get<double>(),
                    s.at("mean_margin_calibrated").get<double>(), s.at("temperature").get<double>());
    }
    if (r.contains("init_model")) std::printf("init model      %s\n", r["init_model"].get<std::string>().c_str());
    if (r.contains("mode")) std::printf("mode            %s\n", r["mode"].get<std::string>().c_str());
    if (r.contains("pseudo_label_accuracy"))
        std::printf("pseudo-labels   %.4f\n", r["pseudo_label_accuracy"].get<double>());
    if (r.contains("final_accuracy")) std::printf("final accuracy  %.4f\n", r["final_accuracy"].get<double>());
    const auto& b = r.at("baselines");
    std::printf("ensemble avg    %.4f\n", b.at("ensemble_average").get<double>());
    std::printf("best source     %.4f\n", b.at("best_source").get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Source-model selection, calibration and pseudo-label adaptation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--seed", g.seed, "run seed");
    app.add_option("--out", g.out, "output directory");

    // gen
    auto* gen = app.add_subcommand("gen", "generate the synthetic benchmark");
    std::string gen_format = "csv";
    gen->add_option("--format", gen_format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));

    // train-src
    auto* train = app.add_subcommand("train-src", "train one source model per labeled dataset");
    std::vector<std::string> train_data;
    train->add_option("--data", train_data, "labeled dataset(s)")->required();

    // logits
    auto* logits = app.add_subcommand("logits", "source-model logits on target features");
    std::vector<std::string> logit_models;
    std::string logit_target, logit_format = "bin";
    logits->add_option("--model", logit_models, "checkpoint(s)")->required();
    logits->add_option("--data", logit_target, "target dataset")->required();
    logits->add_option("--format", logit_format, "bin or csv")->check(CLI::IsMember({"csv", "bin"}));

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "fit one temperature per model");
    std::vector<std::string> cal_logits;
    std::string cal_labels;
    calibrate->add_option("--logits", cal_logits, "logit file(s)")->required();
    calibrate->add_option("--labels", cal_labels, "labeled dataset for oracle mode");

    // select
    auto* select = app.add_subcommand("select", "model-level selection by mean calibrated margin");
    std::vector<std::string> sel_logits;
    std::string sel_cal;
    select->add_option("--logits", sel_logits, "logit file(s)")->required();
    select->add_option("--calibration", sel_cal, "calibrate output");

    // pseudo
    auto* pseudo = app.add_subcommand("pseudo", "instance-level pseudo-labels");
    std::vector<std::string> ps_logits;
    std::string ps_cal, ps_target;
    pseudo->add_option("--logits", ps_logits, "logit file(s)")->required();
    pseudo->add_option("--calibration", ps_cal, "calibrate output");
    pseudo->add_option("--target-logits", ps_target, "current target model logits");

    // adapt
    auto* adapt = app.add_subcommand("adapt", "pseudo-label adaptation of an initialization model");
    std::string ad_init, ad_data, ad_cal;
    std::vector<std::string> ad_logits;
    adapt->add_option("--init", ad_init, "initialization checkpoint")->required();
    adapt->add_option("--data", ad_data, "target dataset (labels unused)")->required();
    adapt->add_option("--logits", ad_logits, "zoo logit file(s)")->required();
    adapt->add_option("--calibration", ad_cal, "calibrate output");

    // eval
    auto* eval = app.add_subcommand("eval", "accuracy and confusion of a model on labeled data");
    std::string ev_model, ev_data;
    eval->add_option("--model", ev_model, "checkpoint")->required();
    eval->add_option("--data", ev_data, "labeled dataset")->required();

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");

    // report
    auto* report = app.add_subcommand("report", "summarize a report.json");
    std::string rep_path;
    report->add_option("--report", rep_path, "report file (default <out>/report.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        PipelineConfig cfg = resolve_config(g);

        if (*gen) {
            BenchmarkOptions opts = cfg.benchmark;
            opts.seed = require_seed(cfg);
            const auto dir = out_dir(cfg);
            const auto bundle = make_benchmark(opts);
            const std::string ext = gen_format == "csv" ? ".csv" : ".uadd";
            auto write = [&](const LabeledDataset& d, const std::string& id) {
                const auto path = dir / (id + ext);
                gen_format == "csv" ? write_dataset_csv(d, path) : write_dataset_bin(d, path);
                std::printf("%s\n", path.string().c_str());
            };
            for (std::size_t j = 0; j < bundle.sources.size(); ++j) write(bundle.sources[j], bundle.source_specs[j].id);
            write(bundle.target, "target");
        } else if (*train) {
            const auto seed = require_seed(cfg);
            const auto dir = out_dir(cfg);
            for (std::size_t j = 0; j < train_data.size(); ++j) {
                const auto data = read_dataset(train_data[j]);
                TrainerConfig tc = cfg.source_trainer;
                tc.seed = derive_seed(seed, 100 + j);
                const auto model = train_source(data, tc);
                const auto id = fs::path(train_data[j]).stem().string();
                save_checkpoint(model, dir / (id + ".uadm"));
                write_checkpoint_sidecar(dir / (id + ".json"), tc, {{"source_id", id}});
                std::printf("%s  train acc %.4f\n", id.c_str(), evaluate(model, data).accuracy);
            }
        } else if (*logits) {
            const auto dir = out_dir(cfg);
            const auto target = read_dataset(logit_target);
            for (const auto& m : logit_models) {
                const auto l = forward(load_checkpoint(m), target.features);
                const auto id = fs::path(m).stem().string();
                const auto path = dir / (id + (logit_format == "bin" ? ".uadl" : ".csv"));
                logit_format == "bin" ? write_logits_bin(l, path) : write_logits_csv(l, path);
                std::printf("%s\n", path.string().c_str());
            }
        } else if (*calibrate) {
            const auto dir = out_dir(cfg);
            auto zoo = load_zoo(cal_logits, "");
            std::vector<CalibrationReport> reports;
            std::vector<std::size_t> labels;
            const auto fit = cfg.fit_config();
            if (!cal_labels.empty() || cfg.label_source == LabelSource::Oracle) {
                if (cal_labels.empty()) throw InvalidConfig("oracle label source needs --labels");
                labels = read_dataset(cal_labels).labels;
                reports = calibrate_zoo(zoo, LabelSource::Oracle, fit, std::span<const std::size_t>(labels));
            } else {
                labels = consensus_labels(zoo);
                reports = calibrate_zoo(zoo, LabelSource::ProxyConsensus, fit);
            }
            apply_reports(zoo, reports);
            ordered_json j;
            j["models"] = ordered_json::array();
            for (const auto& r : reports) {
                j["models"].push_back(to_json(r));
                std::printf("%-16s T %.4g  ECE %.4f -> %.4f\n", r.model_id.c_str(), r.temperature.value(),
                            r.ece_before, r.ece_after);
            }
            write_json(dir / "calibration.json", j);
            for (const auto& e : zoo.entries()) {
                emit_reliability_csv(reliability_bins(e.logits, labels, e.temperature.value(), fit.bins),
                                     dir / ("reliability_" + e.id + ".csv"));
            }
        } else if (*select) {
            const auto zoo = load_zoo(sel_logits, sel_cal);
            const auto means = model_mean_margins(zoo);
            const auto best = select_source_index(zoo);
            ordered_json j;
            j["init_model"] = zoo[best].id;
            j["mean_margins"] = ordered_json::object();
            for (std::size_t m = 0; m < zoo.size(); ++m) {
                j["mean_margins"][zoo[m].id] = means[m];
                std::printf("%-16s mean margin %.6f%s\n", zoo[m].id.c_str(), means[m], m == best ? "  *" : "");
            }
            if (!cfg.out_dir.empty()) write_json(out_dir(cfg) / "selection.json", j);
        } else if (*pseudo) {
            const auto dir = out_dir(cfg);
            const auto zoo = load_zoo(ps_logits, ps_cal);
            std::optional<LogitMatrix> target;
            if (!ps_target.empty()) target = read_logits(ps_target);
            const auto set = refresh_pseudo_labels(zoo, target);
            write_pseudo_labels_csv(set, dir / "pseudo_labels.csv");
            std::map<std::string, std::size_t> per_teacher;
            for (const auto& t : set.teacher_ids) per_teacher[t]++;
            for (const auto& [id, n] : per_teacher) std::printf("%-16s %zu instances\n", id.c_str(), n);
        } else if (*adapt) {
            cfg.validate(true);
            const auto dir = out_dir(cfg);
            const auto zoo = load_zoo(ad_logits, ad_cal);
            const auto target = read_dataset(ad_data);
            TrainerConfig tc = cfg.adapt_trainer;
            tc.seed = derive_seed(*cfg.seed, 200);
            AdaptOptions opts;
            opts.refresh_with_target = cfg.refresh_with_target;
            opts.pseudo_label_threshold = cfg.pseudo_label_threshold;
            const auto model = adapt_target(load_checkpoint(ad_init), target.features, zoo, tc, opts,
                                            [](const AdaptEpoch& e, const MlpClassifier&) {
                                                std::printf("epoch %zu  loss %.6f\n", e.stats.epoch, e.stats.mean_loss);
                                            });
            save_checkpoint(model, dir / "target_model.uadm");
            write_checkpoint_sidecar(dir / "target_model.json", tc, {{"init", ad_init}});
        } else if (*eval) {
            const auto data = read_dataset(ev_data);
            const auto ev = evaluate(load_checkpoint(ev_model), data);
            std::printf("accuracy %.4f\n", ev.accuracy);
            for (const auto& row : ev.confusion) {
                for (std::size_t k = 0; k < row.size(); ++k) std::printf(k ? " %6zu" : "%6zu", row[k]);
                std::printf("\n");
            }
            if (!cfg.out_dir.empty()) {
                write_json(out_dir(cfg) / "eval.json", {{"accuracy", ev.accuracy}, {"confusion", ev.confusion}});
            }
        } else if (*pipeline) {
            const auto result = run_pipeline(cfg);
            print_report_summary(result.report.to_json());
        } else if (*report) {
            fs::path path = rep_path;
            if (path.empty()) {
                if (cfg.out_dir.empty()) throw InvalidConfig("report needs --report or --out");
                path = cfg.out_dir / "report.json";
            }
            print_report_summary(read_json(path));
        }
    } catch (const InvalidConfig& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
