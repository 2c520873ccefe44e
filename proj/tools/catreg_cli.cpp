#include "catreg/evaluation.hpp"
#include "catreg/experiments.hpp"
#include "catreg/io.hpp"
#include "catreg/model.hpp"
#include "catreg/synth_data.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace catreg;

namespace {

ExperimentConfig load_config(const std::string& path) {
    return path.empty() ? ExperimentConfig{} : experiment_config_from_json(io::read_text(path));
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + '\n'); }

/// World from the config, with its spread calibrated to `target` when set.
std::vector<WorldItem> build_world(ExperimentConfig& config, std::optional<double> target) {
    const std::size_t needed = config.scenario.core_size +
                               (config.scenario.scenario == Scenario::S1Ex ? config.scenario.extended_size : 0);
    config.world.size = std::max(config.world.size, needed);
    if (target) {
        config.world.sigma_scale =
            calibrate_disagreement(*target, config.world, config.scenario.seed, config.model.scheme)
                .sigma_scale;
    }
    config.model.input_dim = config.world.dim;
    return make_world(config.world, config.scenario.seed);
}

ScenarioData read_scenario_dir(const fs::path& dir, const CategoryScheme& scheme) {
    ScenarioData d;
    d.train = read_dataset(dir / "train.csv", scheme);
    if (fs::exists(dir / "validation.csv")) {
        d.validation = read_dataset(dir / "validation.csv", scheme);
    }
    d.test = read_dataset(dir / "test.csv", scheme);
    return d;
}

void write_scenario_dir(const fs::path& dir, const ScenarioData& d, const CategoryScheme& scheme) {
    fs::create_directories(dir);
    write_dataset(dir / "train.csv", d.train, scheme, CsvColumns::Training);
    write_dataset(dir / "validation.csv", d.validation, scheme, CsvColumns::Evaluation);
    write_dataset(dir / "test.csv", d.test, scheme, CsvColumns::Evaluation);
}

Method method_of(const ModelConfig& c) {
    switch (c.head) {
        case Head::Regression: return c.dropout > 0.0 ? Method::McDropout : Method::Regression;
        case Head::PdfProb: return Method::PdfProb;
        case Head::Classification: return Method::Classification;
        case Head::CdfGaussian: return c.mixture ? Method::CdfProbMixture : Method::CdfProb;
        case Head::CdfLaplace:
            return c.mixture ? Method::CdfProbMixtureLaplace : Method::CdfProbLaplace;
    }
    return Method::CdfProb;
}

void write_metrics(const fs::path& dir, const std::string& stem, const MetricsReport& m,
                   const CategoryScheme& scheme) {
    io::write_text(dir / (stem + ".json"), metrics_to_json(m, scheme));
    io::write_text(dir / (stem + "_confusion.csv"), m.confusion.to_csv(scheme));
}

void write_predictions(const fs::path& path, std::span<const SamplePrediction> preds,
                       std::span<const LabeledSample> samples, const CategoryScheme& scheme) {
    std::string out = "id,mean,scale";
    for (const auto& n : scheme.names()) {
        out += ",p_" + n;
    }
    out += ",passes\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out += std::to_string(samples[i].id) + ',' + io::format_double(preds[i].mean) + ',' +
               io::format_double(preds[i].scale);
        for (double p : preds[i].probs) {
            out += ',' + io::format_double(p);
        }
        out += ',' + std::to_string(preds[i].passes) + '\n';
    }
    io::write_text(path, out);
}

struct Common {
    std::optional<std::uint64_t> seed;
};

void add_seed(CLI::App* cmd, Common& c, const std::string& what) {
    cmd->add_option("--seed", c.seed, what);
}

int cmd_gen_data(const std::string& config_path, const fs::path& out,
                 std::optional<double> target, const Common& common) {
    auto config = load_config(config_path);
    if (common.seed) {
        config.scenario.seed = *common.seed;
    }
    const auto world = build_world(config, target);
    const auto data = build_scenario(world, config.scenario, config.model.scheme);
    write_scenario_dir(out, data, config.model.scheme);
    io::write_text(out / "config.json", experiment_config_to_json(config));
    std::cout << "wrote " << data.train.size() << " train, " << data.validation.size()
              << " validation, " << data.test.size() << " test samples to " << out.string() << '\n';
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const fs::path& out,
              std::optional<double> target, const Common& common) {
    auto config = load_config(config_path);
    if (common.seed) {
        config.master_seed = *common.seed;
    }
    ScenarioData data;
    if (data_dir.empty()) {
        const auto world = build_world(config, target);
        data = build_scenario(world, config.scenario, config.model.scheme);
    } else {
        data = read_scenario_dir(data_dir, config.model.scheme);
        if (!data.train.empty() && !data.train.front().windows.empty()) {
            config.model.input_dim = data.train.front().windows.front().size();
        }
    }
    const auto result = run_experiment(config, data);
    const auto& scheme = config.model.scheme;
    fs::create_directories(out);
    json summary{{"method", std::string(to_string(config.method))},
                 {"scenario", std::string(to_string(config.scenario.scenario))},
                 {"off_grid", result.off_grid},
                 {"members", json::array()}};
    for (const auto& m : result.members) {
        const auto dir = out / ("seed_" + std::to_string(m.seed));
        fs::create_directories(dir);
        save_checkpoint(dir / "checkpoint.json", {m.params, m.seed});
        write_metrics(dir, "metrics", m.metrics, scheme);
        write_predictions(dir / "predictions.csv", m.predictions, data.test, scheme);
        summary["members"].push_back({{"seed", m.seed},
                                      {"accuracy", m.metrics.accuracy},
                                      {"abs_error_mean", m.metrics.abs_error.mean},
                                      {"ece", m.metrics.ece}});
    }
    write_metrics(out, "ensemble_metrics", result.ensemble, scheme);
    write_predictions(out / "ensemble_predictions.csv", result.ensemble_predictions, data.test, scheme);
    MetricsReport pooled = result.ensemble;
    pooled.abs_errors = result.pooled_abs_errors();
    pooled.abs_error = summarize(pooled.abs_errors);
    write_metrics(out, "pooled_metrics", pooled, scheme);
    summary["ensemble"] = {{"accuracy", result.ensemble.accuracy},
                           {"abs_error_mean", result.ensemble.abs_error.mean},
                           {"ece", result.ensemble.ece},
                           {"mce", result.ensemble.mce}};
    write_json(out / "summary.json", summary);
    io::write_text(out / "config.json", experiment_config_to_json(config));
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& data_path,
             std::size_t mc_passes, const fs::path& out, const Common& common) {
    std::vector<std::vector<SamplePrediction>> all;
    CategoryScheme scheme;
    std::vector<LabeledSample> samples;
    for (const auto& path : checkpoints) {
        const auto ck = load_checkpoint(path);
        if (samples.empty()) {
            scheme = ck.params.config.scheme;
            samples = read_dataset(data_path, scheme);
        }
        all.push_back(predict_dataset(ck.params, samples, method_of(ck.params.config), mc_passes,
                                      common.seed.value_or(ck.seed)));
    }
    std::vector<SamplePrediction> avg = all.front();
    for (std::size_t j = 0; j < avg.size(); ++j) {
        for (std::size_t k = 1; k < all.size(); ++k) {
            avg[j].mean += all[k][j].mean;
            avg[j].scale += all[k][j].scale;
            for (std::size_t c = 0; c < avg[j].probs.size(); ++c) {
                avg[j].probs[c] += all[k][j].probs[c];
            }
        }
        const double n = static_cast<double>(all.size());
        avg[j].mean /= n;
        avg[j].scale /= n;
        for (double& p : avg[j].probs) {
            p /= n;
        }
    }
    const auto report = evaluate(to_records(avg, samples), scheme);
    fs::create_directories(out);
    write_metrics(out, "metrics", report, scheme);
    write_predictions(out / "predictions.csv", avg, samples, scheme);
    std::cout << "accuracy " << report.accuracy << ", abs error " << report.abs_error.mean
              << ", ECE " << report.ece << '\n';
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
    const auto ma = metrics_from_json(io::read_text(a));
    const auto mb = metrics_from_json(io::read_text(b));
    const auto t = ttest_one_tail(ma.abs_errors, mb.abs_errors);
    const json j{{"a", a},
                 {"b", b},
                 {"hypothesis", "mean abs error of a < mean abs error of b"},
                 {"mean_a", summarize(ma.abs_errors).mean},
                 {"mean_b", summarize(mb.abs_errors).mean},
                 {"n_a", ma.abs_errors.size()},
                 {"n_b", mb.abs_errors.size()},
                 {"t", t.t},
                 {"dof", t.dof},
                 {"p_value", t.p_value},
                 {"significant_05", t.significant_05},
                 {"significant_10", t.significant_10}};
    if (!out.empty()) {
        write_json(out, j);
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_active_learn(const std::string& config_path, const std::string& al_path,
                     const std::string& data_dir, const fs::path& out,
                     std::optional<double> target, const Common& common) {
    auto config = load_config(config_path);
    if (common.seed) {
        config.master_seed = *common.seed;
    }
    const auto al = al_path.empty() ? ActiveLearningConfig{}
                                    : active_learning_config_from_json(io::read_text(al_path));
    ScenarioData data;
    if (data_dir.empty()) {
        data = build_scenario(build_world(config, target), config.scenario, config.model.scheme);
    } else {
        data = read_scenario_dir(data_dir, config.model.scheme);
        config.model.input_dim = data.train.front().windows.front().size();
    }
    const auto r = active_learning_run(config, al, data);
    fs::create_directories(out);
    std::string trace = "epoch,labeled,accuracy,abs_error\n";
    for (const auto& s : r.trace) {
        trace += std::to_string(s.epoch) + ',' + std::to_string(s.labeled) + ',' +
                 io::format_double(s.accuracy) + ',' + io::format_double(s.abs_error) + '\n';
    }
    io::write_text(out / "trace.csv", trace);
    write_metrics(out, "metrics", r.metrics, config.model.scheme);
    save_checkpoint(out / "checkpoint.json", {r.params, config.master_seed});
    write_json(out / "summary.json", {{"pool_size", r.pool_size},
                                      {"query_size", r.query_size},
                                      {"query_basis", "original pool"},
                                      {"final_labeled", r.trace.back().labeled},
                                      {"accuracy", r.metrics.accuracy},
                                      {"abs_error_mean", r.metrics.abs_error.mean}});
    std::cout << "labeled " << r.trace.back().labeled << " of " << r.pool_size << ", accuracy "
              << r.metrics.accuracy << '\n';
    return 0;
}

int cmd_calibration_report(const std::vector<std::string>& checkpoints,
                           const std::string& data_path, int bins, std::size_t mc_passes,
                           const fs::path& out, const Common& common) {
    const auto first = load_checkpoint(checkpoints.front());
    const auto& scheme = first.params.config.scheme;
    const auto samples = read_dataset(data_path, scheme);
    std::vector<EvalRecord> records;
    for (const auto& path : checkpoints) {
        const auto ck = load_checkpoint(path);
        const auto preds = predict_dataset(ck.params, samples, method_of(ck.params.config),
                                           mc_passes, common.seed.value_or(ck.seed));
        const auto r = to_records(preds, samples);
        records.insert(records.end(), r.begin(), r.end());
    }
    const auto rb = reliability_bins(records, scheme, bins);
    std::string csv = "bin,lower,upper,count,accuracy,confidence\n";
    json jb = json::array();
    for (std::size_t m = 0; m < rb.size(); ++m) {
        const double lo = static_cast<double>(m) / bins;
        const double hi = static_cast<double>(m + 1) / bins;
        csv += std::to_string(m + 1) + ',' + io::format_double(lo) + ',' + io::format_double(hi) +
               ',' + std::to_string(rb[m].count) + ',' + io::format_double(rb[m].accuracy) + ',' +
               io::format_double(rb[m].confidence) + '\n';
        jb.push_back({{"lower", lo},
                      {"upper", hi},
                      {"count", rb[m].count},
                      {"accuracy", rb[m].accuracy},
                      {"confidence", rb[m].confidence}});
    }
    fs::create_directories(out);
    io::write_text(out / "reliability.csv", csv);
    const json j{{"records", records.size()},
                 {"bins", bins},
                 {"ece", ece(records, scheme, bins)},
                 {"mce", mce(records, scheme, bins)},
                 {"reliability", jb}};
    write_json(out / "calibration.json", j);
    std::cout << "ECE " << j["ece"].get<double>() << ", MCE " << j["mce"].get<double>() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regression under categorical labels with label-uncertainty modelling"};
    app.require_subcommand(1);
    Common common;

    std::string config;
    std::string data;
    std::string out;
    std::optional<double> target;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scenario as CSV files");
    gen->add_option("--config", config, "Experiment config JSON");
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_option("--disagreement", target, "Calibrate the opinion spread to this A1/A2 disagreement rate");
    add_seed(gen, common, "World and label seed");

    auto* train = app.add_subcommand("train", "Train an ensemble and evaluate it on the test set");
    train->add_option("--config", config, "Experiment config JSON");
    train->add_option("--data", data, "Directory from gen-data (generated on the fly when absent)");
    train->add_option("--out", out, "Output directory")->required();
    train->add_option("--disagreement", target, "Calibrate generated data to this disagreement rate");
    add_seed(train, common, "Master seed of the ensemble");

    std::vector<std::string> checkpoints;
    std::size_t mc_passes = 20;
    auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on a dataset CSV");
    eval->add_option("--checkpoint", checkpoints, "Checkpoint file(s); several are averaged")->required();
    eval->add_option("--data", data, "Dataset CSV with both labels")->required();
    eval->add_option("--out", out, "Output directory")->required();
    eval->add_option("--mc-passes", mc_passes, "Stochastic passes for MC-Dropout models");
    add_seed(eval, common, "Seed of MC-Dropout sampling");

    std::string a;
    std::string b;
    auto* compare = app.add_subcommand("compare", "One-tail Welch t-test on two metrics files");
    compare->add_option("a", a, "Metrics JSON of the method expected to be better")->required();
    compare->add_option("b", b, "Metrics JSON of the reference method")->required();
    compare->add_option("--out", out, "Write the report JSON here");
    add_seed(compare, common, "Unused; accepted for uniformity");

    std::string al_config;
    auto* active = app.add_subcommand("active-learn", "Simulated uncertainty-sampling active learning");
    active->add_option("--config", config, "Experiment config JSON");
    active->add_option("--al-config", al_config, "Active-learning config JSON");
    active->add_option("--data", data, "Directory from gen-data (generated on the fly when absent)");
    active->add_option("--out", out, "Output directory")->required();
    active->add_option("--disagreement", target, "Calibrate generated data to this disagreement rate");
    add_seed(active, common, "Seed of the initial subset and training");

    auto* surface = app.add_subcommand("loss-surface", "Write the two-class AGT/SGT loss surface CSV");
    surface->add_option("--out", out, "Output CSV")->required();
    add_seed(surface, common, "Unused; accepted for uniformity");

    int bins = 10;
    auto* calib = app.add_subcommand("calibration-report", "Reliability bins, ECE and MCE");
    calib->add_option("--checkpoint", checkpoints, "Checkpoint file(s); records are pooled")->required();
    calib->add_option("--data", data, "Dataset CSV with both labels")->required();
    calib->add_option("--out", out, "Output directory")->required();
    calib->add_option("--bins", bins, "Number of confidence bins")->check(CLI::PositiveNumber);
    calib->add_option("--mc-passes", mc_passes, "Stochastic passes for MC-Dropout models");
    add_seed(calib, common, "Seed of MC-Dropout sampling");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            return cmd_gen_data(config, out, target, common);
        }
        if (*train) {
            return cmd_train(config, data, out, target, common);
        }
        if (*eval) {
            return cmd_eval(checkpoints, data, mc_passes, out, common);
        }
        if (*compare) {
            return cmd_compare(a, b, out);
        }
        if (*active) {
            return cmd_active_learn(config, al_config, data, out, target, common);
        }
        if (*surface) {
            emit_loss_surface(out);
            return 0;
        }
        if (*calib) {
            return cmd_calibration_report(checkpoints, data, bins, mc_passes, out, common);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
