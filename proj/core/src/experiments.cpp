#include "catreg/experiments.hpp"

#include "catreg/errors.hpp"
#include "json_convert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace catreg {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

constexpr std::uint64_t kTrainSalt = 21;
constexpr std::uint64_t kPredictSalt = 31;
constexpr std::uint64_t kPoolSalt = 41;

double initial_lr(const ExperimentConfig& c) {
    return c.method == Method::PdfProb ? c.adam.lr * c.pdf_prob_lr_factor : c.adam.lr;
}

std::vector<LabeledSample> training_set(const ExperimentConfig& config, const ScenarioData& data) {
    std::vector<LabeledSample> out;
    out.reserve(data.train.size() + data.validation.size());
    out.insert(out.end(), data.train.begin(), data.train.end());
    if (config.merge_validation) {
        for (const auto& s : data.validation) {
            out.push_back(training_view(s, config.scenario.scenario));
        }
    }
    return out;
}

SamplePrediction average(std::span<const SamplePrediction> preds) {
    SamplePrediction out = preds.front();
    for (std::size_t i = 1; i < preds.size(); ++i) {
        out.mean += preds[i].mean;
        out.scale += preds[i].scale;
        out.passes += preds[i].passes;
        for (std::size_t c = 0; c < out.probs.size(); ++c) {
            out.probs[c] += preds[i].probs[c];
        }
    }
    const double n = static_cast<double>(preds.size());
    out.mean /= n;
    out.scale /= n;
    for (double& p : out.probs) {
        p /= n;
    }
    return out;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::Regression: return "regression";
        case Method::McDropout: return "mc-dropout";
        case Method::PdfProb: return "pdf-prob";
        case Method::CdfProb: return "cdf-prob";
        case Method::CdfProbLaplace: return "cdf-prob-lap";
        case Method::CdfProbMixture: return "cdf-prob-mixture";
        case Method::CdfProbMixtureLaplace: return "cdf-prob-mixture-lap";
        case Method::Classification: return "classification";
    }
    return "?";
}

Method parse_method(std::string_view s) {
    for (Method m : {Method::Regression, Method::McDropout, Method::PdfProb, Method::CdfProb,
                     Method::CdfProbLaplace, Method::CdfProbMixture, Method::CdfProbMixtureLaplace,
                     Method::Classification}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

ModelConfig model_config_for(Method method, const ModelConfig& base) {
    ModelConfig c = base;
    c.mixture = false;
    c.dropout = 0.0;
    switch (method) {
        case Method::Regression: c.head = Head::Regression; break;
        case Method::McDropout:
            c.head = Head::Regression;
            c.dropout = base.dropout > 0.0 ? base.dropout : 0.1;
            break;
        case Method::PdfProb: c.head = Head::PdfProb; break;
        case Method::CdfProb: c.head = Head::CdfGaussian; break;
        case Method::CdfProbLaplace: c.head = Head::CdfLaplace; break;
        case Method::CdfProbMixture:
            c.head = Head::CdfGaussian;
            c.mixture = true;
            break;
        case Method::CdfProbMixtureLaplace:
            c.head = Head::CdfLaplace;
            c.mixture = true;
            break;
        case Method::Classification: c.head = Head::Classification; break;
    }
    return c;
}

bool is_off_grid(Method method, Scenario scenario) noexcept {
    const bool single_annotation = scenario == Scenario::S1 || scenario == Scenario::S2;
    return single_annotation && (method == Method::CdfProbLaplace || method == Method::PdfProb ||
                                 method == Method::McDropout);
}

GroundTruthMode ground_truth_mode(const ExperimentConfig& config) {
    if (config.ground_truth) {
        return *config.ground_truth;
    }
    switch (config.scenario.scenario) {
        case Scenario::S12Agt: return GroundTruthMode::Average;
        case Scenario::S12Sgt: return GroundTruthMode::Stochastic;
        default: return GroundTruthMode::Single;
    }
}

void validate(const ExperimentConfig& config) {
    validate(model_config_for(config.method, config.model));
    const auto mode = ground_truth_mode(config);
    if (mode != GroundTruthMode::Single && !is_dual_label(config.scenario.scenario)) {
        throw std::invalid_argument(std::string(to_string(mode)) +
                                    " needs a dual-label training set, not " +
                                    std::string(to_string(config.scenario.scenario)));
    }
    if (config.epochs < 1 || config.batch_size < 1 || config.ensemble < 1) {
        throw std::invalid_argument("epochs, batch size and ensemble size must be positive");
    }
    if (config.method == Method::McDropout && config.mc_passes < 2) {
        throw std::invalid_argument("MC-Dropout needs at least two passes");
    }
}

LabeledSample training_view(const LabeledSample& sample, Scenario scenario) {
    LabeledSample s = sample;
    s.true_quality.reset();
    s.true_spread.reset();
    switch (scenario) {
        case Scenario::S1:
        case Scenario::S1Ex: s.a2.reset(); break;
        case Scenario::S2:
            if (s.a2) {
                s.a1 = *s.a2;
                s.a2.reset();
            }
            break;
        case Scenario::S12Agt:
        case Scenario::S12Sgt: break;
    }
    return s;
}

Trainer::Trainer(const ExperimentConfig& config, std::uint64_t seed)
    : config_(config),
      mode_(ground_truth_mode(config)),
      params_(init_params(model_config_for(config.method, config.model), seed)),
      schedule_(initial_lr(config), config.lr_decay, config.lr_decay_period),
      rng_(stream(seed, kTrainSalt)) {
    validate(config_);
}

double Trainer::run_epoch(std::span<const LabeledSample> samples) {
    if (samples.empty()) {
        throw insufficient_data("cannot train on an empty set");
    }
    std::vector<TrainingExample> examples;
    for (const auto& s : samples) {
        TrainingTarget t;
        t.a1 = s.a1;
        if (s.a2 && mode_ != GroundTruthMode::Single) {
            t.a2 = s.a2;
            t.weights = ground_truth_weights(mode_, rng_);
        }
        for (const auto& w : s.windows) {
            examples.push_back({w, t});
        }
    }
    std::shuffle(examples.begin(), examples.end(), rng_);

    const bool dropout = params_.config.dropout > 0.0;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < examples.size(); start += config_.batch_size) {
        const std::size_t n = std::min(config_.batch_size, examples.size() - start);
        auto lg = backward(std::span(examples).subspan(start, n), params_,
                           dropout ? &rng_ : nullptr);
        adam_step(params_.values, lg.grad, adam_, config_.adam, schedule_.lr());
        loss_sum += lg.loss;
        ++batches;
        diagnostics_.evaluations += lg.diagnostics.evaluations;
        diagnostics_.clamped_logs += lg.diagnostics.clamped_logs;
    }
    schedule_.advance();
    return loss_sum / static_cast<double>(batches);
}

ModelParams train_model(const ExperimentConfig& config, std::span<const LabeledSample> train,
                        std::uint64_t seed) {
    Trainer trainer(config, seed);
    for (int e = 0; e < config.epochs; ++e) {
        trainer.run_epoch(train);
    }
    return trainer.params();
}

SamplePrediction predict_sample(const ModelParams& params, const LabeledSample& sample,
                                Method method, std::size_t mc_passes, std::mt19937_64& rng) {
    SamplePrediction out;
    if (method == Method::McDropout) {
        double mean = 0.0;
        for (const auto& w : sample.windows) {
            const auto mc = mc_dropout_predict(w, params, mc_passes, rng);
            mean += mc.mean;
            out.passes += mc.passes;
        }
        out.mean = mean / static_cast<double>(sample.windows.size());
        out.probs = regression_confidence(out.mean, params.config.scheme);
        return out;
    }
    const auto wp = predict_windows(sample.windows, params);
    out.mean = wp.dist.mean;
    out.scale = wp.dist.scale;
    out.probs = wp.dist.probs;
    out.passes = wp.passes;
    return out;
}

std::vector<SamplePrediction> predict_dataset(const ModelParams& params,
                                              std::span<const LabeledSample> samples,
                                              Method method, std::size_t mc_passes,
                                              std::uint64_t seed) {
    auto rng = stream(seed, kPredictSalt);
    std::vector<SamplePrediction> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(predict_sample(params, s, method, mc_passes, rng));
    }
    return out;
}

std::vector<EvalRecord> to_records(std::span<const SamplePrediction> predictions,
                                   std::span<const LabeledSample> samples) {
    if (predictions.size() != samples.size()) {
        throw std::invalid_argument("prediction and sample counts differ");
    }
    std::vector<EvalRecord> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out[i] = {predictions[i].mean, predictions[i].probs, samples[i].a1, samples[i].a2};
    }
    return out;
}

std::vector<double> ExperimentResult::pooled_abs_errors() const {
    std::vector<double> out;
    for (const auto& m : members) {
        out.insert(out.end(), m.metrics.abs_errors.begin(), m.metrics.abs_errors.end());
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ScenarioData& data) {
    validate(config);
    if (data.test.empty()) {
        throw insufficient_data("experiment needs a test set");
    }
    const auto train = training_set(config, data);
    const auto& scheme = config.model.scheme;

    ExperimentResult result;
    result.off_grid = is_off_grid(config.method, config.scenario.scenario);
    for (std::size_t i = 0; i < config.ensemble; ++i) {
        MemberResult m;
        m.seed = config.master_seed + i;
        m.params = train_model(config, train, m.seed);
        m.predictions = predict_dataset(m.params, data.test, config.method, config.mc_passes, m.seed);
        m.metrics = evaluate(to_records(m.predictions, data.test), scheme);
        result.members.push_back(std::move(m));
    }
    result.ensemble_predictions.resize(data.test.size());
    std::vector<SamplePrediction> column(config.ensemble);
    for (std::size_t j = 0; j < data.test.size(); ++j) {
        for (std::size_t i = 0; i < config.ensemble; ++i) {
            column[i] = result.members[i].predictions[j];
        }
        result.ensemble_predictions[j] = average(column);
    }
    result.ensemble = evaluate(to_records(result.ensemble_predictions, data.test), scheme);
    return result;
}

void validate(const ActiveLearningConfig& al, int epochs) {
    auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!open_unit(al.initial_fraction) || !open_unit(al.terminal_budget) ||
        !(al.query_fraction >= 0.0 && al.query_fraction < 1.0)) {
        throw std::invalid_argument("active-learning fractions must lie in (0, 1)");
    }
    if (al.initial_fraction > al.terminal_budget) {
        throw std::invalid_argument("initial fraction exceeds the terminal budget");
    }
    if (al.warmup_epochs < 0 || al.warmup_epochs >= epochs || al.query_period < 1) {
        throw std::invalid_argument("warmup must be shorter than training and period positive");
    }
}

namespace {

std::size_t fraction_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

std::vector<std::size_t> active_learning_schedule(std::size_t pool_size, int epochs,
                                                  const ActiveLearningConfig& al) {
    validate(al, epochs);
    const std::size_t initial = fraction_count(al.initial_fraction, pool_size);
    const std::size_t query = fraction_count(al.query_fraction, pool_size);
    const std::size_t budget = std::min(fraction_count(al.terminal_budget, pool_size), pool_size);
    std::vector<std::size_t> out;
    for (int e = 1; e <= epochs; ++e) {
        const std::size_t queries =
            e <= al.warmup_epochs
                ? 0
                : static_cast<std::size_t>((e - al.warmup_epochs - 1) / al.query_period + 1);
        out.push_back(std::min(budget, initial + queries * query));
    }
    return out;
}

std::vector<std::size_t> initial_labeled_indices(std::size_t pool_size,
                                                 const ActiveLearningConfig& al,
                                                 std::uint64_t seed) {
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = stream(seed, kPoolSalt);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(fraction_count(al.initial_fraction, pool_size));
    std::sort(idx.begin(), idx.end());
    return idx;
}

ActiveLearningResult active_learning_run(const ExperimentConfig& config,
                                         const ActiveLearningConfig& al,
                                         const ScenarioData& data) {
    validate(config);
    validate(al, config.epochs);
    if (is_dual_label(config.scenario.scenario)) {
        throw std::invalid_argument("active learning draws from a single-label pool");
    }
    const auto pool = training_set(config, data);
    if (pool.empty() || data.test.empty()) {
        throw insufficient_data("active learning needs a pool and a test set");
    }
    const std::size_t budget = std::min(fraction_count(al.terminal_budget, pool.size()), pool.size());
    const std::size_t query = fraction_count(al.query_fraction, pool.size());

    ActiveLearningResult result;
    result.pool_size = pool.size();
    result.query_size = query;

    std::vector<bool> labeled(pool.size(), false);
    std::vector<LabeledSample> train;
    for (std::size_t i : initial_labeled_indices(pool.size(), al, config.master_seed)) {
        labeled[i] = true;
        train.push_back(pool[i]);
    }

    Trainer trainer(config, config.master_seed);
    auto eval_rng = stream(config.master_seed, kPredictSalt);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const bool query_epoch =
            epoch > al.warmup_epochs && (epoch - al.warmup_epochs - 1) % al.query_period == 0;
        if (query_epoch && query > 0 && train.size() < budget) {
            // Rank the unlabeled remainder by confidence, lowest first.
            std::vector<std::pair<double, std::size_t>> ranked;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (!labeled[i]) {
                    const auto p = predict_sample(trainer.params(), pool[i], config.method,
                                                  config.mc_passes, eval_rng);
                    ranked.emplace_back(*std::max_element(p.probs.begin(), p.probs.end()), i);
                }
            }
            std::sort(ranked.begin(), ranked.end());
            const std::size_t take = std::min({query, budget - train.size(), ranked.size()});
            if (take < query && train.size() + take < budget) {
                throw insufficient_data("pool exhausted before the terminal budget");
            }
            for (std::size_t k = 0; k < take; ++k) {
                labeled[ranked[k].second] = true;
                train.push_back(pool[ranked[k].second]);
            }
        }
        trainer.run_epoch(train);

        const auto preds = predict_dataset(trainer.params(), data.test, config.method,
                                           config.mc_passes, config.master_seed);
        const auto records = to_records(preds, data.test);
        ActiveLearningStep step;
        step.epoch = epoch;
        step.labeled = train.size();
        step.accuracy = relaxed_accuracy(records, config.model.scheme);
        step.abs_error = abs_error_stats(records, config.model.scheme).mean;
        result.trace.push_back(step);
    }
    result.params = trainer.params();
    result.metrics = evaluate(to_records(predict_dataset(result.params, data.test, config.method,
                                                         config.mc_passes, config.master_seed),
                                         data.test),
                              config.model.scheme);
    return result;
}

void emit_loss_surface(const std::filesystem::path& path) {
    const auto grid = agt_sgt_surface_grid();
    write_loss_surface_csv(path, grid);
}

namespace {

nlohmann::json stats_json(const ErrorStats& s) {
    return {{"mean", s.mean}, {"std", s.stddev}, {"median", s.median}};
}

ErrorStats stats_from(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("median").get<double>()};
}

nlohmann::json subgroup_json(const SubgroupMetrics& s) {
    return {{"count", s.count}, {"accuracy", s.accuracy}, {"abs_error", stats_json(s.abs_error)}};
}

SubgroupMetrics subgroup_from(const nlohmann::json& j) {
    return {j.at("count").get<std::size_t>(), j.at("accuracy").get<double>(),
            stats_from(j.at("abs_error"))};
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r, const CategoryScheme& scheme) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < r.confusion.rows.size(); ++i) {
        const auto [a, b] = r.confusion.rows[i];
        rows.push_back({{"label", a == b ? scheme.name(a) : scheme.name(a) + "|" + scheme.name(b)},
                        {"labels", {a, b}},
                        {"counts", r.confusion.counts[i]}});
    }
    nlohmann::json j{{"count", r.count},
                     {"accuracy", r.accuracy},
                     {"abs_error", stats_json(r.abs_error)},
                     {"ece", r.ece},
                     {"mce", r.mce},
                     {"certain", subgroup_json(r.certain)},
                     {"uncertain", subgroup_json(r.uncertain)},
                     {"confusion", {{"columns", scheme.names()}, {"rows", rows}}},
                     {"abs_errors", r.abs_errors}};
    return j.dump(2) + '\n';
}

MetricsReport metrics_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.count = j.at("count").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.abs_error = stats_from(j.at("abs_error"));
    r.ece = j.at("ece").get<double>();
    r.mce = j.at("mce").get<double>();
    r.certain = subgroup_from(j.at("certain"));
    r.uncertain = subgroup_from(j.at("uncertain"));
    for (const auto& row : j.at("confusion").at("rows")) {
        const auto labels = row.at("labels").get<std::vector<std::size_t>>();
        r.confusion.rows.emplace_back(labels.at(0), labels.at(1));
        r.confusion.counts.push_back(row.at("counts").get<std::vector<std::size_t>>());
    }
    r.abs_errors = j.at("abs_errors").get<std::vector<double>>();
    return r;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    const auto& s = c.scenario;
    const auto& w = c.world;
    nlohmann::json j{
        {"scenario",
         {{"scenario", std::string(to_string(s.scenario))},
          {"core_size", s.core_size},
          {"extended_size", s.extended_size},
          {"train_ratio", s.train_ratio},
          {"validation_ratio", s.validation_ratio},
          {"test_ratio", s.test_ratio},
          {"seed", s.seed}}},
        {"world",
         {{"size", w.size},
          {"dim", w.dim},
          {"sigma_min", w.sigma_min},
          {"sigma_max", w.sigma_max},
          {"sigma_scale", w.sigma_scale},
          {"quality_gain", w.quality_gain},
          {"quality_bias", w.quality_bias},
          {"spread_gain", w.spread_gain},
          {"windows", w.windows},
          {"window_jitter", w.window_jitter},
          {"task_seed", w.task_seed}}},
        {"model", c.model},
        {"method", std::string(to_string(c.method))},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"adam",
         {{"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay}}},
        {"lr_decay", c.lr_decay},
        {"lr_decay_period", c.lr_decay_period},
        {"pdf_prob_lr_factor", c.pdf_prob_lr_factor},
        {"master_seed", c.master_seed},
        {"ensemble", c.ensemble},
        {"mc_passes", c.mc_passes},
        {"merge_validation", c.merge_validation}};
    if (c.ground_truth) {
        j["ground_truth"] = std::string(to_string(*c.ground_truth));
    }
    return j.dump(2) + '\n';
}

ExperimentConfig experiment_config_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentConfig c;
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        auto& o = c.scenario;
        if (s.contains("scenario")) o.scenario = parse_scenario(s.at("scenario").get<std::string>());
        o.core_size = s.value("core_size", o.core_size);
        o.extended_size = s.value("extended_size", o.extended_size);
        o.train_ratio = s.value("train_ratio", o.train_ratio);
        o.validation_ratio = s.value("validation_ratio", o.validation_ratio);
        o.test_ratio = s.value("test_ratio", o.test_ratio);
        o.seed = s.value("seed", o.seed);
    }
    if (j.contains("world")) {
        const auto& w = j.at("world");
        auto& o = c.world;
        o.size = w.value("size", o.size);
        o.dim = w.value("dim", o.dim);
        o.sigma_min = w.value("sigma_min", o.sigma_min);
        o.sigma_max = w.value("sigma_max", o.sigma_max);
        o.sigma_scale = w.value("sigma_scale", o.sigma_scale);
        o.quality_gain = w.value("quality_gain", o.quality_gain);
        o.quality_bias = w.value("quality_bias", o.quality_bias);
        o.spread_gain = w.value("spread_gain", o.spread_gain);
        o.windows = w.value("windows", o.windows);
        o.window_jitter = w.value("window_jitter", o.window_jitter);
        o.task_seed = w.value("task_seed", o.task_seed);
    }
    if (j.contains("model")) {
        c.model = j.at("model").get<ModelConfig>();
    }
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("ground_truth")) {
        c.ground_truth = parse_ground_truth_mode(j.at("ground_truth").get<std::string>());
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        c.adam.lr = a.value("lr", c.adam.lr);
        c.adam.beta1 = a.value("beta1", c.adam.beta1);
        c.adam.beta2 = a.value("beta2", c.adam.beta2);
        c.adam.eps = a.value("eps", c.adam.eps);
        c.adam.weight_decay = a.value("weight_decay", c.adam.weight_decay);
    }
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.lr_decay_period = j.value("lr_decay_period", c.lr_decay_period);
    c.pdf_prob_lr_factor = j.value("pdf_prob_lr_factor", c.pdf_prob_lr_factor);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.ensemble = j.value("ensemble", c.ensemble);
    c.mc_passes = j.value("mc_passes", c.mc_passes);
    c.merge_validation = j.value("merge_validation", c.merge_validation);
    return c;
}

std::string active_learning_config_to_json(const ActiveLearningConfig& al) {
    const nlohmann::json j{{"initial_fraction", al.initial_fraction},
                           {"warmup_epochs", al.warmup_epochs},
                           {"query_period", al.query_period},
                           {"query_fraction", al.query_fraction},
                           {"terminal_budget", al.terminal_budget}};
    return j.dump(2) + '\n';
}

ActiveLearningConfig active_learning_config_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    ActiveLearningConfig al;
    al.initial_fraction = j.value("initial_fraction", al.initial_fraction);
    al.warmup_epochs = j.value("warmup_epochs", al.warmup_epochs);
    al.query_period = j.value("query_period", al.query_period);
    al.query_fraction = j.value("query_fraction", al.query_fraction);
    al.terminal_budget = j.value("terminal_budget", al.terminal_budget);
    return al;
}

}  // namespace catreg
