#pragma once

// Experiment orchestration: training scenarios crossed with method heads,
// seed ensembles, the simulated active-learning loop and the toy loss
// surface export.

#include "catreg/evaluation.hpp"
#include "catreg/losses.hpp"
#include "catreg/model.hpp"
#include "catreg/synth_data.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catreg {

enum class Method {
    Regression,
    McDropout,
    PdfProb,
    CdfProb,
    CdfProbLaplace,
    CdfProbMixture,
    CdfProbMixtureLaplace,
    Classification,
};

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view s);

/// Head, mixture flag and dropout rate implied by a method; other fields of
/// `base` (sizes, K, scheme) are kept. MC-Dropout uses rate 0.1 unless
/// `base.dropout` is already positive.
ModelConfig model_config_for(Method method, const ModelConfig& base);

/// Cells the reference comparison leaves undefined (Laplace / PDF-Prob /
/// MC-Dropout on single-annotation scenarios S1 and S2).
bool is_off_grid(Method method, Scenario scenario) noexcept;

struct ExperimentConfig {
    ScenarioSpec scenario;
    WorldConfig world;
    ModelConfig model;
    Method method = Method::CdfProb;
    /// Derived from the scenario when unset (AGT for S12_AGT, SGT for S12_SGT,
    /// single otherwise).
    std::optional<GroundTruthMode> ground_truth;
    int epochs = 100;
    std::size_t batch_size = 32;
    AdamHyper adam;
    double lr_decay = 0.91;
    int lr_decay_period = 2;
    /// PDF-Prob trains at lr * this factor.
    double pdf_prob_lr_factor = 0.1;
    std::uint64_t master_seed = 0;
    std::size_t ensemble = 5;
    std::size_t mc_passes = 20;
    /// Fold validation into training for final runs.
    bool merge_validation = true;
};

GroundTruthMode ground_truth_mode(const ExperimentConfig& config);

/// Throws std::invalid_argument for inconsistent settings (e.g. SGT on S1).
void validate(const ExperimentConfig& config);

/// Training-facing copy of a sample under a scenario's label policy.
LabeledSample training_view(const LabeledSample& sample, Scenario scenario);

/// Runs epochs of minibatch Adam over a training set. Shuffling, dropout
/// and SGT draws all come from one generator seeded at construction.
class Trainer {
public:
    Trainer(const ExperimentConfig& config, std::uint64_t seed);

    /// Trains one epoch over `samples` (already in training view).
    /// Returns the mean minibatch loss.
    double run_epoch(std::span<const LabeledSample> samples);

    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] double learning_rate() const noexcept { return schedule_.lr(); }
    [[nodiscard]] int epochs_done() const noexcept { return schedule_.epoch(); }
    [[nodiscard]] const LossDiagnostics& diagnostics() const noexcept { return diagnostics_; }

private:
    ExperimentConfig config_;
    GroundTruthMode mode_;
    ModelParams params_;
    AdamState adam_;
    StepDecaySchedule schedule_;
    std::mt19937_64 rng_;
    LossDiagnostics diagnostics_;
};

/// Trains `config.epochs` epochs of a fresh model seeded with `seed`.
ModelParams train_model(const ExperimentConfig& config, std::span<const LabeledSample> train,
                        std::uint64_t seed);

struct SamplePrediction {
    double mean = 0.0;
    double scale = 0.0;
    std::vector<double> probs;
    std::size_t passes = 0;  ///< forward passes spent on this sample
};

/// Deterministic single pass per window for every method except MC-Dropout,
/// which spends `mc_passes` stochastic passes per window.
SamplePrediction predict_sample(const ModelParams& params, const LabeledSample& sample,
                                Method method, std::size_t mc_passes, std::mt19937_64& rng);

std::vector<SamplePrediction> predict_dataset(const ModelParams& params,
                                              std::span<const LabeledSample> samples,
                                              Method method, std::size_t mc_passes,
                                              std::uint64_t seed);

std::vector<EvalRecord> to_records(std::span<const SamplePrediction> predictions,
                                   std::span<const LabeledSample> samples);

struct MemberResult {
    std::uint64_t seed = 0;
    ModelParams params;
    std::vector<SamplePrediction> predictions;
    MetricsReport metrics;
};

struct ExperimentResult {
    std::vector<MemberResult> members;
    std::vector<SamplePrediction> ensemble_predictions;  ///< member mean and probs averaged
    MetricsReport ensemble;
    bool off_grid = false;

    /// Per-sample absolute errors of every member, concatenated in seed order.
    [[nodiscard]] std::vector<double> pooled_abs_errors() const;
};

/// Trains `config.ensemble` members with seeds master_seed + i and
/// evaluates each and their average on the test set.
ExperimentResult run_experiment(const ExperimentConfig& config, const ScenarioData& data);

struct ActiveLearningConfig {
    double initial_fraction = 0.25;
    int warmup_epochs = 50;
    int query_period = 2;
    double query_fraction = 0.015;
    double terminal_budget = 0.5;
};

void validate(const ActiveLearningConfig& al, int epochs);

struct ActiveLearningStep {
    int epoch = 0;  ///< 1-based
    std::size_t labeled = 0;
    double accuracy = 0.0;
    double abs_error = 0.0;
};

/// Closed-form labeled counts per epoch (1..epochs): round(initial * N)
/// until the warmup ends, then round(query * N) more at epochs
/// warmup + 1, warmup + 1 + period, ..., capped at round(budget * N).
std::vector<std::size_t> active_learning_schedule(std::size_t pool_size, int epochs,
                                                  const ActiveLearningConfig& al);

/// Indices of the initially labeled items, drawn from `seed`.
std::vector<std::size_t> initial_labeled_indices(std::size_t pool_size,
                                                 const ActiveLearningConfig& al,
                                                 std::uint64_t seed);

struct ActiveLearningResult {
    MetricsReport metrics;
    std::vector<ActiveLearningStep> trace;
    std::size_t pool_size = 0;
    std::size_t query_size = 0;
    ModelParams params;
};

/// Uncertainty sampling over the (single-label) training pool: the lowest
/// confidence items are acquired each query epoch. Uses seed master_seed.
ActiveLearningResult active_learning_run(const ExperimentConfig& config,
                                         const ActiveLearningConfig& al,
                                         const ScenarioData& data);

/// Writes the two-class AGT/SGT loss surface CSV.
void emit_loss_surface(const std::filesystem::path& path);

std::string metrics_to_json(const MetricsReport& report, const CategoryScheme& scheme);
MetricsReport metrics_from_json(std::string_view text);

std::string experiment_config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(std::string_view text);

std::string active_learning_config_to_json(const ActiveLearningConfig& al);
ActiveLearningConfig active_learning_config_from_json(std::string_view text);

}  // namespace catreg
