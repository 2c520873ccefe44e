#pragma once

// Feedforward network with a shared tanh trunk and mean / scale /
// mixture-weight heads, analytic backprop, Adam, and MC-Dropout sampling.
//
// Parameters live in one flat vector so that optimizer state, gradient
// checks and checkpoints all work on a single contiguous buffer.

#include "catreg/interval_likelihood.hpp"
#include "catreg/losses.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace catreg {

enum class Head {
    CdfGaussian,     ///< exact interval probabilities, Gaussian CDF
    CdfLaplace,      ///< exact interval probabilities, Laplace CDF
    PdfProb,         ///< Gaussian NLL on the regression target; density-at-center probs
    Regression,      ///< squared error on the regression target; inverse-distance probs
    Classification,  ///< softmax over categories
};

std::string_view to_string(Head h) noexcept;
Head parse_head(std::string_view s);

struct ModelConfig {
    std::size_t input_dim = 8;
    std::vector<std::size_t> hidden{64, 64};
    Head head = Head::CdfGaussian;
    /// CDF heads only: K components with softmax weights.
    bool mixture = false;
    std::size_t components = 3;
    /// Inverted dropout before every parameterized layer; nonzero for MC-Dropout.
    double dropout = 0.0;
    CategoryScheme scheme;

    bool operator==(const ModelConfig&) const = default;
};

/// Throws invalid_parameter on inconsistent settings.
void validate(const ModelConfig& config);

std::size_t parameter_count(const ModelConfig& config);

struct ModelParams {
    ModelConfig config;
    std::vector<double> values;
};

/// Deterministic in (config, seed). Weights ~ N(0, 1/fan_in), biases zero
/// except the scale head (initial scale 0.2) and mixture means (spread over (0, 1)).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

enum class PassMode {
    Eval,      ///< deterministic, no dropout
    Train,     ///< dropout masks drawn from the generator
    McSample,  ///< dropout kept on at inference for Monte-Carlo sampling
};

/// Single forward pass. `rng` is required whenever dropout is active.
/// Throws invalid_parameter on a dimension mismatch.
PredictiveDistribution forward(std::span<const double> x, const ModelParams& params,
                               PassMode mode = PassMode::Eval, std::mt19937_64* rng = nullptr);

struct WindowPrediction {
    PredictiveDistribution dist;
    std::size_t passes = 0;
};

/// One deterministic pass per window; mean, scale and probabilities are
/// averaged over windows.
WindowPrediction predict_windows(std::span<const std::vector<double>> windows,
                                 const ModelParams& params);

struct McPrediction {
    double mean = 0.0;
    double spread = 0.0;  ///< sample standard deviation of the per-pass means
    std::size_t passes = 0;
};

/// T >= 2 stochastic passes. Throws std::invalid_argument otherwise.
McPrediction mc_dropout_predict(std::span<const double> x, const ModelParams& params,
                                std::size_t passes, std::mt19937_64& rng);

struct TrainingTarget {
    Category a1 = 0;
    std::optional<Category> a2;
    GroundTruthWeights weights;
};

/// `features` must outlive the example.
struct TrainingExample {
    std::span<const double> features;
    TrainingTarget target;
};

/// Regression target of a (possibly dual) label: the weighted category centers.
double regression_target(const TrainingTarget& t, const CategoryScheme& scheme);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> grad;
    LossDiagnostics diagnostics;
};

/// Mean batch loss for the configured head and its exact gradient.
/// Dropout is applied only when `rng` is supplied and the rate is nonzero.
LossAndGradient backward(std::span<const TrainingExample> batch, const ModelParams& params,
                         std::mt19937_64* rng = nullptr);

/// Mean batch loss without dropout.
double batch_loss(std::span<const TrainingExample> batch, const ModelParams& params);

struct GradientCheckOptions {
    std::size_t coordinates = 50;
    double step = 1e-5;
    std::uint64_t seed = 1;
    /// Denominator floor of the relative error.
    double floor = 1e-6;
};

/// Worst |analytic - numeric| / max(|analytic|, |numeric|, floor) over a
/// random subset of coordinates, using central differences.
double gradient_check(const ModelParams& params, std::span<const TrainingExample> batch,
                      const GradientCheckOptions& options = {});

struct AdamHyper {
    double lr = 2.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// Bias-corrected Adam with decoupled weight decay, at learning rate `lr`
/// (the schedule's current value; `hyper.lr` is ignored here).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper, double lr);

/// Multiplies the learning rate by `factor` after every `period` epochs.
class StepDecaySchedule {
public:
    explicit StepDecaySchedule(double initial, double factor = 0.91, int period = 2);

    [[nodiscard]] double lr() const noexcept { return lr_; }
    [[nodiscard]] int epoch() const noexcept { return epoch_; }
    /// Marks the end of an epoch.
    void advance() noexcept;

private:
    double lr_;
    double factor_;
    int period_;
    int epoch_ = 0;
};

struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
};

/// JSON container {format, version, config, seed, params}; doubles are
/// written in shortest round-trip form so loading is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);

}  // namespace catreg
