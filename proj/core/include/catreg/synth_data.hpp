#pragma once

// Synthetic intra-observer-variability testbed. Each item has a hidden
// quality y(x) and opinion spread sigma(x); an annotator's label is the
// category containing one draw of N(y, sigma^2), clipped to (0, 1].

#include "catreg/interval_likelihood.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catreg {

struct WorldConfig {
    std::size_t size = 10000;
    std::size_t dim = 8;
    /// Opinion spread before the global scale is applied.
    double sigma_min = 0.03;
    double sigma_max = 0.3;
    /// Global multiplier on the spread; calibrate_disagreement chooses it.
    double sigma_scale = 1.0;
    /// Norm of the quality direction; y = logistic(w.x + b).
    double quality_gain = 1.6;
    double quality_bias = 0.3;
    double spread_gain = 2.0;
    /// Feature windows per item and their jitter around the item's features.
    std::size_t windows = 1;
    double window_jitter = 0.0;
    /// Seeds the generator weights w, v (the "task"); features use the world seed.
    std::uint64_t task_seed = 7;
};

struct WorldItem {
    std::vector<double> features;
    std::vector<std::vector<double>> windows;
    double quality = 0.5;  ///< y
    double spread = 0.1;   ///< sigma
};

/// Deterministic in (config, seed). Throws invalid_parameter for dim or size 0.
std::vector<WorldItem> make_world(const WorldConfig& config, std::uint64_t seed);

/// Label an annotator would assign: the category containing
/// clip(z, 1e-9, 1) for z ~ N(quality, spread^2).
Category sample_label(const WorldItem& item, const CategoryScheme& scheme, std::mt19937_64& rng);

/// Exact category distribution of sample_label: interval probabilities
/// with the out-of-range tails folded into the boundary categories.
std::vector<double> clipped_label_probs(double quality, double spread,
                                        const CategoryScheme& scheme);

/// 1 - sum_c p_c^2: chance that two independent labels disagree.
double disagreement_probability(std::span<const double> probs);

/// Mean disagreement probability over the world.
double expected_disagreement(std::span<const WorldItem> world, const CategoryScheme& scheme);

struct DisagreementCalibration {
    double sigma_scale = 1.0;
    double sigma_min = 0.0;  ///< effective bounds after scaling
    double sigma_max = 0.0;
    double expected = 0.0;   ///< closed-form disagreement at sigma_scale
};

/// Bisection on WorldConfig::sigma_scale within [1e-6, 50] until the
/// expected disagreement over make_world(config, seed) is within `tolerance`
/// of `target`. Throws insufficient_data if the target is unreachable.
DisagreementCalibration calibrate_disagreement(double target, const WorldConfig& config,
                                               std::uint64_t seed,
                                               const CategoryScheme& scheme = {},
                                               double tolerance = 0.005);

struct LabeledSample {
    std::size_t id = 0;
    std::vector<std::vector<double>> windows;
    Category a1 = 0;
    std::optional<Category> a2;
    /// Evaluation only; never exported to training files.
    std::optional<double> true_quality;
    std::optional<double> true_spread;
};

enum class Scenario { S1, S2, S12Agt, S12Sgt, S1Ex };

std::string_view to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view s);
bool is_dual_label(Scenario s) noexcept;

struct ScenarioSpec {
    Scenario scenario = Scenario::S12Agt;
    std::size_t core_size = 5000;
    std::size_t extended_size = 9000;  ///< used by S1Ex only
    double train_ratio = 0.6;
    double validation_ratio = 0.2;
    double test_ratio = 0.2;
    std::uint64_t seed = 0;
};

struct ScenarioData {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> validation;
    std::vector<LabeledSample> test;
};

/// Labels every core item twice and splits by id. Validation and test keep
/// both labels. Training keeps a1 (S1), a2 moved into the a1 slot (S2), or
/// both (S12*); S1Ex appends `extended_size` single-label items taken after
/// the core items. Validation and test sizes are floor(ratio * core); the
/// remainder goes to training. Throws insufficient_data if the world is too
/// small.
ScenarioData build_scenario(std::span<const WorldItem> world, const ScenarioSpec& spec,
                            const CategoryScheme& scheme = {});

enum class CsvColumns {
    Training,    ///< id, window, features, a1, a2
    Evaluation,  ///< adds true_y, true_sigma
};

/// One row per (sample, window). Header:
/// id,window,feat_0..feat_{d-1},a1,a2[,true_y,true_sigma].
std::string dataset_to_csv(std::span<const LabeledSample> samples, const CategoryScheme& scheme,
                           CsvColumns columns);
std::vector<LabeledSample> dataset_from_csv(std::string_view text, const CategoryScheme& scheme);

void write_dataset(const std::filesystem::path& path, std::span<const LabeledSample> samples,
                   const CategoryScheme& scheme, CsvColumns columns);
std::vector<LabeledSample> read_dataset(const std::filesystem::path& path,
                                        const CategoryScheme& scheme = {});

}  // namespace catreg
