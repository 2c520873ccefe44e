#pragma once

// Training objectives: heteroscedastic Gaussian NLL, dual-label
// cross-entropy with average/stochastic ground-truth weighting, and the
// two-class toy loss surface contrasting the two weightings.

#include "catreg/interval_likelihood.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace catreg {

/// Smallest probability fed to a logarithm.
inline constexpr double kLogFloor = 1e-12;

enum class GroundTruthMode {
    Average,     ///< AGT: both observed labels weighted by 1/2.
    Stochastic,  ///< SGT: one observed label drawn uniformly, weight 1.
    Single,      ///< only a1 is observed.
};

std::string_view to_string(GroundTruthMode m) noexcept;
GroundTruthMode parse_ground_truth_mode(std::string_view s);

/// Label weights (lambda_1, lambda_2); they sum to one.
struct GroundTruthWeights {
    double first = 1.0;
    double second = 0.0;
};

/// AGT -> (1/2, 1/2). SGT -> (1, 0) or (0, 1) with equal probability, one
/// draw from `rng`. Single -> (1, 0) and consumes no randomness.
GroundTruthWeights ground_truth_weights(GroundTruthMode mode, std::mt19937_64& rng);

struct NllTerms {
    double loss = 0.0;
    double d_mean = 0.0;
    double d_scale = 0.0;
};

/// 1/2 [ (y - mean)^2 / scale^2 + ln scale^2 ], with the constant 1/2 ln 2pi
/// dropped. Throws invalid_parameter for scale <= 0.
double nll_heteroscedastic(double y, double mean, double scale);
NllTerms nll_heteroscedastic_with_grad(double y, double mean, double scale);

/// Batch mean of nll_heteroscedastic, summed left to right.
double nll_heteroscedastic_mean(std::span<const double> y, std::span<const double> mean,
                                std::span<const double> scale);

/// Counts evaluations where a probability was raised to kLogFloor.
struct LossDiagnostics {
    std::size_t evaluations = 0;
    std::size_t clamped_logs = 0;
};

/// -lambda_1 ln p[a1] - lambda_2 ln p[a2]. A missing a2 must carry zero weight.
double xent_dual_label(std::span<const double> probs, Category a1, std::optional<Category> a2,
                       const GroundTruthWeights& w, LossDiagnostics* diag = nullptr);

/// dLoss/dp per category for xent_dual_label; zero where the log was clamped.
std::vector<double> xent_dual_label_grad(std::span<const double> probs, Category a1,
                                         std::optional<Category> a2,
                                         const GroundTruthWeights& w);

/// Two-class toy: red = -ln p, yellow = -ln(1 - p), blue = their mean.
struct SurfacePoint {
    double p_plus = 0.0;
    double red = 0.0;
    double yellow = 0.0;
    double blue = 0.0;
};

/// Throws invalid_parameter unless 0 < p_plus < 1.
SurfacePoint agt_sgt_surface(double p_plus);

/// p_plus in {0.001, ..., 0.999}: 999 points.
std::vector<SurfacePoint> agt_sgt_surface_grid();

/// CSV with header `p_plus,red,yellow,blue`. Throws std::runtime_error on
/// write failure.
void write_loss_surface_csv(const std::filesystem::path& path,
                            std::span<const SurfacePoint> grid);

}  // namespace catreg
