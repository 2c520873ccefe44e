#pragma once

// Per-category probabilities from a predicted (mean, scale) pair: exact
// interval probabilities from CDF differences, the density-at-center
// approximation, and the K-component mixture.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catreg {

using Category = std::size_t;

/// Ordered categories partitioning [0, 1] into contiguous (l_c, u_c] intervals.
class CategoryScheme {
public:
    /// Poor, Fair, Good, Excellent on bounds {0, 0.25, 0.5, 0.75, 1}.
    CategoryScheme();

    /// `edges` has size names.size() + 1, strictly increasing, inside [0, 1].
    CategoryScheme(std::vector<std::string> names, std::vector<double> edges);

    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
    [[nodiscard]] double lower(Category c) const { return edges_.at(c); }
    [[nodiscard]] double upper(Category c) const { return edges_.at(c + 1); }
    [[nodiscard]] double center(Category c) const { return 0.5 * (lower(c) + upper(c)); }
    [[nodiscard]] const std::string& name(Category c) const { return names_.at(c); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<double>& edges() const noexcept { return edges_; }

    /// Category whose (l_c, u_c] contains v; values below/above the support
    /// map to the first/last category.
    [[nodiscard]] Category category_of(double v) const noexcept;

    /// Throws std::invalid_argument for unknown names.
    [[nodiscard]] Category parse(std::string_view name) const;

    bool operator==(const CategoryScheme&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<double> edges_;
};

enum class Family { Gaussian, Laplace };

std::string_view to_string(Family f) noexcept;

/// Scales below this are raised to it before any CDF evaluation.
inline constexpr double kScaleFloor = 1e-4;

struct MixtureComponent {
    double mean = 0.5;
    double scale = 0.1;
    double weight = 1.0;
};

struct PredictiveDistribution {
    double mean = 0.0;
    /// Zero for heads that do not estimate a scale (regression, classification).
    double scale = 0.0;
    Family family = Family::Gaussian;
    std::vector<double> probs;
    std::vector<MixtureComponent> components;
};

/// F(u_c) - F(l_c) per category, unnormalized. Throws invalid_parameter on scale <= 0.
std::vector<double> interval_probs_raw(double mean, double scale, const CategoryScheme& scheme,
                                       Family family);

/// Divides by the total; throws degenerate_distribution when it is zero
/// and invalid_parameter on negative or non-finite entries.
std::vector<double> normalize_probs(std::span<const double> raw);

/// Normalized interval probabilities (CDF-Prob).
std::vector<double> interval_probs(double mean, double scale, const CategoryScheme& scheme,
                                   Family family);

/// Gaussian density at each category center, normalized (PDF-Prob).
std::vector<double> pdf_prob_probs(double mean, double scale, const CategoryScheme& scheme);

/// sum_k weight_k * (F_k(u_c) - F_k(l_c)), normalized. Weights must sum to 1
/// within 1e-9.
std::vector<double> mixture_probs(std::span<const MixtureComponent> components,
                                  const CategoryScheme& scheme, Family family);

struct ProbGradient {
    std::vector<double> d_mean;
    std::vector<double> d_scale;
};

/// Partials of the unnormalized interval probabilities. The scale partial
/// is zero while the scale sits below kScaleFloor.
ProbGradient interval_probs_raw_grad(double mean, double scale, const CategoryScheme& scheme,
                                     Family family);

/// Partials of the normalized interval probabilities.
ProbGradient interval_probs_grad(double mean, double scale, const CategoryScheme& scheme,
                                 Family family);

}  // namespace catreg
