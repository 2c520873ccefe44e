#pragma once

// Test-set metrics: relaxed dual-label accuracy, absolute error against
// the two-label regression target, calibration errors, confusion matrices
// with uncertain-pair rows, and the one-tail Welch t-test.

#include "catreg/interval_likelihood.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace catreg {

struct EvalRecord {
    double mean = 0.0;
    std::vector<double> probs;
    Category a1 = 0;
    std::optional<Category> a2;
};

/// (y_{a1} + y_{a2}) / 2 with y_c the category center. Throws when a2 is missing.
double two_label_target(const EvalRecord& r, const CategoryScheme& scheme);

/// max_c p_c.
double confidence(const EvalRecord& r);

/// mean in (min(l_{a1}, l_{a2}), max(u_{a1}, u_{a2})].
bool relaxed_hit(const EvalRecord& r, const CategoryScheme& scheme);

/// Fraction of relaxed hits. Throws std::invalid_argument if any a2 is missing.
double relaxed_accuracy(std::span<const EvalRecord> records, const CategoryScheme& scheme);

struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;  ///< population standard deviation
    double median = 0.0;
};

std::vector<double> abs_errors(std::span<const EvalRecord> records, const CategoryScheme& scheme);
ErrorStats summarize(std::span<const double> values);
ErrorStats abs_error_stats(std::span<const EvalRecord> records, const CategoryScheme& scheme);

struct CalibrationBin {
    std::size_t count = 0;
    double accuracy = 0.0;
    double confidence = 0.0;
};

/// Bins ((m-1)/M, m/M] over confidence; m = 1..M. Throws for bins < 1.
std::vector<CalibrationBin> reliability_bins(std::span<const EvalRecord> records,
                                             const CategoryScheme& scheme, int bins);
double ece(std::span<const EvalRecord> records, const CategoryScheme& scheme, int bins = 10);
double mce(std::span<const EvalRecord> records, const CategoryScheme& scheme, int bins = 10);

/// p(c) proportional to 1 / max(|mean - y_c|, 1e-6), normalized.
std::vector<double> regression_confidence(double mean, const CategoryScheme& scheme);

/// Rows: certain labels (a, a) for every category, then each unordered
/// uncertain pair {a, b}, a < b, that occurs in the data. Columns: the
/// category of the predicted mean.
struct ConfusionMatrix {
    std::vector<std::pair<Category, Category>> rows;
    std::vector<std::vector<std::size_t>> counts;

    [[nodiscard]] std::string to_csv(const CategoryScheme& scheme) const;
};

ConfusionMatrix confusion_matrix(std::span<const EvalRecord> records,
                                 const CategoryScheme& scheme);

struct TTestResult {
    double t = 0.0;
    double dof = 0.0;
    double p_value = 0.5;
    bool significant_05 = false;
    bool significant_10 = false;
};

/// Welch's unequal-variance test of H1: mean(a) < mean(b). Both samples
/// need at least two values.
TTestResult ttest_one_tail(std::span<const double> a, std::span<const double> b);

struct SubgroupMetrics {
    std::size_t count = 0;
    double accuracy = 0.0;
    ErrorStats abs_error;
};

struct MetricsReport {
    std::size_t count = 0;
    double accuracy = 0.0;
    ErrorStats abs_error;
    double ece = 0.0;
    double mce = 0.0;
    ConfusionMatrix confusion;
    SubgroupMetrics certain;    ///< a1 == a2
    SubgroupMetrics uncertain;  ///< a1 != a2
    std::vector<double> abs_errors;
};

MetricsReport evaluate(std::span<const EvalRecord> records, const CategoryScheme& scheme,
                       int bins = 10);

}  // namespace catreg
