#include "catreg/evaluation.hpp"

#include "catreg/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace catreg {

namespace {

Category second_label(const EvalRecord& r) {
    if (!r.a2) {
        throw std::invalid_argument("evaluation record is missing its second label");
    }
    return *r.a2;
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double two_label_target(const EvalRecord& r, const CategoryScheme& scheme) {
    return 0.5 * (scheme.center(r.a1) + scheme.center(second_label(r)));
}

double confidence(const EvalRecord& r) {
    if (r.probs.empty()) {
        throw std::invalid_argument("evaluation record has no probabilities");
    }
    return *std::max_element(r.probs.begin(), r.probs.end());
}

bool relaxed_hit(const EvalRecord& r, const CategoryScheme& scheme) {
    const Category b = r.a2.value_or(r.a1);
    const double lo = std::min(scheme.lower(r.a1), scheme.lower(b));
    const double hi = std::max(scheme.upper(r.a1), scheme.upper(b));
    return r.mean > lo && r.mean <= hi;
}

double relaxed_accuracy(std::span<const EvalRecord> records, const CategoryScheme& scheme) {
    if (records.empty()) {
        throw std::invalid_argument("relaxed accuracy of an empty set");
    }
    std::size_t hits = 0;
    for (const auto& r : records) {
        second_label(r);
        hits += relaxed_hit(r, scheme) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::vector<double> abs_errors(std::span<const EvalRecord> records, const CategoryScheme& scheme) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(std::abs(two_label_target(r, scheme) - r.mean));
    }
    return out;
}

ErrorStats summarize(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("statistics of an empty set");
    }
    ErrorStats s;
    s.mean = mean_of(values);
    const double n0 = static_cast<double>(values.size());
    double sd = 0.0;
    double ss = 0.0;
    for (double v : values) {
        const double d = v - values.front();
        sd += d;
        ss += d * d;
    }
    s.stddev = std::sqrt(std::max(0.0, (ss - sd * sd / n0) / n0));
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

ErrorStats abs_error_stats(std::span<const EvalRecord> records, const CategoryScheme& scheme) {
    return summarize(abs_errors(records, scheme));
}

std::vector<CalibrationBin> reliability_bins(std::span<const EvalRecord> records,
                                             const CategoryScheme& scheme, int bins) {
    if (bins < 1) {
        throw std::invalid_argument("calibration needs at least one bin");
    }
    std::vector<CalibrationBin> out(static_cast<std::size_t>(bins));
    std::vector<double> hit_sum(out.size(), 0.0);
    std::vector<double> conf_sum(out.size(), 0.0);
    for (const auto& r : records) {
        const double conf = confidence(r);
        // Smallest m with conf <= m / M; compared directly to avoid
        // ceil(conf * M) rounding 0.3 into the wrong bin.
        int m = 1;
        while (m < bins && conf > static_cast<double>(m) / bins) {
            ++m;
        }
        const auto i = static_cast<std::size_t>(m - 1);
        ++out[i].count;
        hit_sum[i] += relaxed_hit(r, scheme) ? 1.0 : 0.0;
        conf_sum[i] += conf;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].count > 0) {
            out[i].accuracy = hit_sum[i] / static_cast<double>(out[i].count);
            out[i].confidence = conf_sum[i] / static_cast<double>(out[i].count);
        }
    }
    return out;
}

double ece(std::span<const EvalRecord> records, const CategoryScheme& scheme, int bins) {
    const auto table = reliability_bins(records, scheme, bins);
    if (records.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& b : table) {
        total += static_cast<double>(b.count) / static_cast<double>(records.size()) *
                 std::abs(b.accuracy - b.confidence);
    }
    return total;
}

double mce(std::span<const EvalRecord> records, const CategoryScheme& scheme, int bins) {
    double worst = 0.0;
    for (const auto& b : reliability_bins(records, scheme, bins)) {
        if (b.count > 0) {
            worst = std::max(worst, std::abs(b.accuracy - b.confidence));
        }
    }
    return worst;
}

std::vector<double> regression_confidence(double mean, const CategoryScheme& scheme) {
    constexpr double kMinDistance = 1e-6;
    std::vector<double> w(scheme.size());
    for (Category c = 0; c < w.size(); ++c) {
        w[c] = 1.0 / std::max(std::abs(mean - scheme.center(c)), kMinDistance);
    }
    return normalize_probs(w);
}

std::string ConfusionMatrix::to_csv(const CategoryScheme& scheme) const {
    std::string out = "label";
    for (const auto& name : scheme.names()) {
        out += ',' + name;
    }
    out += '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [a, b] = rows[i];
        out += a == b ? scheme.name(a) : scheme.name(a) + '|' + scheme.name(b);
        for (std::size_t n : counts[i]) {
            out += ',' + std::to_string(n);
        }
        out += '\n';
    }
    return out;
}

ConfusionMatrix confusion_matrix(std::span<const EvalRecord> records,
                                 const CategoryScheme& scheme) {
    std::map<std::pair<Category, Category>, std::vector<std::size_t>> uncertain;
    ConfusionMatrix m;
    for (Category c = 0; c < scheme.size(); ++c) {
        m.rows.emplace_back(c, c);
    }
    m.counts.assign(scheme.size(), std::vector<std::size_t>(scheme.size(), 0));
    for (const auto& r : records) {
        const Category b = second_label(r);
        const Category predicted = scheme.category_of(r.mean);
        if (r.a1 == b) {
            ++m.counts[r.a1][predicted];
        } else {
            auto& row = uncertain[{std::min(r.a1, b), std::max(r.a1, b)}];
            row.resize(scheme.size(), 0);
            ++row[predicted];
        }
    }
    for (auto& [pair, row] : uncertain) {
        m.rows.push_back(pair);
        m.counts.push_back(std::move(row));
    }
    return m;
}

TTestResult ttest_one_tail(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("t-test needs at least two values per sample");
    }
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = sample_variance(a, ma) / static_cast<double>(a.size());
    const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
    const double se2 = va + vb;

    TTestResult r;
    if (!(se2 > 0.0)) {
        // Both samples constant: the null holds exactly when the means agree.
        if (ma == mb) {
            r.t = 0.0;
            r.p_value = 0.5;
        } else {
            r.t = ma < mb ? -std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::infinity();
            r.p_value = ma < mb ? 0.0 : 1.0;
        }
        r.dof = static_cast<double>(a.size() + b.size() - 2);
    } else {
        r.t = (ma - mb) / std::sqrt(se2);
        r.dof = se2 * se2 /
                (va * va / static_cast<double>(a.size() - 1) +
                 vb * vb / static_cast<double>(b.size() - 1));
        const boost::math::students_t dist(r.dof);
        r.p_value = boost::math::cdf(dist, r.t);
    }
    r.significant_05 = r.p_value < 0.05;
    r.significant_10 = r.p_value < 0.10;
    return r;
}

namespace {

SubgroupMetrics subgroup(std::span<const EvalRecord> records, const CategoryScheme& scheme) {
    SubgroupMetrics s;
    s.count = records.size();
    if (!records.empty()) {
        s.accuracy = relaxed_accuracy(records, scheme);
        s.abs_error = abs_error_stats(records, scheme);
    }
    return s;
}

}  // namespace

MetricsReport evaluate(std::span<const EvalRecord> records, const CategoryScheme& scheme,
                       int bins) {
    MetricsReport rep;
    rep.count = records.size();
    rep.accuracy = relaxed_accuracy(records, scheme);
    rep.abs_errors = abs_errors(records, scheme);
    rep.abs_error = summarize(rep.abs_errors);
    rep.ece = ece(records, scheme, bins);
    rep.mce = mce(records, scheme, bins);
    rep.confusion = confusion_matrix(records, scheme);

    std::vector<EvalRecord> certain;
    std::vector<EvalRecord> uncertain;
    for (const auto& r : records) {
        (r.a1 == second_label(r) ? certain : uncertain).push_back(r);
    }
    rep.certain = subgroup(certain, scheme);
    rep.uncertain = subgroup(uncertain, scheme);
    return rep;
}

}  // namespace catreg
