#include "catreg/interval_likelihood.hpp"

#include "catreg/dist.hpp"
#include "catreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace catreg {

CategoryScheme::CategoryScheme()
    : names_{"Poor", "Fair", "Good", "Excellent"}, edges_{0.0, 0.25, 0.5, 0.75, 1.0} {}

CategoryScheme::CategoryScheme(std::vector<std::string> names, std::vector<double> edges)
    : names_(std::move(names)), edges_(std::move(edges)) {
    if (names_.empty() || edges_.size() != names_.size() + 1) {
        throw invalid_parameter("category scheme needs one more edge than names");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (!(edges_[i] >= 0.0 && edges_[i] <= 1.0)) {
            throw invalid_parameter("category bounds must lie in [0, 1]");
        }
        if (i > 0 && !(edges_[i] > edges_[i - 1])) {
            throw invalid_parameter("category bounds must be strictly increasing");
        }
    }
}

Category CategoryScheme::category_of(double v) const noexcept {
    // Interval (l_c, u_c]: the first upper bound >= v.
    const auto it = std::lower_bound(edges_.begin() + 1, edges_.end() - 1, v);
    return static_cast<Category>(it - (edges_.begin() + 1));
}

Category CategoryScheme::parse(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            return i;
        }
    }
    throw std::invalid_argument("unknown category '" + std::string(name) + "'");
}

std::string_view to_string(Family f) noexcept {
    return f == Family::Gaussian ? "gaussian" : "laplace";
}

namespace {

double checked_scale(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw invalid_parameter("scale must be positive and finite");
    }
    return std::max(scale, kScaleFloor);
}

double cdf(double z, double mean, double scale, Family family) noexcept {
    return family == Family::Gaussian ? gaussian_cdf(z, {mean, scale})
                                      : laplace_cdf(z, {mean, scale});
}

double pdf(double z, double mean, double scale, Family family) noexcept {
    return family == Family::Gaussian ? gaussian_pdf(z, {mean, scale})
                                      : laplace_pdf(z, {mean, scale});
}

}  // namespace

std::vector<double> interval_probs_raw(double mean, double scale, const CategoryScheme& scheme,
                                       Family family) {
    const double s = checked_scale(scale);
    const auto& edges = scheme.edges();
    std::vector<double> out(scheme.size());
    double below = cdf(edges.front(), mean, s, family);
    for (std::size_t c = 0; c < out.size(); ++c) {
        const double above = cdf(edges[c + 1], mean, s, family);
        out[c] = std::max(above - below, 0.0);
        below = above;
    }
    return out;
}

std::vector<double> normalize_probs(std::span<const double> raw) {
    double total = 0.0;
    for (double v : raw) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw invalid_parameter("probabilities must be finite and nonnegative");
        }
        total += v;
    }
    if (!(total > 0.0)) {
        throw degenerate_distribution("cannot normalize a distribution with zero mass");
    }
    std::vector<double> out(raw.size());
    std::transform(raw.begin(), raw.end(), out.begin(), [total](double v) { return v / total; });
    return out;
}

std::vector<double> interval_probs(double mean, double scale, const CategoryScheme& scheme,
                                   Family family) {
    return normalize_probs(interval_probs_raw(mean, scale, scheme, family));
}

std::vector<double> pdf_prob_probs(double mean, double scale, const CategoryScheme& scheme) {
    const double s = checked_scale(scale);
    // Normalize in log space: densities at tiny scales overflow otherwise.
    std::vector<double> logd(scheme.size());
    for (std::size_t c = 0; c < logd.size(); ++c) {
        logd[c] = gaussian_logpdf(scheme.center(c), {mean, s});
    }
    const double top = *std::max_element(logd.begin(), logd.end());
    std::vector<double> w(logd.size());
    std::transform(logd.begin(), logd.end(), w.begin(),
                   [top](double l) { return std::exp(l - top); });
    return normalize_probs(w);
}

std::vector<double> mixture_probs(std::span<const MixtureComponent> components,
                                  const CategoryScheme& scheme, Family family) {
    if (components.empty()) {
        throw invalid_parameter("mixture needs at least one component");
    }
    double weight_sum = 0.0;
    for (const auto& comp : components) {
        if (!(comp.weight >= 0.0)) {
            throw invalid_parameter("mixture weights must be nonnegative");
        }
        weight_sum += comp.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw invalid_parameter("mixture weights must sum to 1");
    }
    std::vector<double> acc(scheme.size(), 0.0);
    for (const auto& comp : components) {
        const auto raw = interval_probs_raw(comp.mean, comp.scale, scheme, family);
        for (std::size_t c = 0; c < acc.size(); ++c) {
            acc[c] += comp.weight * raw[c];
        }
    }
    return normalize_probs(acc);
}

ProbGradient interval_probs_raw_grad(double mean, double scale, const CategoryScheme& scheme,
                                     Family family) {
    const bool floored = checked_scale(scale) > scale;
    const double s = std::max(scale, kScaleFloor);
    const auto& edges = scheme.edges();
    // Location-scale family: dF/dmean = -pdf(z), dF/dscale = -pdf(z) (z - mean) / scale.
    std::vector<double> dm_edge(edges.size());
    std::vector<double> ds_edge(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double d = pdf(edges[i], mean, s, family);
        dm_edge[i] = -d;
        ds_edge[i] = floored ? 0.0 : -d * (edges[i] - mean) / s;
    }
    ProbGradient g{std::vector<double>(scheme.size()), std::vector<double>(scheme.size())};
    for (std::size_t c = 0; c < scheme.size(); ++c) {
        g.d_mean[c] = dm_edge[c + 1] - dm_edge[c];
        g.d_scale[c] = ds_edge[c + 1] - ds_edge[c];
    }
    return g;
}

ProbGradient interval_probs_grad(double mean, double scale, const CategoryScheme& scheme,
                                 Family family) {
    const auto raw = interval_probs_raw(mean, scale, scheme, family);
    auto g = interval_probs_raw_grad(mean, scale, scheme, family);
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    if (!(total > 0.0)) {
        throw degenerate_distribution("cannot differentiate a distribution with zero mass");
    }
    const double dm_total = std::accumulate(g.d_mean.begin(), g.d_mean.end(), 0.0);
    const double ds_total = std::accumulate(g.d_scale.begin(), g.d_scale.end(), 0.0);
    for (std::size_t c = 0; c < raw.size(); ++c) {
        const double p = raw[c] / total;
        g.d_mean[c] = (g.d_mean[c] - p * dm_total) / total;
        g.d_scale[c] = (g.d_scale[c] - p * ds_total) / total;
    }
    return g;
}

}  // namespace catreg
