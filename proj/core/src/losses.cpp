#include "catreg/losses.hpp"

#include "catreg/errors.hpp"
#include "catreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace catreg {

std::string_view to_string(GroundTruthMode m) noexcept {
    switch (m) {
        case GroundTruthMode::Average: return "agt";
        case GroundTruthMode::Stochastic: return "sgt";
        case GroundTruthMode::Single: return "single";
    }
    return "?";
}

GroundTruthMode parse_ground_truth_mode(std::string_view s) {
    if (s == "agt" || s == "AGT") return GroundTruthMode::Average;
    if (s == "sgt" || s == "SGT") return GroundTruthMode::Stochastic;
    if (s == "single") return GroundTruthMode::Single;
    throw std::invalid_argument("unknown ground-truth mode '" + std::string(s) + "'");
}

GroundTruthWeights ground_truth_weights(GroundTruthMode mode, std::mt19937_64& rng) {
    switch (mode) {
        case GroundTruthMode::Average: return {0.5, 0.5};
        case GroundTruthMode::Stochastic: {
            std::bernoulli_distribution coin(0.5);
            return coin(rng) ? GroundTruthWeights{1.0, 0.0} : GroundTruthWeights{0.0, 1.0};
        }
        case GroundTruthMode::Single: return {1.0, 0.0};
    }
    return {1.0, 0.0};
}

NllTerms nll_heteroscedastic_with_grad(double y, double mean, double scale) {
    if (!(scale > 0.0)) {
        throw invalid_parameter("NLL requires a positive scale");
    }
    const double r = y - mean;
    const double inv2 = 1.0 / (scale * scale);
    NllTerms t;
    t.loss = 0.5 * (r * r * inv2 + std::log(scale * scale));
    t.d_mean = -r * inv2;
    t.d_scale = 1.0 / scale - r * r * inv2 / scale;
    return t;
}

double nll_heteroscedastic(double y, double mean, double scale) {
    return nll_heteroscedastic_with_grad(y, mean, scale).loss;
}

double nll_heteroscedastic_mean(std::span<const double> y, std::span<const double> mean,
                                std::span<const double> scale) {
    if (y.size() != mean.size() || y.size() != scale.size() || y.empty()) {
        throw invalid_parameter("NLL batch spans must be nonempty and equally sized");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sum += nll_heteroscedastic(y[i], mean[i], scale[i]);
    }
    return sum / static_cast<double>(y.size());
}

namespace {

void check_labels(std::span<const double> probs, Category a1, std::optional<Category> a2,
                  const GroundTruthWeights& w) {
    if (a1 >= probs.size() || (a2 && *a2 >= probs.size())) {
        throw invalid_parameter("label outside the category range");
    }
    if (!a2 && w.second != 0.0) {
        throw invalid_parameter("second label weight without a second label");
    }
}

}  // namespace

double xent_dual_label(std::span<const double> probs, Category a1, std::optional<Category> a2,
                       const GroundTruthWeights& w, LossDiagnostics* diag) {
    check_labels(probs, a1, a2, w);
    auto term = [&](Category c, double weight) {
        if (weight == 0.0) {
            return 0.0;
        }
        const double p = probs[c];
        if (p < kLogFloor && diag) {
            ++diag->clamped_logs;
        }
        return -weight * std::log(std::max(p, kLogFloor));
    };
    if (diag) {
        ++diag->evaluations;
    }
    double loss = term(a1, w.first);
    if (a2) {
        loss += term(*a2, w.second);
    }
    return loss;
}

std::vector<double> xent_dual_label_grad(std::span<const double> probs, Category a1,
                                         std::optional<Category> a2,
                                         const GroundTruthWeights& w) {
    check_labels(probs, a1, a2, w);
    std::vector<double> g(probs.size(), 0.0);
    auto add = [&](Category c, double weight) {
        if (weight != 0.0 && probs[c] >= kLogFloor) {
            g[c] -= weight / probs[c];
        }
    };
    add(a1, w.first);
    if (a2) {
        add(*a2, w.second);
    }
    return g;
}

SurfacePoint agt_sgt_surface(double p_plus) {
    if (!(p_plus > 0.0 && p_plus < 1.0)) {
        throw invalid_parameter("p_plus must lie strictly inside (0, 1)");
    }
    const double red = -std::log(p_plus);
    const double yellow = -std::log1p(-p_plus);
    return {p_plus, red, yellow, 0.5 * red + 0.5 * yellow};
}

std::vector<SurfacePoint> agt_sgt_surface_grid() {
    std::vector<SurfacePoint> grid;
    grid.reserve(999);
    for (int i = 1; i <= 999; ++i) {
        grid.push_back(agt_sgt_surface(i / 1000.0));
    }
    return grid;
}

void write_loss_surface_csv(const std::filesystem::path& path,
                            std::span<const SurfacePoint> grid) {
    std::string out = "p_plus,red,yellow,blue\n";
    for (const auto& pt : grid) {
        out += io::format_double(pt.p_plus) + ',' + io::format_double(pt.red) + ',' +
               io::format_double(pt.yellow) + ',' + io::format_double(pt.blue) + '\n';
    }
    io::write_text(path, out);
}

}  // namespace catreg
