#include "catreg/synth_data.hpp"

#include "catreg/dist.hpp"
#include "catreg/errors.hpp"
#include "catreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace catreg {

namespace {

double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

std::vector<double> random_direction(std::size_t dim, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double ss = 0.0;
    for (double& x : v) {
        x = normal(rng);
        ss += x * x;
    }
    const double k = norm / std::sqrt(ss);
    for (double& x : v) {
        x *= k;
    }
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Independent, reproducible streams derived from one seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

}  // namespace

std::vector<WorldItem> make_world(const WorldConfig& config, std::uint64_t seed) {
    if (config.size == 0 || config.dim == 0 || config.windows == 0) {
        throw invalid_parameter("world needs positive size, dimension and window count");
    }
    if (!(config.sigma_min > 0.0) || config.sigma_max < config.sigma_min ||
        !(config.sigma_scale > 0.0)) {
        throw invalid_parameter("world needs 0 < sigma_min <= sigma_max and a positive scale");
    }
    auto task = stream(config.task_seed, 1);
    const auto quality_dir = random_direction(config.dim, config.quality_gain, task);
    const auto spread_dir = random_direction(config.dim, config.spread_gain, task);

    auto rng = stream(seed, 2);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<WorldItem> world(config.size);
    for (auto& item : world) {
        item.features.resize(config.dim);
        for (double& x : item.features) {
            x = normal(rng);
        }
        item.windows.assign(config.windows, item.features);
        if (config.window_jitter > 0.0) {
            for (auto& w : item.windows) {
                for (double& x : w) {
                    x += config.window_jitter * normal(rng);
                }
            }
        }
        item.quality = logistic(dot(quality_dir, item.features) + config.quality_bias);
        item.spread = config.sigma_scale *
                      (config.sigma_min + (config.sigma_max - config.sigma_min) *
                                              logistic(dot(spread_dir, item.features)));
    }
    return world;
}

Category sample_label(const WorldItem& item, const CategoryScheme& scheme, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(item.quality, item.spread);
    const double z = std::clamp(normal(rng), 1e-9, 1.0);
    return scheme.category_of(z);
}

std::vector<double> clipped_label_probs(double quality, double spread,
                                        const CategoryScheme& scheme) {
    const GaussianParams g{quality, spread};
    validate(g);
    std::vector<double> p(scheme.size());
    double below = 0.0;  // tail below the support folds into the first category
    for (Category c = 0; c < p.size(); ++c) {
        const double above = c + 1 == p.size() ? 1.0 : gaussian_cdf(scheme.upper(c), g);
        p[c] = std::max(above - below, 0.0);
        below = above;
    }
    return p;
}

double disagreement_probability(std::span<const double> probs) {
    double agree = 0.0;
    for (double p : probs) {
        agree += p * p;
    }
    return 1.0 - agree;
}

double expected_disagreement(std::span<const WorldItem> world, const CategoryScheme& scheme) {
    if (world.empty()) {
        throw insufficient_data("expected disagreement of an empty world");
    }
    double total = 0.0;
    for (const auto& item : world) {
        total += disagreement_probability(clipped_label_probs(item.quality, item.spread, scheme));
    }
    return total / static_cast<double>(world.size());
}

DisagreementCalibration calibrate_disagreement(double target, const WorldConfig& config,
                                               std::uint64_t seed, const CategoryScheme& scheme,
                                               double tolerance) {
    if (!(target >= 0.0 && target < 1.0)) {
        throw invalid_parameter("disagreement target must lie in [0, 1)");
    }
    WorldConfig base = config;
    base.sigma_scale = 1.0;
    const auto world = make_world(base, seed);
    auto at = [&](double s) {
        std::vector<WorldItem> scaled(world.begin(), world.end());
        for (auto& item : scaled) {
            item.spread *= s;
        }
        return expected_disagreement(scaled, scheme);
    };

    // The map is increasing until the clipped tails dominate; scan a log
    // grid for the first crossing, then bisect inside that bracket.
    constexpr double kLo = 1e-6;
    constexpr double kHi = 50.0;
    constexpr int kGrid = 120;
    double lo = kLo;
    double f_lo = at(lo);
    if (f_lo > target + tolerance) {
        throw insufficient_data("disagreement target is below the smallest reachable rate");
    }
    double hi = lo;
    bool bracketed = f_lo >= target;
    for (int i = 1; i <= kGrid && !bracketed; ++i) {
        hi = kLo * std::pow(kHi / kLo, static_cast<double>(i) / kGrid);
        if (at(hi) >= target) {
            bracketed = true;
        } else {
            lo = hi;
        }
    }
    if (!bracketed) {
        throw insufficient_data("disagreement target is above the largest reachable rate");
    }
    for (int i = 0; i < 100 && hi > lo; ++i) {
        const double mid = std::sqrt(lo * hi);
        (at(mid) < target ? lo : hi) = mid;
    }
    DisagreementCalibration out;
    out.sigma_scale = hi;
    out.expected = at(hi);
    if (std::abs(out.expected - target) > tolerance) {
        throw insufficient_data("disagreement calibration did not reach the tolerance");
    }
    out.sigma_min = hi * config.sigma_min;
    out.sigma_max = hi * config.sigma_max;
    return out;
}

std::string_view to_string(Scenario s) noexcept {
    switch (s) {
        case Scenario::S1: return "S1";
        case Scenario::S2: return "S2";
        case Scenario::S12Agt: return "S12_AGT";
        case Scenario::S12Sgt: return "S12_SGT";
        case Scenario::S1Ex: return "S1EX";
    }
    return "?";
}

Scenario parse_scenario(std::string_view s) {
    for (Scenario sc : {Scenario::S1, Scenario::S2, Scenario::S12Agt, Scenario::S12Sgt,
                        Scenario::S1Ex}) {
        if (to_string(sc) == s) {
            return sc;
        }
    }
    throw std::invalid_argument("unknown scenario '" + std::string(s) + "'");
}

bool is_dual_label(Scenario s) noexcept { return s == Scenario::S12Agt || s == Scenario::S12Sgt; }

ScenarioData build_scenario(std::span<const WorldItem> world, const ScenarioSpec& spec,
                            const CategoryScheme& scheme) {
    const double ratio_sum = spec.train_ratio + spec.validation_ratio + spec.test_ratio;
    if (std::abs(ratio_sum - 1.0) > 1e-9 || spec.train_ratio < 0.0 ||
        spec.validation_ratio < 0.0 || spec.test_ratio < 0.0) {
        throw invalid_parameter("split ratios must be nonnegative and sum to 1");
    }
    const std::size_t extended = spec.scenario == Scenario::S1Ex ? spec.extended_size : 0;
    if (spec.core_size == 0 || world.size() < spec.core_size + extended) {
        throw insufficient_data("world has " + std::to_string(world.size()) +
                                " items; scenario needs " +
                                std::to_string(spec.core_size + extended));
    }

    // Label and split streams do not depend on the scenario, so every
    // scenario built from one seed shares labels, splits and test set.
    auto label_rng = stream(spec.seed, 11);
    std::vector<LabeledSample> core(spec.core_size);
    for (std::size_t i = 0; i < core.size(); ++i) {
        const auto& item = world[i];
        core[i].id = i;
        core[i].windows = item.windows;
        core[i].a1 = sample_label(item, scheme, label_rng);
        core[i].a2 = sample_label(item, scheme, label_rng);
        core[i].true_quality = item.quality;
        core[i].true_spread = item.spread;
    }
    std::vector<std::size_t> order(core.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto split_rng = stream(spec.seed, 12);
    std::shuffle(order.begin(), order.end(), split_rng);

    const auto n = static_cast<double>(core.size());
    const auto n_test = static_cast<std::size_t>(std::floor(spec.test_ratio * n));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.validation_ratio * n));

    ScenarioData out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        LabeledSample s = core[order[k]];
        if (k < n_test) {
            out.test.push_back(std::move(s));
            continue;
        }
        if (k < n_test + n_val) {
            out.validation.push_back(std::move(s));
            continue;
        }
        s.true_quality.reset();
        s.true_spread.reset();
        switch (spec.scenario) {
            case Scenario::S1:
            case Scenario::S1Ex: s.a2.reset(); break;
            case Scenario::S2:
                s.a1 = *s.a2;
                s.a2.reset();
                break;
            case Scenario::S12Agt:
            case Scenario::S12Sgt: break;
        }
        out.train.push_back(std::move(s));
    }
    std::sort(out.train.begin(), out.train.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    auto ext_rng = stream(spec.seed, 13);
    for (std::size_t i = spec.core_size; i < spec.core_size + extended; ++i) {
        LabeledSample s;
        s.id = i;
        s.windows = world[i].windows;
        s.a1 = sample_label(world[i], scheme, ext_rng);
        out.train.push_back(std::move(s));
    }
    return out;
}

std::string dataset_to_csv(std::span<const LabeledSample> samples, const CategoryScheme& scheme,
                           CsvColumns columns) {
    const bool eval = columns == CsvColumns::Evaluation;
    std::size_t dim = 0;
    if (!samples.empty() && !samples.front().windows.empty()) {
        dim = samples.front().windows.front().size();
    }
    std::string out = "id,window";
    for (std::size_t j = 0; j < dim; ++j) {
        out += ",feat_" + std::to_string(j);
    }
    out += ",a1,a2";
    if (eval) {
        out += ",true_y,true_sigma";
    }
    out += '\n';
    for (const auto& s : samples) {
        for (std::size_t w = 0; w < s.windows.size(); ++w) {
            if (s.windows[w].size() != dim) {
                throw invalid_parameter("inconsistent feature dimension in dataset");
            }
            out += std::to_string(s.id) + ',' + std::to_string(w);
            for (double x : s.windows[w]) {
                out += ',' + io::format_double(x);
            }
            out += ',' + scheme.name(s.a1) + ',';
            if (s.a2) {
                out += scheme.name(*s.a2);
            }
            if (eval) {
                out += ',';
                if (s.true_quality) out += io::format_double(*s.true_quality);
                out += ',';
                if (s.true_spread) out += io::format_double(*s.true_spread);
            }
            out += '\n';
        }
    }
    return out;
}

std::vector<LabeledSample> dataset_from_csv(std::string_view text, const CategoryScheme& scheme) {
    std::vector<LabeledSample> out;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) {
            return false;
        }
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        return true;
    };
    std::string_view line;
    if (!next_line(line)) {
        throw std::invalid_argument("dataset CSV is empty");
    }
    const auto header = io::split(line, ',');
    if (header.size() < 4 || header[0] != "id" || header[1] != "window") {
        throw std::invalid_argument("dataset CSV header must start with id,window");
    }
    std::size_t dim = 0;
    while (2 + dim < header.size() && header[2 + dim] == "feat_" + std::to_string(dim)) {
        ++dim;
    }
    const std::size_t a1_col = 2 + dim;
    if (header.size() < a1_col + 2 || header[a1_col] != "a1" || header[a1_col + 1] != "a2") {
        throw std::invalid_argument("dataset CSV is missing a1,a2 columns");
    }
    const bool eval = header.size() == a1_col + 4;
    if (eval && (header[a1_col + 2] != "true_y" || header[a1_col + 3] != "true_sigma")) {
        throw std::invalid_argument("unexpected evaluation columns in dataset CSV");
    }
    while (next_line(line)) {
        if (line.empty()) continue;
        const auto f = io::split(line, ',');
        if (f.size() != header.size()) {
            throw std::invalid_argument("dataset CSV row has the wrong number of fields");
        }
        const auto id = static_cast<std::size_t>(io::parse_int(f[0]));
        const auto window = static_cast<std::size_t>(io::parse_int(f[1]));
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            x[j] = io::parse_double(f[2 + j]);
        }
        if (window == 0) {
            LabeledSample s;
            s.id = id;
            s.a1 = scheme.parse(f[a1_col]);
            if (!f[a1_col + 1].empty()) s.a2 = scheme.parse(f[a1_col + 1]);
            if (eval && !f[a1_col + 2].empty()) s.true_quality = io::parse_double(f[a1_col + 2]);
            if (eval && !f[a1_col + 3].empty()) s.true_spread = io::parse_double(f[a1_col + 3]);
            out.push_back(std::move(s));
        } else if (out.empty() || out.back().id != id || out.back().windows.size() != window) {
            throw std::invalid_argument("dataset CSV windows must be consecutive per id");
        }
        out.back().windows.push_back(std::move(x));
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledSample> samples,
                   const CategoryScheme& scheme, CsvColumns columns) {
    io::write_text(path, dataset_to_csv(samples, scheme, columns));
}

std::vector<LabeledSample> read_dataset(const std::filesystem::path& path,
                                        const CategoryScheme& scheme) {
    return dataset_from_csv(io::read_text(path), scheme);
}

}  // namespace catreg
