#include "catreg/model.hpp"

#include "catreg/errors.hpp"
#include "catreg/evaluation.hpp"
#include "catreg/io.hpp"
#include "json_convert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace catreg {

std::string_view to_string(Head h) noexcept {
    switch (h) {
        case Head::CdfGaussian: return "cdf-gaussian";
        case Head::CdfLaplace: return "cdf-laplace";
        case Head::PdfProb: return "pdf-prob";
        case Head::Regression: return "regression";
        case Head::Classification: return "classification";
    }
    return "?";
}

Head parse_head(std::string_view s) {
    for (Head h : {Head::CdfGaussian, Head::CdfLaplace, Head::PdfProb, Head::Regression,
                   Head::Classification}) {
        if (to_string(h) == s) {
            return h;
        }
    }
    throw std::invalid_argument("unknown head '" + std::string(s) + "'");
}

namespace {

constexpr double kMeanEps = 1e-12;

bool is_cdf(Head h) { return h == Head::CdfGaussian || h == Head::CdfLaplace; }

Family family_of(Head h) { return h == Head::CdfLaplace ? Family::Laplace : Family::Gaussian; }

std::size_t component_count(const ModelConfig& c) { return c.mixture ? c.components : 1; }

std::size_t head_units(const ModelConfig& c) {
    switch (c.head) {
        case Head::Regression: return 1;
        case Head::PdfProb: return 2;
        case Head::CdfGaussian:
        case Head::CdfLaplace: return c.mixture ? 3 * c.components : 2;
        case Head::Classification: return c.scheme.size();
    }
    return 0;
}

// Offsets into the flat parameter vector. Layer l stores a row-major
// (out x in) weight block followed by its bias; each head unit stores
// `features` weights followed by one bias.
struct Layout {
    std::vector<std::size_t> widths;
    std::vector<std::size_t> weight_off;
    std::vector<std::size_t> bias_off;
    std::size_t features = 0;
    std::size_t head_off = 0;
    std::size_t units = 0;
    std::size_t total = 0;

    explicit Layout(const ModelConfig& c) {
        widths.push_back(c.input_dim);
        widths.insert(widths.end(), c.hidden.begin(), c.hidden.end());
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            weight_off.push_back(off);
            off += widths[l] * widths[l + 1];
            bias_off.push_back(off);
            off += widths[l + 1];
        }
        features = widths.back();
        head_off = off;
        units = head_units(c);
        total = off + units * (features + 1);
    }

    [[nodiscard]] std::size_t layers() const { return weight_off.size(); }
    [[nodiscard]] std::size_t unit_off(std::size_t u) const { return head_off + u * (features + 1); }
};

double logistic(double a) {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - top);
        sum += p[i];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

struct Trace {
    std::vector<std::vector<double>> inputs;  // inputs[l] feeds layer l; inputs.back() feeds the heads
    std::vector<std::vector<double>> masks;   // per input, empty when dropout is off
    std::vector<std::vector<double>> hidden;  // tanh outputs
    std::vector<double> head_pre;
};

void apply_dropout(std::vector<double>& v, std::vector<double>& mask, double rate,
                   std::mt19937_64* rng) {
    if (rate <= 0.0 || rng == nullptr) {
        mask.clear();
        return;
    }
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    mask.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        mask[i] = keep(*rng) ? scale : 0.0;
        v[i] *= mask[i];
    }
}

Trace run_network(std::span<const double> x, const ModelParams& params, const Layout& lay,
                  std::mt19937_64* dropout_rng) {
    const auto& w = params.values;
    const double rate = params.config.dropout;
    Trace t;
    t.inputs.resize(lay.layers() + 1);
    t.masks.resize(lay.layers() + 1);
    t.hidden.resize(lay.layers());
    t.inputs[0].assign(x.begin(), x.end());
    apply_dropout(t.inputs[0], t.masks[0], rate, dropout_rng);
    for (std::size_t l = 0; l < lay.layers(); ++l) {
        const std::size_t in = lay.widths[l];
        const std::size_t out = lay.widths[l + 1];
        auto& h = t.hidden[l];
        h.resize(out);
        for (std::size_t o = 0; o < out; ++o) {
            const double* row = w.data() + lay.weight_off[l] + o * in;
            double a = w[lay.bias_off[l] + o];
            for (std::size_t i = 0; i < in; ++i) {
                a += row[i] * t.inputs[l][i];
            }
            h[o] = std::tanh(a);
        }
        t.inputs[l + 1] = h;
        apply_dropout(t.inputs[l + 1], t.masks[l + 1], rate, dropout_rng);
    }
    const auto& feat = t.inputs.back();
    t.head_pre.resize(lay.units);
    for (std::size_t u = 0; u < lay.units; ++u) {
        const double* row = w.data() + lay.unit_off(u);
        double a = row[lay.features];
        for (std::size_t i = 0; i < lay.features; ++i) {
            a += row[i] * feat[i];
        }
        t.head_pre[u] = a;
    }
    return t;
}

// Activated head outputs; K = 1 outside the mixture.
struct HeadValues {
    std::vector<double> means;
    std::vector<double> raw_scales;
    std::vector<double> scales;
    std::vector<double> weights;
    std::vector<double> probs;
};

double mean_activation(double pre) { return std::clamp(logistic(pre), kMeanEps, 1.0 - kMeanEps); }

double mean_derivative(double m) {
    return (m <= kMeanEps || m >= 1.0 - kMeanEps) ? 0.0 : m * (1.0 - m);
}

HeadValues activate(const std::vector<double>& pre, const ModelConfig& c) {
    HeadValues hv;
    const std::size_t k = component_count(c);
    switch (c.head) {
        case Head::Regression:
            hv.means = {mean_activation(pre[0])};
            hv.probs = regression_confidence(hv.means[0], c.scheme);
            break;
        case Head::PdfProb:
        case Head::CdfGaussian:
        case Head::CdfLaplace: {
            for (std::size_t i = 0; i < k; ++i) {
                hv.means.push_back(mean_activation(pre[i]));
                const double raw = std::min(logistic(pre[k + i]), 1.0 - kMeanEps);
                hv.raw_scales.push_back(raw);
                hv.scales.push_back(std::max(raw, kScaleFloor));
            }
            if (c.head == Head::PdfProb) {
                hv.probs = pdf_prob_probs(hv.means[0], hv.scales[0], c.scheme);
            } else if (c.mixture) {
                hv.weights = softmax(std::span(pre).subspan(2 * k, k));
                std::vector<MixtureComponent> comps(k);
                for (std::size_t i = 0; i < k; ++i) {
                    comps[i] = {hv.means[i], hv.scales[i], hv.weights[i]};
                }
                hv.probs = mixture_probs(comps, c.scheme, family_of(c.head));
            } else {
                hv.probs = interval_probs(hv.means[0], hv.scales[0], c.scheme, family_of(c.head));
            }
            break;
        }
        case Head::Classification:
            hv.probs = softmax(pre);
            break;
    }
    return hv;
}

PredictiveDistribution to_distribution(const HeadValues& hv, const ModelConfig& c) {
    PredictiveDistribution d;
    d.family = family_of(c.head);
    d.probs = hv.probs;
    if (c.head == Head::Classification) {
        const auto best = std::max_element(hv.probs.begin(), hv.probs.end()) - hv.probs.begin();
        d.mean = c.scheme.center(static_cast<Category>(best));
        return d;
    }
    if (c.mixture) {
        for (std::size_t i = 0; i < hv.means.size(); ++i) {
            d.components.push_back({hv.means[i], hv.scales[i], hv.weights[i]});
            d.mean += hv.weights[i] * hv.means[i];
            d.scale += hv.weights[i] * hv.scales[i];
        }
        return d;
    }
    d.mean = hv.means[0];
    d.scale = hv.scales.empty() ? 0.0 : hv.scales[0];
    return d;
}

double scale_derivative(double raw) { return raw < kScaleFloor || raw >= 1.0 - kMeanEps ? 0.0 : raw * (1.0 - raw); }

// Loss of one example and its derivative with respect to the head pre-activations.
double head_loss(const HeadValues& hv, const TrainingTarget& target, const ModelConfig& c,
                 std::vector<double>& d_pre, LossDiagnostics& diag) {
    d_pre.assign(head_units(c), 0.0);
    switch (c.head) {
        case Head::Regression: {
            const double r = hv.means[0] - regression_target(target, c.scheme);
            d_pre[0] = r * mean_derivative(hv.means[0]);
            return 0.5 * r * r;
        }
        case Head::PdfProb: {
            const auto t = nll_heteroscedastic_with_grad(regression_target(target, c.scheme),
                                                         hv.means[0], hv.scales[0]);
            d_pre[0] = t.d_mean * mean_derivative(hv.means[0]);
            d_pre[1] = t.d_scale * scale_derivative(hv.raw_scales[0]);
            return t.loss;
        }
        case Head::Classification: {
            const double loss =
                xent_dual_label(hv.probs, target.a1, target.a2, target.weights, &diag);
            const auto g = xent_dual_label_grad(hv.probs, target.a1, target.a2, target.weights);
            double gp = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gp += g[i] * hv.probs[i];
            }
            for (std::size_t i = 0; i < g.size(); ++i) {
                d_pre[i] = hv.probs[i] * (g[i] - gp);
            }
            return loss;
        }
        case Head::CdfGaussian:
        case Head::CdfLaplace:
            break;
    }

    const double loss = xent_dual_label(hv.probs, target.a1, target.a2, target.weights, &diag);
    const auto g = xent_dual_label_grad(hv.probs, target.a1, target.a2, target.weights);
    const Family fam = family_of(c.head);
    if (!c.mixture) {
        const auto pg = interval_probs_grad(hv.means[0], hv.scales[0], c.scheme, fam);
        double dm = 0.0;
        double ds = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            dm += g[i] * pg.d_mean[i];
            ds += g[i] * pg.d_scale[i];
        }
        d_pre[0] = dm * mean_derivative(hv.means[0]);
        d_pre[1] = ds * scale_derivative(hv.raw_scales[0]);
        return loss;
    }

    // p = R / sum(R), R_c = sum_k w_k r_kc.
    const std::size_t k = hv.means.size();
    const std::size_t cats = c.scheme.size();
    std::vector<std::vector<double>> raw(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        raw[i] = interval_probs_raw(hv.means[i], hv.scales[i], c.scheme, fam);
        for (double v : raw[i]) {
            total += hv.weights[i] * v;
        }
    }
    double gp = 0.0;
    for (std::size_t j = 0; j < cats; ++j) {
        gp += g[j] * hv.probs[j];
    }
    std::vector<double> d_r(cats);
    for (std::size_t j = 0; j < cats; ++j) {
        d_r[j] = (g[j] - gp) / total;
    }
    std::vector<double> d_w(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const auto rg = interval_probs_raw_grad(hv.means[i], hv.scales[i], c.scheme, fam);
        double dm = 0.0;
        double ds = 0.0;
        for (std::size_t j = 0; j < cats; ++j) {
            d_w[i] += d_r[j] * raw[i][j];
            dm += d_r[j] * rg.d_mean[j];
            ds += d_r[j] * rg.d_scale[j];
        }
        d_pre[i] = hv.weights[i] * dm * mean_derivative(hv.means[i]);
        d_pre[k + i] = hv.weights[i] * ds * scale_derivative(hv.raw_scales[i]);
    }
    double wd = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        wd += hv.weights[i] * d_w[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
        d_pre[2 * k + i] = hv.weights[i] * (d_w[i] - wd);
    }
    return loss;
}

void accumulate_gradient(const Trace& t, const std::vector<double>& d_pre,
                         const ModelParams& params, const Layout& lay,
                         std::vector<double>& grad) {
    const auto& w = params.values;
    std::vector<double> d_in(lay.features, 0.0);
    const auto& feat = t.inputs.back();
    for (std::size_t u = 0; u < lay.units; ++u) {
        const double g = d_pre[u];
        if (g == 0.0) {
            continue;
        }
        const std::size_t off = lay.unit_off(u);
        for (std::size_t i = 0; i < lay.features; ++i) {
            grad[off + i] += g * feat[i];
            d_in[i] += g * w[off + i];
        }
        grad[off + lay.features] += g;
    }
    for (std::size_t l = lay.layers(); l-- > 0;) {
        const std::size_t in = lay.widths[l];
        const std::size_t out = lay.widths[l + 1];
        const auto& mask = t.masks[l + 1];
        std::vector<double> d_prev(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double dh = d_in[o];
            if (!mask.empty()) {
                dh *= mask[o];
            }
            const double h = t.hidden[l][o];
            const double da = dh * (1.0 - h * h);
            if (da == 0.0) {
                continue;
            }
            const std::size_t row = lay.weight_off[l] + o * in;
            for (std::size_t i = 0; i < in; ++i) {
                grad[row + i] += da * t.inputs[l][i];
                d_prev[i] += da * w[row + i];
            }
            grad[lay.bias_off[l] + o] += da;
        }
        d_in = std::move(d_prev);
    }
}

void check_input(std::span<const double> x, const ModelParams& params) {
    if (x.size() != params.config.input_dim) {
        throw invalid_parameter("feature dimension " + std::to_string(x.size()) +
                                " does not match model input " +
                                std::to_string(params.config.input_dim));
    }
    if (params.values.size() != parameter_count(params.config)) {
        throw invalid_parameter("parameter vector does not match the model configuration");
    }
}

}  // namespace

void validate(const ModelConfig& c) {
    if (c.input_dim == 0) {
        throw invalid_parameter("input dimension must be at least 1");
    }
    if (std::any_of(c.hidden.begin(), c.hidden.end(), [](std::size_t n) { return n == 0; })) {
        throw invalid_parameter("hidden layer sizes must be at least 1");
    }
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
        throw invalid_parameter("dropout rate must lie in [0, 1)");
    }
    if (c.mixture && (!is_cdf(c.head) || c.components == 0)) {
        throw invalid_parameter("mixture requires a CDF head and at least one component");
    }
}

std::size_t parameter_count(const ModelConfig& config) { return Layout(config).total; }

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    const Layout lay(config);
    ModelParams p{config, std::vector<double>(lay.total, 0.0)};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < lay.layers(); ++l) {
        const double s = 1.0 / std::sqrt(static_cast<double>(lay.widths[l]));
        for (std::size_t i = 0; i < lay.widths[l] * lay.widths[l + 1]; ++i) {
            p.values[lay.weight_off[l] + i] = s * normal(rng);
        }
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(lay.features));
    for (std::size_t u = 0; u < lay.units; ++u) {
        for (std::size_t i = 0; i < lay.features; ++i) {
            p.values[lay.unit_off(u) + i] = s * normal(rng);
        }
    }
    if (config.head == Head::PdfProb || is_cdf(config.head)) {
        const std::size_t k = component_count(config);
        for (std::size_t i = 0; i < k; ++i) {
            const double m = config.mixture ? (static_cast<double>(i) + 0.5) / static_cast<double>(k) : 0.5;
            p.values[lay.unit_off(i) + lay.features] = std::log(m / (1.0 - m));
            p.values[lay.unit_off(k + i) + lay.features] = std::log(0.2 / 0.8);
        }
    }
    return p;
}

PredictiveDistribution forward(std::span<const double> x, const ModelParams& params,
                               PassMode mode, std::mt19937_64* rng) {
    check_input(x, params);
    const bool dropout = mode != PassMode::Eval && params.config.dropout > 0.0;
    if (dropout && rng == nullptr) {
        throw std::invalid_argument("dropout pass requires a random generator");
    }
    const Layout lay(params.config);
    const auto t = run_network(x, params, lay, dropout ? rng : nullptr);
    return to_distribution(activate(t.head_pre, params.config), params.config);
}

WindowPrediction predict_windows(std::span<const std::vector<double>> windows,
                                 const ModelParams& params) {
    if (windows.empty()) {
        throw std::invalid_argument("prediction needs at least one feature window");
    }
    WindowPrediction out;
    out.dist = forward(windows[0], params);
    out.passes = 1;
    if (windows.size() == 1) {
        return out;
    }
    out.dist.components.clear();
    for (std::size_t i = 1; i < windows.size(); ++i) {
        const auto d = forward(windows[i], params);
        ++out.passes;
        out.dist.mean += d.mean;
        out.dist.scale += d.scale;
        for (std::size_t c = 0; c < d.probs.size(); ++c) {
            out.dist.probs[c] += d.probs[c];
        }
    }
    const double n = static_cast<double>(windows.size());
    out.dist.mean /= n;
    out.dist.scale /= n;
    for (double& v : out.dist.probs) {
        v /= n;
    }
    return out;
}

McPrediction mc_dropout_predict(std::span<const double> x, const ModelParams& params,
                                std::size_t passes, std::mt19937_64& rng) {
    if (passes < 2) {
        throw std::invalid_argument("MC-Dropout needs at least two passes");
    }
    std::vector<double> means(passes);
    for (auto& m : means) {
        m = forward(x, params, PassMode::McSample, &rng).mean;
    }
    McPrediction out;
    out.passes = passes;
    out.mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(passes);
    // shifted sums: identical passes give exactly zero
    const double n = static_cast<double>(passes);
    double s = 0.0;
    double ss = 0.0;
    for (double m : means) {
        const double d = m - means.front();
        s += d;
        ss += d * d;
    }
    out.spread = std::sqrt(std::max(0.0, (ss - s * s / n) / (n - 1.0)));
    return out;
}

double regression_target(const TrainingTarget& t, const CategoryScheme& scheme) {
    double y = t.weights.first * scheme.center(t.a1);
    if (t.a2) {
        y += t.weights.second * scheme.center(*t.a2);
    }
    return y;
}

LossAndGradient backward(std::span<const TrainingExample> batch, const ModelParams& params,
                         std::mt19937_64* rng) {
    if (batch.empty()) {
        throw std::invalid_argument("backward needs a nonempty batch");
    }
    const Layout lay(params.config);
    LossAndGradient out;
    out.grad.assign(lay.total, 0.0);
    std::vector<double> d_pre;
    for (const auto& ex : batch) {
        check_input(ex.features, params);
        const auto t = run_network(ex.features, params, lay, rng);
        const auto hv = activate(t.head_pre, params.config);
        out.loss += head_loss(hv, ex.target, params.config, d_pre, out.diagnostics);
        accumulate_gradient(t, d_pre, params, lay, out.grad);
    }
    const double n = static_cast<double>(batch.size());
    out.loss /= n;
    for (double& g : out.grad) {
        g /= n;
    }
    return out;
}

double batch_loss(std::span<const TrainingExample> batch, const ModelParams& params) {
    if (batch.empty()) {
        throw std::invalid_argument("loss of an empty batch");
    }
    const Layout lay(params.config);
    LossDiagnostics diag;
    std::vector<double> d_pre;
    double loss = 0.0;
    for (const auto& ex : batch) {
        check_input(ex.features, params);
        const auto t = run_network(ex.features, params, lay, nullptr);
        loss += head_loss(activate(t.head_pre, params.config), ex.target, params.config, d_pre,
                          diag);
    }
    return loss / static_cast<double>(batch.size());
}

double gradient_check(const ModelParams& params, std::span<const TrainingExample> batch,
                      const GradientCheckOptions& options) {
    const auto analytic = backward(batch, params).grad;
    std::vector<std::size_t> coords(analytic.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(options.coordinates, coords.size()));

    ModelParams probe = params;
    double worst = 0.0;
    for (std::size_t i : coords) {
        const double original = probe.values[i];
        probe.values[i] = original + options.step;
        const double up = batch_loss(batch, probe);
        probe.values[i] = original - options.step;
        const double down = batch_loss(batch, probe);
        probe.values[i] = original;
        const double numeric = (up - down) / (2.0 * options.step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper, double lr) {
    if (params.size() != grads.size()) {
        throw invalid_parameter("parameter and gradient sizes differ");
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) {
        throw invalid_parameter("optimizer state does not match the parameters");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * (m_hat / (std::sqrt(v_hat) + hyper.eps) + hyper.weight_decay * params[i]);
    }
}

StepDecaySchedule::StepDecaySchedule(double initial, double factor, int period)
    : lr_(initial), factor_(factor), period_(period) {
    if (!(initial > 0.0) || !(factor > 0.0) || period < 1) {
        throw invalid_parameter("invalid learning-rate schedule");
    }
}

void StepDecaySchedule::advance() noexcept {
    ++epoch_;
    if (epoch_ % period_ == 0) {
        lr_ *= factor_;
    }
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    nlohmann::json j;
    j["format"] = "catreg-checkpoint";
    j["version"] = 1;
    j["config"] = ckpt.params.config;
    j["seed"] = ckpt.seed;
    j["params"] = ckpt.params.values;
    return j.dump() + '\n';
}

Checkpoint checkpoint_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", std::string{}) != "catreg-checkpoint" || j.value("version", 0) != 1) {
        throw std::runtime_error("not a version-1 catreg checkpoint");
    }
    Checkpoint c;
    c.params.config = j.at("config").get<ModelConfig>();
    validate(c.params.config);
    c.params.values = j.at("params").get<std::vector<double>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (c.params.values.size() != parameter_count(c.params.config)) {
        throw std::runtime_error("checkpoint parameter count does not match its configuration");
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    io::write_text(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_json(io::read_text(path));
}

}  // namespace catreg
