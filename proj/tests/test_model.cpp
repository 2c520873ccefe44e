#include "catreg/errors.hpp"
#include "catreg/model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace catreg;

namespace {

ModelConfig small(Head head, bool mixture = false, std::size_t k = 3) {
    ModelConfig c;
    c.input_dim = 5;
    c.hidden = {7, 6};
    c.head = head;
    c.mixture = mixture;
    c.components = k;
    return c;
}

struct Batch {
    std::vector<std::vector<double>> features;
    std::vector<TrainingExample> examples;
};

Batch make_batch(std::size_t n, std::size_t dim, std::uint64_t seed, bool dual = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> x(0.0, 1.0);
    std::uniform_int_distribution<int> c(0, 3);
    Batch b;
    b.features.resize(n, std::vector<double>(dim));
    for (auto& f : b.features) {
        for (double& v : f) {
            v = x(rng);
        }
    }
    for (const auto& f : b.features) {
        TrainingTarget t;
        t.a1 = static_cast<Category>(c(rng));
        if (dual) {
            t.a2 = static_cast<Category>(c(rng));
            t.weights = {0.5, 0.5};
        }
        b.examples.push_back({f, t});
    }
    return b;
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(validate(ModelConfig{}));
    auto c = small(Head::CdfGaussian);
    c.dropout = 1.0;
    CHECK_THROWS_AS(validate(c), invalid_parameter);
    c = small(Head::CdfGaussian);
    c.hidden = {0};
    CHECK_THROWS_AS(validate(c), invalid_parameter);
    c = small(Head::Regression, true);
    CHECK_THROWS_AS(validate(c), invalid_parameter);
    c = small(Head::CdfLaplace, true, 0);
    CHECK_THROWS_AS(validate(c), invalid_parameter);
    CHECK(parse_head("cdf-laplace") == Head::CdfLaplace);
    CHECK(to_string(Head::PdfProb) == "pdf-prob");
    CHECK_THROWS(parse_head("softmax"));
}

TEST_CASE("initialisation is deterministic") {
    const auto c = small(Head::CdfGaussian);
    const auto a = init_params(c, 3);
    const auto b = init_params(c, 3);
    const auto d = init_params(c, 4);
    CHECK(a.values == b.values);
    CHECK(a.values != d.values);
    CHECK(a.values.size() == parameter_count(c));
}

TEST_CASE("parameter shapes") {
    // Trunk 5->7->6; each head unit reads 6 features plus a bias.
    const std::size_t trunk = 5 * 7 + 7 + 7 * 6 + 6;
    CHECK(parameter_count(small(Head::Regression)) == trunk + 7);
    CHECK(parameter_count(small(Head::CdfGaussian)) == trunk + 2 * 7);
    CHECK(parameter_count(small(Head::CdfGaussian, true, 3)) == trunk + 9 * 7);
    CHECK(parameter_count(small(Head::Classification)) == trunk + 4 * 7);
}

TEST_CASE("forward outputs respect their ranges") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> x(0.0, 3.0);
    for (Head h : {Head::CdfGaussian, Head::CdfLaplace, Head::PdfProb, Head::Regression,
                   Head::Classification}) {
        const auto p = init_params(small(h), 2);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> in(5);
            for (double& v : in) {
                v = x(rng);
            }
            const auto d = forward(in, p);
            CHECK(d.mean > 0.0);
            CHECK(d.mean < 1.0);
            CHECK(std::fabs(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) - 1.0) <= 1e-12);
            for (double q : d.probs) {
                CHECK(q >= 0.0);
                CHECK(q <= 1.0);
            }
            if (h == Head::Classification) {
                for (double q : d.probs) {
                    CHECK(q > 0.0);
                    CHECK(q < 1.0);
                }
            }
            if (h == Head::CdfGaussian || h == Head::CdfLaplace || h == Head::PdfProb) {
                CHECK(d.scale >= 1e-4);
                CHECK(d.scale < 1.0);
            }
        }
    }
    CHECK_THROWS_AS(forward(std::vector<double>(4), init_params(small(Head::Regression), 1)),
                    invalid_parameter);
}

TEST_CASE("mixture weights are a distribution") {
    const auto p = init_params(small(Head::CdfLaplace, true, 4), 6);
    const auto d = forward(std::vector<double>{0.3, -1.0, 2.0, 0.1, 0.0}, p);
    REQUIRE(d.components.size() == 4);
    double total = 0.0;
    for (const auto& c : d.components) {
        CHECK(c.weight > 0.0);
        CHECK(c.weight < 1.0);
        CHECK(c.scale >= 1e-4);
        total += c.weight;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
    CHECK(d.family == Family::Laplace);
}

TEST_CASE("one-component mixture reduces to the plain head") {
    auto plain_cfg = small(Head::CdfGaussian);
    auto mix_cfg = small(Head::CdfGaussian, true, 1);
    const auto mix = init_params(mix_cfg, 9);
    ModelParams plain{plain_cfg, std::vector<double>(mix.values.begin(), mix.values.begin() +
                                                         static_cast<long>(parameter_count(plain_cfg)))};
    REQUIRE(mix.values.size() == plain.values.size() + 7);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> x(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> in(5);
        for (double& v : in) {
            v = x(rng);
        }
        const auto a = forward(in, plain);
        const auto b = forward(in, mix);
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(std::fabs(a.probs[c] - b.probs[c]) <= 1e-12);
        }
    }
}

TEST_CASE("dropout only acts when asked") {
    auto c = small(Head::Regression);
    c.dropout = 0.3;
    const auto p = init_params(c, 5);
    const std::vector<double> x{0.2, 0.4, -0.3, 1.0, 0.0};
    CHECK(forward(x, p).mean == forward(x, p).mean);
    std::mt19937_64 rng(1);
    bool differs = false;
    const double base = forward(x, p).mean;
    for (int i = 0; i < 10; ++i) {
        differs = differs || forward(x, p, PassMode::McSample, &rng).mean != base;
    }
    CHECK(differs);
    CHECK_THROWS(forward(x, p, PassMode::Train, nullptr));
}

TEST_CASE("mc dropout") {
    auto c = small(Head::Regression);
    const std::vector<double> x{0.2, 0.4, -0.3, 1.0, 0.0};
    std::mt19937_64 rng(1);
    const auto none = mc_dropout_predict(x, init_params(c, 5), 7, rng);
    CHECK(none.spread == 0.0);
    CHECK(none.passes == 7);
    CHECK_THROWS(mc_dropout_predict(x, init_params(c, 5), 1, rng));

    c.dropout = 0.1;
    const auto p = init_params(c, 5);
    std::mt19937_64 r1(42);
    std::mt19937_64 r2(42);
    const auto a = mc_dropout_predict(x, p, 20, r1);
    const auto b = mc_dropout_predict(x, p, 20, r2);
    CHECK(a.mean == b.mean);
    CHECK(a.spread == b.spread);
    CHECK(a.spread > 0.0);

    std::mt19937_64 r3(7);
    const auto h1 = mc_dropout_predict(x, p, 500, r3);
    const auto h2 = mc_dropout_predict(x, p, 500, r3);
    const double se = std::sqrt(h1.spread * h1.spread / 500 + h2.spread * h2.spread / 500);
    CHECK(std::fabs(h1.mean - h2.mean) <= 3.0 * se);
}

TEST_CASE("window averaging is order free") {
    const auto p = init_params(small(Head::CdfGaussian), 2);
    std::vector<std::vector<double>> w{{0.1, 0.2, 0.3, 0.4, 0.5}, {1.0, -1.0, 0.0, 0.5, 2.0},
                                       {-0.3, 0.0, 0.7, 0.2, 0.1}};
    const auto a = predict_windows(w, p);
    std::swap(w[0], w[2]);
    const auto b = predict_windows(w, p);
    CHECK(a.dist.mean == doctest::Approx(b.dist.mean).epsilon(1e-15));
    CHECK(a.passes == 3);
    double m = 0.0;
    for (const auto& x : w) {
        m += forward(x, p).mean;
    }
    CHECK(a.dist.mean == doctest::Approx(m / 3.0).epsilon(1e-14));
}

TEST_CASE("regression target") {
    const CategoryScheme s;
    CHECK(regression_target({1, 2, {0.5, 0.5}}, s) == 0.5);
    CHECK(regression_target({3, std::nullopt, {}}, s) == 0.875);
    CHECK(regression_target({0, 3, {0.0, 1.0}}, s) == 0.875);
}

TEST_CASE("analytic gradients match finite differences") {
    const auto batch = make_batch(6, 5, 31);
    for (Head h : {Head::CdfGaussian, Head::CdfLaplace, Head::PdfProb, Head::Regression,
                   Head::Classification}) {
        CAPTURE(to_string(h));
        CHECK(gradient_check(init_params(small(h), 4), batch.examples) <= 1e-4);
    }
    for (Head h : {Head::CdfGaussian, Head::CdfLaplace}) {
        CHECK(gradient_check(init_params(small(h, true, 3), 4), batch.examples) <= 1e-4);
    }
    const auto single = make_batch(6, 5, 32, false);
    CHECK(gradient_check(init_params(small(Head::CdfGaussian), 8), single.examples) <= 1e-4);
}

TEST_CASE("duplicating a batch leaves the gradient unchanged") {
    const auto batch = make_batch(5, 5, 2);
    std::vector<TrainingExample> twice = batch.examples;
    twice.insert(twice.end(), batch.examples.begin(), batch.examples.end());
    const auto p = init_params(small(Head::CdfLaplace, true, 2), 1);
    const auto a = backward(batch.examples, p);
    const auto b = backward(twice, p);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    for (std::size_t i = 0; i < a.grad.size(); ++i) {
        CHECK(a.grad[i] == doctest::Approx(b.grad[i]).epsilon(1e-12));
    }
    CHECK_THROWS(backward(std::span<const TrainingExample>{}, p));
}

TEST_CASE("scale head is stationary at the matching spread") {
    // At x = 0 the trunk is silent, so the head sees only its biases:
    // mean 0.5 and scale 0.2. A target of 0.3 makes the residual equal the
    // scale, where the data term cancels the log-scale term.
    auto c = small(Head::PdfProb);
    c.scheme = CategoryScheme({"lo", "hi"}, {0.0, 0.6, 1.0});
    const auto p = init_params(c, 3);
    const std::vector<double> x(5, 0.0);
    const auto d = forward(x, p);
    REQUIRE(d.mean == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(d.scale == doctest::Approx(0.2).epsilon(1e-12));
    const std::vector<TrainingExample> batch{{x, {0, std::nullopt, {}}}};
    const auto g = backward(batch, p);
    CHECK(std::fabs(g.grad[parameter_count(c) - 1]) <= 1e-10);
    CHECK(std::fabs(g.grad[parameter_count(c) - 8]) > 1e-3);
}

TEST_CASE("adam") {
    std::vector<double> theta{1.0, -2.0};
    const std::vector<double> zero{0.0, 0.0};
    AdamState st;
    AdamHyper h;
    h.weight_decay = 0.0;
    adam_step(theta, zero, st, h, 0.1);
    CHECK(theta == std::vector<double>{1.0, -2.0});

    std::vector<double> w{0.0, 0.0};
    const std::vector<double> g{0.3, -5.0};
    AdamState s2;
    for (int i = 0; i < 200; ++i) {
        const auto before = w;
        adam_step(w, g, s2, h, 1e-3);
        CHECK(w[0] - before[0] == doctest::Approx(-1e-3).epsilon(1e-5));
        CHECK(w[1] - before[1] == doctest::Approx(1e-3).epsilon(1e-5));
    }

    std::vector<double> decay{2.0};
    AdamState s3;
    AdamHyper hd;
    hd.weight_decay = 0.1;
    adam_step(decay, std::vector<double>{0.0}, s3, hd, 0.5);
    CHECK(decay[0] == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0).epsilon(1e-15));
    CHECK_THROWS(adam_step(decay, g, s3, hd, 0.5));
}

TEST_CASE("step decay schedule") {
    StepDecaySchedule s(2.5e-4, 0.91, 2);
    CHECK(s.lr() == 2.5e-4);
    s.advance();
    CHECK(s.lr() == 2.5e-4);
    s.advance();
    CHECK(s.lr() == doctest::Approx(2.5e-4 * 0.91).epsilon(1e-15));
    for (int e = 2; e < 100; ++e) {
        s.advance();
    }
    CHECK(s.epoch() == 100);
    CHECK(std::fabs(s.lr() - 2.5e-4 * std::pow(0.91, 50)) <= 1e-12);
    CHECK(2.5e-4 / s.lr() == doctest::Approx(111.67).epsilon(1e-4));
}

TEST_CASE("checkpoint round trip") {
    auto c = small(Head::CdfLaplace, true, 2);
    c.dropout = 0.05;
    Checkpoint ck{init_params(c, 77), 77};
    ck.params.values[0] = 0.1 + 0.2;
    ck.params.values[1] = -1e-300;
    const auto path = std::filesystem::temp_directory_path() / "catreg_ckpt_test.json";
    save_checkpoint(path, ck);
    const auto back = load_checkpoint(path);
    CHECK(back.seed == 77);
    CHECK(back.params.config == c);
    CHECK(back.params.values == ck.params.values);
    std::filesystem::remove(path);
    CHECK_THROWS(checkpoint_from_json(R"({"format":"other","version":1})"));
    CHECK_THROWS(load_checkpoint("/nonexistent/ckpt.json"));
}
