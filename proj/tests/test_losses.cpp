#include "catreg/errors.hpp"
#include "catreg/interval_likelihood.hpp"
#include "catreg/io.hpp"
#include "catreg/losses.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace catreg;

TEST_CASE("heteroscedastic nll values") {
    CHECK(nll_heteroscedastic(0.4, 0.4, 1.0) == 0.0);
    CHECK(nll_heteroscedastic(0.5, 0.3, 0.5) == doctest::Approx(-0.6131471805599453).epsilon(1e-12));
    for (double s : {0.01, 0.3, 2.0}) {
        CHECK(nll_heteroscedastic(0.2 + s, 0.2, s) ==
              doctest::Approx(0.5 + std::log(s)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(nll_heteroscedastic(0.5, 0.5, 0.0), invalid_parameter);
    const std::vector<double> y{0.1, 0.5}, m{0.2, 0.5}, s{0.5, 1.0};
    CHECK(nll_heteroscedastic_mean(y, m, s) ==
          doctest::Approx(0.5 * (nll_heteroscedastic(0.1, 0.2, 0.5) + 0.0)));
}

TEST_CASE("nll gradients") {
    for (double y : {0.1, 0.65}) {
        for (double mu : {0.2, 0.55}) {
            for (double s : {0.05, 0.3}) {
                const auto t = nll_heteroscedastic_with_grad(y, mu, s);
                CHECK(t.d_mean == doctest::Approx((mu - y) / (s * s)).epsilon(1e-14));
                CHECK(t.d_scale ==
                      doctest::Approx(1.0 / s - (y - mu) * (y - mu) / (s * s * s)).epsilon(1e-14));
                const double dm = oracle::central_difference(
                    [&](double v) { return nll_heteroscedastic(y, v, s); }, mu, 1e-6);
                const double ds = oracle::central_difference(
                    [&](double v) { return nll_heteroscedastic(y, mu, v); }, s, 1e-7);
                CHECK(oracle::relative_error(t.d_mean, dm) <= 1e-5);
                CHECK(oracle::relative_error(t.d_scale, ds) <= 1e-5);
            }
        }
    }
}

TEST_CASE("nll minimiser is the sample mean and deviation") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> draw(0.4, 0.12);
    std::vector<double> y(200);
    for (double& v : y) {
        v = draw(rng);
    }
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(y.size()));

    // Full-batch gradient descent in (mu, log sigma).
    double mu = 0.0;
    double log_s = 0.0;
    for (int it = 0; it < 20000; ++it) {
        double gm = 0.0;
        double gs = 0.0;
        const double s = std::exp(log_s);
        for (double v : y) {
            const auto t = nll_heteroscedastic_with_grad(v, mu, s);
            gm += t.d_mean;
            gs += t.d_scale * s;
        }
        mu -= 0.5 * s * s * gm / static_cast<double>(y.size());
        log_s -= 0.2 * gs / static_cast<double>(y.size());
    }
    CHECK(std::fabs(mu - mean) <= 1e-6);
    CHECK(std::fabs(std::exp(log_s) - sd) <= 1e-6);
}

TEST_CASE("dual-label cross entropy") {
    const std::vector<double> uniform(4, 0.25);
    for (GroundTruthWeights w : {GroundTruthWeights{0.5, 0.5}, GroundTruthWeights{1.0, 0.0},
                                 GroundTruthWeights{0.0, 1.0}}) {
        CHECK(xent_dual_label(uniform, 0, 3, w) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    }
    const std::vector<double> p{0.00135, 0.30720, 0.66874, 0.02275};
    CHECK(xent_dual_label(p, 2, 1, {0.5, 0.5}) == doctest::Approx(0.7913081059).epsilon(1e-9));
    CHECK(xent_dual_label(p, 2, 2, {0.5, 0.5}) == doctest::Approx(0.4023599342).epsilon(1e-9));
    CHECK(xent_dual_label(p, 2, std::nullopt, {1.0, 0.0}) ==
          doctest::Approx(-std::log(0.66874)));
}

TEST_CASE("cross entropy clamps zero probabilities and counts them") {
    const std::vector<double> p{0.0, 0.5, 0.5, 0.0};
    LossDiagnostics d;
    const double loss = xent_dual_label(p, 0, 1, {0.5, 0.5}, &d);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(-0.5 * std::log(kLogFloor) - 0.5 * std::log(0.5)));
    CHECK(d.evaluations == 1);
    CHECK(d.clamped_logs == 1);
    const auto g = xent_dual_label_grad(p, 0, 1, {0.5, 0.5});
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(-1.0));
}

TEST_CASE("cross entropy gradient through the interval probabilities") {
    const CategoryScheme scheme;
    for (Family f : {Family::Gaussian, Family::Laplace}) {
        for (double mu : {0.2, 0.47, 0.81}) {
            for (double s : {0.04, 0.15, 0.45}) {
                const auto loss = [&](double m, double v) {
                    return xent_dual_label(interval_probs(m, v, scheme, f), 1, 2, {0.5, 0.5});
                };
                const auto p = interval_probs(mu, s, scheme, f);
                const auto dp = xent_dual_label_grad(p, 1, 2, {0.5, 0.5});
                const auto g = interval_probs_grad(mu, s, scheme, f);
                double dm = 0.0;
                double ds = 0.0;
                for (Category c = 0; c < scheme.size(); ++c) {
                    dm += dp[c] * g.d_mean[c];
                    ds += dp[c] * g.d_scale[c];
                }
                const double fdm = oracle::central_difference(
                    [&](double m) { return loss(m, s); }, mu, 1e-6);
                const double fds = oracle::central_difference(
                    [&](double v) { return loss(mu, v); }, s, 1e-6);
                CHECK(oracle::relative_error(dm, fdm, 1e-6) <= 1e-4);
                CHECK(oracle::relative_error(ds, fds, 1e-6) <= 1e-4);
            }
        }
    }
}

TEST_CASE("cross entropy equals label-distribution KL up to a constant") {
    // KL(q || p) = sum q ln q - sum q ln p; the first term does not depend on p.
    const std::vector<double> p1{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> p2{0.25, 0.25, 0.4, 0.1};
    const auto kl = [](const std::vector<double>& p) {
        return 0.5 * std::log(0.5 / p[1]) + 0.5 * std::log(0.5 / p[2]);
    };
    const double x1 = xent_dual_label(p1, 1, 2, {0.5, 0.5});
    const double x2 = xent_dual_label(p2, 1, 2, {0.5, 0.5});
    CHECK(x1 - kl(p1) == doctest::Approx(x2 - kl(p2)).epsilon(1e-14));
    CHECK(x1 - kl(p1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("ground truth weights") {
    std::mt19937_64 rng(11);
    const auto agt = ground_truth_weights(GroundTruthMode::Average, rng);
    CHECK(agt.first == 0.5);
    CHECK(agt.second == 0.5);
    const auto single = ground_truth_weights(GroundTruthMode::Single, rng);
    CHECK(single.first == 1.0);
    CHECK(single.second == 0.0);

    std::size_t firsts = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        const auto w = ground_truth_weights(GroundTruthMode::Stochastic, rng);
        CHECK(w.first + w.second == 1.0);
        CHECK((w.first == 0.0 || w.first == 1.0));
        firsts += w.first == 1.0 ? 1 : 0;
    }
    CHECK(std::fabs(static_cast<double>(firsts) / n - 0.5) <= 0.01);

    std::mt19937_64 a(3);
    std::mt19937_64 b(3);
    CHECK(ground_truth_weights(GroundTruthMode::Stochastic, a).first ==
          ground_truth_weights(GroundTruthMode::Stochastic, b).first);
}

TEST_CASE("sgt with equal labels matches agt") {
    const std::vector<double> p{0.1, 0.2, 0.6, 0.1};
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const auto w = ground_truth_weights(GroundTruthMode::Stochastic, rng);
        CHECK(xent_dual_label(p, 2, 2, w) == xent_dual_label(p, 2, 2, {0.5, 0.5}));
    }
}

TEST_CASE("agt is stable and sgt fluctuates around it") {
    const std::vector<double> p{0.05, 0.35, 0.5, 0.1};
    std::mt19937_64 rng(17);
    const double agt = xent_dual_label(p, 1, 2, {0.5, 0.5});
    std::vector<double> sgt;
    for (int i = 0; i < 1000; ++i) {
        CHECK(xent_dual_label(p, 1, 2, ground_truth_weights(GroundTruthMode::Average, rng)) == agt);
        sgt.push_back(xent_dual_label(p, 1, 2, ground_truth_weights(GroundTruthMode::Stochastic, rng)));
    }
    double mean = 0.0;
    for (double v : sgt) {
        mean += v;
    }
    mean /= 1000.0;
    double var = 0.0;
    for (double v : sgt) {
        var += (v - mean) * (v - mean);
    }
    var /= 999.0;
    CHECK(var > 0.0);
    CHECK(std::fabs(mean - agt) <= 3.0 * std::sqrt(var / 1000.0));
}

TEST_CASE("ground truth mode names") {
    CHECK(parse_ground_truth_mode("agt") == GroundTruthMode::Average);
    CHECK(parse_ground_truth_mode("sgt") == GroundTruthMode::Stochastic);
    CHECK(parse_ground_truth_mode("single") == GroundTruthMode::Single);
    CHECK(to_string(GroundTruthMode::Stochastic) == "sgt");
    CHECK_THROWS(parse_ground_truth_mode("mean"));
}

TEST_CASE("agt/sgt surface") {
    const auto mid = agt_sgt_surface(0.5);
    CHECK(mid.red == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(mid.yellow == mid.red);
    CHECK(mid.blue == mid.red);
    const auto p8 = agt_sgt_surface(0.8);
    CHECK(p8.red == doctest::Approx(0.2231435513).epsilon(1e-10));
    CHECK(p8.yellow == doctest::Approx(1.6094379124).epsilon(1e-10));
    CHECK(p8.blue == doctest::Approx(0.9162907319).epsilon(1e-10));
    CHECK_THROWS_AS(agt_sgt_surface(0.0), invalid_parameter);
    CHECK_THROWS_AS(agt_sgt_surface(1.0), invalid_parameter);

    const auto grid = agt_sgt_surface_grid();
    REQUIRE(grid.size() == 999);
    CHECK(grid.front().p_plus == doctest::Approx(0.001));
    CHECK(grid.back().p_plus == doctest::Approx(0.999));
    const auto best = std::min_element(grid.begin(), grid.end(),
                                       [](const auto& a, const auto& b) { return a.blue < b.blue; });
    CHECK(best->p_plus == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("loss surface csv") {
    const auto path = std::filesystem::temp_directory_path() / "catreg_surface_test.csv";
    write_loss_surface_csv(path, agt_sgt_surface_grid());
    std::istringstream in(io::read_text(path));
    std::string line;
    std::getline(in, line);
    CHECK(line == "p_plus,red,yellow,blue");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const auto cols = io::split(line, ',');
        REQUIRE(cols.size() == 4);
        const auto pt = agt_sgt_surface(io::parse_double(cols[0]));
        CHECK(io::parse_double(cols[3]) == pt.blue);
        ++rows;
    }
    CHECK(rows == 999);
    std::filesystem::remove(path);
    CHECK_THROWS(write_loss_surface_csv("/nonexistent-dir/x.csv", agt_sgt_surface_grid()));
}
