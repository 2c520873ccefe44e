#include "catreg/errors.hpp"
#include "catreg/interval_likelihood.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace catreg;

namespace {

const CategoryScheme kScheme;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void check_close(const std::vector<double>& got, std::initializer_list<double> want, double tol) {
    REQUIRE(got.size() == want.size());
    std::size_t i = 0;
    for (double w : want) {
        CHECK(std::fabs(got[i++] - w) <= tol);
    }
}

oracle::real numeric_mass(double mu, double s, Family f, double a, double b) {
    if (f == Family::Gaussian) {
        return oracle::integrate_split(
            [&](oracle::real z) { return oracle::gaussian_pdf(z, mu, s); }, a, b, mu, 1e-14L);
    }
    return oracle::integrate_split([&](oracle::real z) { return oracle::laplace_pdf(z, mu, s); },
                                   a, b, mu, 1e-14L);
}

}  // namespace

TEST_CASE("category scheme") {
    CHECK(kScheme.size() == 4);
    CHECK(kScheme.name(2) == "Good");
    CHECK(kScheme.center(1) == 0.375);
    CHECK(kScheme.category_of(0.25) == 0);
    CHECK(kScheme.category_of(0.2500001) == 1);
    CHECK(kScheme.category_of(1.0) == 3);
    CHECK(kScheme.category_of(0.0) == 0);
    CHECK(kScheme.category_of(-0.5) == 0);
    CHECK(kScheme.category_of(1.5) == 3);
    CHECK(kScheme.parse("Excellent") == 3);
    CHECK_THROWS((void)kScheme.parse("Great"));
    CHECK_THROWS(CategoryScheme({"a", "b"}, {0.0, 0.6, 0.5}));
    CHECK_THROWS(CategoryScheme({"a", "b"}, {0.0, 1.0}));
    for (Category c = 0; c + 1 < kScheme.size(); ++c) {
        CHECK(kScheme.upper(c) == kScheme.lower(c + 1));
    }
}

TEST_CASE("gaussian interval probabilities") {
    const auto raw = interval_probs_raw(0.55, 0.1, kScheme, Family::Gaussian);
    check_close(raw, {0.0013498790, 0.3071876407, 0.6687123293, 0.0227467343}, 1e-9);
    CHECK(sum(raw) <= 1.0);
    check_close(interval_probs(0.55, 0.1, kScheme, Family::Gaussian),
                {0.0013498837, 0.3071886903, 0.6687146141, 0.0227468120}, 1e-9);
}

TEST_CASE("laplace interval probabilities") {
    const auto raw = interval_probs_raw(0.375, 0.125, kScheme, Family::Laplace);
    check_close(raw, {0.1590461864, 0.6321205588, 0.1590461864, 0.0215245607}, 1e-9);
}

TEST_CASE("concentrated mass stays in its category") {
    check_close(interval_probs(0.375, 1e-6, kScheme, Family::Gaussian), {0.0, 1.0, 0.0, 0.0},
                1e-12);
}

TEST_CASE("interval probabilities match numeric integration") {
    for (Family f : {Family::Gaussian, Family::Laplace}) {
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 10; ++j) {
                const double mu = 0.05 + 0.1 * i;
                const double s = 0.02 + (0.5 - 0.02) * j / 9.0;
                const auto raw = interval_probs_raw(mu, s, kScheme, f);
                for (Category c = 0; c < kScheme.size(); ++c) {
                    const auto num = numeric_mass(mu, s, f, kScheme.lower(c), kScheme.upper(c));
                    CHECK(std::fabs(raw[c] - static_cast<double>(num)) <= 1e-8);
                }
            }
        }
    }
}

TEST_CASE("normalize") {
    check_close(normalize_probs(std::vector{0.25, 0.25, 0.25, 0.25}), {0.25, 0.25, 0.25, 0.25},
                0.0);
    check_close(normalize_probs(std::vector{2.0, 1.0, 1.0, 0.0}), {0.5, 0.25, 0.25, 0.0}, 0.0);
    const auto p = normalize_probs(std::vector{0.00135, 0.30719, 0.66871, 0.02275});
    check_close(p, {0.00135, 0.30719, 0.66871, 0.02275}, 1e-12);
    CHECK(std::fabs(sum(p) - 1.0) <= 1e-12);
    CHECK_THROWS_AS(normalize_probs(std::vector{0.0, 0.0}), degenerate_distribution);
    CHECK_THROWS_AS(normalize_probs(std::vector{0.5, -0.1}), invalid_parameter);
}

TEST_CASE("nonpositive scale is rejected") {
    CHECK_THROWS_AS(interval_probs_raw(0.5, 0.0, kScheme, Family::Gaussian), invalid_parameter);
    CHECK_THROWS_AS(pdf_prob_probs(0.5, -0.1, kScheme), invalid_parameter);
    CHECK_THROWS_AS(interval_probs_grad(0.5, 0.0, kScheme, Family::Laplace), invalid_parameter);
}

TEST_CASE("pdf-prob probabilities") {
    const auto p = pdf_prob_probs(0.375, 0.2, kScheme);
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);
    CHECK(p[0] == doctest::Approx(p[2]).epsilon(1e-14));
    check_close(pdf_prob_probs(0.625, 0.125, kScheme),
                {0.0002639347, 0.1064788680, 0.7867783292, 0.1064788680}, 1e-9);
    // Very small scales still normalize instead of underflowing.
    const auto sharp = pdf_prob_probs(0.61, 1e-4, kScheme);
    CHECK(sharp[2] == doctest::Approx(1.0));
}

TEST_CASE("pdf-prob is more confident than cdf-prob at a center") {
    for (Category c = 0; c < kScheme.size(); ++c) {
        const double mu = kScheme.center(c);
        CHECK(pdf_prob_probs(mu, 0.1, kScheme)[c] >
              interval_probs(mu, 0.1, kScheme, Family::Gaussian)[c]);
    }
}

TEST_CASE("argmax contains the mean") {
    for (int i = 0; i < 100; ++i) {
        const double mu = 0.005 + 0.01 * i;
        if (std::fmod(mu, 0.25) < 1e-9) {
            continue;
        }
        for (double s = 0.02; s <= 0.25; s += 0.01) {
            const auto p = interval_probs(mu, s, kScheme, Family::Gaussian);
            CHECK(static_cast<Category>(std::max_element(p.begin(), p.end()) - p.begin()) ==
                  kScheme.category_of(mu));
        }
    }
}

TEST_CASE("own-category probability falls as the scale grows") {
    for (Category c = 0; c < kScheme.size(); ++c) {
        double prev = 2.0;
        for (double s = 0.02; s <= 0.5; s += 0.02) {
            const double p = interval_probs(kScheme.center(c), s, kScheme, Family::Gaussian)[c];
            CHECK(p < prev);
            prev = p;
        }
    }
}

TEST_CASE("mixture probabilities") {
    const std::vector<MixtureComponent> one{{0.4, 0.12, 1.0}};
    const auto single = interval_probs(0.4, 0.12, kScheme, Family::Laplace);
    const auto mixed = mixture_probs(one, kScheme, Family::Laplace);
    for (Category c = 0; c < kScheme.size(); ++c) {
        CHECK(std::fabs(single[c] - mixed[c]) <= 1e-12);
    }
    const std::vector<MixtureComponent> twins{{0.4, 0.12, 0.3}, {0.4, 0.12, 0.7}};
    const auto twin = mixture_probs(twins, kScheme, Family::Laplace);
    for (Category c = 0; c < kScheme.size(); ++c) {
        CHECK(std::fabs(single[c] - twin[c]) <= 1e-12);
    }
    const std::vector<MixtureComponent> split{{0.2, 0.05, 0.5}, {0.8, 0.05, 0.5}};
    const auto p = mixture_probs(split, kScheme, Family::Gaussian);
    CHECK(p[0] == doctest::Approx(p[3]).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(p[2]).epsilon(1e-12));
    check_close(p, {0.4206698606, 0.0793301394, 0.0793301394, 0.4206698606}, 1e-9);

    CHECK_THROWS_AS(mixture_probs({}, kScheme, Family::Gaussian), invalid_parameter);
    const std::vector<MixtureComponent> bad{{0.2, 0.05, 0.5}, {0.8, 0.05, 0.49}};
    CHECK_THROWS_AS(mixture_probs(bad, kScheme, Family::Gaussian), invalid_parameter);
}

TEST_CASE("interval gradients") {
    for (Family f : {Family::Gaussian, Family::Laplace}) {
        for (double mu : {0.13, 0.375, 0.52, 0.9}) {
            for (double s : {0.03, 0.1, 0.4}) {
                const auto g = interval_probs_grad(mu, s, kScheme, f);
                CHECK(std::fabs(sum(g.d_mean)) <= 1e-10);
                CHECK(std::fabs(sum(g.d_scale)) <= 1e-10);
                for (Category c = 0; c < kScheme.size(); ++c) {
                    const double dm = oracle::central_difference(
                        [&](double m) { return interval_probs(m, s, kScheme, f)[c]; }, mu, 1e-6);
                    const double ds = oracle::central_difference(
                        [&](double v) { return interval_probs(mu, v, kScheme, f)[c]; }, s, 1e-6);
                    CHECK(oracle::relative_error(g.d_mean[c], dm, 1e-6) <= 1e-4);
                    CHECK(oracle::relative_error(g.d_scale[c], ds, 1e-6) <= 1e-4);
                }
            }
        }
    }
}

TEST_CASE("mean gradient is antisymmetric around a center") {
    const auto g = interval_probs_grad(0.375, 0.1, kScheme, Family::Gaussian);
    CHECK(g.d_mean[0] == doctest::Approx(-g.d_mean[2]).epsilon(1e-3));
    const auto raw = interval_probs_raw_grad(0.375, 0.1, kScheme, Family::Gaussian);
    CHECK(raw.d_mean[0] == doctest::Approx(-raw.d_mean[2]).epsilon(1e-12));
    CHECK(std::fabs(raw.d_mean[1]) <= 1e-12);
}

TEST_CASE("scale gradient vanishes below the floor") {
    const auto g = interval_probs_raw_grad(0.4, 1e-5, kScheme, Family::Gaussian);
    for (double d : g.d_scale) {
        CHECK(d == 0.0);
    }
}
