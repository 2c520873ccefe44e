#include "catreg/dist.hpp"

#include "catreg/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace catreg {

namespace {

// Coefficients of Cody's rational approximations (CALERF).
constexpr std::array<double, 5> kA = {
    3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
    3.20937758913846947e03, 1.85777706184603153e-1};
constexpr std::array<double, 4> kB = {
    2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
    2.84423683343917062e03};
constexpr std::array<double, 9> kC = {
    5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
    2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
    2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8};
constexpr std::array<double, 8> kD = {
    1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
    1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
    3.43936767414372164e03, 1.23033935480374942e03};
constexpr std::array<double, 6> kP = {
    3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
    1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr std::array<double, 5> kQ = {
    2.56852019228982242e00, 1.87295284992346725e00, 5.27905102951428412e-1,
    6.05183413124413191e-2, 2.33520497626869185e-3};

constexpr double kThreshold = 0.46875;
constexpr double kInvSqrtPi = 5.6418958354775628695e-1;
constexpr double kXBig = 26.543;

// erf(x) for |x| <= kThreshold.
double erf_small(double x) noexcept {
    const double y = std::abs(x);
    const double ysq = y > 1.11e-16 ? y * y : 0.0;
    double num = kA[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
        num = (num + kA[i]) * ysq;
        den = (den + kB[i]) * ysq;
    }
    return x * (num + kA[3]) / (den + kB[3]);
}

// erfc(y) for y > kThreshold.
double erfc_positive(double y) noexcept {
    if (y >= kXBig) {
        return 0.0;
    }
    double result;
    if (y <= 4.0) {
        double num = kC[8] * y;
        double den = y;
        for (int i = 0; i < 7; ++i) {
            num = (num + kC[i]) * y;
            den = (den + kD[i]) * y;
        }
        result = (num + kC[7]) / (den + kD[7]);
    } else {
        const double ysq = 1.0 / (y * y);
        double num = kP[5] * ysq;
        double den = ysq;
        for (int i = 0; i < 4; ++i) {
            num = (num + kP[i]) * ysq;
            den = (den + kQ[i]) * ysq;
        }
        result = ysq * (num + kP[4]) / (den + kQ[4]);
        result = (kInvSqrtPi - result) / y;
    }
    // Split exp(-y*y) to limit cancellation error in the exponent.
    const double ysq = std::trunc(y * 16.0) / 16.0;
    const double del = (y - ysq) * (y + ysq);
    return std::exp(-ysq * ysq) * std::exp(-del) * result;
}

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double erf(double z) noexcept {
    const double y = std::abs(z);
    if (y <= kThreshold) {
        return erf_small(z);
    }
    const double r = (0.5 - erfc_positive(y)) + 0.5;
    return z < 0.0 ? -r : r;
}

double erfc(double z) noexcept {
    const double y = std::abs(z);
    if (y <= kThreshold) {
        return 1.0 - erf_small(z);
    }
    const double r = erfc_positive(y);
    return z < 0.0 ? 2.0 - r : r;
}

double gaussian_cdf(double z, const GaussianParams& p) noexcept {
    // 0.5 * (1 + erf(t)) written through erfc keeps the lower tail accurate.
    const double t = (z - p.mean) / (p.stddev * std::numbers::sqrt2);
    return clamp01(0.5 * erfc(-t));
}

double gaussian_pdf(double z, const GaussianParams& p) noexcept {
    return std::exp(gaussian_logpdf(z, p));
}

double gaussian_logpdf(double z, const GaussianParams& p) noexcept {
    const double u = (z - p.mean) / p.stddev;
    return -0.5 * u * u - std::log(p.stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double laplace_cdf(double z, const LaplaceParams& p) noexcept {
    // Branches of 0.5 * (1 + sgn(d) * (1 - exp(-|d| / b))), each written
    // without the cancellation of the combined form.
    const double d = z - p.location;
    if (d < 0.0) {
        return clamp01(0.5 * std::exp(d / p.scale));
    }
    return clamp01(1.0 - 0.5 * std::exp(-d / p.scale));
}

double laplace_pdf(double z, const LaplaceParams& p) noexcept {
    return std::exp(-std::abs(z - p.location) / p.scale) / (2.0 * p.scale);
}

void validate(const GaussianParams& p) {
    if (!std::isfinite(p.mean) || !std::isfinite(p.stddev) || !(p.stddev > 0.0)) {
        throw invalid_parameter("Gaussian requires finite mean and positive stddev");
    }
}

void validate(const LaplaceParams& p) {
    if (!std::isfinite(p.location) || !std::isfinite(p.scale) || !(p.scale > 0.0)) {
        throw invalid_parameter("Laplace requires finite location and positive scale");
    }
}

}  // namespace catreg
