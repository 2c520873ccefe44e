#pragma once

// Special functions and the two error-model distributions used by the
// interval likelihood: Gaussian and Laplace location-scale families.

namespace catreg {

struct GaussianParams {
    double mean = 0.0;
    double stddev = 1.0;
};

struct LaplaceParams {
    double location = 0.0;
    double scale = 1.0;
};

/// Error function. Rational Chebyshev approximation (W. J. Cody, 1969),
/// absolute error well below 1e-15 over the real line.
double erf(double z) noexcept;

/// Complementary error function, accurate in the upper tail.
double erfc(double z) noexcept;

double gaussian_cdf(double z, const GaussianParams& p) noexcept;
double gaussian_pdf(double z, const GaussianParams& p) noexcept;
double gaussian_logpdf(double z, const GaussianParams& p) noexcept;

double laplace_cdf(double z, const LaplaceParams& p) noexcept;
double laplace_pdf(double z, const LaplaceParams& p) noexcept;

/// Throws invalid_parameter unless the scale is positive and both fields finite.
void validate(const GaussianParams& p);
void validate(const LaplaceParams& p);

}  // namespace catreg
