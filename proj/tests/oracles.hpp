#pragma once

// Independent reference computations used to freeze expected values.
// Everything here runs in long double and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

using real = long double;

/// erf(z) = 2/sqrt(pi) * exp(-z^2) * sum_n (2z^2)^n z / (1*3*...*(2n+1)).
/// Every term is positive, so there is no cancellation.
inline real erf_series(real z) {
    const real x = std::fabs(z);
    real term = x;
    real sum = x;
    for (int n = 1; n < 2000; ++n) {
        term *= 2 * x * x / (2 * n + 1);
        sum += term;
        if (term < sum * 1e-22L) {
            break;
        }
    }
    const real v = 2 / std::sqrt(std::numbers::pi_v<real>) * std::exp(-x * x) * sum;
    return z < 0 ? -v : v;
}

inline real gaussian_cdf(real z, real mean, real sd) {
    return 0.5L * (1 + erf_series((z - mean) / (sd * std::numbers::sqrt2_v<real>)));
}

inline real gaussian_pdf(real z, real mean, real sd) {
    const real t = (z - mean) / sd;
    return std::exp(-0.5L * t * t) / (sd * std::sqrt(2 * std::numbers::pi_v<real>));
}

inline real laplace_pdf(real z, real loc, real b) {
    return std::exp(-std::fabs(z - loc) / b) / (2 * b);
}

namespace detail {

inline real simpson(real fa, real fm, real fb, real a, real b) {
    return (b - a) / 6 * (fa + 4 * fm + fb);
}

inline real adaptive(const std::function<real(real)>& f, real a, real b, real fa, real fm, real fb,
                     real whole, real tol, int depth) {
    const real m = (a + b) / 2;
    const real lm = (a + m) / 2;
    const real rm = (m + b) / 2;
    const real flm = f(lm);
    const real frm = f(rm);
    const real left = simpson(fa, flm, fm, a, m);
    const real right = simpson(fm, frm, fb, m, b);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15 * tol) {
        return left + right + (left + right - whole) / 15;
    }
    return adaptive(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b].
inline real integrate(const std::function<real(real)>& f, real a, real b, real tol = 1e-13L) {
    if (b <= a) {
        return 0;
    }
    const real m = (a + b) / 2;
    const real fa = f(a);
    const real fm = f(m);
    const real fb = f(b);
    return detail::adaptive(f, a, b, fa, fm, fb, detail::simpson(fa, fm, fb, a, b), tol, 60);
}

/// Integral over [a, b] split at `kink` when it lies inside.
inline real integrate_split(const std::function<real(real)>& f, real a, real b, real kink,
                            real tol = 1e-13L) {
    if (kink > a && kink < b) {
        return integrate(f, a, kink, tol / 2) + integrate(f, kink, b, tol / 2);
    }
    return integrate(f, a, b, tol);
}

/// Central difference of f at x.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

inline double relative_error(double a, double b, double floor = 1e-12) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace oracle
