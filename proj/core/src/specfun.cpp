#include "corrhyp/specfun.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace corrhyp {

namespace {

long double j0_series(long double x) {
    const long double q = 0.25L * x * x;
    long double term = 1.0L, sum = 1.0L;
    for (int m = 1; m <= 120; ++m) {
        term *= -q / (static_cast<long double>(m) * m);
        sum += term;
        if (std::fabs(term) < 1e-19L * (1.0L + std::fabs(sum))) break;
    }
    return sum;
}

long double j1_series(long double x) {
    const long double q = 0.25L * x * x;
    long double term = 0.5L * x, sum = term;
    for (int m = 1; m <= 120; ++m) {
        term *= -q / (static_cast<long double>(m) * (m + 1));
        sum += term;
        if (std::fabs(term) < 1e-19L * (1.0L + std::fabs(sum))) break;
    }
    return sum;
}

// J_n(x) for n >= 0 by its power series; fine for the small arguments used
// by the harmonic expansion (x < kappa0, n <= ~25).
long double jn_series(int n, long double x) {
    const long double h = 0.5L * x;
    long double lead = 1.0L;
    for (int i = 1; i <= n; ++i) lead *= h / i;
    const long double q = h * h;
    long double term = lead, sum = lead;
    for (int m = 1; m <= 60; ++m) {
        term *= -q / (static_cast<long double>(m) * (m + n));
        sum += term;
        if (std::fabs(term) < 1e-22L * (1.0L + std::fabs(sum))) break;
    }
    return sum;
}

void check_finite(double x, const char* who) {
    if (!std::isfinite(x)) throw std::domain_error(std::string(who) + ": non-finite argument");
}

}  // namespace

double bessel_j0(double x) {
    check_finite(x, "bessel_j0");
    return static_cast<double>(j0_series(x));
}

double bessel_j1(double x) {
    check_finite(x, "bessel_j1");
    return static_cast<double>(j1_series(x));
}

double kappa0() {
    static const double k0 = [] {
        // Bracket the first sign change, then polish with Newton in long double.
        long double lo = 2.0L, hi = 3.0L;
        for (int i = 0; i < 80; ++i) {
            const long double mid = 0.5L * (lo + hi);
            if (j0_series(mid) > 0.0L)
                lo = mid;
            else
                hi = mid;
        }
        long double z = 0.5L * (lo + hi);
        for (int i = 0; i < 4; ++i) z += j0_series(z) / j1_series(z);
        return static_cast<double>(z);
    }();
    return k0;
}

double bessel_j0_inv(double y) {
    check_finite(y, "bessel_j0_inv");
    if (!(y > 0.0) || y > 1.0) throw std::domain_error("bessel_j0_inv: y must lie in (0, 1]");
    if (y == 1.0) return 0.0;
    double lo = 0.0, hi = kappa0();  // J0(lo) >= y >= J0(hi)
    for (int i = 0; i < 8; ++i) {    // localize before switching to Newton
        const double mid = 0.5 * (lo + hi);
        if (bessel_j0(mid) >= y)
            lo = mid;
        else
            hi = mid;
    }
    // J0 is strictly decreasing here with J0' = -J1 < 0; guarded Newton
    // keeps the bracket and falls back to bisection when a step escapes it.
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 40 && hi - lo > 1e-15; ++i) {
        const double f = bessel_j0(x) - y;
        if (f >= 0.0)
            lo = x;
        else
            hi = x;
        const double slope = bessel_j1(x);
        double next = slope > 0.0 ? x + f / slope : 0.5 * (lo + hi);
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-16 * (1.0 + x)) return next;
        x = next;
    }
    return x;
}

namespace {

// Oscillatory parts of the two antiderivatives on the fractional period
// t in [0, 1): C(t) - t J0(alpha) and S(t). Coefficients are J_n(alpha),
// truncated once they fall below 1e-14 (alpha < kappa0 so they decay fast).
void centered_series(double alpha, double t, double& c_tilde, double& s) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    c_tilde = 0.0;
    s = 0.0;
    double sign = -1.0;  // (-1)^m
    for (int m = 1; m <= 40; ++m) {
        const double j_even = static_cast<double>(jn_series(2 * m, alpha));
        const double j_odd = static_cast<double>(jn_series(2 * m - 1, alpha));
        const double sign_odd = (m % 2 == 1) ? 1.0 : -1.0;  // (-1)^(m-1)
        c_tilde += sign * j_even * std::sin(two_pi * 2 * m * t) / (std::numbers::pi * 2 * m);
        s += sign_odd * j_odd * std::sin(two_pi * (2 * m - 1) * t) /
             (std::numbers::pi * (2 * m - 1));
        if (std::fabs(j_even) < 1e-14 && std::fabs(j_odd) < 1e-14 && m >= 3) break;
        sign = -sign;
    }
}

}  // namespace

LoopIntegrals loop_integrals_centered(double alpha, double x) {
    check_finite(alpha, "loop_integrals");
    check_finite(x, "loop_integrals");
    if (alpha < 0.0 || alpha >= kappa0())
        throw std::domain_error("loop_integrals: alpha must lie in [0, kappa0)");
    const double t = x - std::floor(x);
    LoopIntegrals out;
    if (alpha == 0.0) return out;  // integrand is exactly (1, 0)
    centered_series(alpha, t, out.c, out.s);
    return out;
}

LoopIntegrals loop_integrals(double alpha, double x) {
    LoopIntegrals osc = loop_integrals_centered(alpha, x);
    const double j0a = bessel_j0(alpha);
    return {osc.c + x * j0a, osc.s};
}

}  // namespace corrhyp
