#pragma once

// Bessel J0 machinery for corrugation amplitudes: J0, its first zero, the
// inverse of J0 on [0, kappa0), and antiderivatives of cos/sin(alpha cos 2 pi s).

namespace corrhyp {

// First positive zero of J0, computed once to double precision.
double kappa0();

// J0(x) by power series, summed in long double. Absolute error below 1e-13
// for |x| <= 12, which covers every call site here (arguments stay below
// kappa0 in the corrugation code and below 10 in tests).
double bessel_j0(double x);

// J1(x); J0'(x) = -J1(x).
double bessel_j1(double x);

// Inverse of the decreasing branch J0 : [0, kappa0] -> [0, 1].
// y must lie in (0, 1]; the bracket is bisected to width 1e-13.
double bessel_j0_inv(double y);

struct LoopIntegrals {
    double c = 0.0;  // integral of cos(alpha cos 2 pi s) over [0, x]
    double s = 0.0;  // integral of sin(alpha cos 2 pi s) over [0, x]
};

// Both antiderivatives at once, via the Bessel harmonic expansion of the
// integrand. Cost does not depend on floor(x): whole periods contribute
// exactly (J0(alpha), 0) each. alpha must lie in [0, kappa0).
LoopIntegrals loop_integrals(double alpha, double x);

// Same, but with the linear-in-x average removed from the first component:
// c_tilde = C(x) - x J0(alpha). This is exactly 1-periodic in x, which is the
// form the corrugation update needs (no cancellation at large x).
LoopIntegrals loop_integrals_centered(double alpha, double x);

}  // namespace corrhyp
