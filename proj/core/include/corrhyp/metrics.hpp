#pragma once

#include <cstdint>

#include "corrhyp/geom.hpp"

// Metric side of the construction: the hyperbolic target metric on the
// annulus rho0 <= rho <= 1, the explicit initial spiraling bowl pullback,
// the polynomial ladder of intermediate metrics connecting them, and the
// fixed three-wavefront system whose squared length forms span symmetric
// forms near the ladder increments.

namespace corrhyp {

// Slope of the angular wavefronts; 2 pi a = 7 turns the two oblique families
// into closed curves on the quotient annulus.
inline constexpr double slope_a() { return 7.0 / 6.283185307179586476925286766559; }

// The three wavefront families, their kernel vectors w_i and transverse
// vectors v_i, normalized so ell_i(v_i) = 1 and (v_i, w_i) is direct.
// Indices are circular with period 3: index 0 means family 3.
struct WavefrontSystem {
    // ell_1 = -drho, ell_2 = drho - a dphi, ell_3 = drho + a dphi
    static Covec2 ell(int i);
    static Vec2 w_vec(int i);
    static Vec2 v_vec(int i);
    static double phase(int i, double rho, double phi);  // the primitive of ell_i
};

// Coordinates of a symmetric form in the basis ell_i (x) ell_i.
struct ConeCoords {
    double eta1 = 0.0;
    double eta2 = 0.0;
    double eta3 = 0.0;

    double min() const { return eta1 < eta2 ? (eta1 < eta3 ? eta1 : eta3) : (eta2 < eta3 ? eta2 : eta3); }
    bool strictly_positive() const { return eta1 > 0.0 && eta2 > 0.0 && eta3 > 0.0; }
};

// Unique eta with b = sum eta_i ell_i (x) ell_i.
ConeCoords h_coords(SymForm2 b);

// Inverse of h_coords.
SymForm2 cone_reconstruct(ConeCoords c);

// Hyperbolic plane metric in Poincare disk polar coordinates; rho in (0, 1).
SymForm2 h_metric(double rho);

// Pullback of the initial bowl embedding; valid for rho in [0, 1] plus a
// small overhang past the rim for stencil margin rows.
SymForm2 pullback_f0(double rho);

// Default deficit h - f0pullback; rho in (0, 1).
SymForm2 isometric_deficit(double rho);

// Intermediate metric g_k = f0pullback + (truncated deficit), k >= 0. g_0 is
// the pullback itself; g_k -> h as k grows on [0, 1), and the polynomial form
// extends to the same overhang as pullback_f0.
SymForm2 metric_ladder(int k, double rho);

// Cone coordinates of the ladder increment g_k - g_{k-1}, k >= 1, in closed
// form: eta_1 = 4 rho^(2k+2) (k+2 - (k+1)/a^2), eta_2 = eta_3 =
// 4 rho^(2k+2) (k+1) / (2 a^2). Strictly positive on rho > 0 since a > 1.
ConeCoords ladder_increment_coords(int k, double rho);

struct OperatorNorms {
    double h_max = 0.0;  // max over i of the operator norm of H_i
    double c_h = 0.0;    // 1 + h_max (|ell_2^2| + |ell_3^2|)
};

// Operator norms of the coordinate functionals H_i over unit spectral norm
// forms, estimated by dense random sampling plus local refinement. Seeded and
// deterministic; accuracy about 1e-3, which is all the sufficient-condition
// bookkeeping needs.
OperatorNorms hmax_and_ch(int samples = 100000, std::uint64_t seed = 0x5eedULL);

}  // namespace corrhyp
