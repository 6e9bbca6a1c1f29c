#pragma once

#include <array>
#include <utility>
#include <vector>

#include "corrhyp/geom.hpp"
#include "corrhyp/metrics.hpp"

// Pointwise analogue of the corrugation pipeline acting on monomorphism
// fields. Every operation here is closed-form in (stage, rho, phi): no grids,
// no finite differences, and the pullback is exact at every stage. The
// corrugation numbers enter only through loop phases and through the gcd
// structure governing periodicity and self-similarity.

namespace corrhyp {

// Corrugation-number table, one row of three entries per stage. The gcds
// control the rotational symmetry of normal patterns: m() over all entries,
// l() over the oblique entries only, l_trunc(j) over oblique entries of
// stages j and later.
struct FormalSchedule {
    std::vector<std::array<long, 3>> n;

    int depth() const { return static_cast<int>(n.size()); }
    long at(int k, int i) const;  // 1-based stage and direction

    long m() const;
    long l() const { return l_trunc(1); }
    // gcd of N_{k,2}, N_{k,3} over k >= j; zero when the range is empty.
    // Non-decreasing in j, and divisible by l() and m().
    long l_trunc(int j) const;

    // Entries must be positive. Throws ConfigError.
    void validate() const;
};

// One point of the formal flow. stage_i = 0 marks stage entry, where mu is
// the previous ladder metric; after direction i acts, mu gains the i-th
// increment. frame is adapted to the direction the next step will corrugate.
struct FormalPoint {
    double rho = 0.0;
    double phi = 0.0;
    int stage_k = 1;
    int stage_i = 0;
    LinMap23 map;
    Frame3 frame;
    SymForm2 mu;
};

// The partial metric g_{k-1} + sum_{j<=i} H_j(g_k - g_{k-1}) ell_j (x) ell_j;
// i = 0 gives g_{k-1}, i = 3 gives g_k.
SymForm2 mu_phi(int k, int i, double rho);

// Start of the flow: the initial bowl differential, exactly g_0-isometric.
FormalPoint formal_seed(double rho, double phi);

// One formal corrugation step in the next circular direction. The new map is
// exactly mu_phi-isometric; a drift beyond 1e-10 in that identity throws
// InternalConsistencyError. The corrugation number enters only the loop
// phase, so the output pullback is independent of it.
FormalPoint fcp_step(const FormalPoint& pt, long n);

// Amplitude and wavefront-realignment angle of the stage (k, i) corrugation
// matrix, functions of rho alone. z is the squared length of the direction-i
// u vector under the pre-step metric; alpha = inverse_j0(sqrt(z/(eta+z))).
struct RotationPair {
    double alpha = 0.0;  // in [0, kappa_0)
    double beta = 0.0;   // in (-pi, pi], sign fixed by the surface orientation
    double z = 0.0;
};
RotationPair rotation_pair(int k, int i, double rho);

// Product of the per-stage frame rotations applied to the normal axis:
// nu = [prod_{k=j}^{kstar} prod_i L(theta_{k,i}) R(beta_{k,i})] e_3 with
// theta = alpha cos(2 pi N varpi_i), earliest stage leftmost. Unit norm.
// kstar < j gives e_3. Requires kstar <= schedule depth.
Vec3 normal_pattern(const FormalSchedule& s, int j, int kstar, double rho, double phi);

// The same product as a frame rotation: identity for j > kstar.
Mat3 pattern_matrix(const FormalSchedule& s, int j, int kstar, double rho, double phi);

// Unit normal of the truncated formal immersion: the analytic direction-1
// frame of the initial bowl applied to the depth-kstar pattern.
Vec3 formal_normal(const FormalSchedule& s, int kstar, double rho, double phi);

// Rotation-angle bound on the tail dropped by truncating at kstar:
// sqrt2 sum_{k > kstar} sum_i alpha_{k,i}(rho), summed until the stage
// contribution falls below 1e-15.
double formal_tail_bound(int kstar, double rho);

// Sup over a phi sweep of |nu(scaled by n)(m/M, phi) - nu(m/M, n phi)|.
// Requires 1 <= m_line <= M-1 and n >= 1; throws ConfigError otherwise.
double scaling_law_check(const FormalSchedule& s, long n, long m_line, int kstar,
                         int phi_samples = 1000);

// Decomposition of the full normal image of the circle rho = m/M into
// 7 L_j frame-rotated copies of the j-truncated pattern over one fundamental
// arc. hausdorff is the symmetric point-set distance (great-circle) between
// the copy union and the sampled normal image; for j = 1 it is bounded by
// rotation_bound + 2 sampling_step. With an empty schedule both sides
// degenerate to the pattern point e_3.
struct SelfSimilarityReport {
    int j = 0;
    long copies = 0;           // 7 L_j
    long samples_per_arc = 0;
    double arc_width = 0.0;    // 2 pi / (7 L_j) in phi
    double hausdorff = 0.0;
    double rotation_bound = 0.0;  // 2 pi / (7 L_j)
    double sampling_step = 0.0;   // great-circle step between adjacent samples
};
SelfSimilarityReport self_similarity_report(const FormalSchedule& s, int j, long m_line,
                                            int kstar, int samples_per_arc = 4096);

// Modulus-of-continuity check along a circle: first the displayed bound
// sqrt2 sum alpha_{k,i}(rho) |delta cos(2 pi N varpi_i)| + |delta F_0|_F,
// then the actual normal displacement. actual <= bound holds at any
// truncation since the dropped factors are shared.
std::pair<double, double> weierstrass_modulus(const FormalSchedule& s, double rho, double phi1,
                                              double phi2, int kstar);

}  // namespace corrhyp
