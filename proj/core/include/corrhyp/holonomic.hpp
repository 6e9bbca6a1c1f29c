#pragma once

#include <functional>
#include <utility>

#include "corrhyp/geom.hpp"
#include "corrhyp/grid.hpp"
#include "corrhyp/metrics.hpp"

// The corrugation pipeline on grids: the initial spiraling bowl, corrugation
// frames, the corrugation step itself, the sufficient-condition driven choice
// of corrugation numbers, and embeddedness diagnostics.

namespace corrhyp {

// Initial embedding f0(rho, phi) = 2 (rho cos phi, rho sin phi, (sqrt2/2) rho^2)
// and its differential.
Vec3 f0_point(double rho, double phi);
LinMap23 f0_diff(double rho, double phi);

// Smallest singular value of df0 over the annulus; the immersion margin the
// whole run must never halve. Equals 2 rho0.
inline double immersion_margin_f0(double rho0) { return 2.0 * rho0; }

// Sample f0 on a grid. phi_count must be a multiple of pattern_period
// (7 times the gcd of the oblique corrugation numbers) so the oblique
// wavefront phases close up on the seam.
FieldGrid initial_embedding(const GridSpec& spec, int pattern_period = 7);

// Orthonormal frame adapted to direction i: w along df(w_i), n the surface
// normal, t = w x n. Throws on a degenerate tangent map.
Frame3 corrugation_frame(const LinMap23& df, int i);

// The unique u with ell_i(u) = 1 and df(u) orthogonal to df(w_i); df(u) then
// points along the frame t axis.
Vec2 u_vector(const LinMap23& df, int i);

// Same u from the pullback form alone; u_vector(df, i) equals
// u_vector(pullback(df), i).
Vec2 u_vector(const SymForm2& mu, int i);

// One-node corrugation. phase is varpi_i at the node; the new point is
// f + (r/N) (Ctilde t + S n) with the loop integrals taken at N * phase.
struct NodeCorrugation {
    Vec3 point;
    double r = 0.0;
    double alpha = 0.0;
    double norm_dfu = 0.0;
    Frame3 frame;
};
NodeCorrugation corrugate_node(const Vec3& f, const LinMap23& df, double eta, int i, long n,
                               double phase);

struct StepReport {
    int k = 0;
    int i = 0;
    long n = 0;
    double err = 0.0;         // sup |pullback(F) - mu| over nodes
    double eta_min = 0.0;     // before clamping
    double alpha_max = 0.0;   // radians
    double x_max = 0.0;       // sup eta / |df(u)|^2
    double lambda_min = 0.0;  // immersion margin of the new layer
};

struct StepExtras {
    double sup_value_change = 0.0;  // sup |F - f|
    double sup_df_minus_l = -1.0;   // sup |dF - L|; -1 when not requested
};

struct StepOptions {
    bool want_df_minus_l = false;
    // eta below -cone_tol is a genuine cone violation; small negative values
    // are finite-difference noise and are clamped to zero
    double cone_tol = 1e-11;
};

struct StepResult {
    FieldGrid field;
    StepReport report;
    StepExtras extras;
};

// Throws a resolution error naming (k, i) unless the grid gives at least 12
// samples per wavefront period of corrugation number n along each axis.
void validate_resolution(const GridSpec& spec, int k, int i, long n);

// One corrugation process step: f_{k,i} from f_{k,i-1} in direction i with
// corrugation number n, against the ladder metric g_k. Pure in f.
StepResult cp_step(const FieldGrid& f, int k, int i, long n, const StepOptions& opts = {});

// Sup over nodes of |g_k - pullback(f)| (spectral norm).
double sup_form_distance(const FieldGrid& f, int k);
// Min over nodes of the smallest cone coordinate of g_k - pullback(f).
double measure_hmin_d(const FieldGrid& f, int k);
// Sup over nodes of |a - b| pointwise; grids must share a spec.
double sup_point_distance(const FieldGrid& a, const FieldGrid& b);
// Sup over nodes of the operator norm of df_a - df_b.
double sup_diff_distance(const FieldGrid& a, const FieldGrid& b);

// Sufficient-condition bookkeeping for one stage k. The first member is
// measured on the grid at stage entry; the gap terms are closed-form infima
// of the ladder increments, attained at rho0.
struct StageContext {
    double hmin_d_k1 = 0.0;       // min cone coordinate of g_k - pullback(f_{k-1})
    double hmin_gap_next = 0.0;   // inf of the cone coordinates of g_{k+1} - g_k
    double min_gap_next_norm = 0.0;  // inf |g_{k+1} - g_k|
    double min_gap_prev_norm = 0.0;  // inf |g_k - g_{k-1}|
    double h_max = 0.0;
    double c_h = 0.0;
};
StageContext stage_context(const FieldGrid& f, int k);

// Sufficient-condition mask bits for choose_n.
enum : unsigned {
    kCondConeMargin = 1u,  // err below the cone margin and the next-gap margin
    kCondValueStep = 2u,   // |F - f| <= tau_k / 3
    kCondDiffStep = 4u,    // |dF - L| <= tau_k / 3
    kCondGapPinch = 8u,    // err below both adjacent gaps shrunk by lambda
    kCondAll = 15u,
};

struct ChooseNOptions {
    double lambda = 100.0;
    long n_start = 8;
    long n_cap = 16384;
    unsigned mask = kCondAll;
    StepOptions step;
};

struct ChosenN {
    long n = 0;
    StepReport report;
    StepExtras extras;
    FieldGrid field;  // the accepted trial's output layer
};

// Supplies the pre-step layer on a grid that resolves corrugation number n.
// Callers rebuild (or reuse) grids as n doubles.
using FieldSource = std::function<const FieldGrid&(long n)>;

// Doubling search for the smallest corrugation number whose trial step
// passes every condition in the mask. Throws a budget error naming the
// first failing condition if the cap is reached.
ChosenN choose_n(const FieldSource& field_for, const StageContext& ctx, int k, int i,
                 double tau_k, const ChooseNOptions& opts = {});

// Spatial-hash nearest-neighbor scan for self-intersections. Cell size is
// half the minimum mesh edge; node pairs within the same 5x5 index stencil
// (phi circular) are exempt. A collision is an off-stencil pair closer than
// one cell.
struct ScanReport {
    bool collision = false;
    double min_offstencil = 0.0;  // smallest off-stencil distance seen; inf if none came close
    double cell = 0.0;
    long nodes_scanned = 0;
    int stride = 1;  // > 1 when the grid exceeds max_nodes and queries are strided
};
ScanReport self_intersection_scan(const FieldGrid& f, long max_nodes = 20000000);

struct Diagnostics {
    double alpha_max = 0.0;
    double x_max = 0.0;
    double lambda_min = 0.0;
    double lambda_floor = 0.0;  // half the initial immersion margin
    bool alpha_ok = false;      // alpha_max < pi/2
    bool x_ok = false;          // x_max < sigma = 3.488629
    bool lambda_ok = false;     // lambda_min > lambda_floor
    ScanReport scan;
};
Diagnostics embedding_diagnostics(const FieldGrid& f, const StepReport& report);

// Embeddedness threshold on X = eta / |df(u)|^2; X < sigma iff alpha < pi/2.
inline constexpr double sigma_threshold() { return 3.488629; }

// Sup over interior nodes of the Frobenius distance between the frame
// transition taken from the (pre, post) layers of step (k, i, n) and the pure
// t-n rotation by theta = alpha cos(2 pi n varpi_i). Decays like O(1/n).
double l_matrix_deviation(const FieldGrid& pre, const FieldGrid& post, int k, int i, long n);

}  // namespace corrhyp
