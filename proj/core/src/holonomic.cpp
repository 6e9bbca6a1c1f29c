#include "corrhyp/holonomic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "corrhyp/errors.hpp"
#include "corrhyp/specfun.hpp"

namespace corrhyp {

namespace {

constexpr double two_pi = 6.283185307179586476925286766559;
constexpr double half_pi = 1.5707963267948966192313216916398;
constexpr double sqrt2 = 1.4142135623730950488016887242097;

double cone_coord(const ConeCoords& c, int i) {
    switch (i) {
        case 1: return c.eta1;
        case 2: return c.eta2;
        case 3: return c.eta3;
    }
    throw std::domain_error("cone_coord: direction index must lie in [1, 3]");
}

// varpi_i at a node; the angular part is 7 jp / phi_count, so the phase
// advances by the exact integer 7 across the seam
double node_phase(const FieldGrid& g, int i, int ir, int jp) {
    switch (i) {
        case 1: return -g.rho(ir);
        case 2: return g.rho(ir) - g.a_phi(jp);
        case 3: return g.rho(ir) + g.a_phi(jp);
    }
    throw std::domain_error("node_phase: direction index must lie in [1, 3]");
}

double frac_part(double x) { return x - std::floor(x); }

struct NodeGeom {
    Frame3 frame;
    double norm_dfu = 0.0;
    double r = 0.0;
    double alpha = 0.0;
};

NodeGeom node_geometry(const LinMap23& df, double eta, int i) {
    NodeGeom g;
    g.frame = corrugation_frame(df, i);
    g.norm_dfu = norm(df.apply(u_vector(df, i)));
    if (eta <= 0.0) {
        g.r = g.norm_dfu;
        g.alpha = 0.0;
    } else {
        g.r = std::sqrt(eta + g.norm_dfu * g.norm_dfu);
        g.alpha = bessel_j0_inv(std::min(g.norm_dfu / g.r, 1.0));
    }
    return g;
}

void require_same_spec(const FieldGrid& a, const FieldGrid& b, const char* who) {
    const GridSpec &s = a.spec, &t = b.spec;
    if (s.rho0 != t.rho0 || s.rho_count != t.rho_count || s.phi_count != t.phi_count ||
        s.ghost != t.ghost)
        throw std::invalid_argument(std::string(who) + ": grids differ in shape");
}

}  // namespace

Vec3 f0_point(double rho, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {2.0 * rho * c, 2.0 * rho * s, sqrt2 * rho * rho};
}

LinMap23 f0_diff(double rho, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    LinMap23 m;
    m.d_rho = {2.0 * c, 2.0 * s, 2.0 * sqrt2 * rho};
    m.d_phi = {-2.0 * rho * s, 2.0 * rho * c, 0.0};
    return m;
}

FieldGrid initial_embedding(const GridSpec& spec, int pattern_period) {
    if (!(spec.rho0 > 0.0) || !(spec.rho0 < 1.0))
        throw ConfigError("initial_embedding: rho0 must lie in (0, 1)");
    if (spec.rho_count < 2 || spec.total_rows() < 5 || spec.phi_count < 5)
        throw ConfigError("initial_embedding: grid too small for the stencils");
    if (spec.ghost < 0) throw ConfigError("initial_embedding: negative ghost margin");
    if (pattern_period < 1 || spec.phi_count % pattern_period != 0) {
        std::ostringstream oss;
        oss << "initial_embedding: phi_count " << spec.phi_count
            << " is not a multiple of the wavefront pattern period " << pattern_period;
        throw ConfigError(oss.str());
    }
    if (spec.ghost > 0) {
        if (!(spec.rho0 - spec.ghost * spec.drho() > 0.0))
            throw ConfigError("initial_embedding: ghost margin reaches rho = 0");
        if (!(1.0 + spec.ghost * spec.drho() <= 1.125))
            throw ConfigError("initial_embedding: ghost margin overhangs past rho = 1.125");
    }

    FieldGrid g;
    g.spec = spec;
    g.nodes.resize(spec.nodes());
    for (int ir = 0; ir < spec.total_rows(); ++ir) {
        const double rho = g.rho(ir);
        for (int jp = 0; jp < spec.phi_count; ++jp) g.at(ir, jp) = f0_point(rho, g.phi(jp));
    }
    return g;
}

Frame3 corrugation_frame(const LinMap23& df, int i) {
    const Vec3 dfw = df.apply(WavefrontSystem::w_vec(i));
    const Vec3 dfv = df.apply(WavefrontSystem::v_vec(i));
    const Vec3 c = cross(dfv, dfw);
    const double nw = norm(dfw), nc = norm(c);
    if (!(nw > 0.0) || !(nc > 0.0))
        throw ImmersionLossError("corrugation_frame: degenerate tangent map");
    Frame3 fr;
    fr.w = (1.0 / nw) * dfw;
    fr.n = (1.0 / nc) * c;
    fr.t = cross(fr.w, fr.n);
    return fr;
}

Vec2 u_vector(const LinMap23& df, int i) {
    const Vec2 w = WavefrontSystem::w_vec(i);
    const Vec2 v = WavefrontSystem::v_vec(i);
    const Vec3 dfw = df.apply(w);
    const double ww = dot(dfw, dfw);
    if (!(ww > 0.0)) throw ImmersionLossError("u_vector: degenerate tangent map");
    const double s = -dot(df.apply(v), dfw) / ww;
    return v + s * w;
}

Vec2 u_vector(const SymForm2& mu, int i) {
    const Vec2 w = WavefrontSystem::w_vec(i);
    const Vec2 v = WavefrontSystem::v_vec(i);
    const double ww = mu.quad(w);
    if (!(ww > 0.0)) throw ImmersionLossError("u_vector: degenerate metric");
    const double s = -mu.apply(v, w) / ww;
    return v + s * w;
}

NodeCorrugation corrugate_node(const Vec3& f, const LinMap23& df, double eta, int i, long n,
                               double phase) {
    if (eta < 0.0) throw std::domain_error("corrugate_node: eta must be nonnegative");
    if (n < 1) throw std::domain_error("corrugate_node: corrugation number must be positive");
    const NodeGeom geom = node_geometry(df, eta, i);
    NodeCorrugation out;
    out.frame = geom.frame;
    out.r = geom.r;
    out.alpha = geom.alpha;
    out.norm_dfu = geom.norm_dfu;
    if (geom.alpha == 0.0) {
        out.point = f;  // the loop degenerates to its average
        return out;
    }
    const LoopIntegrals li = loop_integrals_centered(geom.alpha, static_cast<double>(n) * phase);
    out.point =
        f + (geom.r / static_cast<double>(n)) * (li.c * geom.frame.t + li.s * geom.frame.n);
    return out;
}

void validate_resolution(const GridSpec& spec, int k, int i, long n) {
    if (n < 1) throw ConfigError("validate_resolution: corrugation number must be positive");
    const double slack = 1e-9;
    const double rho_spp = 1.0 / (static_cast<double>(n) * spec.drho());
    if (rho_spp + slack < 12.0) {
        std::ostringstream oss;
        oss << "layer (" << k << ", " << i << "): rho spacing gives " << rho_spp
            << " samples per corrugation period at n = " << n << "; need 12";
        throw ResolutionError(oss.str());
    }
    if (i != 1) {
        const double phi_spp = spec.phi_count / (7.0 * static_cast<double>(n));
        if (phi_spp + slack < 12.0) {
            std::ostringstream oss;
            oss << "layer (" << k << ", " << i << "): phi spacing gives " << phi_spp
                << " samples per corrugation period at n = " << n << "; need 12";
            throw ResolutionError(oss.str());
        }
    }
}

StepResult cp_step(const FieldGrid& f, int k, int i, long n, const StepOptions& opts) {
    if (k < 1) throw ConfigError("cp_step: stage k must be >= 1");
    if (i < 1 || i > 3) throw ConfigError("cp_step: direction must lie in [1, 3]");
    validate_resolution(f.spec, k, i, n);

    const GridSpec& spec = f.spec;
    const int rows = spec.total_rows();
    const int cols = spec.phi_count;
    const Covec2 ell = WavefrontSystem::ell(i);

    StepResult res;
    res.field.spec = spec;
    res.field.layer_k = k;
    res.field.layer_i = i;
    res.field.nodes.resize(spec.nodes());

    StepReport& rep = res.report;
    rep.k = k;
    rep.i = i;
    rep.n = n;
    rep.eta_min = std::numeric_limits<double>::infinity();
    rep.lambda_min = std::numeric_limits<double>::infinity();

    StepExtras& ex = res.extras;
    ex.sup_df_minus_l = opts.want_df_minus_l ? 0.0 : -1.0;

    // pass 1: corrugate every row. Margin rows are corrugated like real ones
    // (clamped eta, no cone check) purely to feed the next stencils;
    // statistics cover real rows only.
    for (int ir = 0; ir < rows; ++ir) {
        const bool real_row = ir >= spec.row_begin() && ir < spec.row_end();
        const SymForm2 gk = metric_ladder(k, f.rho(ir));
        for (int jp = 0; jp < cols; ++jp) {
            const LinMap23 df = df_at(f, ir, jp);
            double eta = cone_coord(h_coords(gk - pullback(df)), i);
            if (real_row) {
                if (eta < rep.eta_min) rep.eta_min = eta;
                if (eta < -opts.cone_tol) {
                    std::ostringstream oss;
                    oss << "cp_step (" << k << ", " << i << "): eta = " << eta << " at node ("
                        << ir << ", " << jp << "), rho = " << f.rho(ir);
                    throw ConeViolationError(oss.str());
                }
            }
            if (eta < 0.0) eta = 0.0;
            const NodeCorrugation nc =
                corrugate_node(f.at(ir, jp), df, eta, i, n, node_phase(f, i, ir, jp));
            res.field.at(ir, jp) = nc.point;
            if (real_row) {
                if (nc.alpha > rep.alpha_max) rep.alpha_max = nc.alpha;
                const double x = eta / (nc.norm_dfu * nc.norm_dfu);
                if (x > rep.x_max) rep.x_max = x;
                const double dv = norm(nc.point - f.at(ir, jp));
                if (dv > ex.sup_value_change) ex.sup_value_change = dv;
            }
        }
    }

    // pass 2: measure the new layer against mu = pullback(f) + eta ell (x) ell
    for (int ir = spec.row_begin(); ir < spec.row_end(); ++ir) {
        const SymForm2 gk = metric_ladder(k, f.rho(ir));
        for (int jp = 0; jp < cols; ++jp) {
            const LinMap23 dfn = df_at(res.field, ir, jp);
            const LinMap23 dfo = df_at(f, ir, jp);
            const SymForm2 mu_old = pullback(dfo);
            const double eta = std::max(cone_coord(h_coords(gk - mu_old), i), 0.0);
            const SymForm2 mu = mu_old + eta * outer_square(ell);
            const double e = form_norm(pullback(dfn) - mu);
            if (e > rep.err) rep.err = e;
            const double lm = lambda_min(dfn);
            if (lm < rep.lambda_min) rep.lambda_min = lm;
            if (opts.want_df_minus_l) {
                const NodeGeom geom = node_geometry(dfo, eta, i);
                const double theta =
                    geom.alpha *
                    std::cos(two_pi *
                             frac_part(static_cast<double>(n) * node_phase(f, i, ir, jp)));
                const Vec3 burst =
                    (geom.r * std::cos(theta) - geom.norm_dfu) * geom.frame.t +
                    (geom.r * std::sin(theta)) * geom.frame.n;
                LinMap23 target = dfo;
                target.d_rho += ell.c_rho * burst;
                target.d_phi += ell.c_phi * burst;
                const double dev = op_norm(dfn - target);
                if (dev > ex.sup_df_minus_l) ex.sup_df_minus_l = dev;
            }
        }
    }
    return res;
}

double sup_form_distance(const FieldGrid& f, int k) {
    double worst = 0.0;
    for (int ir = f.spec.row_begin(); ir < f.spec.row_end(); ++ir) {
        const SymForm2 gk = metric_ladder(k, f.rho(ir));
        for (int jp = 0; jp < f.spec.phi_count; ++jp) {
            const double e = form_norm(gk - pullback(df_at(f, ir, jp)));
            if (e > worst) worst = e;
        }
    }
    return worst;
}

double measure_hmin_d(const FieldGrid& f, int k) {
    double least = std::numeric_limits<double>::infinity();
    for (int ir = f.spec.row_begin(); ir < f.spec.row_end(); ++ir) {
        const SymForm2 gk = metric_ladder(k, f.rho(ir));
        for (int jp = 0; jp < f.spec.phi_count; ++jp) {
            const double m = h_coords(gk - pullback(df_at(f, ir, jp))).min();
            if (m < least) least = m;
        }
    }
    return least;
}

double sup_point_distance(const FieldGrid& a, const FieldGrid& b) {
    require_same_spec(a, b, "sup_point_distance");
    double worst = 0.0;
    for (int ir = a.spec.row_begin(); ir < a.spec.row_end(); ++ir)
        for (int jp = 0; jp < a.spec.phi_count; ++jp) {
            const double d = norm(a.at(ir, jp) - b.at(ir, jp));
            if (d > worst) worst = d;
        }
    return worst;
}

double sup_diff_distance(const FieldGrid& a, const FieldGrid& b) {
    require_same_spec(a, b, "sup_diff_distance");
    double worst = 0.0;
    for (int ir = a.spec.row_begin(); ir < a.spec.row_end(); ++ir)
        for (int jp = 0; jp < a.spec.phi_count; ++jp) {
            const double d = op_norm(df_at(a, ir, jp) - df_at(b, ir, jp));
            if (d > worst) worst = d;
        }
    return worst;
}

StageContext stage_context(const FieldGrid& f, int k) {
    if (k < 1) throw std::domain_error("stage_context: stage k must be >= 1");
    StageContext c;
    c.hmin_d_k1 = measure_hmin_d(f, k);
    const double rho0 = f.spec.rho0;
    // the ladder increments grow with rho, so their infima sit at rho0
    c.hmin_gap_next = ladder_increment_coords(k + 1, rho0).min();
    c.min_gap_next_norm = form_norm(metric_ladder(k + 1, rho0) - metric_ladder(k, rho0));
    c.min_gap_prev_norm = form_norm(metric_ladder(k, rho0) - metric_ladder(k - 1, rho0));
    const double a2 = slope_a() * slope_a();
    c.h_max = 1.0 + 1.0 / a2;
    c.c_h = 1.0 + c.h_max * 2.0 * (1.0 + a2);
    return c;
}

ChosenN choose_n(const FieldSource& field_for, const StageContext& ctx, int k, int i,
                 double tau_k, const ChooseNOptions& opts) {
    if (opts.n_start < 1 || opts.n_cap < opts.n_start)
        throw std::domain_error("choose_n: bad search range");
    if (!(opts.lambda > 1.0)) throw std::domain_error("choose_n: lambda must exceed 1");
    if (!(tau_k > 0.0)) throw std::domain_error("choose_n: tau_k must be positive");

    StepOptions sopts = opts.step;
    sopts.want_df_minus_l = sopts.want_df_minus_l || (opts.mask & kCondDiffStep) != 0;

    const double cone_margin = std::min(ctx.hmin_d_k1 / (4.0 * ctx.h_max),
                                        ctx.hmin_gap_next / (6.0 * ctx.c_h * ctx.h_max));
    const double pinch = std::min(ctx.min_gap_next_norm, ctx.min_gap_prev_norm) /
                         (6.0 * opts.lambda * ctx.c_h);

    std::string failed = "(no trial ran)";
    for (long n = opts.n_start; n <= opts.n_cap; n *= 2) {
        const FieldGrid& f = field_for(n);
        StepResult trial = cp_step(f, k, i, n, sopts);
        failed.clear();
        if ((opts.mask & kCondConeMargin) && !(trial.report.err <= cone_margin))
            failed = "cone-margin";
        else if ((opts.mask & kCondValueStep) && !(trial.extras.sup_value_change <= tau_k / 3.0))
            failed = "value-step";
        else if ((opts.mask & kCondDiffStep) && !(trial.extras.sup_df_minus_l <= tau_k / 3.0))
            failed = "diff-step";
        else if ((opts.mask & kCondGapPinch) && !(trial.report.err <= pinch))
            failed = "gap-pinch";
        if (failed.empty())
            return ChosenN{n, trial.report, trial.extras, std::move(trial.field)};
    }
    std::ostringstream oss;
    oss << "choose_n (" << k << ", " << i << "): no corrugation number up to " << opts.n_cap
        << " satisfied condition " << failed;
    throw BudgetExceededError(oss.str(), failed);
}

ScanReport self_intersection_scan(const FieldGrid& f, long max_nodes) {
    const GridSpec& spec = f.spec;
    const int r0 = spec.row_begin(), r1 = spec.row_end();
    const int cols = spec.phi_count;
    const long real_nodes = static_cast<long>(r1 - r0) * cols;

    ScanReport rep;
    rep.min_offstencil = std::numeric_limits<double>::infinity();

    double min_edge = std::numeric_limits<double>::infinity();
    for (int ir = r0; ir < r1; ++ir)
        for (int jp = 0; jp < cols; ++jp) {
            const Vec3& p = f.at(ir, jp);
            if (ir + 1 < r1) min_edge = std::min(min_edge, norm(f.at(ir + 1, jp) - p));
            min_edge = std::min(min_edge, norm(f.at(ir, jp + 1) - p));
        }
    if (!(min_edge > 0.0))
        throw NumericError("self_intersection_scan: coincident adjacent nodes");

    const double cell = 0.5 * min_edge;
    rep.cell = cell;

    Vec3 lo = f.at(r0, 0), hi = lo;
    for (int ir = r0; ir < r1; ++ir)
        for (int jp = 0; jp < cols; ++jp) {
            const Vec3& p = f.at(ir, jp);
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            lo.z = std::min(lo.z, p.z);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
            hi.z = std::max(hi.z, p.z);
        }

    // hashing may use coarser cells than the collision threshold so packed
    // 21-bit axes stay collision-free; candidate distances are always checked
    double hash_cell = cell;
    const double extent =
        std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 16.0 * hash_cell});
    const double axis_limit = 2097149.0;  // 2^21 - 3
    if (extent / hash_cell > axis_limit) hash_cell = extent / axis_limit;

    const auto cell_of = [&](double v, double base) {
        return static_cast<std::int64_t>(std::floor((v - base) / hash_cell));
    };
    const auto pack = [](std::int64_t ix, std::int64_t iy, std::int64_t iz) {
        return (static_cast<std::uint64_t>(ix) << 42) | (static_cast<std::uint64_t>(iy) << 21) |
               static_cast<std::uint64_t>(iz);
    };

    std::vector<std::pair<std::uint64_t, std::int64_t>> table;
    table.reserve(real_nodes);
    for (int ir = r0; ir < r1; ++ir)
        for (int jp = 0; jp < cols; ++jp) {
            const Vec3& p = f.at(ir, jp);
            table.emplace_back(pack(cell_of(p.x, lo.x), cell_of(p.y, lo.y), cell_of(p.z, lo.z)),
                               static_cast<std::int64_t>(ir) * cols + jp);
        }
    std::sort(table.begin(), table.end());

    int stride = 1;
    while (real_nodes / stride > max_nodes) stride *= 2;
    rep.stride = stride;

    long scanned = 0;
    for (long q = 0; q < real_nodes; q += stride) {
        const int ir = r0 + static_cast<int>(q / cols);
        const int jp = static_cast<int>(q % cols);
        const Vec3& p = f.at(ir, jp);
        const std::int64_t ix = cell_of(p.x, lo.x), iy = cell_of(p.y, lo.y),
                           iz = cell_of(p.z, lo.z);
        ++scanned;
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const std::int64_t cx = ix + dx, cy = iy + dy, cz = iz + dz;
                    if (cx < 0 || cy < 0 || cz < 0) continue;
                    const std::uint64_t key = pack(cx, cy, cz);
                    auto it = std::lower_bound(
                        table.begin(), table.end(),
                        std::make_pair(key, std::numeric_limits<std::int64_t>::min()));
                    for (; it != table.end() && it->first == key; ++it) {
                        const std::int64_t idx = it->second;
                        const int jr = static_cast<int>(idx / cols);
                        const int jj = static_cast<int>(idx % cols);
                        if (jr == ir && jj == jp) continue;
                        int dj = std::abs(jj - jp);
                        dj = std::min(dj, cols - dj);
                        if (std::abs(jr - ir) <= 2 && dj <= 2) continue;  // stencil-exempt
                        const double d = norm(f.at(jr, jj) - p);
                        if (d < rep.min_offstencil) rep.min_offstencil = d;
                        if (d < cell) rep.collision = true;
                    }
                }
    }
    rep.nodes_scanned = scanned;
    return rep;
}

Diagnostics embedding_diagnostics(const FieldGrid& f, const StepReport& report) {
    Diagnostics d;
    d.alpha_max = report.alpha_max;
    d.x_max = report.x_max;
    d.lambda_min = report.lambda_min;
    d.lambda_floor = 0.5 * immersion_margin_f0(f.spec.rho0);
    d.alpha_ok = report.alpha_max < half_pi;
    d.x_ok = report.x_max < sigma_threshold();
    d.lambda_ok = report.lambda_min > d.lambda_floor;
    d.scan = self_intersection_scan(f);
    return d;
}

double l_matrix_deviation(const FieldGrid& pre, const FieldGrid& post, int k, int i, long n) {
    require_same_spec(pre, post, "l_matrix_deviation");
    if (i < 1 || i > 3)
        throw std::domain_error("l_matrix_deviation: direction must lie in [1, 3]");
    const GridSpec& spec = pre.spec;
    const int lo = std::max(spec.row_begin(), 2);
    const int hi = std::min(spec.row_end(), spec.total_rows() - 2);
    double worst = 0.0;
    for (int ir = lo; ir < hi; ++ir) {
        const SymForm2 gk = metric_ladder(k, pre.rho(ir));
        for (int jp = 0; jp < spec.phi_count; ++jp) {
            const LinMap23 dfo = df_at(pre, ir, jp);
            const LinMap23 dfn = df_at(post, ir, jp);
            const Frame3 before = corrugation_frame(dfo, i);
            const Frame3 half = corrugation_frame(dfn, i);
            const Mat3 trans = transpose(frame_matrix(before)) * frame_matrix(half);
            const double eta = std::max(cone_coord(h_coords(gk - pullback(dfo)), i), 0.0);
            const NodeGeom geom = node_geometry(dfo, eta, i);
            const double theta =
                geom.alpha *
                std::cos(two_pi *
                         frac_part(static_cast<double>(n) * node_phase(pre, i, ir, jp)));
            const double dev = frobenius_distance(trans, rotation_tn(theta));
            if (dev > worst) worst = dev;
        }
    }
    return worst;
}

}  // namespace corrhyp
