#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "corrhyp/errors.hpp"
#include "corrhyp/grid.hpp"
#include "corrhyp/holonomic.hpp"
#include "corrhyp/metrics.hpp"
#include "corrhyp/specfun.hpp"
#include "oracles.hpp"

using namespace corrhyp;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridSpec small_spec(double rho0, int rows, int cols, int ghost = 0) {
    GridSpec s;
    s.rho0 = rho0;
    s.rho_count = rows;
    s.phi_count = cols;
    s.ghost = ghost;
    return s;
}

double vec_dist(Vec3 a, Vec3 b) { return norm(a - b); }

}  // namespace

TEST_CASE("initial embedding matches its closed form") {
    FieldGrid f = initial_embedding(small_spec(0.1, 41, 70));
    // outer rim at phi = 0
    CHECK(vec_dist(f.at(40, 0), Vec3{2.0, 0.0, std::sqrt(2.0)}) < 1e-12);
    // z records the squared cylindrical radius
    for (int ir = 0; ir < 41; ir += 8) {
        for (int jp = 0; jp < 70; jp += 9) {
            const Vec3 p = f.at(ir, jp);
            CHECK(std::fabs(p.z - 0.5 * std::sqrt(2.0) * (p.x * p.x + p.y * p.y) / 2.0) < 1e-12);
        }
    }
    // equivariance under the grid rotation step
    const Mat3 r = rotation_z(2.0 * kPi / 70.0);
    for (int ir = 0; ir < 41; ir += 5) {
        for (int jp = 0; jp < 70; ++jp) {
            CHECK(vec_dist(r.apply(f.at(ir, jp)), f.at(ir, f.wrap(jp + 1))) < 1e-12);
        }
    }
    CHECK(f.layer_k == 0);
    CHECK(f.layer_i == 0);
}

TEST_CASE("initial embedding validates its configuration") {
    CHECK_THROWS_AS(initial_embedding(small_spec(1.2, 11, 70)), ConfigError);
    CHECK_THROWS_AS(initial_embedding(small_spec(0.0, 11, 70)), ConfigError);
    CHECK_THROWS_AS(initial_embedding(small_spec(0.5, 11, 71)), ConfigError);  // not a pattern multiple
    CHECK_THROWS_AS(initial_embedding(small_spec(0.5, 2, 70)), ConfigError);
    // ghost margin may not reach past the polynomial overhang or hit the origin
    GridSpec wide = small_spec(0.5, 11, 70, 4);  // drho = 0.05, margin to 1.2
    CHECK_THROWS_AS(initial_embedding(wide), ConfigError);
    GridSpec ok = small_spec(0.5, 21, 70, 4);  // drho = 0.025, margin to 1.1
    CHECK_NOTHROW(initial_embedding(ok));
}

TEST_CASE("grid differentiation is exact on rho lines and fourth order in phi") {
    // constant field
    FieldGrid c{small_spec(0.3, 9, 14), 0, 0, {}};
    c.nodes.assign(c.spec.nodes(), Vec3{1.0, -2.0, 0.5});
    DiffField dc = differentiate(c);
    for (int ir = 0; ir < 9; ++ir) {
        for (int jp = 0; jp < 14; ++jp) {
            CHECK(norm(dc.at(ir, jp).d_rho) < 1e-13);
            CHECK(norm(dc.at(ir, jp).d_phi) < 1e-13);
        }
    }

    // affine field: exact in rho everywhere, exact in phi away from the seam
    FieldGrid g{small_spec(0.3, 9, 14), 0, 0, {}};
    g.nodes.resize(g.spec.nodes());
    const Vec3 a{0.2, -1.0, 3.0};
    const Vec3 b{1.5, 0.25, -0.75};
    for (int ir = 0; ir < 9; ++ir) {
        for (int jp = 0; jp < 14; ++jp) {
            g.at(ir, jp) = g.rho(ir) * a + g.phi(jp) * b;
        }
    }
    DiffField dg = differentiate(g);
    for (int ir = 0; ir < 9; ++ir) {
        for (int jp = 2; jp < 12; ++jp) {
            CHECK(vec_dist(dg.at(ir, jp).d_rho, a) < 1e-12);
            CHECK(vec_dist(dg.at(ir, jp).d_phi, b) < 1e-12);
        }
    }

    // on the initial embedding the phi error contracts 16x per refinement
    double sup[2] = {0.0, 0.0};
    int cols[2] = {35, 70};
    for (int pass = 0; pass < 2; ++pass) {
        FieldGrid f = initial_embedding(small_spec(0.2, 33, cols[pass]));
        DiffField df = differentiate(f);
        for (int ir = 0; ir < 33; ++ir) {
            for (int jp = 0; jp < cols[pass]; ++jp) {
                LinMap23 exact = f0_diff(f.rho(ir), f.phi(jp));
                sup[pass] = std::max(sup[pass], vec_dist(df.at(ir, jp).d_rho, exact.d_rho));
                sup[pass] = std::max(sup[pass], vec_dist(df.at(ir, jp).d_phi, exact.d_phi));
            }
        }
    }
    CHECK(sup[1] > 0.0);
    const double ratio = sup[0] / sup[1];
    CHECK(ratio > 10.0);
    CHECK(ratio < 22.0);
}

TEST_CASE("pullback of the initial embedding matches the closed form") {
    FieldGrid f = initial_embedding(small_spec(0.4, 121, 70));
    auto forms = pullback_field(f);
    double sup = 0.0;
    for (int ir = 0; ir < 121; ++ir) {
        for (int jp = 0; jp < 70; ++jp) {
            SymForm2 d = forms[static_cast<size_t>(ir) * 70 + jp] - pullback_f0(f.rho(ir));
            sup = std::max(sup, form_norm(d));
        }
    }
    CHECK(sup < 5e-5);
}

TEST_CASE("corrugation frames are orthonormal with a direction-free normal") {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const double rho = rng.uniform(0.2, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const LinMap23 df = f0_diff(rho, phi);
        const Vec3 surface_n = normalized(cross(df.d_rho, df.d_phi));
        for (int i = 1; i <= 3; ++i) {
            Frame3 fr = corrugation_frame(df, i);
            CHECK(std::fabs(norm(fr.t) - 1.0) < 1e-12);
            CHECK(std::fabs(norm(fr.w) - 1.0) < 1e-12);
            CHECK(std::fabs(norm(fr.n) - 1.0) < 1e-12);
            CHECK(std::fabs(dot(fr.t, fr.w)) < 1e-12);
            CHECK(std::fabs(dot(fr.t, fr.n)) < 1e-12);
            CHECK(std::fabs(dot(fr.w, fr.n)) < 1e-12);
            // direct basis: t = w x n
            CHECK(vec_dist(fr.t, cross(fr.w, fr.n)) < 1e-12);
            // the normal is the surface normal regardless of i
            CHECK(vec_dist(fr.n, surface_n) < 1e-12);
            // w spans df of the wavefront direction
            const Vec2 w = WavefrontSystem::w_vec(i);
            CHECK(vec_dist(fr.w, normalized(df.apply(w))) < 1e-12);
            // scale invariance
            LinMap23 scaled{2.0 * df.d_rho, 2.0 * df.d_phi};
            Frame3 fs = corrugation_frame(scaled, i);
            CHECK(vec_dist(fs.t, fr.t) < 1e-12);
        }
    }
    // analytic normal on the phi = 0 meridian
    const double rho = 0.65;
    Frame3 fr = corrugation_frame(f0_diff(rho, 0.0), 2);
    const double s = 1.0 / std::sqrt(1.0 + 2.0 * rho * rho);
    CHECK(vec_dist(fr.n, Vec3{-std::sqrt(2.0) * rho * s, 0.0, s}) < 1e-12);

    LinMap23 degenerate{Vec3{1.0, 0.0, 0.0}, Vec3{2.0, 0.0, 0.0}};
    CHECK_THROWS_AS(corrugation_frame(degenerate, 1), ImmersionLossError);
}

TEST_CASE("u vector solves its defining constraints") {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const double rho = rng.uniform(0.2, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        LinMap23 df = f0_diff(rho, phi);
        // generic perturbation keeps it an immersion but breaks symmetry
        df.d_rho += Vec3{0.05 * rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1)};
        for (int i = 1; i <= 3; ++i) {
            const Vec2 u = u_vector(df, i);
            CHECK(std::fabs(WavefrontSystem::ell(i).apply(u) - 1.0) < 1e-12);
            const Vec3 dfu = df.apply(u);
            const Vec3 dfw = df.apply(WavefrontSystem::w_vec(i));
            CHECK(std::fabs(dot(dfu, dfw)) < 1e-10 * norm(dfw) * (norm(dfu) + 1.0));
            // df(u) points along the frame's tangent leg
            const Frame3 fr = corrugation_frame(df, i);
            CHECK(dot(dfu, fr.t) > 0.0);
            CHECK(vec_dist(dfu, norm(dfu) * fr.t) < 1e-10 * (norm(dfu) + 1.0));
        }
    }
}

TEST_CASE("u vector closed form in the adjacent wavefront basis") {
    // whenever df realizes mu, u = w_{i-1}/l_i(w_{i-1}) + y w_i with y solving mu(u, w_i) = 0
    oracle::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const LinMap23 df = f0_diff(rng.uniform(0.2, 1.0), rng.uniform(0.0, 2.0 * kPi));
        const SymForm2 mu = pullback(df);
        for (int i = 1; i <= 3; ++i) {
            const Vec2 wp = WavefrontSystem::w_vec(i - 1);
            const Vec2 wi = WavefrontSystem::w_vec(i);
            const double li_wp = WavefrontSystem::ell(i).apply(wp);
            const double x = 1.0 / li_wp;
            const double y = -mu.apply(wp, wi) / (mu.apply(wi, wi) * li_wp);
            const Vec2 u = u_vector(df, i);
            CHECK(std::fabs(u.rho - (x * wp.rho + y * wi.rho)) < 1e-12);
            CHECK(std::fabs(u.phi - (x * wp.phi + y * wi.phi)) < 1e-12);
        }
    }
}

TEST_CASE("single node corrugation is the identity at zero amplitude") {
    const double rho = 0.55, phi = 1.3;
    const Vec3 p = f0_point(rho, phi);
    const LinMap23 df = f0_diff(rho, phi);
    for (int i = 1; i <= 3; ++i) {
        NodeCorrugation out = corrugate_node(p, df, 0.0, i, 64, WavefrontSystem::phase(i, rho, phi));
        CHECK(out.point.x == p.x);
        CHECK(out.point.y == p.y);
        CHECK(out.point.z == p.z);
        CHECK(out.alpha == 0.0);
    }
}

TEST_CASE("single node corrugation matches the direct loop integral") {
    const double rho = 0.72, phi = 2.1;
    const Vec3 p = f0_point(rho, phi);
    const LinMap23 df = f0_diff(rho, phi);
    for (int i = 1; i <= 3; ++i) {
        const double eta = 0.8;
        const long n = 12;
        const double phase = WavefrontSystem::phase(i, rho, phi);
        NodeCorrugation out = corrugate_node(p, df, eta, i, n, phase);

        // oracle: (1/N) int_0^{N phase} (gamma - mean) ds with frozen fields
        const double x = static_cast<double>(n) * phase;
        const double r = out.r, alpha = out.alpha;
        auto ci = [&](double s) { return std::cos(alpha * std::cos(2.0 * kPi * s)); };
        auto si = [&](double s) { return std::sin(alpha * std::cos(2.0 * kPi * s)); };
        const double lo = std::min(0.0, x), hi = std::max(0.0, x);
        const double sgn = x < 0.0 ? -1.0 : 1.0;
        const double ic = sgn * oracle::adaptive_simpson(ci, lo, hi, 1e-13) - x * bessel_j0(alpha);
        const double is = sgn * oracle::adaptive_simpson(si, lo, hi, 1e-13);
        const Vec3 expect = p + (r / static_cast<double>(n)) * (ic * out.frame.t + is * out.frame.n);
        CHECK(vec_dist(out.point, expect) < 1e-11);

        // r and alpha solve the amplitude equations
        CHECK(std::fabs(r * r - (eta + out.norm_dfu * out.norm_dfu)) < 1e-12);
        CHECK(std::fabs(r * bessel_j0(alpha) - out.norm_dfu) < 1e-12);
    }
}

TEST_CASE("node corrugation is invariant under full turns of the loop phase") {
    const double rho = 0.45, phi = 0.9;
    const Vec3 p = f0_point(rho, phi);
    const LinMap23 df = f0_diff(rho, phi);
    for (int i = 1; i <= 3; ++i) {
        const double phase = WavefrontSystem::phase(i, rho, phi);
        // a full phi turn moves the phase by a * 2pi = 7, so the N-fold loop
        // argument shifts by whole periods and the image point repeats
        NodeCorrugation a = corrugate_node(p, df, 0.6, i, 16, phase);
        NodeCorrugation b = corrugate_node(p, df, 0.6, i, 16, phase - 7.0);
        CHECK(vec_dist(a.point, b.point) < 1e-12);
    }
}

TEST_CASE("first layer pullback error halves when the corrugation number doubles") {
    StepOptions opts;
    opts.want_df_minus_l = true;
    double err[3], value_c[3], dfl[3];
    long ns[3] = {16, 32, 64};
    for (int pass = 0; pass < 3; ++pass) {
        GridSpec s;
        s.rho0 = 0.5;
        s.rho_count = rho_count_for(ns[pass], 24);
        s.phi_count = 70;
        s.ghost = 4;
        FieldGrid f0 = initial_embedding(s);
        StepResult r = cp_step(f0, 1, 1, ns[pass], opts);
        err[pass] = r.report.err;
        value_c[pass] = static_cast<double>(ns[pass]) * r.extras.sup_value_change;
        dfl[pass] = r.extras.sup_df_minus_l;
        CHECK(r.field.layer_k == 1);
        CHECK(r.field.layer_i == 1);
        // the default gap is filled from below: eta stays positive and matches the ladder floor
        CHECK(r.report.eta_min > 0.0);
        CHECK(std::fabs(r.report.eta_min - ladder_increment_coords(1, 0.5).eta1) < 2e-3);
        // immersion margin holds at the closed-form value
        CHECK(std::fabs(r.report.lambda_min - immersion_margin_f0(0.5)) < 2e-3);
        CHECK(r.report.x_max < sigma_threshold());
        CHECK(r.report.alpha_max < 0.5 * kPi);
    }
    for (int pass = 0; pass + 1 < 3; ++pass) {
        CHECK(err[pass + 1] / err[pass] > 0.3);
        CHECK(err[pass + 1] / err[pass] < 0.7);
        CHECK(dfl[pass + 1] / dfl[pass] > 0.3);
        CHECK(dfl[pass + 1] / dfl[pass] < 0.7);
        // ||F - f|| tracks c/N with a stable constant
        CHECK(value_c[pass + 1] / value_c[pass] > 0.8);
        CHECK(value_c[pass + 1] / value_c[pass] < 1.25);
    }
}

TEST_CASE("cp_step validates arguments, resolution, and the cone precondition") {
    GridSpec s;
    s.rho0 = 0.5;
    s.rho_count = 97;
    s.phi_count = 70;
    s.ghost = 2;
    FieldGrid f0 = initial_embedding(s);
    CHECK_THROWS_AS(cp_step(f0, 0, 1, 8, {}), ConfigError);
    CHECK_THROWS_AS(cp_step(f0, 1, 4, 8, {}), ConfigError);
    CHECK_THROWS_AS(cp_step(f0, 1, 1, 0, {}), ConfigError);
    // 96 intervals over [0.5, 1] resolve N=8 (24 spp) but not N=32
    CHECK_THROWS_AS(cp_step(f0, 1, 1, 32, {}), ResolutionError);
    // phi resolution binds the oblique families only
    CHECK_THROWS_AS(cp_step(f0, 1, 2, 8, {}), ResolutionError);  // 70/(7*8) = 1.25 spp
    CHECK_NOTHROW(cp_step(f0, 1, 1, 8, {}));

    // a surface already longer than the target metric violates the cone
    FieldGrid inflated = f0;
    for (Vec3& p : inflated.nodes) p = std::sqrt(3.0) * p;
    CHECK_THROWS_AS(cp_step(inflated, 1, 1, 8, {}), ConeViolationError);
}

TEST_CASE("sup distances and stage context read the grid consistently") {
    GridSpec s;
    s.rho0 = 0.5;
    s.rho_count = 201;
    s.phi_count = 70;
    s.ghost = 3;
    FieldGrid f0 = initial_embedding(s);
    CHECK(sup_point_distance(f0, f0) == 0.0);
    CHECK(sup_form_distance(f0, 0) < 5e-5);
    CHECK(std::fabs(measure_hmin_d(f0, 1) - ladder_increment_coords(1, 0.5).min()) < 1e-5);

    StageContext ctx = stage_context(f0, 1);
    CHECK(std::fabs(ctx.hmin_d_k1 - ladder_increment_coords(1, 0.5).min()) < 1e-5);
    CHECK(std::fabs(ctx.hmin_gap_next - ladder_increment_coords(2, 0.5).min()) < 1e-12);
    CHECK(std::fabs(ctx.min_gap_next_norm - form_norm(metric_ladder(2, 0.5) - metric_ladder(1, 0.5))) < 1e-12);
    CHECK(std::fabs(ctx.min_gap_prev_norm - form_norm(metric_ladder(1, 0.5) - metric_ladder(0, 0.5))) < 1e-12);
    OperatorNorms closed = hmax_and_ch(100000, 0x5eed);
    CHECK(std::fabs(ctx.h_max - closed.h_max) < 2e-3);
    CHECK(std::fabs(ctx.c_h - closed.c_h) < 2e-2);
}

TEST_CASE("choose_n picks the smallest admissible doubling and respects relaxation") {
    std::map<long, FieldGrid> cache;
    auto field_for = [&](long n) -> const FieldGrid& {
        auto it = cache.find(n);
        if (it == cache.end()) {
            GridSpec s;
            s.rho0 = 0.8;
            s.rho_count = rho_count_for(n, 12);
            s.phi_count = 70;
            s.ghost = 4;
            it = cache.emplace(n, initial_embedding(s)).first;
        }
        return it->second;
    };
    GridSpec probe_spec;
    probe_spec.rho0 = 0.8;
    probe_spec.rho_count = 101;
    probe_spec.phi_count = 70;
    probe_spec.ghost = 4;
    StageContext ctx = stage_context(initial_embedding(probe_spec), 1);

    ChooseNOptions co;
    CHECK(co.lambda == 100.0);
    co.mask = kCondValueStep;
    const double tau = 0.05;
    ChosenN got = choose_n(field_for, ctx, 1, 1, tau, co);
    CHECK(got.extras.sup_value_change <= tau / 3.0);
    CHECK(got.report.n == got.n);
    // minimality: the previous doubling step fails the same condition
    if (got.n > co.n_start) {
        StepResult half = cp_step(field_for(got.n / 2), 1, 1, got.n / 2, {});
        CHECK(half.extras.sup_value_change > tau / 3.0);
    }
    // a 10x looser budget never increases the choice
    ChosenN relaxed = choose_n(field_for, ctx, 1, 1, 10.0 * tau, co);
    CHECK(relaxed.n <= got.n);

    // an impossible budget reports the failing condition
    co.n_cap = 32;
    try {
        choose_n(field_for, ctx, 1, 1, 1e-9, co);
        CHECK(false);
    } catch (const BudgetExceededError& e) {
        CHECK(e.failed_condition == "value-step");
    }
}

TEST_CASE("self intersection scan accepts the graph and flags a planted collision") {
    GridSpec s;
    s.rho0 = 0.3;
    s.rho_count = 101;
    s.phi_count = 140;
    s.ghost = 0;
    FieldGrid f0 = initial_embedding(s);
    ScanReport clean = self_intersection_scan(f0);
    CHECK_FALSE(clean.collision);
    CHECK(clean.min_offstencil > clean.cell);
    CHECK(clean.nodes_scanned > 0);

    FieldGrid bent = f0;
    bent.at(10, 0) = bent.at(80, 70);  // far-apart parameters, same point
    ScanReport dirty = self_intersection_scan(bent);
    CHECK(dirty.collision);
}

TEST_CASE("embedding diagnostics flag the healthy first layer") {
    GridSpec s;
    s.rho0 = 0.5;
    s.rho_count = rho_count_for(16, 12);
    s.phi_count = 70;
    s.ghost = 4;
    FieldGrid f0 = initial_embedding(s);
    StepResult r = cp_step(f0, 1, 1, 16, {});
    Diagnostics d = embedding_diagnostics(r.field, r.report);
    CHECK(d.alpha_ok);
    CHECK(d.x_ok);
    CHECK(d.lambda_ok);
    CHECK(std::fabs(d.lambda_floor - 0.5 * immersion_margin_f0(0.5)) < 1e-12);
    CHECK_FALSE(d.scan.collision);
}

TEST_CASE("transition matrices approach the tangent-normal rotation as N grows") {
    double dev[2];
    long ns[2] = {16, 32};
    for (int pass = 0; pass < 2; ++pass) {
        GridSpec s;
        s.rho0 = 0.5;
        s.rho_count = rho_count_for(ns[pass], 24);
        s.phi_count = 70;
        s.ghost = 4;
        FieldGrid f0 = initial_embedding(s);
        StepResult r = cp_step(f0, 1, 1, ns[pass], {});
        dev[pass] = l_matrix_deviation(f0, r.field, 1, 1, ns[pass]);
    }
    CHECK(dev[1] / dev[0] > 0.3);
    CHECK(dev[1] / dev[0] < 0.7);
}
