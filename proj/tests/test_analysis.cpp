#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <corrhyp/analysis.hpp>
#include <corrhyp/errors.hpp>
#include <corrhyp/formal.hpp>
#include <corrhyp/holonomic.hpp>
#include <memory>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"

using namespace corrhyp;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 rand_unit(oracle::Rng& rng) {
    for (;;) {
        const Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double n = norm(v);
        if (n > 0.1 && n <= 1.0) return (1.0 / n) * v;
    }
}

Vec3 rotate_about(Vec3 v, Vec3 axis, double delta) {
    const double c = std::cos(delta), s = std::sin(delta);
    return c * v + s * cross(axis, v) + ((1.0 - c) * dot(axis, v)) * axis;
}

SpherePointSet random_set(oracle::Rng& rng, int n, const char* tag) {
    SpherePointSet s;
    s.source = tag;
    for (int j = 0; j < n; ++j) s.points.push_back(rand_unit(rng));
    return s;
}

// Runs a depth-1 chain on a fresh grid, keeping a snapshot after every step.
struct ChainRun {
    FormalSchedule schedule;
    std::vector<std::shared_ptr<const FieldGrid>> snaps;

    RunArtifacts artifacts() const {
        RunArtifacts art;
        art.schedule = schedule;
        art.steps_completed = static_cast<int>(snaps.size());
        art.field_after_step = [this](int j) { return snaps[static_cast<std::size_t>(j)]; };
        return art;
    }
};

ChainRun run_chain(double rho0, std::array<long, 3> ns, int steps = 3) {
    ChainRun run;
    run.schedule.n = {ns};
    long n_max = 1;
    for (int i = 0; i < steps; ++i) n_max = std::max(n_max, ns[static_cast<std::size_t>(i)]);
    GridSpec spec;
    spec.rho0 = rho0;
    spec.rho_count = rho_count_for(n_max, 12.0 * (1.0 - rho0));
    spec.phi_count = phi_count_for(n_max, 7);
    spec.ghost = 4;
    FieldGrid f = initial_embedding(spec);
    for (int i = 1; i <= steps; ++i) {
        StepResult r = cp_step(f, 1, i, ns[static_cast<std::size_t>(i - 1)]);
        f = std::move(r.field);
        run.snaps.push_back(std::make_shared<FieldGrid>(f));
    }
    return run;
}

// Same sup the comparison should produce, walked through the pointwise step
// engine node by node.
double brute_sup(const FieldGrid& f, const FormalSchedule& s, int k_to, int i_to,
                 RhoInterval win) {
    double sup = 0.0;
    for (int ir = f.spec.row_begin(); ir < f.spec.row_end(); ++ir) {
        const double rho = f.rho(ir);
        if (rho < win.lo - 1e-12 || rho > win.hi + 1e-12) continue;
        for (int jp = 0; jp < f.spec.phi_count; ++jp) {
            FormalPoint pt = formal_seed(rho, f.phi(jp));
            for (int k = 1; k <= k_to; ++k)
                for (int i = 1; i <= (k == k_to ? i_to : 3); ++i) pt = fcp_step(pt, s.at(k, i));
            sup = std::max(sup, op_norm(df_at(f, ir, jp) - pt.map));
        }
    }
    return sup;
}

}  // namespace

TEST_CASE("hausdorff distance is a metric on sphere samples") {
    oracle::Rng rng{11};
    const SpherePointSet a = random_set(rng, 100, "a");
    CHECK(hausdorff_sphere(a, a) == 0.0);

    SpherePointSet north, south;
    north.points = {{0.0, 0.0, 1.0}};
    north.source = "north";
    south.points = {{0.0, 0.0, -1.0}};
    south.source = "south";
    CHECK(hausdorff_sphere(north, south) == doctest::Approx(kPi).epsilon(1e-12));

    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 axis = rand_unit(rng);
        const double delta = rng.uniform(0.01, 0.3);
        SpherePointSet b;
        b.source = "rotated";
        for (const Vec3& p : a.points) b.points.push_back(rotate_about(p, axis, delta));
        const double h = hausdorff_sphere(a, b);
        CHECK(h <= delta + 1e-12);
        CHECK(h >= 0.0);
        CHECK(hausdorff_sphere(b, a) == h);
    }

    for (int trial = 0; trial < 25; ++trial) {
        const SpherePointSet x = random_set(rng, 20, "x");
        const SpherePointSet y = random_set(rng, 20, "y");
        const SpherePointSet z = random_set(rng, 20, "z");
        CHECK(hausdorff_sphere(x, z) <= hausdorff_sphere(x, y) + hausdorff_sphere(y, z) + 1e-12);
    }

    SpherePointSet empty;
    empty.source = "empty";
    CHECK_THROWS_AS((void)hausdorff_sphere(empty, a), std::domain_error);
    SpherePointSet bad = a;
    bad.points[0] = 1.5 * bad.points[0];
    CHECK_THROWS_AS((void)hausdorff_sphere(bad, a), std::domain_error);
}

TEST_CASE("box counting calibrates on known curves and patches") {
    std::vector<Vec3> circle;
    for (int t = 0; t < 4096; ++t) {
        const double phi = 2.0 * kPi * t / 4096.0;
        circle.push_back({std::cos(phi), std::sin(phi), 0.0});
    }
    const BoxCountEstimate c = box_counting_dimension(circle);
    REQUIRE(c.edges.size() == 3);
    REQUIRE(c.counts.size() == 3);
    CHECK(c.edges[0] > c.edges[1]);
    CHECK(c.edges[1] > c.edges[2]);
    CHECK(c.counts[0] < c.counts[1]);
    CHECK(c.counts[1] < c.counts[2]);
    CHECK(std::fabs(c.dimension - 1.0) <= 0.1);

    oracle::Rng rng{22};
    std::vector<Vec3> patch;
    for (int t = 0; t < 20000; ++t)
        patch.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), 0.0});
    const BoxCountEstimate p = box_counting_dimension(patch);
    CHECK(p.dimension >= 1.8);
    CHECK(p.dimension <= 2.2);
    CHECK(p.std_error < 0.2);

    CHECK(box_counting_dimension({}).edges.empty());
    CHECK(box_counting_dimension({{1.0, 0.0, 0.0}}).dimension == 0.0);
    const std::vector<Vec3> same(5, Vec3{1.0, 2.0, 3.0});
    CHECK(box_counting_dimension(same).edges.empty());
}

TEST_CASE("limit set sampling reads the rim row") {
    GridSpec spec;
    spec.rho0 = 0.5;
    spec.rho_count = 41;
    spec.phi_count = 4900;
    spec.ghost = 4;
    const FieldGrid f = initial_embedding(spec);

    const LimitSetSample s = limit_set_sample(f);
    REQUIRE(s.points.size() == 4900);
    CHECK(norm(s.points[17] - f0_point(1.0, f.phi(17))) <= 1e-12);
    CHECK(std::fabs(s.box.dimension - 1.0) <= 0.1);
}

TEST_CASE("holder exponent calibrates on smooth and rough fields") {
    GridSpec spec;
    spec.rho0 = 0.9;
    spec.rho_count = 2049;
    spec.phi_count = 7;
    spec.ghost = 0;
    const HolderEstimate smooth = holder_estimate(initial_embedding(spec));
    CHECK(std::fabs(smooth.beta - 1.0) <= 0.05);
    CHECK(smooth.gaps.size() >= 10);
    CHECK(smooth.gaps.size() == smooth.moduli.size());

    GridSpec wspec;
    wspec.rho0 = 0.9;
    wspec.rho_count = 8193;
    wspec.phi_count = 7;
    wspec.ghost = 0;
    FieldGrid w;
    w.spec = wspec;
    w.nodes.assign(static_cast<std::size_t>(wspec.nodes()), Vec3{});
    for (int ir = 0; ir < wspec.total_rows(); ++ir) {
        const double rho = w.rho(ir);
        double v = 0.0;
        for (int m = 0; m <= 14; ++m)
            v += std::pow(2.0, -0.5 * m) * std::cos(std::pow(2.0, m) * 8.0 * rho + 0.7 * m);
        for (int jp = 0; jp < wspec.phi_count; ++jp) w.at(ir, jp) = {v, 0.0, 0.0};
    }
    const HolderEstimate rough = holder_estimate(w);
    CHECK(std::fabs(rough.beta - 0.5) <= 0.05);

    GridSpec coarse;
    coarse.rho0 = 0.9;
    coarse.rho_count = 5;
    coarse.phi_count = 7;
    coarse.ghost = 0;
    CHECK_THROWS_AS((void)holder_estimate(initial_embedding(coarse)), ConfigError);
}

TEST_CASE("stage comparison matches a brute-force pointwise chain") {
    const ChainRun run = run_chain(0.85, {6, 6, 6});
    const RunArtifacts art = run.artifacts();
    const RhoInterval win{0.85, 1.0};

    const std::vector<ComparisonRow> rows = compare_formal_holonomic(art, run.schedule, win);
    REQUIRE(rows.size() == 3);
    for (int step = 0; step < 3; ++step) {
        CHECK(rows[static_cast<std::size_t>(step)].k == 1);
        CHECK(rows[static_cast<std::size_t>(step)].i == step + 1);
        CHECK(rows[static_cast<std::size_t>(step)].sup_diff >= 0.0);
        const double expect =
            brute_sup(*run.snaps[static_cast<std::size_t>(step)], run.schedule, 1, step + 1, win);
        CHECK(rows[static_cast<std::size_t>(step)].sup_diff ==
              doctest::Approx(expect).epsilon(1e-9));
    }

    // Determinism: a second pass reproduces the rows bit for bit.
    const std::vector<ComparisonRow> again = compare_formal_holonomic(art, run.schedule, win);
    for (std::size_t s = 0; s < rows.size(); ++s)
        CHECK(again[s].sup_diff == rows[s].sup_diff);

    // Restricting the window can only lower the sup.
    const std::vector<ComparisonRow> inner =
        compare_formal_holonomic(art, run.schedule, {0.9, 0.97});
    for (std::size_t s = 0; s < rows.size(); ++s) CHECK(inner[s].sup_diff <= rows[s].sup_diff);

    FormalSchedule other;
    other.n = {{6, 6, 12}};
    CHECK_THROWS_AS((void)compare_formal_holonomic(art, other, win), ConfigError);
    CHECK_THROWS_AS((void)compare_formal_holonomic(art, run.schedule, {0.2, 0.5}), ConfigError);
    CHECK_THROWS_AS((void)compare_formal_holonomic(art, run.schedule, {0.9, 0.8}), ConfigError);

    RunArtifacts broken = art;
    broken.field_after_step = [&run](int) { return run.snaps[0]; };
    CHECK_THROWS_AS((void)compare_formal_holonomic(broken, run.schedule, win), ConfigError);

    RunArtifacts overlong = art;
    overlong.steps_completed = 4;
    CHECK_THROWS_AS((void)compare_formal_holonomic(overlong, run.schedule, win), ConfigError);
}

TEST_CASE("stage comparison shrinks when the whole schedule doubles") {
    // Doubling every corrugation number halves the first-stage gap and must
    // not let any later stage regress: the per-step error scales with the
    // previous number over the current one, so equal ratios keep that part
    // fixed while the propagated part shrinks with the improved input.
    const ChainRun coarse = run_chain(0.9, {2, 14, 14}, 2);
    const ChainRun fine = run_chain(0.9, {4, 28, 28}, 2);
    const RhoInterval win{0.9, 1.0};

    const auto rows_coarse = compare_formal_holonomic(coarse.artifacts(), coarse.schedule, win);
    const auto rows_fine = compare_formal_holonomic(fine.artifacts(), fine.schedule, win);
    REQUIRE(rows_coarse.size() == 2);
    REQUIRE(rows_fine.size() == 2);

    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(rows_coarse[s].sup_diff > 0.0);
        CHECK(rows_fine[s].sup_diff <= 0.75 * rows_coarse[s].sup_diff);
    }
    // The first stage starts from the smooth seed, so it tracks the law
    // directly; 0.65 leaves room for the window seeing a partial period.
    CHECK(rows_fine[0].sup_diff <= 0.65 * rows_coarse[0].sup_diff);

    // Square-root telescoping with the constant measured on the coarse run.
    const double c_meas = rows_coarse[1].sup_diff / std::sqrt(rows_coarse[0].sup_diff);
    CHECK(rows_fine[1].sup_diff <= 3.0 * c_meas * std::sqrt(rows_fine[0].sup_diff));
}
