#include "corrhyp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "corrhyp/errors.hpp"
#include "corrhyp/holonomic.hpp"
#include "corrhyp/metrics.hpp"
#include "kdtree3.hpp"

namespace corrhyp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double loop_cos(double x) { return std::cos(kTwoPi * (x - std::floor(x))); }

// Least-squares line through (x, y); returns the slope, its standard error
// (zero when there is no leftover degree of freedom), and the rms residual.
void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope,
              double& slope_err, double& rms) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        mx += x[j];
        my += y[j];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        sxx += (x[j] - mx) * (x[j] - mx);
        sxy += (x[j] - mx) * (y[j] - my);
    }
    slope = sxy / sxx;
    const double icept = my - slope * mx;
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double r = y[j] - (icept + slope * x[j]);
        ss += r * r;
    }
    rms = std::sqrt(ss / static_cast<double>(n));
    slope_err = n > 2 ? std::sqrt(ss / static_cast<double>(n - 2) / sxx) : 0.0;
}

// Everything about the pointwise chain at fixed rho that does not depend on
// phi: amplitudes, frame twists, circle radii, and the directions being
// corrugated. Hoisting these out of the node loop leaves only trigonometry
// and column updates per node.
struct ChainStage {
    int i = 0;
    long n = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double r = 0.0;
    Vec2 u;
    Covec2 ell;
};

class FormalRowEvaluator {
  public:
    FormalRowEvaluator(const FormalSchedule& s, int k_to, int i_to, double rho) : rho_(rho) {
        for (int k = 1; k <= k_to; ++k)
            for (int i = 1; i <= (k == k_to ? i_to : 3); ++i) {
                ChainStage st;
                st.i = i;
                st.n = s.at(k, i);
                const RotationPair rp = rotation_pair(k, i, rho);
                st.alpha = rp.alpha;
                st.beta = rp.beta;
                st.u = u_vector(mu_phi(k, i - 1, rho), i);
                const ConeCoords inc = ladder_increment_coords(k, rho);
                const double eta = i == 1 ? inc.eta1 : (i == 2 ? inc.eta2 : inc.eta3);
                st.r = std::sqrt(eta + rp.z);
                st.ell = WavefrontSystem::ell(i);
                stages_.push_back(st);
            }
    }

    // a_phi is the caller's a * phi; grids pass their seam-exact value so the
    // pointwise map samples the same oscillation the corrugation wrote.
    LinMap23 map_at(double phi, double a_phi) const {
        LinMap23 map = f0_diff(rho_, phi);
        Mat3 fr = frame_matrix(corrugation_frame(map, 1));
        const std::size_t last = stages_.size() - 1;
        for (std::size_t j = 0; j < stages_.size(); ++j) {
            const ChainStage& st = stages_[j];
            const double phase =
                st.i == 1 ? -rho_ : (st.i == 2 ? rho_ - a_phi : rho_ + a_phi);
            const double theta = st.alpha * loop_cos(static_cast<double>(st.n) * phase);
            const Vec3 t = fr.column(0);
            const Vec3 nrm = fr.column(2);
            const Vec3 z = (st.r * std::cos(theta)) * t + (st.r * std::sin(theta)) * nrm;
            const Vec3 d = z - map.apply(st.u);
            map.d_rho += st.ell.c_rho * d;
            map.d_phi += st.ell.c_phi * d;
            if (j != last) fr = fr * rotation_tn(theta) * rotation_about_n(st.beta);
        }
        return map;
    }

  private:
    double rho_;
    std::vector<ChainStage> stages_;
};

}  // namespace

void SpherePointSet::validate() const {
    if (points.empty()) throw std::domain_error("SpherePointSet: empty set (" + source + ")");
    for (const Vec3& p : points)
        if (std::fabs(norm(p) - 1.0) > 1e-9)
            throw std::domain_error("SpherePointSet: non-unit point (" + source + ")");
}

std::vector<ComparisonRow> compare_formal_holonomic(const RunArtifacts& run,
                                                    const FormalSchedule& formal,
                                                    RhoInterval window) {
    formal.validate();
    if (run.schedule.n != formal.n)
        throw ConfigError("compare_formal_holonomic: run and formal schedules differ");
    if (run.steps_completed < 0 || run.steps_completed > 3 * formal.depth())
        throw ConfigError("compare_formal_holonomic: step count outside the schedule");
    if (!(window.lo <= window.hi))
        throw ConfigError("compare_formal_holonomic: empty comparison window");

    std::vector<ComparisonRow> rows;
    for (int step = 0; step < run.steps_completed; ++step) {
        const int k = step / 3 + 1;
        const int i = step % 3 + 1;
        const std::shared_ptr<const FieldGrid> f = run.field_after_step(step);
        if (!f) throw ConfigError("compare_formal_holonomic: missing field snapshot");
        if (f->layer_k != k || f->layer_i != i)
            throw ConfigError("compare_formal_holonomic: snapshot stage tag out of order");

        const GridSpec& spec = f->spec;
        const double tiny = 1e-12;
        double sup = 0.0;
        long nodes_seen = 0;
        for (int ir = spec.row_begin(); ir < spec.row_end(); ++ir) {
            const double rho = f->rho(ir);
            if (rho < window.lo - tiny || rho > window.hi + tiny) continue;
            const FormalRowEvaluator eval(formal, k, i, rho);
            for (int jp = 0; jp < spec.phi_count; ++jp) {
                const LinMap23 target = eval.map_at(f->phi(jp), f->a_phi(jp));
                sup = std::max(sup, op_norm(df_at(*f, ir, jp) - target));
                ++nodes_seen;
            }
        }
        if (nodes_seen == 0)
            throw ConfigError("compare_formal_holonomic: window misses every grid row");
        rows.push_back({k, i, sup, window});
    }
    return rows;
}

namespace {

double great_circle(double chord) { return 2.0 * std::asin(std::min(1.0, 0.5 * chord)); }

}  // namespace

double hausdorff_sphere(const SpherePointSet& a, const SpherePointSet& b) {
    a.validate();
    b.validate();
    const detail::KdTree3 ta(a.points), tb(b.points);
    double h = 0.0;
    for (const Vec3& p : a.points) h = std::max(h, tb.nearest_dist(p));
    for (const Vec3& p : b.points) h = std::max(h, ta.nearest_dist(p));
    return great_circle(h);
}

namespace {

long boxes_at(const std::vector<Vec3>& pts, Vec3 lo, double edge) {
    std::unordered_set<std::uint64_t> cells;
    cells.reserve(pts.size());
    for (const Vec3& p : pts) {
        const auto cx = static_cast<std::uint64_t>(std::floor((p.x - lo.x) / edge));
        const auto cy = static_cast<std::uint64_t>(std::floor((p.y - lo.y) / edge));
        const auto cz = static_cast<std::uint64_t>(std::floor((p.z - lo.z) / edge));
        cells.insert((cx << 42) | (cy << 21) | cz);
    }
    return static_cast<long>(cells.size());
}

}  // namespace

BoxCountEstimate box_counting_dimension(const std::vector<Vec3>& points) {
    BoxCountEstimate est;
    if (points.size() < 2) return est;

    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    if (!(extent > 0.0)) return est;

    const double n = static_cast<double>(points.size());
    constexpr int kMaxLevel = 18;  // cell keys carry 21 bits per axis
    long counts[kMaxLevel + 1];
    for (int m = 0; m <= kMaxLevel; ++m)
        counts[m] = boxes_at(points, lo, extent / static_cast<double>(1L << m));

    // Finest admissible triple: >= 2 points per finest box and >= 10 per
    // coarsest box on average keeps both ends of the fit populated.
    int m2 = -1;
    for (int m = kMaxLevel; m >= 2; --m)
        if (n / static_cast<double>(counts[m]) >= 2.0 &&
            n / static_cast<double>(counts[m - 2]) >= 10.0) {
            m2 = m;
            break;
        }
    if (m2 < 0)
        for (int m = kMaxLevel; m >= 2; --m)
            if (n / static_cast<double>(counts[m]) >= 2.0) {
                m2 = m;
                break;
            }
    if (m2 < 0) m2 = 2;

    std::vector<double> x, y;
    for (int m = m2 - 2; m <= m2; ++m) {
        const double edge = extent / static_cast<double>(1L << m);
        est.edges.push_back(edge);
        est.counts.push_back(counts[m]);
        x.push_back(std::log(1.0 / edge));
        y.push_back(std::log(static_cast<double>(counts[m])));
    }
    double rms = 0.0;
    fit_line(x, y, est.dimension, est.std_error, rms);
    return est;
}

LimitSetSample limit_set_sample(const FieldGrid& final_field) {
    LimitSetSample out;
    const GridSpec& spec = final_field.spec;
    const int rim = spec.row_end() - 1;
    out.points.reserve(static_cast<std::size_t>(spec.phi_count));
    for (int jp = 0; jp < spec.phi_count; ++jp) out.points.push_back(final_field.at(rim, jp));
    out.box = box_counting_dimension(out.points);
    return out;
}

HolderEstimate holder_estimate(const FieldGrid& field) {
    const GridSpec& spec = field.spec;
    const double drho = spec.drho();
    const double lo = std::max(0.95, spec.rho0);

    int first = spec.row_end() - 1;
    while (first > spec.row_begin() && field.rho(first - 1) >= lo - 1e-12) --first;

    const int span = spec.row_end() - 1 - first;  // largest gap in rows
    const int smax = std::min(span, static_cast<int>(std::floor(0.05 / drho)));
    const int smin = 2;
    if (smax < smin + 1)
        throw ConfigError("holder_estimate: grid too coarse for a radial regression");

    // Twenty log-spaced gaps snapped to whole rows, deduplicated.
    std::vector<int> gaps;
    for (int j = 0; j < 20; ++j) {
        const double t = static_cast<double>(j) / 19.0;
        const int s = static_cast<int>(
            std::lround(std::exp(std::log(static_cast<double>(smin)) +
                                 t * (std::log(static_cast<double>(smax)) -
                                      std::log(static_cast<double>(smin))))));
        if (gaps.empty() || s > gaps.back()) gaps.push_back(s);
    }

    HolderEstimate est;
    std::vector<double> x, y;
    for (int s : gaps) {
        double d = 0.0;
        for (int ir = first; ir + s < spec.row_end(); ++ir)
            for (int jp = 0; jp < spec.phi_count; ++jp)
                d = std::max(d, norm(field.at(ir + s, jp) - field.at(ir, jp)));
        if (!(d > 0.0)) continue;  // constant in the window at this gap
        est.gaps.push_back(s * drho);
        est.moduli.push_back(d);
        x.push_back(std::log(s * drho));
        y.push_back(std::log(d));
    }
    if (x.size() < 2) throw ConfigError("holder_estimate: too few usable gaps");

    double slope_err = 0.0;
    fit_line(x, y, est.beta, slope_err, est.residual);
    return est;
}

}  // namespace corrhyp
