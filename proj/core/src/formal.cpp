#include "corrhyp/formal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "corrhyp/errors.hpp"
#include "corrhyp/holonomic.hpp"
#include "corrhyp/specfun.hpp"
#include "kdtree3.hpp"

namespace corrhyp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// cos/sin of 2 pi x with the integer part stripped first, so phases stay
// accurate when x carries a large corrugation number.
double loop_cos(double x) { return std::cos(kTwoPi * (x - std::floor(x))); }

int next_direction(int i) { return i % 3 + 1; }

}  // namespace

long FormalSchedule::at(int k, int i) const {
    if (k < 1 || k > depth()) throw ConfigError("FormalSchedule: stage " + std::to_string(k) + " out of range");
    if (i < 1 || i > 3) throw ConfigError("FormalSchedule: direction must lie in [1, 3]");
    return n[static_cast<size_t>(k - 1)][static_cast<size_t>(i - 1)];
}

long FormalSchedule::m() const {
    long g = 0;
    for (const auto& row : n)
        for (long v : row) g = std::gcd(g, v);
    return g;
}

long FormalSchedule::l_trunc(int j) const {
    if (j < 1) throw ConfigError("FormalSchedule: truncation depth must be positive");
    long g = 0;
    for (int k = j; k <= depth(); ++k) {
        g = std::gcd(g, n[static_cast<size_t>(k - 1)][1]);
        g = std::gcd(g, n[static_cast<size_t>(k - 1)][2]);
    }
    return g;
}

void FormalSchedule::validate() const {
    for (const auto& row : n)
        for (long v : row)
            if (v < 1) throw ConfigError("FormalSchedule: corrugation numbers must be positive");
}

SymForm2 mu_phi(int k, int i, double rho) {
    if (k < 1) throw ConfigError("mu_phi: stage must be positive");
    if (i < 0 || i > 3) throw ConfigError("mu_phi: direction must lie in [0, 3]");
    SymForm2 mu = metric_ladder(k - 1, rho);
    if (i == 0) return mu;
    const ConeCoords inc = ladder_increment_coords(k, rho);
    const double eta[3] = {inc.eta1, inc.eta2, inc.eta3};
    for (int j = 1; j <= i; ++j) mu = mu + eta[j - 1] * outer_square(WavefrontSystem::ell(j));
    return mu;
}

FormalPoint formal_seed(double rho, double phi) {
    FormalPoint pt;
    pt.rho = rho;
    pt.phi = phi;
    pt.stage_k = 1;
    pt.stage_i = 0;
    pt.map = f0_diff(rho, phi);
    pt.frame = corrugation_frame(pt.map, 1);
    pt.mu = metric_ladder(0, rho);
    return pt;
}

FormalPoint fcp_step(const FormalPoint& pt, long n) {
    if (n < 1) throw ConfigError("fcp_step: corrugation number must be positive");
    int k = pt.stage_k;
    int i = pt.stage_i + 1;
    if (i > 3) {
        k += 1;
        i = 1;
    }

    const double eta_raw = [&] {
        const ConeCoords c = h_coords(metric_ladder(k, pt.rho) - pt.mu);
        return i == 1 ? c.eta1 : (i == 2 ? c.eta2 : c.eta3);
    }();
    if (eta_raw < -1e-12)
        throw InternalConsistencyError("fcp_step: ladder increment came out negative");
    const double eta = std::max(eta_raw, 0.0);

    const Frame3 fr = corrugation_frame(pt.map, i);
    const Vec2 u = u_vector(pt.mu, i);
    const Vec3 map_u = pt.map.apply(u);
    const double norm_u = norm(map_u);
    const double r = std::sqrt(eta + norm_u * norm_u);
    const double alpha = bessel_j0_inv(norm_u / r);
    const double theta = alpha * loop_cos(static_cast<double>(n) *
                                          WavefrontSystem::phase(i, pt.rho, pt.phi));

    const Vec3 z = r * std::cos(theta) * fr.t + r * std::sin(theta) * fr.n;
    const Vec3 delta = z - map_u;
    const Covec2 ell = WavefrontSystem::ell(i);

    FormalPoint out;
    out.rho = pt.rho;
    out.phi = pt.phi;
    out.stage_k = k;
    out.stage_i = i;
    out.map.d_rho = pt.map.d_rho + ell.c_rho * delta;
    out.map.d_phi = pt.map.d_phi + ell.c_phi * delta;
    out.mu = mu_phi(k, i, pt.rho);
    if (form_norm(pullback(out.map) - out.mu) > 1e-10)
        throw InternalConsistencyError("fcp_step: pullback drifted from the target metric");
    out.frame = corrugation_frame(out.map, next_direction(i));
    return out;
}

RotationPair rotation_pair(int k, int i, double rho) {
    if (k < 1) throw ConfigError("rotation_pair: stage must be positive");
    if (i < 1 || i > 3) throw ConfigError("rotation_pair: direction must lie in [1, 3]");
    if (!(rho > 0.0)) throw ConfigError("rotation_pair: rho must be positive");

    const SymForm2 mu_pre = mu_phi(k, i - 1, rho);
    const Vec2 u = u_vector(mu_pre, i);
    const double z = mu_pre.quad(u);
    const ConeCoords inc = ladder_increment_coords(k, rho);
    const double eta = i == 1 ? inc.eta1 : (i == 2 ? inc.eta2 : inc.eta3);

    RotationPair out;
    out.z = z;
    out.alpha = bessel_j0_inv(std::sqrt(z / (eta + z)));

    const SymForm2 mu_post = mu_pre + eta * outer_square(WavefrontSystem::ell(i));
    const Vec2 wi = WavefrontSystem::w_vec(i);
    const Vec2 wn = WavefrontSystem::w_vec(next_direction(i));
    const double scale = std::sqrt(mu_post.quad(wi) * mu_post.quad(wn));
    const double det_mu = mu_post.E * mu_post.G - mu_post.F * mu_post.F;
    const double cos_b = mu_post.apply(wi, wn) / scale;
    const double sin_b = std::sqrt(std::max(det_mu, 0.0)) * det(wi, wn) / scale;
    out.beta = std::atan2(sin_b, cos_b);
    return out;
}

namespace {

struct StageFactor {
    double alpha = 0.0;
    double beta = 0.0;
    long n = 0;
    int i = 0;
};

// Angles depend on rho alone, so a phi sweep reuses this table.
std::vector<StageFactor> stage_factors(const FormalSchedule& s, int j, int kstar, double rho) {
    if (j < 1) throw ConfigError("normal_pattern: truncation depth must be positive");
    if (kstar > s.depth()) throw ConfigError("normal_pattern: schedule shallower than requested depth");
    s.validate();
    std::vector<StageFactor> out;
    for (int k = j; k <= kstar; ++k)
        for (int i = 1; i <= 3; ++i) {
            const RotationPair rp = rotation_pair(k, i, rho);
            out.push_back({rp.alpha, rp.beta, s.at(k, i), i});
        }
    return out;
}

Mat3 pattern_matrix_from(const std::vector<StageFactor>& factors, double rho, double phi) {
    Mat3 acc = Mat3::identity();
    for (const StageFactor& f : factors) {
        const double theta = f.alpha * loop_cos(static_cast<double>(f.n) *
                                                WavefrontSystem::phase(f.i, rho, phi));
        acc = acc * rotation_tn(theta) * rotation_about_n(f.beta);
    }
    return acc;
}

Mat3 initial_frame_matrix(double rho, double phi) {
    return frame_matrix(corrugation_frame(f0_diff(rho, phi), 1));
}

}  // namespace

Mat3 pattern_matrix(const FormalSchedule& s, int j, int kstar, double rho, double phi) {
    return pattern_matrix_from(stage_factors(s, j, kstar, rho), rho, phi);
}

Vec3 normal_pattern(const FormalSchedule& s, int j, int kstar, double rho, double phi) {
    return pattern_matrix(s, j, kstar, rho, phi).apply({0.0, 0.0, 1.0});
}

Vec3 formal_normal(const FormalSchedule& s, int kstar, double rho, double phi) {
    return (initial_frame_matrix(rho, phi) * pattern_matrix(s, 1, kstar, rho, phi))
        .apply({0.0, 0.0, 1.0});
}

double formal_tail_bound(int kstar, double rho) {
    if (!(rho > 0.0)) throw ConfigError("formal_tail_bound: rho must be positive");
    if (rho >= 1.0) return std::numeric_limits<double>::infinity();
    const double sqrt2 = std::sqrt(2.0);
    double acc = 0.0;
    for (int k = kstar + 1; k <= kstar + 20000; ++k) {
        double stage = 0.0;
        for (int i = 1; i <= 3; ++i) stage += sqrt2 * rotation_pair(k, i, rho).alpha;
        acc += stage;
        if (stage < 1e-15 * std::max(1.0, acc)) return acc;
    }
    return std::numeric_limits<double>::infinity();
}

double scaling_law_check(const FormalSchedule& s, long n, long m_line, int kstar,
                         int phi_samples) {
    const long m = s.m();
    if (n < 1) throw ConfigError("scaling_law_check: scale factor must be positive");
    if (m_line < 1 || m_line > m - 1)
        throw ConfigError("scaling_law_check: circle index must lie in [1, M-1]");
    if (phi_samples < 1) throw ConfigError("scaling_law_check: need at least one sample");

    FormalSchedule scaled = s;
    for (auto& row : scaled.n)
        for (long& v : row) v *= n;

    const double rho = static_cast<double>(m_line) / static_cast<double>(m);
    const auto base = stage_factors(s, 1, kstar, rho);
    const auto big = stage_factors(scaled, 1, kstar, rho);

    double worst = 0.0;
    for (int t = 0; t < phi_samples; ++t) {
        const double phi = kTwoPi * t / phi_samples;
        const Vec3 lhs = pattern_matrix_from(big, rho, phi).apply({0.0, 0.0, 1.0});
        const Vec3 rhs =
            pattern_matrix_from(base, rho, static_cast<double>(n) * phi).apply({0.0, 0.0, 1.0});
        worst = std::max(worst, norm(lhs - rhs));
    }
    return worst;
}

namespace {

double chord_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    const detail::KdTree3 ta(a), tb(b);
    double h = 0.0;
    for (const Vec3& p : a) h = std::max(h, tb.nearest_dist(p));
    for (const Vec3& p : b) h = std::max(h, ta.nearest_dist(p));
    return h;
}

double great_circle(double chord) { return 2.0 * std::asin(std::min(1.0, 0.5 * chord)); }

}  // namespace

SelfSimilarityReport self_similarity_report(const FormalSchedule& s, int j, long m_line,
                                            int kstar, int samples_per_arc) {
    const long m = s.m();
    if (j < 1) throw ConfigError("self_similarity_report: level must be positive");
    if (kstar > 0 && (m_line < 1 || m_line > m - 2))
        throw ConfigError("self_similarity_report: circle index must lie in [1, M-2]");
    if (samples_per_arc < 2) throw ConfigError("self_similarity_report: too few samples");

    SelfSimilarityReport rep;
    rep.j = j;
    rep.samples_per_arc = samples_per_arc;

    if (kstar < j || kstar == 0) {
        // Empty tail product: the pattern and each of its copies is the
        // single point e3.
        return rep;
    }

    const long lj = s.l_trunc(j);
    if (lj == 0) throw ConfigError("self_similarity_report: level exceeds schedule depth");
    rep.copies = 7 * lj;
    rep.arc_width = kTwoPi / static_cast<double>(7 * lj);
    rep.rotation_bound = rep.arc_width;

    const double rho = static_cast<double>(m_line) / static_cast<double>(m);
    const auto tail = stage_factors(s, j, kstar, rho);
    const auto head = stage_factors(s, 1, j - 1, rho);

    int samples = samples_per_arc;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<Vec3> copies_set, gauss_set;
        copies_set.reserve(static_cast<size_t>(rep.copies) * samples);
        gauss_set.reserve(static_cast<size_t>(rep.copies) * samples);

        std::vector<Vec3> arc(static_cast<size_t>(samples));
        for (int t = 0; t < samples; ++t)
            arc[static_cast<size_t>(t)] =
                pattern_matrix_from(tail, rho, rep.arc_width * t / samples).apply({0.0, 0.0, 1.0});

        double step_chord = 0.0;
        for (long l = 0; l < rep.copies; ++l) {
            const double phi_l = rep.arc_width * static_cast<double>(l);
            const Mat3 anchor =
                initial_frame_matrix(rho, phi_l) * pattern_matrix_from(head, rho, phi_l);
            for (int t = 0; t < samples; ++t)
                copies_set.push_back(anchor.apply(arc[static_cast<size_t>(t)]));
            Vec3 prev{};
            for (int t = 0; t < samples; ++t) {
                const double phi = phi_l + rep.arc_width * t / samples;
                const Vec3 g = (initial_frame_matrix(rho, phi) *
                                pattern_matrix_from(head, rho, phi))
                                   .apply(pattern_matrix_from(tail, rho, phi).apply({0, 0, 1}));
                gauss_set.push_back(g);
                if (t > 0) step_chord = std::max(step_chord, norm(g - prev));
                prev = g;
            }
        }

        rep.hausdorff = great_circle(chord_hausdorff(copies_set, gauss_set));
        rep.sampling_step = great_circle(step_chord);

        // Pattern curves are rough; refine once when the measurement is
        // within a factor two of the bound it must certify.
        if (rep.hausdorff < 0.5 * rep.rotation_bound || attempt == 1) break;
        samples *= 4;
        rep.samples_per_arc = samples;
    }
    return rep;
}

std::pair<double, double> weierstrass_modulus(const FormalSchedule& s, double rho, double phi1,
                                              double phi2, int kstar) {
    const auto factors = stage_factors(s, 1, kstar, rho);
    const double sqrt2 = std::sqrt(2.0);
    double bound = 0.0;
    for (const StageFactor& f : factors) {
        const double c1 = loop_cos(static_cast<double>(f.n) * WavefrontSystem::phase(f.i, rho, phi1));
        const double c2 = loop_cos(static_cast<double>(f.n) * WavefrontSystem::phase(f.i, rho, phi2));
        bound += sqrt2 * f.alpha * std::fabs(c2 - c1);
    }
    bound += frobenius_distance(initial_frame_matrix(rho, phi2), initial_frame_matrix(rho, phi1));

    const double actual =
        norm(formal_normal(s, kstar, rho, phi2) - formal_normal(s, kstar, rho, phi1));
    return {bound, actual};
}

}  // namespace corrhyp
