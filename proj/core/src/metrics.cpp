#include "corrhyp/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "corrhyp/rng.hpp"

namespace corrhyp {

namespace {
int circular(int i) {
    if (i < 0 || i > 3) throw std::domain_error("WavefrontSystem: index must lie in [0, 3]");
    return i == 0 ? 3 : i;
}
}  // namespace

Covec2 WavefrontSystem::ell(int i) {
    const double a = slope_a();
    switch (circular(i)) {
        case 1: return {-1.0, 0.0};
        case 2: return {1.0, -a};
        default: return {1.0, a};
    }
}

Vec2 WavefrontSystem::w_vec(int i) {
    const double a = slope_a();
    switch (circular(i)) {
        case 1: return {0.0, -1.0};
        case 2: return {a, 1.0};
        default: return {-a, 1.0};
    }
}

Vec2 WavefrontSystem::v_vec(int i) {
    switch (circular(i)) {
        case 1: return {-1.0, 0.0};
        default: return {1.0, 0.0};
    }
}

double WavefrontSystem::phase(int i, double rho, double phi) {
    const double a = slope_a();
    switch (circular(i)) {
        case 1: return -rho;
        case 2: return rho - a * phi;
        default: return rho + a * phi;
    }
}

ConeCoords h_coords(SymForm2 b) {
    const double a = slope_a();
    const double a2 = a * a;
    return {b.E - b.G / a2,
            b.G / (2.0 * a2) - b.F / (2.0 * a),
            b.G / (2.0 * a2) + b.F / (2.0 * a)};
}

SymForm2 cone_reconstruct(ConeCoords c) {
    SymForm2 out;
    const double etas[3] = {c.eta1, c.eta2, c.eta3};
    for (int i = 1; i <= 3; ++i) out = out + etas[i - 1] * outer_square(WavefrontSystem::ell(i));
    return out;
}

SymForm2 h_metric(double rho) {
    if (!(rho > 0.0) || !(rho < 1.0))
        throw std::domain_error("h_metric: rho must lie in (0, 1)");
    const double d = 1.0 - rho * rho;
    const double c = 4.0 / (d * d);
    return {c, 0.0, c * rho * rho};
}

SymForm2 pullback_f0(double rho) {
    // the small overhang past 1 admits stencil margin rows beyond the rim
    if (!(rho >= 0.0) || rho > 1.125)
        throw std::domain_error("pullback_f0: rho must lie in [0, 1.125]");
    return {4.0 * (1.0 + 2.0 * rho * rho), 0.0, 4.0 * rho * rho};
}

SymForm2 isometric_deficit(double rho) {
    return h_metric(rho) - pullback_f0(rho);
}

SymForm2 metric_ladder(int k, double rho) {
    if (k < 0) throw std::domain_error("metric_ladder: k must be >= 0");
    if (!(rho >= 0.0) || rho > 1.125)
        throw std::domain_error("metric_ladder: rho must lie in [0, 1.125]");
    const double r2 = rho * rho;
    double de = 0.0, dg = 0.0;
    double p = r2;  // rho^(2n) running power, n starting at 1 gives rho^(2(n+1))
    for (int n = 1; n <= k; ++n) {
        p *= r2;  // now rho^(2(n+1))
        de += (n + 2) * p;
        dg += (n + 1) * p;
    }
    SymForm2 g = pullback_f0(rho);
    g.E += 4.0 * de;
    g.G += 4.0 * dg;
    return g;
}

ConeCoords ladder_increment_coords(int k, double rho) {
    if (k < 1) throw std::domain_error("ladder_increment_coords: k must be >= 1");
    if (!(rho >= 0.0) || rho > 1.125)
        throw std::domain_error("ladder_increment_coords: rho must lie in [0, 1.125]");
    const double a2 = slope_a() * slope_a();
    const double p = 4.0 * std::pow(rho, 2.0 * (k + 1));
    const double side = p * (k + 1) / (2.0 * a2);
    return {p * (k + 2 - (k + 1) / a2), side, side};
}

namespace {

double coord_of(int i, SymForm2 b) {
    const ConeCoords c = h_coords(b);
    return i == 1 ? c.eta1 : (i == 2 ? c.eta2 : c.eta3);
}

}  // namespace

OperatorNorms hmax_and_ch(int samples, std::uint64_t seed) {
    if (samples < 1000) throw std::domain_error("hmax_and_ch: too few samples");
    Rng rng(seed);
    double best[4] = {0, 0, 0, 0};
    SymForm2 best_form[4];
    for (int s = 0; s < samples; ++s) {
        SymForm2 b{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double n = form_norm(b);
        if (n < 1e-9) continue;
        b = (1.0 / n) * b;
        for (int i = 1; i <= 3; ++i) {
            const double v = std::fabs(coord_of(i, b));
            if (v > best[i]) {
                best[i] = v;
                best_form[i] = b;
            }
        }
    }
    // local refinement around each champion
    for (int i = 1; i <= 3; ++i) {
        SymForm2 b = best_form[i];
        double step = 0.05;
        for (int it = 0; it < 400; ++it) {
            SymForm2 cand{b.E + rng.uniform(-step, step), b.F + rng.uniform(-step, step),
                          b.G + rng.uniform(-step, step)};
            const double n = form_norm(cand);
            if (n < 1e-9) continue;
            cand = (1.0 / n) * cand;
            const double v = std::fabs(coord_of(i, cand));
            if (v > best[i]) {
                best[i] = v;
                b = cand;
            }
            step *= 0.99;
        }
    }
    OperatorNorms out;
    out.h_max = std::max(best[1], std::max(best[2], best[3]));
    const double l2 = form_norm(outer_square(WavefrontSystem::ell(2)));
    const double l3 = form_norm(outer_square(WavefrontSystem::ell(3)));
    out.c_h = 1.0 + out.h_max * (l2 + l3);
    return out;
}

}  // namespace corrhyp
