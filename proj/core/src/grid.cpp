#include "corrhyp/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace corrhyp {

namespace {
constexpr double two_pi = 6.283185307179586476925286766559;
}

double GridSpec::dphi() const { return two_pi / phi_count; }

double FieldGrid::phi(int jp) const { return two_pi * jp / spec.phi_count; }

int phi_count_for(long n_max, int pattern_period, double spp) {
    // the oblique phases advance by a n_max per unit phi; 7 a n_max is the
    // sizing rule's frequency figure (a = 7 / 2 pi)
    const double a = 7.0 / two_pi;
    long want = static_cast<long>(std::ceil(spp * 7.0 * a * n_max));
    if (pattern_period < 1) throw std::invalid_argument("pattern_period must be positive");
    long q = (want + pattern_period - 1) / pattern_period;
    if (q < 1) q = 1;
    long count = q * pattern_period;
    if (count > 100000000L) throw std::invalid_argument("phi_count_for: grid would be enormous");
    return static_cast<int>(count);
}

int rho_count_for(long n_max, double spp) {
    long want = static_cast<long>(std::ceil(spp * n_max)) + 1;
    if (want < 5) want = 5;  // minimum for the interior 4th order stencil
    if (want > 100000000L) throw std::invalid_argument("rho_count_for: grid would be enormous");
    return static_cast<int>(want);
}

LinMap23& DiffField::at(int ir, int jp) {
    return maps[static_cast<long>(ir) * spec.phi_count + jp];
}
const LinMap23& DiffField::at(int ir, int jp) const {
    return maps[static_cast<long>(ir) * spec.phi_count + jp];
}

LinMap23 df_at(const FieldGrid& g, int ir, int jp) {
    const int nr = g.spec.total_rows();
    const double hr = g.spec.drho();
    const double hp = g.spec.dphi();

    Vec3 dr;
    if (ir >= 2 && ir <= nr - 3) {
        dr = (1.0 / (12.0 * hr)) *
             (g.at(ir - 2, jp) - g.at(ir + 2, jp) + 8.0 * (g.at(ir + 1, jp) - g.at(ir - 1, jp)));
    } else if (ir == 0) {
        dr = (1.0 / (2.0 * hr)) * (-3.0 * g.at(0, jp) + 4.0 * g.at(1, jp) - g.at(2, jp));
    } else if (ir == nr - 1) {
        dr = (1.0 / (2.0 * hr)) *
             (3.0 * g.at(nr - 1, jp) - 4.0 * g.at(nr - 2, jp) + g.at(nr - 3, jp));
    } else {
        dr = (1.0 / (2.0 * hr)) * (g.at(ir + 1, jp) - g.at(ir - 1, jp));
    }

    Vec3 dp = (1.0 / (12.0 * hp)) *
              (g.at(ir, jp - 2) - g.at(ir, jp + 2) + 8.0 * (g.at(ir, jp + 1) - g.at(ir, jp - 1)));

    return LinMap23{dr, dp};
}

DiffField differentiate(const FieldGrid& g) {
    if (g.spec.total_rows() < 5 || g.spec.phi_count < 5)
        throw std::invalid_argument("differentiate: grid too small for the stencils");
    DiffField d;
    d.spec = g.spec;
    d.maps.resize(g.spec.nodes());
    for (int ir = 0; ir < g.spec.total_rows(); ++ir)
        for (int jp = 0; jp < g.spec.phi_count; ++jp) d.at(ir, jp) = df_at(g, ir, jp);
    return d;
}

std::vector<SymForm2> pullback_field(const FieldGrid& g) {
    DiffField d = differentiate(g);
    std::vector<SymForm2> out(d.maps.size());
    for (size_t idx = 0; idx < d.maps.size(); ++idx) out[idx] = pullback(d.maps[idx]);
    return out;
}

}  // namespace corrhyp
