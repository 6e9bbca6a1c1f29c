#pragma once

#include <vector>

#include "corrhyp/geom.hpp"

// Uniform product grid on the annulus [rho0, 1] x S^1 carrying one 3-vector
// per node. phi periodicity is structural (wraparound indexing), so
// corrugated fields are exactly 2 pi periodic. The grid may carry extra
// "ghost" rows beyond both rho edges at the same spacing; they keep the
// radial stencils centered and 4th order on every real row, layer after
// layer, while one-sided differencing noise stays confined to the margin.
// Storage row indices run over ghost + rho_count + ghost rows; real rows are
// [row_begin, row_end).

namespace corrhyp {

struct GridSpec {
    double rho0 = 0.1;  // inner edge of the real annulus
    int rho_count = 0;  // real rows, spanning [rho0, 1]
    int phi_count = 0;
    int ghost = 0;  // margin rows beyond each rho edge

    double drho() const { return (1.0 - rho0) / (rho_count - 1); }
    double dphi() const;
    int total_rows() const { return rho_count + 2 * ghost; }
    int row_begin() const { return ghost; }
    int row_end() const { return ghost + rho_count; }
    long nodes() const { return static_cast<long>(total_rows()) * phi_count; }
};

// Smallest phi resolution giving at least spp * (7 a n_max) samples around
// the circle, rounded up to a multiple of pattern_period (7 L keeps wavefront
// phases aligned with the seam).
int phi_count_for(long n_max, int pattern_period, double spp = 12.0);

// Real rho rows for at least spp * n_max samples across the annulus; the
// radial wavefront period is 1/n independent of rho0.
int rho_count_for(long n_max, double spp = 12.0);

struct FieldGrid {
    GridSpec spec;
    int layer_k = 0;  // stage tag of the last corrugation applied
    int layer_i = 0;  // (0, 0) marks the initial embedding
    std::vector<Vec3> nodes;

    // ir is a storage row index; ghost rows sit below row_begin and at or
    // above row_end
    double rho(int ir) const { return spec.rho0 + (ir - spec.ghost) * spec.drho(); }
    double phi(int jp) const;
    // a * phi at a node, computed as 7 jp / phi_count so the oblique phases
    // close up exactly over the seam
    double a_phi(int jp) const { return 7.0 * jp / spec.phi_count; }

    int wrap(int jp) const {
        const int n = spec.phi_count;
        jp %= n;
        return jp < 0 ? jp + n : jp;
    }
    Vec3& at(int ir, int jp) { return nodes[static_cast<long>(ir) * spec.phi_count + wrap(jp)]; }
    const Vec3& at(int ir, int jp) const {
        return nodes[static_cast<long>(ir) * spec.phi_count + wrap(jp)];
    }
};

// Tangent maps of a grid field, one per node.
struct DiffField {
    GridSpec spec;
    std::vector<LinMap23> maps;

    LinMap23& at(int ir, int jp);
    const LinMap23& at(int ir, int jp) const;
};

// Tangent map at one node: 4th order central differences inside, 2nd order
// (one-sided at the outermost rows) near the storage edges, periodic in phi.
LinMap23 df_at(const FieldGrid& g, int ir, int jp);

// Whole-grid differentiation, ghost rows included. The grid must resolve
// whatever frequencies the field carries; callers introducing corrugations
// check that before writing.
DiffField differentiate(const FieldGrid& g);

// First fundamental form at every node of a grid field.
std::vector<SymForm2> pullback_field(const FieldGrid& g);

}  // namespace corrhyp
