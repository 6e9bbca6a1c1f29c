#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "corrhyp/formal.hpp"
#include "corrhyp/geom.hpp"
#include "corrhyp/grid.hpp"

// Cross-checks between the integrated corrugation runs and their pointwise
// counterparts: sup-norm comparison of tangent maps stage by stage, Hausdorff
// distances between normal-image samples on the sphere, and scaling
// diagnostics (box-counting dimension, radial Holder exponent) of run output.

namespace corrhyp {

// Closed rho-interval a comparison is restricted to.
struct RhoInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Finite sample of unit vectors.
struct SpherePointSet {
    std::vector<Vec3> points;
    std::string source;

    // Every point must be unit to 1e-9.
    void validate() const;
};

// Sup over the window of the operator-norm gap between the run's tangent
// map and the pointwise target at one stage.
struct ComparisonRow {
    int k = 0;
    int i = 0;
    double sup_diff = 0.0;
    RhoInterval window;
};

// A completed run as the comparisons see it: the schedule it executed and a
// loader for the field after each step (0-based, in execution order).
// Loading is a callback so callers can hand over in-memory snapshots or
// stream them from disk; the pointer keeps large grids from being copied.
struct RunArtifacts {
    FormalSchedule schedule;
    int steps_completed = 0;
    std::function<std::shared_ptr<const FieldGrid>(int step)> field_after_step;
};

// Per-stage sup-norm distance between the grid differential and the exact
// pointwise map, restricted to window. The formal side is evaluated with the
// grid's own seam-exact phase convention. Throws ConfigError when the run's
// schedule disagrees with the requested formal evaluation, when a loaded
// field's stage tag is out of order, or when the window misses the grid.
std::vector<ComparisonRow> compare_formal_holonomic(const RunArtifacts& run,
                                                    const FormalSchedule& formal,
                                                    RhoInterval window);

// Symmetric Hausdorff distance under the great-circle metric, exact for the
// given samples. Throws std::domain_error on an empty or non-unit set.
double hausdorff_sphere(const SpherePointSet& a, const SpherePointSet& b);

// Occupied axis-aligned boxes at three dyadic scales and the least-squares
// slope of log(count) against log(1/edge). Scales are chosen so the coarsest
// boxes hold at least 10 points and the finest at least 2 on average; the
// slope's standard error comes from the single leftover degree of freedom.
struct BoxCountEstimate {
    std::vector<double> edges;
    std::vector<long> counts;
    double dimension = 0.0;
    double std_error = 0.0;
};

BoxCountEstimate box_counting_dimension(const std::vector<Vec3>& points);

// Image of the outermost rho row of a completed run plus its box-counting
// estimate. Finitely many layers keep the sampled curve rectifiable, so the
// estimate is a trend indicator, not a dimension claim.
struct LimitSetSample {
    std::vector<Vec3> points;
    BoxCountEstimate box;
};

LimitSetSample limit_set_sample(const FieldGrid& final_field);

// Log-log regression of the radial modulus sup_phi |f(rho+h) - f(rho)|
// against the gap h, measured near the outer edge (rho in [0.95, 1], twenty
// log-spaced gaps snapped to grid rows). beta is the fitted slope; residual
// is the rms misfit in log coordinates.
struct HolderEstimate {
    double beta = 0.0;
    double residual = 0.0;
    std::vector<double> gaps;
    std::vector<double> moduli;
};

HolderEstimate holder_estimate(const FieldGrid& field);

}  // namespace corrhyp
