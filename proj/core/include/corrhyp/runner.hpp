#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "corrhyp/analysis.hpp"
#include "corrhyp/holonomic.hpp"
#include "corrhyp/io.hpp"

// Command orchestration over one output directory: corrugation runs with
// their artifact set, pointwise pattern dumps and reports, the stage-by-stage
// comparison, and snapshot re-export. Each command takes the directory lock,
// so at most one writer touches an output directory at a time.

namespace corrhyp {

struct BuildSummary {
    RunMeta meta;
    std::vector<StepReport> steps;
    std::vector<std::string> files;  // artifact names, outdir-relative
};

// Runs the configured schedule: per-step field snapshots, a step report
// table, per-stage budget assertions (pullback gap under the next ladder
// increment, value and tangent steps under the stage budget), and one mesh
// per completed stage. A failure keeps the partial artifacts, writes a FAILED
// marker naming the stage, and rethrows.
BuildSummary cmd_build(const RunConfig& cfg, std::ostream& log);

// Pattern and normal dumps on the configured circles plus self-similarity
// and scaling reports on the schedule's rational lines. Adaptive configs
// reuse the schedule recorded by a previous build in the same directory.
std::vector<std::string> cmd_formal(const RunConfig& cfg, std::ostream& log);

// Sup-norm comparison of a completed (possibly partial) run against its
// pointwise counterpart over the whole annulus; writes compare.csv.
std::vector<ComparisonRow> cmd_compare(const RunConfig& cfg, std::ostream& log);

struct ExportOptions {
    int stride_rho = 0;  // 0 selects the display default
    int stride_phi = 0;
};

// Re-exports every stored snapshot as a mesh at the requested strides.
std::vector<std::string> cmd_export(const RunConfig& cfg, const ExportOptions& opts,
                                    std::ostream& log);

// Reloads a run directory for comparisons: the executed schedule from
// run.meta, fields streamed from snapshots one step at a time. Unexecuted
// trailing entries of a partial stage are reported as 1 so the table stays
// well formed; they are never evaluated.
RunArtifacts load_artifacts(const std::string& outdir);

// The grid a schedule needs: 12 samples per wavefront period of the largest
// corrugation number along each axis, a display-quality floor for tiny
// schedules, a 4-row ghost margin. Explicit grid overrides win.
GridSpec grid_for(const RunConfig& cfg, long n_max);

}  // namespace corrhyp
