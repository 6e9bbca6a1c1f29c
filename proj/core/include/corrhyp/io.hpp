#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "corrhyp/grid.hpp"

// Configuration and artifact plumbing: the flat key-value config format, the
// resolved run configuration, and the on-disk artifact formats (field
// snapshots, OBJ meshes, CSV helpers, checksum manifest, directory lock).
// Every textual artifact formats doubles with 17 significant digits so values
// round-trip exactly and reruns of one config are bit-identical.

namespace corrhyp {

// One "key = value" line; line numbers make config errors addressable.
struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct KvFile {
    std::vector<KvEntry> entries;

    const std::string* find(const std::string& key) const;
    bool has(const std::string& key) const { return find(key) != nullptr; }
};

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
// Duplicate or malformed keys throw ConfigError naming the line.
KvFile parse_kv(const std::string& text);
KvFile load_kv(const std::string& path);

// A run request with every default resolved. tau_k decays geometrically from
// tau1 with ratio 1/e, matching the default budget sequence e^{-k}.
struct RunConfig {
    double rho0 = 0.8;
    int depth = 1;
    double tau1 = 0.36787944117144233;
    double lambda = 100.0;
    bool adaptive = false;
    std::vector<std::array<long, 3>> schedule;  // rows 1..depth unless adaptive
    int grid_rho = 0;  // 0 derives the resolution from the schedule
    int grid_phi = 0;
    std::string outdir;
    std::uint64_t seed = 0;
    std::vector<double> pattern_rho = {0.5, 0.7, 0.9};
    int pattern_samples = 1024;
    long pattern_m = 1;  // numerator of the rational circle m/M for reports

    double tau(int k) const;

    // Enforces 0 < rho0 < 1, depth >= 0, 0 < tau1 <= half the initial
    // immersion margin, lambda > 1, schedule shape, and grid override sanity.
    void validate() const;
};

// Builds a validated config from parsed keys. Unknown keys, bad numbers, and
// inconsistent schedule rows throw ConfigError naming the offender. Without
// schedule keys the default doubling table applies; "schedule = adaptive"
// selects the condition-driven search instead.
RunConfig resolve_config(const KvFile& kv);

// Stage rows (12, 80, 500) * 2^(k-1): every entry even, oblique entries
// multiples of 10, so the gcd structure stays visible in the patterns.
std::vector<std::array<long, 3>> default_schedule(int depth);

// FNV-1a 64-bit checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fnv1a64_file(const std::string& path);

// Shortest decimal that round-trips a double (17 significant digits).
std::string format_g17(double v);

// Binary field snapshot: fixed magic and version, grid spec, layer tag, then
// raw little-endian node coordinates, ghost rows included.
void save_field(const FieldGrid& f, const std::string& path);
FieldGrid load_field(const std::string& path);

// Wavefront mesh export: sampled real nodes as vertices, each grid quad split
// into two triangles, 1-based indices, the phi seam closed around the grid.
// The outermost rho row is always included so the rim stays exact; strides
// below 1 are treated as 1.
void export_obj(std::ostream& os, const FieldGrid& f, int stride_rho = 1, int stride_phi = 1);

// Strides keeping a display mesh near 2.5e5 vertices.
std::pair<int, int> display_strides(const GridSpec& spec);

// Writes or updates "checksum  name" lines, sorted by name; existing entries
// for other files are kept so successive commands share one manifest.
void update_manifest(const std::string& outdir, const std::vector<std::string>& names);

// Names whose file is missing or whose checksum changed since the manifest
// was written. Throws ConfigError when the manifest itself is absent.
std::vector<std::string> manifest_mismatches(const std::string& outdir);

// Exclusive marker file keeping concurrent runs out of one output directory.
class OutdirLock {
  public:
    explicit OutdirLock(const std::string& outdir);
    ~OutdirLock();
    OutdirLock(const OutdirLock&) = delete;
    OutdirLock& operator=(const OutdirLock&) = delete;

  private:
    std::string path_;
    bool held_ = false;
};

// Resolved state of a run directory, persisted as run.meta. The schedule is
// always explicit here; adaptive runs record the numbers they chose.
struct RunMeta {
    RunConfig config;
    GridSpec grid;
    int steps_completed = 0;
    std::string status = "ok";
};

void save_meta(const RunMeta& meta, const std::string& path);
RunMeta load_meta(const std::string& path);

}  // namespace corrhyp
