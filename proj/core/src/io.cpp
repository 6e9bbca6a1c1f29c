#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "corrhyp/errors.hpp"
#include "corrhyp/io.hpp"

namespace corrhyp {

namespace {

static_assert(sizeof(Vec3) == 24, "snapshot layout assumes packed xyz doubles");
static_assert(std::endian::native == std::endian::little,
              "snapshot files store little-endian doubles");

constexpr char kFieldMagic[8] = {'c', 'r', 'h', 'y', 'p', 'f', 'g', '1'};
constexpr std::uint32_t kFieldVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

[[noreturn]] void bad_snapshot(const std::string& path, const std::string& what) {
    throw ConfigError("field snapshot " + path + ": " + what);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t j = 0; j < size; ++j) {
        h ^= p[j];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file for checksum: " + path);
    std::uint64_t h = 14695981039346656037ULL;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        if (got > 0) h = fnv1a64(buf.data(), static_cast<std::size_t>(got), h);
    }
    return h;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_field(const FieldGrid& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write field snapshot: " + path);
    os.write(kFieldMagic, sizeof(kFieldMagic));
    put(os, kFieldVersion);
    put(os, f.spec.rho0);
    put(os, static_cast<std::int32_t>(f.spec.rho_count));
    put(os, static_cast<std::int32_t>(f.spec.phi_count));
    put(os, static_cast<std::int32_t>(f.spec.ghost));
    put(os, static_cast<std::int32_t>(f.layer_k));
    put(os, static_cast<std::int32_t>(f.layer_i));
    put(os, static_cast<std::uint64_t>(f.nodes.size()));
    os.write(reinterpret_cast<const char*>(f.nodes.data()),
             static_cast<std::streamsize>(f.nodes.size() * sizeof(Vec3)));
    os.flush();
    if (!os) throw ConfigError("write failed for field snapshot: " + path);
}

FieldGrid load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) bad_snapshot(path, "cannot open");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0)
        bad_snapshot(path, "not a field snapshot");
    std::uint32_t version = 0;
    get(is, version);
    if (version != kFieldVersion)
        bad_snapshot(path, "unsupported version " + std::to_string(version));
    FieldGrid f;
    std::int32_t rho_count = 0, phi_count = 0, ghost = 0, layer_k = 0, layer_i = 0;
    std::uint64_t count = 0;
    get(is, f.spec.rho0);
    get(is, rho_count);
    get(is, phi_count);
    get(is, ghost);
    get(is, layer_k);
    get(is, layer_i);
    get(is, count);
    if (!is) bad_snapshot(path, "truncated header");
    if (rho_count < 2 || phi_count < 1 || ghost < 0) bad_snapshot(path, "bad grid spec");
    f.spec.rho_count = rho_count;
    f.spec.phi_count = phi_count;
    f.spec.ghost = ghost;
    f.layer_k = layer_k;
    f.layer_i = layer_i;
    if (count != static_cast<std::uint64_t>(f.spec.nodes()))
        bad_snapshot(path, "node count disagrees with the grid spec");
    f.nodes.resize(count);
    is.read(reinterpret_cast<char*>(f.nodes.data()),
            static_cast<std::streamsize>(count * sizeof(Vec3)));
    if (!is || is.gcount() != static_cast<std::streamsize>(count * sizeof(Vec3)))
        bad_snapshot(path, "truncated node data");
    return f;
}

void export_obj(std::ostream& os, const FieldGrid& f, int stride_rho, int stride_phi) {
    if (stride_rho < 1) stride_rho = 1;
    if (stride_phi < 1) stride_phi = 1;
    const GridSpec& spec = f.spec;

    std::vector<int> rows;
    for (int ir = spec.row_begin(); ir < spec.row_end(); ir += stride_rho) rows.push_back(ir);
    if (rows.back() != spec.row_end() - 1) rows.push_back(spec.row_end() - 1);
    std::vector<int> cols;
    for (int jp = 0; jp < spec.phi_count; jp += stride_phi) cols.push_back(jp);

    const std::size_t nr = rows.size(), nc = cols.size();
    std::string buf;
    buf.reserve(1 << 20);
    char line[160];
    std::snprintf(line, sizeof(line), "# corrugated annulus layer (%d, %d)\n", f.layer_k,
                  f.layer_i);
    buf += line;
    std::snprintf(line, sizeof(line), "# %zu x %zu vertices sampled from a %d x %d grid\n", nr,
                  nc, spec.rho_count, spec.phi_count);
    buf += line;

    const auto flush_if_full = [&] {
        if (buf.size() > (1 << 20) - 256) {
            os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    };

    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            const Vec3& p = f.at(rows[r], cols[c]);
            std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
            buf += line;
            flush_if_full();
        }

    // quad (r, c)-(r+1, c)-(r+1, c+1)-(r, c+1), the last column wrapping to
    // the first; indices are 1-based over the vertex block above
    const auto vid = [&](std::size_t r, std::size_t c) {
        return static_cast<long>(r * nc + c + 1);
    };
    for (std::size_t r = 0; r + 1 < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t c1 = (c + 1) % nc;
            const long a = vid(r, c), b = vid(r + 1, c), d = vid(r + 1, c1), e = vid(r, c1);
            std::snprintf(line, sizeof(line), "f %ld %ld %ld\nf %ld %ld %ld\n", a, b, d, a, d, e);
            buf += line;
            flush_if_full();
        }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::pair<int, int> display_strides(const GridSpec& spec) {
    const int sr = (spec.rho_count + 240) / 241;
    const int sp = (spec.phi_count + 1042) / 1043;
    return {sr < 1 ? 1 : sr, sp < 1 ? 1 : sp};
}

void update_manifest(const std::string& outdir, const std::vector<std::string>& names) {
    namespace fs = std::filesystem;
    const std::string manifest = (fs::path(outdir) / "manifest.txt").string();
    std::map<std::string, std::string> table;
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::string hash, name;
        while (in >> hash >> name) table[name] = hash;
    }
    for (const std::string& name : names) {
        char hex[20];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(
                          fnv1a64_file((fs::path(outdir) / name).string())));
        table[name] = hex;
    }
    std::ofstream os(manifest, std::ios::trunc);
    if (!os) throw ConfigError("cannot write manifest: " + manifest);
    for (const auto& [name, hash] : table) os << hash << "  " << name << "\n";
    os.flush();
    if (!os) throw ConfigError("write failed for manifest: " + manifest);
}

std::vector<std::string> manifest_mismatches(const std::string& outdir) {
    namespace fs = std::filesystem;
    const std::string manifest = (fs::path(outdir) / "manifest.txt").string();
    std::ifstream in(manifest);
    if (!in) throw ConfigError("no manifest found in " + outdir);
    std::vector<std::string> bad;
    std::string hash, name;
    while (in >> hash >> name) {
        const std::string path = (fs::path(outdir) / name).string();
        if (!fs::exists(path)) {
            bad.push_back(name);
            continue;
        }
        char hex[20];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(path)));
        if (hash != hex) bad.push_back(name);
    }
    return bad;
}

OutdirLock::OutdirLock(const std::string& outdir) {
    path_ = (std::filesystem::path(outdir) / ".lock").string();
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw ConfigError("output directory " + outdir +
                              " is locked by another run; remove " + path_ +
                              " if no run is active");
        throw ConfigError("cannot create lock file " + path_ + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    const ssize_t written = ::write(fd, pid.data(), pid.size());
    static_cast<void>(written);
    ::close(fd);
    held_ = true;
}

OutdirLock::~OutdirLock() {
    if (held_) ::unlink(path_.c_str());
}

void save_meta(const RunMeta& meta, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write run metadata: " + path);
    os << "meta.version = 1\n";
    os << "status = " << meta.status << "\n";
    os << "steps_completed = " << meta.steps_completed << "\n";
    os << "rho0 = " << format_g17(meta.config.rho0) << "\n";
    os << "depth = " << meta.config.depth << "\n";
    os << "tau1 = " << format_g17(meta.config.tau1) << "\n";
    os << "lambda = " << format_g17(meta.config.lambda) << "\n";
    os << "seed = " << meta.config.seed << "\n";
    os << "adaptive = " << (meta.config.adaptive ? 1 : 0) << "\n";
    os << "grid.rho = " << meta.grid.rho_count << "\n";
    os << "grid.phi = " << meta.grid.phi_count << "\n";
    os << "grid.ghost = " << meta.grid.ghost << "\n";
    for (std::size_t k = 0; k < meta.config.schedule.size(); ++k)
        for (int i = 0; i < 3; ++i)
            os << "schedule." << k + 1 << "." << i + 1 << " = "
               << meta.config.schedule[k][static_cast<std::size_t>(i)] << "\n";
    os.flush();
    if (!os) throw ConfigError("write failed for run metadata: " + path);
}

RunMeta load_meta(const std::string& path) {
    const KvFile kv = load_kv(path);
    RunMeta meta;
    std::map<std::pair<int, int>, long> table;
    bool saw_version = false;
    for (const KvEntry& e : kv.entries) {
        if (e.key == "meta.version") {
            if (e.value != "1") throw ConfigError(path + ": unsupported meta version " + e.value);
            saw_version = true;
        } else if (e.key == "status") {
            meta.status = e.value;
        } else if (e.key == "steps_completed") {
            meta.steps_completed = std::atoi(e.value.c_str());
        } else if (e.key == "rho0") {
            meta.config.rho0 = std::strtod(e.value.c_str(), nullptr);
        } else if (e.key == "depth") {
            meta.config.depth = std::atoi(e.value.c_str());
        } else if (e.key == "tau1") {
            meta.config.tau1 = std::strtod(e.value.c_str(), nullptr);
        } else if (e.key == "lambda") {
            meta.config.lambda = std::strtod(e.value.c_str(), nullptr);
        } else if (e.key == "seed") {
            meta.config.seed = std::strtoull(e.value.c_str(), nullptr, 10);
        } else if (e.key == "adaptive") {
            meta.config.adaptive = e.value == "1";
        } else if (e.key == "grid.rho") {
            meta.grid.rho_count = std::atoi(e.value.c_str());
        } else if (e.key == "grid.phi") {
            meta.grid.phi_count = std::atoi(e.value.c_str());
        } else if (e.key == "grid.ghost") {
            meta.grid.ghost = std::atoi(e.value.c_str());
        } else {
            int sk = 0, si = 0;
            const std::string prefix = "schedule.";
            if (e.key.rfind(prefix, 0) == 0) {
                const std::string rest = e.key.substr(prefix.size());
                if (std::sscanf(rest.c_str(), "%d.%d", &sk, &si) == 2 && sk >= 1 && si >= 1 &&
                    si <= 3) {
                    table[{sk, si}] = std::atol(e.value.c_str());
                    continue;
                }
            }
            throw ConfigError(path + ": unknown metadata key '" + e.key + "'");
        }
    }
    if (!saw_version) throw ConfigError(path + ": missing meta.version");
    meta.grid.rho0 = meta.config.rho0;
    meta.config.schedule.assign(static_cast<std::size_t>(std::max(meta.config.depth, 0)),
                                {0, 0, 0});
    for (const auto& [ki, n] : table) {
        if (ki.first > meta.config.depth)
            throw ConfigError(path + ": schedule row beyond depth");
        meta.config.schedule[static_cast<std::size_t>(ki.first - 1)]
                            [static_cast<std::size_t>(ki.second - 1)] = n;
    }
    return meta;
}

}  // namespace corrhyp
