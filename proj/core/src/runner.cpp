#include "corrhyp/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "corrhyp/errors.hpp"
#include "corrhyp/formal.hpp"
#include "corrhyp/metrics.hpp"

namespace corrhyp {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string snapshot_name(int k, int i) {
    return "layer_" + std::to_string(k) + "_" + std::to_string(i) + ".fgrid";
}

std::string mesh_name(int k) { return "mesh_" + std::to_string(k) + ".obj"; }

std::string join(const std::string& outdir, const std::string& name) {
    return (fs::path(outdir) / name).string();
}

void require_outdir(const RunConfig& cfg) {
    if (cfg.outdir.empty())
        throw ConfigError("outdir is not set; add outdir = PATH to the config or pass --outdir");
}

void write_failed(const std::string& outdir, const std::string& text) {
    std::ofstream os(join(outdir, "FAILED"), std::ios::trunc);
    os << text << "\n";
}

// Sup of the ladder increment g_{k+1} - g_k over the annulus; the increments
// grow monotonically in rho but a dense sweep keeps that an observation, not
// an assumption.
double sup_gap_norm(int k, double rho0) {
    double worst = 0.0;
    const int samples = 2001;
    for (int j = 0; j < samples; ++j) {
        const double rho = rho0 + (1.0 - rho0) * j / (samples - 1);
        const double v = form_norm(metric_ladder(k + 1, rho) - metric_ladder(k, rho));
        if (v > worst) worst = v;
    }
    return worst;
}

// Pullback distance to two adjacent ladder rungs in one sweep; vs_hi is the
// entry gap of the next stage.
struct GapPair {
    double vs_k = 0.0;
    double vs_hi = 0.0;
};

GapPair measure_gaps(const FieldGrid& f, int k) {
    GapPair g;
    for (int ir = f.spec.row_begin(); ir < f.spec.row_end(); ++ir) {
        const double rho = f.rho(ir);
        const SymForm2 gk = metric_ladder(k, rho);
        const SymForm2 gk1 = metric_ladder(k + 1, rho);
        for (int jp = 0; jp < f.spec.phi_count; ++jp) {
            const SymForm2 pb = pullback(df_at(f, ir, jp));
            g.vs_k = std::max(g.vs_k, form_norm(gk - pb));
            g.vs_hi = std::max(g.vs_hi, form_norm(gk1 - pb));
        }
    }
    return g;
}

// Sup displacement of values and tangent maps between two layers.
struct StageDelta {
    double value = 0.0;
    double diff = 0.0;
};

StageDelta measure_delta(const FieldGrid& a, const FieldGrid& b) {
    if (a.spec.rho_count != b.spec.rho_count || a.spec.phi_count != b.spec.phi_count ||
        a.spec.ghost != b.spec.ghost)
        throw ConfigError("stage displacement check: layer grids disagree");
    StageDelta d;
    for (int ir = a.spec.row_begin(); ir < a.spec.row_end(); ++ir)
        for (int jp = 0; jp < a.spec.phi_count; ++jp) {
            d.value = std::max(d.value, norm(a.at(ir, jp) - b.at(ir, jp)));
            d.diff = std::max(d.diff, op_norm(df_at(a, ir, jp) - df_at(b, ir, jp)));
        }
    return d;
}

bool resolves(const GridSpec& spec, int k, int i, long n) {
    try {
        validate_resolution(spec, k, i, n);
        return true;
    } catch (const NumericError&) {
        return false;
    }
}

struct StepRow {
    StepReport report;
    double value_change = 0.0;
};

void rewrite_steps_csv(const std::string& path, const std::vector<StepRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write step table: " + path);
    os << "k,i,n,err,eta_min,alpha_max,x_max,lambda_min,value_change\n";
    for (const StepRow& r : rows)
        os << r.report.k << "," << r.report.i << "," << r.report.n << ","
           << format_g17(r.report.err) << "," << format_g17(r.report.eta_min) << ","
           << format_g17(r.report.alpha_max) << "," << format_g17(r.report.x_max) << ","
           << format_g17(r.report.lambda_min) << "," << format_g17(r.value_change) << "\n";
    os.flush();
    if (!os) throw ConfigError("write failed for step table: " + path);
}

struct PRow {
    int k = 0;
    double entry_gap = 0.0;
    double exit_gap = 0.0;
    double budget = 0.0;
    double value_change = 0.0;
    double tau_k = 0.0;
    double diff_change = 0.0;
    double diff_budget = 0.0;
    double a_const = 0.0;
};

void rewrite_ptable_csv(const std::string& path, const std::vector<PRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write budget table: " + path);
    os << "k,entry_gap,exit_gap,budget_next_gap,value_change,tau_k,diff_change,diff_budget,"
          "a_const\n";
    for (const PRow& r : rows)
        os << r.k << "," << format_g17(r.entry_gap) << "," << format_g17(r.exit_gap) << ","
           << format_g17(r.budget) << "," << format_g17(r.value_change) << ","
           << format_g17(r.tau_k) << "," << format_g17(r.diff_change) << ","
           << format_g17(r.diff_budget) << "," << format_g17(r.a_const) << "\n";
    os.flush();
    if (!os) throw ConfigError("write failed for budget table: " + path);
}

void export_mesh(const std::string& path, const FieldGrid& f, int stride_rho, int stride_phi) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write mesh: " + path);
    export_obj(os, f, stride_rho, stride_phi);
    os.flush();
    if (!os) throw ConfigError("write failed for mesh: " + path);
}

// Complete stage rows recorded by a run; a trailing partial stage is cut.
std::vector<std::array<long, 3>> complete_rows(const RunMeta& meta) {
    const int stages = meta.steps_completed / 3;
    std::vector<std::array<long, 3>> rows;
    for (int k = 0; k < stages && k < static_cast<int>(meta.config.schedule.size()); ++k)
        rows.push_back(meta.config.schedule[static_cast<std::size_t>(k)]);
    return rows;
}

}  // namespace

GridSpec grid_for(const RunConfig& cfg, long n_max) {
    GridSpec spec;
    spec.rho0 = cfg.rho0;
    spec.ghost = 4;
    if (n_max < 1) n_max = 1;
    spec.rho_count =
        cfg.grid_rho ? cfg.grid_rho : std::max(rho_count_for(n_max, 12.0 * (1.0 - cfg.rho0)), 97);
    spec.phi_count = cfg.grid_phi ? cfg.grid_phi : std::max(phi_count_for(n_max, 7), 1043);
    return spec;
}

RunArtifacts load_artifacts(const std::string& outdir) {
    const std::string meta_path = join(outdir, "run.meta");
    if (!fs::exists(meta_path))
        throw ConfigError("no run artifacts in " + outdir +
                          "; run 'corrhyp build --config CONFIG' first");
    const RunMeta meta = load_meta(meta_path);
    RunArtifacts art;
    art.steps_completed = meta.steps_completed;
    art.schedule.n = meta.config.schedule;
    for (auto& row : art.schedule.n)
        for (long& n : row)
            if (n < 1) n = 1;  // unexecuted tail of a partial adaptive stage
    art.field_after_step = [outdir](int step) {
        const int k = step / 3 + 1, i = step % 3 + 1;
        return std::make_shared<const FieldGrid>(load_field(join(outdir, snapshot_name(k, i))));
    };
    return art;
}

BuildSummary cmd_build(const RunConfig& cfg, std::ostream& log) {
    require_outdir(cfg);
    fs::create_directories(cfg.outdir);
    OutdirLock lock(cfg.outdir);
    fs::remove(join(cfg.outdir, "FAILED"));

    const Clock::time_point t0 = Clock::now();
    BuildSummary out;

    long n_max = 1;
    for (const auto& row : cfg.schedule)
        for (long n : row) n_max = std::max(n_max, n);
    GridSpec spec = grid_for(cfg, n_max);

    RunMeta& meta = out.meta;
    meta.config = cfg;
    if (cfg.adaptive)
        meta.config.schedule.assign(static_cast<std::size_t>(cfg.depth), {0, 0, 0});
    meta.grid = spec;
    meta.status = "running";

    const std::string meta_path = join(cfg.outdir, "run.meta");
    const std::string steps_path = join(cfg.outdir, "steps.csv");
    const std::string ptable_path = join(cfg.outdir, "ptable.csv");
    std::vector<StepRow> step_rows;
    std::vector<PRow> p_rows;
    out.files = {"run.meta", "steps.csv", "ptable.csv"};

    std::string where = "initial embedding";
    try {
        save_meta(meta, meta_path);
        rewrite_steps_csv(steps_path, step_rows);
        rewrite_ptable_csv(ptable_path, p_rows);

        log << "grid: " << spec.rho_count << " x " << spec.phi_count << " rows x cols, "
            << spec.nodes() << " nodes\n";
        FieldGrid cur = initial_embedding(spec);
        {
            const auto [sr, sp] = display_strides(spec);
            export_mesh(join(cfg.outdir, mesh_name(0)), cur, sr, sp);
            out.files.push_back(mesh_name(0));
        }

        // replayed when an adaptive search outgrows the grid
        std::vector<std::tuple<int, int, long>> accepted;
        const auto rebuild_for = [&](long n) {
            spec = grid_for(cfg, n);
            log << "  regrid for n = " << n << ": " << spec.rho_count << " x " << spec.phi_count
                << "\n";
            cur = initial_embedding(spec);
            for (const auto& [ak, ai, an] : accepted) {
                StepResult r = cp_step(cur, ak, ai, an);
                cur = std::move(r.field);
                save_field(cur, join(cfg.outdir, snapshot_name(ak, ai)));
            }
            meta.grid = spec;
        };

        double entry_gap = measure_gaps(cur, 0).vs_hi;
        double a_const = 0.0;

        for (int k = 1; k <= cfg.depth; ++k) {
            const double tau_k = cfg.tau(k);
            StageContext ctx;
            if (cfg.adaptive) {
                where = "stage (" + std::to_string(k) + ") entry bookkeeping";
                ctx = stage_context(cur, k);
            }
            for (int i = 1; i <= 3; ++i) {
                const Clock::time_point ts = Clock::now();
                StepRow row;
                if (cfg.adaptive) {
                    where = "stage (" + std::to_string(k) + ", " + std::to_string(i) +
                            ") adaptive search";
                    ChooseNOptions opts;
                    opts.lambda = cfg.lambda;
                    opts.n_start = 2;
                    opts.n_cap = 4096;
                    opts.mask = k < cfg.depth
                                    ? kCondAll
                                    : (kCondValueStep | kCondDiffStep);
                    const FieldSource source = [&](long n) -> const FieldGrid& {
                        if ((cfg.grid_rho == 0 || cfg.grid_phi == 0) && !resolves(spec, k, i, n))
                            rebuild_for(n);
                        return cur;
                    };
                    ChosenN chosen = choose_n(source, ctx, k, i, tau_k, opts);
                    cur = std::move(chosen.field);
                    row.report = chosen.report;
                    row.value_change = chosen.extras.sup_value_change;
                    meta.config.schedule[static_cast<std::size_t>(k - 1)]
                                        [static_cast<std::size_t>(i - 1)] = chosen.report.n;
                    accepted.emplace_back(k, i, chosen.report.n);
                } else {
                    const long n =
                        cfg.schedule[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(i - 1)];
                    where = "stage (" + std::to_string(k) + ", " + std::to_string(i) +
                            "), n = " + std::to_string(n);
                    StepResult r = cp_step(cur, k, i, n);
                    cur = std::move(r.field);
                    row.report = r.report;
                    row.value_change = r.extras.sup_value_change;
                    accepted.emplace_back(k, i, n);
                }
                save_field(cur, join(cfg.outdir, snapshot_name(k, i)));
                out.files.push_back(snapshot_name(k, i));
                step_rows.push_back(row);
                out.steps.push_back(row.report);
                rewrite_steps_csv(steps_path, step_rows);
                meta.steps_completed = 3 * (k - 1) + i;
                save_meta(meta, meta_path);
                char line[200];
                std::snprintf(line, sizeof(line),
                              "  step (%d, %d): n = %ld, err = %.4g, eta_min = %.4g, "
                              "lambda_min = %.4g, %.1f s\n",
                              k, i, row.report.n, row.report.err, row.report.eta_min,
                              row.report.lambda_min, seconds_since(ts));
                log << line;
            }

            // stage budgets: the leftover pullback gap must fit under the next
            // ladder increment, and the layer must have moved by less than the
            // stage budget in value (and in tangent, against the square-root
            // law calibrated on the first stage)
            where = "stage (" + std::to_string(k) + ") budget assertions";
            const GapPair gp = measure_gaps(cur, k);
            PRow pr;
            pr.k = k;
            pr.entry_gap = entry_gap;
            pr.exit_gap = gp.vs_k;
            pr.budget = sup_gap_norm(k, cfg.rho0);
            pr.tau_k = tau_k;
            {
                FieldGrid prev = k == 1 ? initial_embedding(spec)
                                        : load_field(join(cfg.outdir, snapshot_name(k - 1, 3)));
                const StageDelta d = measure_delta(cur, prev);
                pr.value_change = d.value;
                pr.diff_change = d.diff;
            }
            if (k == 1 && entry_gap > 0.0) a_const = pr.diff_change / std::sqrt(entry_gap);
            pr.a_const = a_const;
            pr.diff_budget = k == 1 ? pr.diff_change : tau_k + a_const * std::sqrt(entry_gap);
            p_rows.push_back(pr);
            rewrite_ptable_csv(ptable_path, p_rows);

            if (pr.exit_gap > pr.budget)
                throw NumericError("stage " + std::to_string(k) + " left a pullback gap " +
                                   format_g17(pr.exit_gap) + " above the next-increment budget " +
                                   format_g17(pr.budget));
            if (pr.value_change > tau_k)
                throw NumericError("stage " + std::to_string(k) + " moved the layer by " +
                                   format_g17(pr.value_change) + ", over the stage budget " +
                                   format_g17(tau_k));
            if (k >= 2 && pr.diff_change > pr.diff_budget)
                throw NumericError("stage " + std::to_string(k) + " moved the tangent maps by " +
                                   format_g17(pr.diff_change) + ", over the calibrated budget " +
                                   format_g17(pr.diff_budget));

            const auto [sr, sp] = display_strides(spec);
            export_mesh(join(cfg.outdir, mesh_name(k)), cur, sr, sp);
            out.files.push_back(mesh_name(k));
            entry_gap = gp.vs_hi;

            char line[160];
            std::snprintf(line, sizeof(line),
                          "stage %d done: pullback gap %.4g (budget %.4g), moved %.4g "
                          "(tau_k %.4g)\n",
                          k, pr.exit_gap, pr.budget, pr.value_change, tau_k);
            log << line;
        }

        meta.status = "ok";
        save_meta(meta, meta_path);
        update_manifest(cfg.outdir, out.files);
        char line[80];
        std::snprintf(line, sizeof(line), "build finished in %.1f s\n", seconds_since(t0));
        log << line;
    } catch (const std::exception& e) {
        meta.status = "failed";
        try {
            save_meta(meta, meta_path);
            write_failed(cfg.outdir, "build failed at " + where + ":\n" + e.what());
            update_manifest(cfg.outdir, out.files);
        } catch (...) {
            // keep the original error when even the marker cannot be written
        }
        throw;
    }
    return out;
}

std::vector<std::string> cmd_formal(const RunConfig& cfg, std::ostream& log) {
    require_outdir(cfg);
    fs::create_directories(cfg.outdir);
    OutdirLock lock(cfg.outdir);

    FormalSchedule s;
    if (cfg.adaptive) {
        const std::string meta_path = join(cfg.outdir, "run.meta");
        if (!fs::exists(meta_path))
            throw ConfigError("adaptive schedule has no recorded corrugation numbers yet; run "
                              "'corrhyp build --config CONFIG' first");
        s.n = complete_rows(load_meta(meta_path));
    } else {
        s.n = cfg.schedule;
    }
    s.validate();
    const int kstar = s.depth();
    const long l_all = s.l();

    std::vector<std::string> files;
    try {

        // full circles
        {
            std::ofstream os(join(cfg.outdir, "pattern.csv"), std::ios::trunc);
            if (!os) throw ConfigError("cannot write pattern.csv");
            os << "rho,phi,pat_x,pat_y,pat_z,normal_x,normal_y,normal_z,tail_bound\n";
            for (double rho : cfg.pattern_rho) {
                const double tail = formal_tail_bound(kstar, rho);
                for (int j = 0; j < cfg.pattern_samples; ++j) {
                    const double phi =
                        6.283185307179586476925286766559 * j / cfg.pattern_samples;
                    const Vec3 pat = normal_pattern(s, 1, kstar, rho, phi);
                    const Vec3 nrm = formal_normal(s, kstar, rho, phi);
                    os << format_g17(rho) << "," << format_g17(phi) << "," << format_g17(pat.x)
                       << "," << format_g17(pat.y) << "," << format_g17(pat.z) << ","
                       << format_g17(nrm.x) << "," << format_g17(nrm.y) << "," << format_g17(nrm.z)
                       << "," << format_g17(tail) << "\n";
                }
            }
            files.push_back("pattern.csv");
        }

        // one fundamental arc at the same sample count, so the self-similar cell
        // is resolved 7 l times finer than the full turn
        {
            std::ofstream os(join(cfg.outdir, "pattern_arc.csv"), std::ios::trunc);
            if (!os) throw ConfigError("cannot write pattern_arc.csv");
            os << "rho,phi,pat_x,pat_y,pat_z,normal_x,normal_y,normal_z,tail_bound\n";
            const double arc =
                6.283185307179586476925286766559 / (7.0 * static_cast<double>(std::max(l_all, 1L)));
            for (double rho : cfg.pattern_rho) {
                const double tail = formal_tail_bound(kstar, rho);
                for (int j = 0; j < cfg.pattern_samples; ++j) {
                    const double phi = arc * j / cfg.pattern_samples;
                    const Vec3 pat = normal_pattern(s, 1, kstar, rho, phi);
                    const Vec3 nrm = formal_normal(s, kstar, rho, phi);
                    os << format_g17(rho) << "," << format_g17(phi) << "," << format_g17(pat.x)
                       << "," << format_g17(pat.y) << "," << format_g17(pat.z) << ","
                       << format_g17(nrm.x) << "," << format_g17(nrm.y) << "," << format_g17(nrm.z)
                       << "," << format_g17(tail) << "\n";
                }
            }
            files.push_back("pattern_arc.csv");
        }

        // decomposition of the full normal image into frame-rotated copies of
        // truncated patterns, one row per truncation level
        {
            std::ofstream os(join(cfg.outdir, "similarity.csv"), std::ios::trunc);
            if (!os) throw ConfigError("cannot write similarity.csv");
            os << "j,copies,arc_width,samples_per_arc,sampling_step,hausdorff,bound\n";
            if (kstar >= 1) {
                const long big_m = s.m();
                if (cfg.pattern_m >= big_m)
                    throw ConfigError("pattern.m = " + std::to_string(cfg.pattern_m) +
                                      " must stay below the schedule gcd M = " +
                                      std::to_string(big_m));
                for (int j = 1; j <= kstar; ++j) {
                    const SelfSimilarityReport rep = self_similarity_report(
                        s, j, cfg.pattern_m, kstar, std::max(256, cfg.pattern_samples));
                    os << rep.j << "," << rep.copies << "," << format_g17(rep.arc_width) << ","
                       << rep.samples_per_arc << "," << format_g17(rep.sampling_step) << ","
                       << format_g17(rep.hausdorff) << ","
                       << format_g17(rep.rotation_bound + 2.0 * rep.sampling_step) << "\n";
                    log << "similarity level " << j << ": " << rep.copies
                        << " copies, hausdorff " << format_g17(rep.hausdorff) << "\n";
                }
            }
            files.push_back("similarity.csv");
        }

        // phase-scaling law on rational circles
        {
            std::ofstream os(join(cfg.outdir, "scaling.csv"), std::ios::trunc);
            if (!os) throw ConfigError("cannot write scaling.csv");
            os << "n,m_line,big_m,deviation\n";
            if (kstar >= 1) {
                const long big_m = s.m();
                std::vector<long> lines = {1, big_m - 1};
                if (lines[1] <= lines[0]) lines.pop_back();
                for (long n : {2L, 3L})
                    for (long m : lines) {
                        const double dev = scaling_law_check(s, n, m, kstar, 1000);
                        os << n << "," << m << "," << big_m << "," << format_g17(dev) << "\n";
                        log << "scaling n = " << n << " at m/M = " << m << "/" << big_m
                            << ": deviation " << format_g17(dev) << "\n";
                    }
            }
            files.push_back("scaling.csv");
        }

        update_manifest(cfg.outdir, files);
    } catch (const std::exception& e) {
        try {
            write_failed(cfg.outdir, std::string("formal dump failed:\n") + e.what());
            if (!files.empty()) update_manifest(cfg.outdir, files);
        } catch (...) {
        }
        throw;
    }
    return files;
}

std::vector<ComparisonRow> cmd_compare(const RunConfig& cfg, std::ostream& log) {
    require_outdir(cfg);
    const RunArtifacts art = load_artifacts(cfg.outdir);
    OutdirLock lock(cfg.outdir);

    FormalSchedule s;
    s.n = art.schedule.n;
    const RunMeta meta = load_meta(join(cfg.outdir, "run.meta"));
    const RhoInterval window{meta.grid.rho0, 1.0};
    const std::vector<ComparisonRow> rows = compare_formal_holonomic(art, s, window);

    std::ofstream os(join(cfg.outdir, "compare.csv"), std::ios::trunc);
    if (!os) throw ConfigError("cannot write compare.csv");
    os << "k,i,window_lo,window_hi,sup_diff\n";
    for (const ComparisonRow& r : rows) {
        os << r.k << "," << r.i << "," << format_g17(r.window.lo) << ","
           << format_g17(r.window.hi) << "," << format_g17(r.sup_diff) << "\n";
        log << "stage (" << r.k << ", " << r.i << "): sup tangent gap "
            << format_g17(r.sup_diff) << "\n";
    }
    os.flush();
    if (!os) throw ConfigError("write failed for compare.csv");
    update_manifest(cfg.outdir, {"compare.csv"});
    return rows;
}

std::vector<std::string> cmd_export(const RunConfig& cfg, const ExportOptions& opts,
                                    std::ostream& log) {
    require_outdir(cfg);
    const std::string meta_path = join(cfg.outdir, "run.meta");
    if (!fs::exists(meta_path))
        throw ConfigError("no run artifacts in " + cfg.outdir +
                          "; run 'corrhyp build --config CONFIG' first");
    const RunMeta meta = load_meta(meta_path);
    OutdirLock lock(cfg.outdir);

    std::vector<std::string> files;
    for (int step = 0; step < meta.steps_completed; ++step) {
        const int k = step / 3 + 1, i = step % 3 + 1;
        const FieldGrid f = load_field(join(cfg.outdir, snapshot_name(k, i)));
        int sr = opts.stride_rho, sp = opts.stride_phi;
        if (sr < 1 || sp < 1) {
            const auto [dr, dp] = display_strides(f.spec);
            if (sr < 1) sr = dr;
            if (sp < 1) sp = dp;
        }
        const std::string name =
            "export_" + std::to_string(k) + "_" + std::to_string(i) + ".obj";
        export_mesh(join(cfg.outdir, name), f, sr, sp);
        files.push_back(name);
        log << "exported " << name << " at strides " << sr << " x " << sp << "\n";
    }
    if (files.empty())
        log << "nothing to export: the run has no completed steps\n";
    else
        update_manifest(cfg.outdir, files);
    return files;
}

}  // namespace corrhyp
