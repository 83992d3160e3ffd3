// Command-line harness: configure a stochastic Schroedinger problem, run the
// trajectory schemes and the master-equation reference, and emit error tables
// and convergence data as CSV.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qsde/io.hpp"
#include "qsde/master.hpp"
#include "qsde/montecarlo.hpp"
#include "qsde/oscillator.hpp"
#include "qsde/sse.hpp"
#include "qsde/stats.hpp"
#include "qsde/version.hpp"

namespace {

using namespace qsde;

void describe_problem(RunManifest& m, const ConfigFile& cfg) {
    if (auto model = cfg.get("problem", "model")) {
        m.add("model", *model);
        m.add("levels", cfg.get_int("problem", "levels", 50));
    } else {
        m.add("model", std::string("operator-files"));
        m.add("hamiltonian", cfg.get_required("problem", "hamiltonian"));
    }
}

std::vector<double> output_grid(double T, int points) {
    std::vector<double> t(std::size_t(points) + 1);
    for (int j = 0; j <= points; ++j) t[std::size_t(j)] = T * double(j) / double(points);
    return t;
}

int cmd_reference(const std::string& config_path, const std::string& out_path,
                  const std::string& backend_name) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const SSEProblem p = problem_from_config(cfg);
    const SchemeConfig sc = scheme_config_from(cfg);

    RefBackend backend;
    if (backend_name == "superop") backend = RefBackend::superop_expm;
    else if (backend_name == "rk45") backend = RefBackend::rk45;
    else throw ConfigError("unknown backend '" + backend_name + "' (valid: superop, rk45)");

    const std::vector<double> times = output_grid(sc.T, sc.output_points);
    const ReferenceSolution ref = solve_reference(p, sc.T, times, backend);

    RunManifest m = make_manifest("reference");
    describe_problem(m, cfg);
    m.add("T", sc.T);
    m.add("output_points", (long long)sc.output_points);
    m.add("backend", backend_name);
    write_csv(out_path, m, {"t", "expectation"}, {ref.times, ref.expectation});
    std::cout << "wrote " << out_path << " (" << ref.times.size() << " rows)\n";
    return 0;
}

void write_estimate_csv(const std::string& out_path, const ConfigFile& cfg,
                        const SchemeConfig& sc, const EnsembleStats& stats) {
    RunManifest m = make_manifest("simulate");
    describe_problem(m, cfg);
    describe(m, sc);
    m.add("min_preproj_norm", stats.min_preproj_norm);
    m.add("max_preproj_norm", stats.max_preproj_norm);
    write_csv(out_path, m, {"t", "estimate", "ci_halfwidth"},
              {stats.times, stats.mean, stats.ci_halfwidth});
}

struct Overrides {
    std::string scheme;
    int steps = 0;
    long long trajectories = 0;
    long long seed = -1;
    int workers = 0;
};

SchemeConfig apply_overrides(SchemeConfig sc, const Overrides& ov) {
    if (!ov.scheme.empty()) sc.scheme = parse_scheme(ov.scheme);
    if (ov.steps > 0) sc.steps = ov.steps;
    if (ov.trajectories > 0) sc.trajectories = ov.trajectories;
    if (ov.seed >= 0) sc.seed = std::uint64_t(ov.seed);
    if (ov.workers > 0) sc.workers = ov.workers;
    return sc;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const Overrides& ov) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const SSEProblem p = problem_from_config(cfg);
    const SchemeConfig sc = apply_overrides(scheme_config_from(cfg), ov);
    if (!is_sse_scheme(sc.scheme))
        throw ConfigError("simulate: scheme must be scheme2, scheme3 or explicit_euler");

    const EnsembleStats stats = estimate_observable(p, sc);
    write_estimate_csv(out_path, cfg, sc, stats);
    std::cout << "wrote " << out_path << " (scheme " << scheme_name(sc.scheme) << ", M "
              << sc.steps << ", N " << sc.trajectories << ")\n";
    return 0;
}

struct TableRow {
    std::string scheme;
    long long steps;
    double dt;
    double epsilon0;
    double max_ci_halfwidth;
};

void print_and_write_table(const std::vector<TableRow>& rows, const std::string& out_path,
                           RunManifest manifest) {
    // Text layout mirrors an errors-versus-step-sizes table: one column per M,
    // an epsilon row and a ci row per scheme.
    std::vector<long long> ms;
    std::vector<std::string> schemes;
    for (const TableRow& r : rows) {
        if (std::find(ms.begin(), ms.end(), r.steps) == ms.end()) ms.push_back(r.steps);
        if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end())
            schemes.push_back(r.scheme);
    }
    std::sort(ms.begin(), ms.end());

    auto cell = [&](const std::string& scheme, long long m, bool eps) {
        for (const TableRow& r : rows)
            if (r.scheme == scheme && r.steps == m) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.6g", eps ? r.epsilon0 : r.max_ci_halfwidth);
                return std::string(buf);
            }
        return std::string("-");
    };

    std::printf("%-26s", "M");
    for (long long m : ms) std::printf("%14lld", m);
    std::printf("\n");
    for (const std::string& s : schemes) {
        std::printf("%-26s", ("eps0(" + s + ")").c_str());
        for (long long m : ms) std::printf("%14s", cell(s, m, true).c_str());
        std::printf("\n");
        std::printf("%-26s", ("ci/2(" + s + ")").c_str());
        for (long long m : ms) std::printf("%14s", cell(s, m, false).c_str());
        std::printf("\n");
    }

    if (out_path.empty()) return;
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot open '" + out_path + "' for writing");
    for (const auto& [k, v] : manifest.fields) out << "# " << k << " = " << v << "\n";
    out << "scheme,steps,dt,epsilon0,max_ci_halfwidth\n";
    char buf[160];
    for (const TableRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%lld,%.17g,%.17g,%.17g\n", r.scheme.c_str(), r.steps,
                      r.dt, r.epsilon0, r.max_ci_halfwidth);
        out << buf;
    }
}

TableRow row_from_files(const CsvTable& est, const CsvTable& ref) {
    ReferenceSolution r;
    r.times = ref.columns.at(0);
    r.expectation = ref.columns.at(1);
    TableRow row;
    row.scheme = est.manifest_value("scheme");
    row.steps = std::stoll(est.manifest_value("steps"));
    const double T = std::stod(est.manifest_value("T"));
    row.dt = T / double(row.steps);
    row.epsilon0 = epsilon_J(est.columns.at(0), est.columns.at(1), r, 0);
    row.max_ci_halfwidth = *std::max_element(est.columns.at(2).begin(), est.columns.at(2).end());
    return row;
}

int cmd_table_files(const std::vector<std::string>& estimate_paths,
                    const std::string& reference_path, const std::string& out_path) {
    const CsvTable ref = read_csv(reference_path);
    std::vector<TableRow> rows;
    for (const std::string& path : estimate_paths) rows.push_back(row_from_files(read_csv(path), ref));
    RunManifest m = make_manifest("table");
    m.add("reference", reference_path);
    print_and_write_table(rows, out_path, std::move(m));
    return 0;
}

// Full Table-1-style reproduction: reference plus all three SSE schemes over
// the configured step counts. Long-running; gated behind --full-scale.
int cmd_table_full(const std::string& config_path, const std::string& out_path,
                   const std::vector<long long>& steps_list, const Overrides& ov) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const SSEProblem p = problem_from_config(cfg);
    SchemeConfig base = apply_overrides(scheme_config_from(cfg), ov);

    const std::vector<Scheme> schemes{Scheme::explicit_euler, Scheme::scheme3, Scheme::scheme2};
    long long total_steps = 0;
    for (long long m : steps_list) total_steps += m;
    total_steps *= base.trajectories * (long long)schemes.size();
    std::printf("full-scale run: %lld trajectory-steps at dim %d "
                "(~%.1f h at 5e6 steps/s), plus one %dx%d superoperator exponential\n",
                total_steps, p.dim, double(total_steps) / 5e6 / 3600.0, p.dim * p.dim,
                p.dim * p.dim);

    const std::vector<double> times = output_grid(base.T, base.output_points);
    const ReferenceSolution ref = solve_reference(p, base.T, times);

    std::vector<TableRow> rows;
    for (Scheme s : schemes)
        for (long long m : steps_list) {
            SchemeConfig sc = base;
            sc.scheme = s;
            sc.steps = int(m);
            const EnsembleStats stats = estimate_observable(p, sc);
            TableRow row{scheme_name(s), m, sc.T / double(m), epsilon_J(stats, ref, 0),
                         *std::max_element(stats.ci_halfwidth.begin(), stats.ci_halfwidth.end())};
            rows.push_back(row);
            std::printf("done: %s M=%lld eps0=%.6g ci/2=%.6g\n", row.scheme.c_str(), m,
                        row.epsilon0, row.max_ci_halfwidth);
        }

    RunManifest m = make_manifest("table");
    describe_problem(m, cfg);
    m.add("T", base.T);
    m.add("trajectories", (long long)base.trajectories);
    m.add("seed", (long long)base.seed);
    print_and_write_table(rows, out_path, std::move(m));
    return 0;
}

int cmd_convergence(const std::string& config_path, const std::string& out_path,
                    const std::vector<long long>& steps_list, const std::vector<int>& j_list,
                    const Overrides& ov) {
    if (steps_list.size() < 3)
        throw ConfigError("convergence: need at least 3 step counts for a slope fit");
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const SSEProblem p = problem_from_config(cfg);
    const SchemeConfig base = apply_overrides(scheme_config_from(cfg), ov);

    const std::vector<double> times = output_grid(base.T, base.output_points);
    const ReferenceSolution ref = solve_reference(p, base.T, times);

    std::vector<double> col_j, col_m, col_dt, col_eps;
    std::map<int, std::vector<double>> eps_by_j;
    for (long long m : steps_list) {
        SchemeConfig sc = base;
        sc.steps = int(m);
        const EnsembleStats stats = estimate_observable(p, sc);
        for (int j : j_list) {
            const double eps = epsilon_J(stats, ref, j);
            eps_by_j[j].push_back(eps);
            col_j.push_back(double(j));
            col_m.push_back(double(m));
            col_dt.push_back(sc.T / double(m));
            col_eps.push_back(eps);
        }
    }

    RunManifest manifest = make_manifest("convergence");
    describe_problem(manifest, cfg);
    describe(manifest, base);
    std::vector<double> dts;
    for (long long m : steps_list) dts.push_back(base.T / double(m));
    for (int j : j_list) {
        const double slope = fit_loglog_slope(dts, eps_by_j[j]);
        std::printf("J=%d: slope %.4f\n", j, slope);
        manifest.add("slope_J" + std::to_string(j), slope);
    }
    if (!out_path.empty())
        write_csv(out_path, manifest, {"J", "steps", "dt", "epsilon"},
                  {col_j, col_m, col_dt, col_eps});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weak simulation of stochastic Schroedinger equations"};
    app.set_version_flag("--version", std::string("qsde ") + qsde::kVersion);
    app.require_subcommand(1);

    std::string config_path, out_path, backend = "superop", reference_path;
    std::vector<std::string> estimate_paths;
    std::vector<long long> steps_list;
    std::vector<int> j_list{0};
    bool full_scale = false;
    Overrides ov;

    auto add_overrides = [&](CLI::App* c) {
        c->add_option("--scheme", ov.scheme, "scheme override");
        c->add_option("--steps", ov.steps, "step count override (M)");
        c->add_option("--trajectories", ov.trajectories, "trajectory count override (N)");
        c->add_option("--seed", ov.seed, "seed override");
        c->add_option("--workers", ov.workers, "worker thread count");
    };

    CLI::App* ref = app.add_subcommand("reference", "solve the master-equation reference");
    ref->add_option("--config", config_path, "config file")->required();
    ref->add_option("--out", out_path, "output CSV")->required();
    ref->add_option("--backend", backend, "superop (default) or rk45");

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo observable estimate");
    sim->add_option("--config", config_path, "config file")->required();
    sim->add_option("--out", out_path, "output CSV")->required();
    add_overrides(sim);

    CLI::App* tab = app.add_subcommand("table", "errors-versus-step-sizes table");
    tab->add_option("estimates", estimate_paths, "estimate CSV files");
    tab->add_option("--reference", reference_path, "reference CSV file");
    tab->add_option("--config", config_path, "config file (full-scale mode)");
    tab->add_option("--out", out_path, "output CSV");
    tab->add_option("--steps-list", steps_list, "step counts for full-scale mode")
        ->delimiter(',');
    tab->add_flag("--full-scale", full_scale, "run the long full-table reproduction");
    add_overrides(tab);

    CLI::App* conv = app.add_subcommand("convergence", "slope of eps_J versus step size");
    conv->add_option("--config", config_path, "config file")->required();
    conv->add_option("--out", out_path, "output CSV");
    conv->add_option("--steps-list", steps_list, "step counts (need >= 3)")
        ->delimiter(',')
        ->required();
    conv->add_option("--J", j_list, "start indices for eps_J")->delimiter(',');
    add_overrides(conv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(ref)) return cmd_reference(config_path, out_path, backend);
        if (app.got_subcommand(sim)) return cmd_simulate(config_path, out_path, ov);
        if (app.got_subcommand(tab)) {
            if (full_scale) {
                if (config_path.empty())
                    throw qsde::ConfigError("table --full-scale requires --config");
                if (steps_list.empty()) steps_list = {2000, 4000, 8000, 16000};
                return cmd_table_full(config_path, out_path, steps_list, ov);
            }
            if (estimate_paths.empty() || reference_path.empty())
                throw qsde::ConfigError(
                    "table needs estimate files and --reference (or --config --full-scale)");
            return cmd_table_files(estimate_paths, reference_path, out_path);
        }
        if (app.got_subcommand(conv))
            return cmd_convergence(config_path, out_path, steps_list, j_list, ov);
    } catch (const qsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const qsde::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
