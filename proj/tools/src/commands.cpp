#include "fmrexec_cli/cli.hpp"

#include "manifest.hpp"

#include "fmrexec/calibrate.hpp"
#include "fmrexec/config.hpp"
#include "fmrexec/csv.hpp"
#include "fmrexec/pdeverify.hpp"
#include "fmrexec/sim.hpp"
#include "fmrexec/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

namespace fmrexec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig load(const Options& opts) {
    if (opts.config.empty()) throw ConfigError("--config", "a configuration file is required");
    RunConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.sim.seed = *opts.seed;
    if (opts.paths) cfg.sim.n_paths = *opts.paths;
    if (opts.workers) cfg.sim.workers = *opts.workers;
    if (!opts.phi_multiples.empty()) cfg.phi_multiples = opts.phi_multiples;
    if (!opts.eps.empty()) cfg.pde.eps_list = opts.eps;
    if (cfg.sim.n_paths == 0) throw ConfigError("sim.n_paths", "must be at least 1");
    return cfg;
}

void prepare_out(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct PhiCase {
    double multiple;
    double phi;
};

std::vector<PhiCase> phi_cases(const RunConfig& cfg) {
    const double b = cfg.problem.b;
    if (cfg.phi_multiples.empty()) return {{b > 0.0 ? cfg.problem.phi / b : cfg.problem.phi, cfg.problem.phi}};
    if (!(b > 0.0)) throw ConfigError("sweep.phi_multiples", "phi multiples need b > 0");
    std::vector<PhiCase> out;
    for (double m : cfg.phi_multiples) out.push_back({m, m * b});
    return out;
}

ExecutionProblem with_phi(ExecutionProblem p, double phi) {
    p.phi = phi;
    return p;
}

StrategyTables tables_for(const RunConfig& cfg, const ExecutionProblem& problem) {
    const ImpactModel impact(cfg.impact);
    return build_tables(problem, impact, cfg.signal, TimeGrid(problem.T, cfg.grid_steps));
}

std::vector<Policy> parse_policies(const std::vector<std::string>& names, std::vector<std::string> fallback) {
    const auto& list = names.empty() ? fallback : names;
    std::vector<Policy> out;
    for (const auto& n : list) {
        try {
            out.push_back({parse_policy(n), true});
        } catch (const std::invalid_argument& e) {
            throw ConfigError("--policies", e.what());
        }
    }
    return out;
}

std::string matrix_column(const char* name, std::size_t i, std::size_t j) {
    return std::string(name) + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
}

void write_solve_table(const fs::path& file, const StrategyTables& tab) {
    const std::size_t d = tab.dim();
    std::vector<std::string> header{"t", "chi", "chi_over_kappa", "logG"};
    for (const char* name : {"Phi0", "Phi1", "Phi2"})
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) header.push_back(matrix_column(name, i, j));
    for (std::size_t i = 0; i < d; ++i) header.push_back("C1_" + std::to_string(i + 1));

    CsvWriter w(file, header);
    const auto& r = tab.riccati;
    std::vector<double> row;
    for (std::size_t n = 0; n < tab.grid.size(); ++n) {
        row = {tab.grid[n], r.chi[n], r.chi_over_kappa(n), r.logG[n]};
        for (const auto* tbl : {&tab.Phi0, &tab.Phi1, &tab.Phi2})
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    row.push_back((*tbl)[n](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        for (std::size_t i = 0; i < d; ++i) row.push_back(tab.C1[n][static_cast<Eigen::Index>(i)]);
        w.row(row);
    }
    w.close();
}

SimConfig sim_config(const RunConfig& cfg, Policy policy, std::size_t store_stride) {
    SimConfig sc;
    sc.n_paths = cfg.sim.n_paths;
    sc.n_steps = cfg.sim.n_steps;
    sc.seed = cfg.sim.seed;
    sc.policy = policy;
    sc.store_stride = store_stride;
    sc.workers = cfg.sim.workers;
    return sc;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

int cmd_solve(const Options& opts, std::ostream& log) {
    const RunConfig cfg = load(opts);
    prepare_out(opts.out);
    Manifest manifest("solve", opts.out, json::parse(cfg.to_json()), cfg.sim.seed);
    manifest.write("running");

    for (const auto& pc : phi_cases(cfg)) {
        const ExecutionProblem problem = with_phi(cfg.problem, pc.phi);
        const StrategyTables tab = tables_for(cfg, problem);
        const std::string file = "solve_phi_" + label(pc.multiple) + ".csv";
        write_solve_table(opts.out / file, tab);
        manifest.add(file);
        log << "solve: phi = " << format_number(pc.phi) << " -> " << file << '\n';
    }
    manifest.write("ok");
    return kOk;
}

int cmd_simulate(const Options& opts, std::ostream& log) {
    const RunConfig cfg = load(opts);
    const auto policies = parse_policies(opts.policies, {"TS"});
    const auto pc = phi_cases(cfg).front();
    prepare_out(opts.out);
    Manifest manifest("simulate", opts.out, json::parse(cfg.to_json()), cfg.sim.seed);
    manifest.write("running");

    const ExecutionProblem problem = with_phi(cfg.problem, pc.phi);
    const StrategyTables tab = tables_for(cfg, problem);
    const ImpactModel impact(cfg.impact);
    const Policy policy = policies.front();
    const SimBatch batch = simulate(problem, impact, cfg.signal, tab, sim_config(cfg, policy, cfg.sim.store_stride));

    {
        CsvWriter w(opts.out / "terminal.csv", {"path", "X", "Q", "S", "cost", "reduced_cost"});
        for (std::size_t p = 0; p < batch.terminal.size(); ++p) {
            const auto& r = batch.terminal[p];
            w.row({format_number(p), format_number(r.X), format_number(r.Q), format_number(r.S),
                   format_number(r.cost), format_number(r.reduced_cost)});
        }
        w.close();
        manifest.add("terminal.csv");
    }
    if (batch.has_trajectories()) {
        std::vector<std::string> header{"path", "t", "S", "X", "Q", "nu", "Y"};
        for (std::size_t i = 0; i < batch.dim; ++i) header.push_back("mu_" + std::to_string(i + 1));
        CsvWriter w(opts.out / "paths.csv", header);
        for (std::size_t p = 0; p < batch.paths.size(); ++p) {
            const auto& tr = batch.paths[p];
            for (std::size_t k = 0; k < tr.t.size(); ++k) {
                std::vector<std::string> row{format_number(p),        format_number(tr.t[k]),  format_number(tr.S[k]),
                                             format_number(tr.X[k]),  format_number(tr.Q[k]),  format_number(tr.nu[k]),
                                             format_number(tr.Y[k])};
                for (std::size_t i = 0; i < batch.dim; ++i) row.push_back(format_number(tr.mu[k * batch.dim + i]));
                w.row(row);
            }
        }
        w.close();
        manifest.add("paths.csv");
    }
    std::vector<double> costs;
    for (const auto& r : batch.terminal) costs.push_back(r.cost);
    log << "simulate: policy " << to_string(policy.kind) << ", " << batch.terminal.size()
        << " paths, mean cost " << format_number(mean(costs)) << '\n';
    manifest.write("ok");
    return kOk;
}

int cmd_compare(const Options& opts, std::ostream& log) {
    RunConfig cfg = load(opts);
    const auto policies = parse_policies(opts.policies, {"AC", "TS", "FirstOrder"});
    if (policies.size() < 2) throw ConfigError("--policies", "compare needs at least two policies");
    // Inventory quantile curves need stored trajectories; default to ~390 samples per day.
    const std::size_t stride =
        cfg.sim.store_stride > 0 ? cfg.sim.store_stride : std::max<std::size_t>(1, cfg.sim.n_steps / 390);
    cfg.sim.store_stride = stride;
    prepare_out(opts.out);
    Manifest manifest("compare", opts.out, json::parse(cfg.to_json()), cfg.sim.seed);
    manifest.write("running");

    const std::vector<double> levels{0.1, 0.5, 0.9};
    CsvWriter summary(opts.out / "summary.csv", {"phi", "policy", "mean_cost", "median_bps_vs_AC",
                                                 "median_bps_vs_TS", "q10_QT", "q50_QT", "q90_QT"});
    CsvWriter quant(opts.out / "quantiles.csv", {"phi", "policy", "benchmark", "t", "level", "deviation"});
    CsvWriter hist(opts.out / "bps_histogram.csv", {"phi", "policy", "benchmark", "bin_lo", "bin_hi", "count"});

    const ImpactModel impact(cfg.impact);
    for (const auto& pc : phi_cases(cfg)) {
        const ExecutionProblem problem = with_phi(cfg.problem, pc.phi);
        const StrategyTables tab = tables_for(cfg, problem);
        std::map<PolicyKind, SimBatch> batches;
        auto run_kind = [&](PolicyKind kind) -> const SimBatch& {
            auto it = batches.find(kind);
            if (it == batches.end())
                it = batches
                         .emplace(kind, simulate(problem, impact, cfg.signal, tab,
                                                 sim_config(cfg, Policy{kind, true}, stride)))
                         .first;
            return it->second;
        };
        const SimBatch& ac = run_kind(PolicyKind::AC);
        const SimBatch& ts = run_kind(PolicyKind::TS);
        const std::string phi = format_number(pc.phi);

        for (const auto& pol : policies) {
            const SimBatch& batch = run_kind(pol.kind);
            const std::string name(to_string(pol.kind));
            std::vector<double> costs, qt;
            for (const auto& r : batch.terminal) {
                costs.push_back(r.cost);
                qt.push_back(r.Q);
            }
            const SavingsReport vs_ac = savings_bps(batch, ac);
            const SavingsReport vs_ts = savings_bps(batch, ts);
            summary.row({phi, name, format_number(mean(costs)), format_number(vs_ac.median),
                         format_number(vs_ts.median), format_number(quantile(qt, 0.1)),
                         format_number(quantile(qt, 0.5)), format_number(quantile(qt, 0.9))});

            for (const auto* bench : {&ac, &ts}) {
                const std::string bname(to_string(bench->policy.kind));
                const QuantileCurves qc = inventory_quantiles(batch, *bench, levels);
                for (std::size_t l = 0; l < levels.size(); ++l)
                    for (std::size_t k = 0; k < qc.t.size(); ++k)
                        quant.row({phi, name, bname, format_number(qc.t[k]), format_number(levels[l]),
                                   format_number(qc.values[l][k])});
                const SavingsReport& rep = bench == &ac ? vs_ac : vs_ts;
                for (std::size_t b = 0; b < rep.histogram.counts.size(); ++b)
                    hist.row({phi, name, bname, format_number(rep.histogram.edges[b]),
                              format_number(rep.histogram.edges[b + 1]), format_number(rep.histogram.counts[b])});
            }
            log << "compare: phi = " << phi << ", " << name << ": median bps vs AC " << format_number(vs_ac.median)
                << ", vs TS " << format_number(vs_ts.median) << '\n';
        }
    }
    summary.close();
    quant.close();
    hist.close();
    for (const char* f : {"summary.csv", "quantiles.csv", "bps_histogram.csv"}) manifest.add(f);
    manifest.write("ok");
    return kOk;
}

int cmd_calibrate(const Options& opts, std::ostream& log) {
    if (opts.input.empty()) throw ConfigError("--input", "an impact series CSV is required");
    const json snapshot{{"input", opts.input.string()}, {"order", opts.order}};
    prepare_out(opts.out);
    Manifest manifest("calibrate", opts.out, snapshot, 0);
    manifest.write("running");

    const ImpactSeries series = read_series_csv(opts.input);
    const PolynomialFit fit = fit_kappa_polynomial(series, opts.order);
    const MeanZeroAdjustment adj = adjust_mean_zero(series, fit.alpha);
    const std::vector<double> eta = implied_eta(series, adj.alpha);

    json report;
    report["n"] = series.size();
    report["order"] = opts.order;
    report["alpha_initial"] = fit.alpha;
    report["alpha"] = adj.alpha;
    report["fit_r2"] = fit.r2;
    report["adjust_converged"] = adj.converged;
    report["adjust_iterations"] = adj.iterations;
    report["eta_mean"] = adj.residual_mean;
    bool positive = true;
    for (double t : series.t) positive = positive && polynomial_eval(adj.alpha, t) > 0.0;
    report["positivity_warning"] = !positive;
    if (!positive) log << "calibrate: warning: fitted kappa is not positive on the whole grid\n";

    {
        CsvWriter w(opts.out / "eta_path.csv", {"t", "eta"});
        for (std::size_t i = 0; i < eta.size(); ++i) w.row(std::vector<double>{series.t[i], eta[i]});
        w.close();
        manifest.add("eta_path.csv");
    }

    auto write_report = [&] {
        std::ofstream os(opts.out / "calibration.json", std::ios::trunc);
        os << report.dump(2) << '\n';
        os.close();
        manifest.add("calibration.json");
    };

    const double dt = series.size() > 1 ? series.t[1] - series.t[0] : 1.0;
    OuEstimate ou;
    try {
        ou = estimate_ou(eta, dt);
    } catch (const EstimationFailed& e) {
        report["error"] = e.what();
        write_report();
        manifest.write("failed");
        throw;
    }
    report["ou"] = {{"slope", ou.slope},
                    {"slope_se", ou.slope_se},
                    {"intercept", ou.intercept},
                    {"resid_var", ou.resid_var},
                    {"eps_hat", ou.eps_hat},
                    {"beta_hat", ou.beta_hat},
                    {"eps_ci", {ou.eps_ci.lo, ou.eps_ci.hi}},
                    {"beta_ci", {ou.beta_ci.lo, ou.beta_ci.hi}},
                    {"r2", ou.r2},
                    {"boundary", ou.boundary}};
    write_report();

    {
        CsvWriter w(opts.out / "lag1.csv", {"eta", "eta_next"});
        const std::size_t pairs = eta.size() - 1;
        const std::size_t stride = std::max<std::size_t>(1, pairs / 500);
        for (std::size_t i = 0; i < pairs; i += stride) w.row(std::vector<double>{eta[i], eta[i + 1]});
        w.close();
        manifest.add("lag1.csv");
    }
    {
        const Histogram h = make_histogram(ou.residuals, 50);
        CsvWriter w(opts.out / "residual_histogram.csv", {"bin_lo", "bin_hi", "count"});
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            w.row({format_number(h.edges[b]), format_number(h.edges[b + 1]), format_number(h.counts[b])});
        w.close();
        manifest.add("residual_histogram.csv");
    }
    log << "calibrate: eps_hat " << format_number(ou.eps_hat) << " [" << format_number(ou.eps_ci.lo) << ", "
        << format_number(ou.eps_ci.hi) << "], beta_hat " << format_number(ou.beta_hat) << " ["
        << format_number(ou.beta_ci.lo) << ", " << format_number(ou.beta_ci.hi) << "]"
        << (ou.boundary ? " (boundary: persistence not significant)" : "") << '\n';
    manifest.write("ok");
    return kOk;
}

int cmd_verify_accuracy(const Options& opts, std::ostream& log) {
    const RunConfig cfg = load(opts);
    prepare_out(opts.out);
    Manifest manifest("verify-accuracy", opts.out, json::parse(cfg.to_json()), cfg.sim.seed);
    manifest.write("running");

    const ImpactModel impact(cfg.impact);
    PdeOptions po;
    po.M = cfg.pde.M;
    po.L_over_beta = cfg.pde.L_over_beta;
    po.dt_over_eps = cfg.pde.dt_over_eps;
    const ScalingStudy study = epsilon_scaling_study(cfg.problem, impact, cfg.pde.eps_list, po, cfg.sim.workers);

    CsvWriter w(opts.out / "accuracy.csv", {"eps", "sup_error", "ratio", "C_hat"});
    for (const auto& r : study.rows) {
        w.row({format_number(r.eps), format_number(r.sup_error), r.ratio ? format_number(*r.ratio) : "",
               format_number(r.C_hat)});
        log << "verify-accuracy: eps " << format_number(r.eps) << " sup_error " << format_number(r.sup_error)
            << " ratio " << (r.ratio ? format_number(*r.ratio) : "-") << " C_hat " << format_number(r.C_hat)
            << '\n';
    }
    w.close();
    manifest.add("accuracy.csv");
    {
        std::ofstream os(opts.out / "accuracy_verdict.txt", std::ios::trunc);
        os << to_string(study.verdict) << '\n';
        for (const auto& n : study.notes) os << n << '\n';
    }
    manifest.add("accuracy_verdict.txt");
    for (const auto& n : study.notes) log << "verify-accuracy: " << n << '\n';
    if (study.rows.size() < 2) log << "verify-accuracy: warning: single eps, no ratios computed\n";

    if (opts.dump_field) {
        for (const auto& r : study.rows) {
            const ImpactModel im = impact.with_eps(r.eps);
            const PdeSolution s = solve_chi_pde(cfg.problem, im, make_pde_grid(im, cfg.problem.T, po), true);
            const std::string file = "field_eps_" + label(r.eps) + ".csv";
            CsvWriter f(opts.out / file, {"t", "y", "chi", "chi0"});
            const std::size_t n = s.grid.n_steps;
            const std::size_t tstride = std::max<std::size_t>(1, n / 200);
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < n; i += tstride) rows.push_back(i);
            rows.push_back(n);
            for (std::size_t i : rows)
                for (std::size_t j = 0; j < s.grid.nodes(); ++j)
                    f.row(std::vector<double>{s.grid.T * static_cast<double>(i) / static_cast<double>(n),
                                              s.grid.y(j), s.at(i, j), s.chi0[i]});
            f.close();
            manifest.add(file);
        }
    }
    log << "verify-accuracy: " << to_string(study.verdict) << '\n';
    manifest.write("ok");
    return kOk;
}

int cmd_synth_series(const Options& opts, std::ostream& log) {
    const RunConfig cfg = load(opts);
    if (opts.series_length < 2) throw ConfigError("--length", "need at least 2 observations");
    prepare_out(opts.out);
    Manifest manifest("synth-series", opts.out, json::parse(cfg.to_json()), cfg.sim.seed);
    manifest.write("running");
    const ImpactModel impact(cfg.impact);
    const ImpactSeries s = synthesize_series(impact, opts.series_length, cfg.sim.seed);
    CsvWriter w(opts.out / "impact_series.csv", {"t", "kappa"});
    for (std::size_t i = 0; i < s.size(); ++i) w.row(std::vector<double>{s.t[i], s.value[i]});
    w.close();
    manifest.add("impact_series.csv");
    log << "synth-series: " << s.size() << " observations -> impact_series.csv\n";
    manifest.write("ok");
    return kOk;
}

int run(const std::string& command, const Options& opts, std::ostream& log) {
    try {
        if (command == "calibrate") return cmd_calibrate(opts, log);
        if (command == "solve") return cmd_solve(opts, log);
        if (command == "simulate") return cmd_simulate(opts, log);
        if (command == "compare") return cmd_compare(opts, log);
        if (command == "verify-accuracy") return cmd_verify_accuracy(opts, log);
        if (command == "synth-series") return cmd_synth_series(opts, log);
        log << "error: unknown command '" << command << "'\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CsvParseError& e) {
        log << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Unsupported& e) {
        log << "unsupported: " << e.what() << '\n';
        return kConfigError;
    } catch (const NotPositiveDefinite& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        log << "invalid parameter: " << e.what() << '\n';
        return kConfigError;
    } catch (const EstimationFailed& e) {
        log << "estimation failed: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const NumericalFailure& e) {
        log << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::overflow_error& e) {
        log << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fmrexec::cli
