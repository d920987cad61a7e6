#include "fmrexec/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace fmrexec {

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(seed ^ mix(path_index));
}

namespace {

// Policy inputs resampled onto the simulation grid.
struct StepCoefficients {
    std::vector<double> chi, kappa_policy, kappa_cost, constant, correction;
    std::vector<double> coeff;  // row-major, d per step
};

StepCoefficients resample(const StrategyTables& tables, const ImpactModel& impact, std::size_t n,
                          double dt) {
    const std::size_t d = tables.dim();
    StepCoefficients c;
    c.chi.resize(n + 1);
    c.kappa_policy.resize(n + 1);
    c.kappa_cost.resize(n + 1);
    c.constant.resize(n + 1);
    c.correction.resize(n + 1);
    c.coeff.resize((n + 1) * d);
    const double T = tables.grid.horizon();
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = k == n ? T : dt * static_cast<double>(k);
        const auto [i, w] = tables.grid.locate(t);
        const auto& r = tables.riccati;
        c.chi[k] = (1 - w) * r.chi[i] + w * r.chi[i + 1];
        c.kappa_policy[k] = (1 - w) * r.kappa[i] + w * r.kappa[i + 1];
        c.kappa_cost[k] = impact.kappa_unchecked(t);
        c.constant[k] = (1 - w) * tables.h0_const[i] + w * tables.h0_const[i + 1];
        c.correction[k] = (1 - w) * tables.correction[i] + w * tables.correction[i + 1];
        for (std::size_t j = 0; j < d; ++j)
            c.coeff[k * d + j] = (1 - w) * tables.h0_coeffA[i][static_cast<Eigen::Index>(j)] +
                                 w * tables.h0_coeffA[i + 1][static_cast<Eigen::Index>(j)];
    }
    return c;
}

// Signal step mu' = E mu + K mu_bar + M z with M M^T = Cov(dt). M is chosen
// close to B sqrt(dt) so the correlation with W* is carried by rho.
struct SignalStep {
    std::vector<double> E, drift, M;  // d x d row-major, drift is d
};

SignalStep signal_step(const SignalModel& signal, double dt) {
    const auto d = signal.A.rows();
    SignalStep s;
    Matrix E, M;
    Vector drift;
    const Matrix bbT = signal.B * signal.B.transpose() * dt;
    Eigen::LLT<Matrix> llt_b(bbT);
    const OuTransition tr = ou_transition(signal, dt);
    Eigen::LLT<Matrix> llt_s(tr.covariance);
    const bool exact = llt_b.info() == Eigen::Success && llt_s.info() == Eigen::Success &&
                       Matrix(llt_b.matrixL()).diagonal().minCoeff() > 0.0;
    if (exact) {
        E = tr.propagator;
        drift = tr.drift_integral * signal.mu_bar;
        const Matrix Lb = llt_b.matrixL();
        const Matrix Ls = llt_s.matrixL();
        M = Ls * Lb.triangularView<Eigen::Lower>().solve(signal.B * std::sqrt(dt));
    } else {
        // singular diffusion: Euler-Maruyama
        E = Matrix::Identity(d, d) + signal.A * dt;
        drift = signal.mu_bar * dt;
        M = signal.B * std::sqrt(dt);
    }
    s.E.resize(static_cast<std::size_t>(d * d));
    s.M.resize(static_cast<std::size_t>(d * d));
    s.drift.resize(static_cast<std::size_t>(d));
    for (Eigen::Index r = 0; r < d; ++r) {
        s.drift[static_cast<std::size_t>(r)] = drift[r];
        for (Eigen::Index c = 0; c < d; ++c) {
            s.E[static_cast<std::size_t>(r * d + c)] = E(r, c);
            s.M[static_cast<std::size_t>(r * d + c)] = M(r, c);
        }
    }
    return s;
}

struct Shared {
    const ExecutionProblem& problem;
    const ImpactModel& impact;
    const SimConfig& cfg;
    const StepCoefficients& coef;
    const SignalStep& step;
    std::vector<double> L;  // (d+2)x(d+2) row-major lower factor
    std::size_t d;
    double dt;
};

void run_path(const Shared& sh, std::size_t path, PathTerminal& out, PathTrajectory* traj) {
    const std::size_t d = sh.d;
    const std::size_t m = d + 2;
    const std::size_t n = sh.cfg.n_steps;
    const double dt = sh.dt;
    const double sqdt = std::sqrt(dt);
    const auto& pr = sh.problem;
    const auto& c = sh.coef;
    const double decay = std::exp(-dt / sh.impact.eps());
    const double y_vol = sh.impact.beta() * std::sqrt(-std::expm1(-2.0 * dt / sh.impact.eps()));

    std::mt19937_64 rng(path_seed(sh.cfg.seed, path));
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> mu(d), mu_next(d), z(m), zc(m);
    for (std::size_t j = 0; j < d; ++j) mu[j] = pr.mu0[static_cast<Eigen::Index>(j)];
    double S = pr.S0, X = pr.X0, Q = pr.Q0, Y = sh.cfg.y0;
    double reduced = pr.X0 + pr.Q0 * pr.S0;

    auto rate = [&](std::size_t k) {
        double signal_term = c.constant[k];
        for (std::size_t j = 0; j < d; ++j) signal_term += c.coeff[k * d + j] * mu[j];
        switch (sh.cfg.policy.kind) {
            case PolicyKind::AC: return c.chi[k] * Q / c.kappa_policy[k];
            case PolicyKind::TS: return (c.chi[k] * Q + 0.5 * signal_term) / c.kappa_policy[k];
            case PolicyKind::FirstOrder: {
                const double base =
                    (c.chi[k] * Q + 0.5 * signal_term) / c.kappa_policy[k] + c.correction[k];
                return sh.cfg.policy.apply_impact_modulation
                           ? (1.0 + sh.impact.eta_clamped(Y)) * base
                           : base;
            }
        }
        return 0.0;
    };

    auto record = [&](std::size_t k, double nu) {
        traj->t.push_back(k == n ? pr.T : dt * static_cast<double>(k));
        traj->S.push_back(S);
        traj->X.push_back(X);
        traj->Q.push_back(Q);
        traj->nu.push_back(nu);
        traj->Y.push_back(Y);
        traj->mu.insert(traj->mu.end(), mu.begin(), mu.end());
    };

    const std::size_t stride = sh.cfg.store_stride;
    for (std::size_t k = 0; k < n; ++k) {
        const double nu = rate(k);
        if (traj && k % stride == 0) record(k, nu);

        for (std::size_t i = 0; i < m; ++i) z[i] = normal(rng);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j <= i; ++j) acc += sh.L[i * m + j] * z[j];
            zc[i] = acc;
        }

        const double k_imp = c.kappa_cost[k] / (1.0 + sh.impact.eta_clamped(Y));
        double drift = 0.0;
        for (std::size_t j = 0; j < d; ++j) drift += pr.gamma[static_cast<Eigen::Index>(j)] * mu[j];
        const double dS = (drift + pr.b * nu) * dt + pr.sigma * sqdt * zc[0];

        reduced += -k_imp * nu * nu * dt + Q * dS;
        X -= (S + k_imp * nu) * nu * dt;
        S += dS;
        Q += nu * dt;

        for (std::size_t r = 0; r < d; ++r) {
            double acc = sh.step.drift[r];
            for (std::size_t j = 0; j < d; ++j)
                acc += sh.step.E[r * d + j] * mu[j] + sh.step.M[r * d + j] * zc[1 + j];
            mu_next[r] = acc;
        }
        mu.swap(mu_next);
        if (!sh.cfg.freeze_factor) Y = Y * decay + y_vol * zc[m - 1];

        if (!std::isfinite(X) || !std::isfinite(S) || !std::isfinite(Q) || !std::isfinite(Y)) {
            std::ostringstream os;
            os << "non-finite state on path " << path << " at step " << k + 1 << " (S=" << S
               << ", X=" << X << ", Q=" << Q << ", Y=" << Y << ", nu=" << nu << ")";
            throw NumericalFailure(os.str());
        }
    }
    if (traj) record(n, rate(n));

    out.X = X;
    out.Q = Q;
    out.S = S;
    out.cost = X + Q * S;
    out.reduced_cost = reduced;
}

}  // namespace

SimBatch simulate(const ExecutionProblem& problem, const ImpactModel& impact,
                  const SignalModel& signal, const StrategyTables& tables, const SimConfig& cfg) {
    if (cfg.n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
    if (cfg.n_steps < 2) throw InvalidParameter("n_steps must be >= 2");
    if (std::abs(tables.grid.horizon() - problem.T) > 1e-12 * problem.T)
        throw InvalidParameter("strategy tables were built for a different horizon");
    if (cfg.policy.kind == PolicyKind::FirstOrder && !tables.V_eps)
        throw Unsupported("first-order policy needs V_eps (identity eta)");
    signal.validate();

    const Correlation corr = build_correlation(signal);
    const std::size_t d = signal.dim();
    const double dt = problem.T / static_cast<double>(cfg.n_steps);
    const StepCoefficients coef = resample(tables, impact, cfg.n_steps, dt);
    const SignalStep step = signal_step(signal, dt);

    Shared shared{problem, impact, cfg, coef, step, {}, d, dt};
    const std::size_t m = d + 2;
    shared.L.resize(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            shared.L[i * m + j] = corr.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

    SimBatch batch;
    batch.policy = cfg.policy;
    batch.seed = cfg.seed;
    batch.n_steps = cfg.n_steps;
    batch.store_stride = cfg.store_stride;
    batch.dim = d;
    batch.terminal.resize(cfg.n_paths);
    if (cfg.store_stride > 0) batch.paths.resize(cfg.n_paths);

    std::size_t workers = cfg.workers == 0 ? std::thread::hardware_concurrency() : cfg.workers;
    workers = std::clamp<std::size_t>(workers, 1, cfg.n_paths);

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t p = next.fetch_add(1);
            if (p >= cfg.n_paths) return;
            try {
                run_path(shared, p, batch.terminal[p], cfg.store_stride > 0 ? &batch.paths[p] : nullptr);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(cfg.n_paths);
                return;
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
    return batch;
}

double quantile(std::vector<double> values, double level) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(level, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    Histogram h;
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty() || bins == 0) return h;
    const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
        bins = 1;
    }
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : finite) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

SavingsReport savings_bps(const SimBatch& batch, const SimBatch& benchmark, std::size_t bins) {
    if (batch.terminal.size() != benchmark.terminal.size())
        throw std::invalid_argument("savings_bps: batches have different path counts");
    if (batch.seed != benchmark.seed || batch.n_steps != benchmark.n_steps)
        throw std::invalid_argument("savings_bps: batches are not coupled (seed or steps differ)");
    SavingsReport rep;
    rep.bps.resize(batch.terminal.size());
    std::vector<double> valid;
    valid.reserve(rep.bps.size());
    for (std::size_t i = 0; i < rep.bps.size(); ++i) {
        const double bench = benchmark.terminal[i].cost;
        if (bench == 0.0) {
            rep.bps[i] = std::numeric_limits<double>::quiet_NaN();
            ++rep.excluded;
            continue;
        }
        rep.bps[i] = (batch.terminal[i].cost - bench) / bench * 1e4;
        valid.push_back(rep.bps[i]);
    }
    rep.median = valid.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(valid, 0.5);
    rep.histogram = make_histogram(valid, bins);
    return rep;
}

QuantileCurves inventory_quantiles(const SimBatch& batch, const SimBatch& benchmark,
                                   const std::vector<double>& levels) {
    if (!batch.has_trajectories() || !benchmark.has_trajectories())
        throw std::invalid_argument("inventory_quantiles: stored trajectories are missing");
    if (batch.paths.size() != benchmark.paths.size() ||
        batch.paths.front().t.size() != benchmark.paths.front().t.size())
        throw std::invalid_argument("inventory_quantiles: trajectory layouts differ");

    QuantileCurves out;
    out.t = batch.paths.front().t;
    out.levels = levels;
    out.values.assign(levels.size(), std::vector<double>(out.t.size()));
    std::vector<double> dev(batch.paths.size());
    for (std::size_t k = 0; k < out.t.size(); ++k) {
        for (std::size_t p = 0; p < dev.size(); ++p) dev[p] = batch.paths[p].Q[k] - benchmark.paths[p].Q[k];
        std::sort(dev.begin(), dev.end());
        for (std::size_t l = 0; l < levels.size(); ++l) out.values[l][k] = quantile(dev, levels[l]);
    }
    return out;
}

}  // namespace fmrexec
