#include "fmrexec/pdeverify.hpp"

#include "fmrexec/riccati.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace fmrexec {

PdeGrid make_pde_grid(const ImpactModel& impact, double T, const PdeOptions& opts) {
    if (!(impact.eps() > 0.0)) throw InvalidParameter("pde grid: eps must be positive");
    if (!(opts.L_over_beta >= 6.0)) throw InvalidParameter("pde grid: L must cover at least 6 beta");
    if (opts.M < 4) throw InvalidParameter("pde grid: need at least 4 y intervals");
    if (!(opts.dt_over_eps > 0.0)) throw InvalidParameter("pde grid: dt_over_eps must be positive");
    PdeGrid g;
    g.T = T;
    g.eps = impact.eps();
    g.M = opts.M;
    g.L = opts.L_over_beta * impact.beta();
    g.n_steps = static_cast<std::size_t>(std::ceil(T / (opts.dt_over_eps * impact.eps()) - 1e-9));
    g.n_steps = std::max<std::size_t>(g.n_steps, 4);
    return g;
}

namespace {

// Constant tridiagonal system factored once (Thomas algorithm).
class Tridiagonal {
public:
    Tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper)
        : lower_(std::move(lower)), cprime_(diag.size()), denom_(diag.size()) {
        const std::size_t n = diag.size();
        denom_[0] = diag[0];
        cprime_[0] = upper[0] / denom_[0];
        for (std::size_t j = 1; j < n; ++j) {
            denom_[j] = diag[j] - lower_[j] * cprime_[j - 1];
            cprime_[j] = j + 1 < n ? upper[j] / denom_[j] : 0.0;
        }
    }

    void solve(std::vector<double>& rhs) const {
        const std::size_t n = rhs.size();
        rhs[0] /= denom_[0];
        for (std::size_t j = 1; j < n; ++j) rhs[j] = (rhs[j] - lower_[j] * rhs[j - 1]) / denom_[j];
        for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= cprime_[j] * rhs[j + 1];
    }

private:
    std::vector<double> lower_, cprime_, denom_;
};

}  // namespace

PdeSolution solve_chi_pde(const ExecutionProblem& problem, const ImpactModel& impact,
                          const PdeGrid& grid, bool store_field) {
    const std::size_t n = grid.n_steps;
    const std::size_t nodes = grid.nodes();
    const double dt = grid.dt();
    const double dy = grid.dy();
    const double beta2 = impact.beta() * impact.beta();
    const double r = dt / grid.eps;
    const double xT = problem.terminal_chi();

    const TimeGrid tgrid(grid.T, n);
    const RiccatiSolution ric = solve_riccati(problem, impact, tgrid);

    // 1 + eta(y_j); 1/k(t, y_j) = (1 + eta_j) / kappa(t)
    std::vector<double> one_plus_eta(nodes);
    double g_max = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) {
        one_plus_eta[j] = 1.0 + impact.eta_clamped(grid.y(j));
        g_max = std::max(g_max, one_plus_eta[j]);
    }
    const double kappa_min = *std::min_element(ric.kappa.begin(), ric.kappa.end());
    const double kappa_max = *std::max_element(ric.kappa.begin(), ric.kappa.end());
    double g_min = *std::min_element(one_plus_eta.begin(), one_plus_eta.end());
    const double k_min = kappa_min / g_max;
    const double k_max = kappa_max / g_min;
    const double chi_bound = std::max(std::abs(xT), std::sqrt(problem.phi * k_max));
    if (!(dt * 2.0 * chi_bound / k_min < 0.5))
        throw InvalidParameter("pde: time step violates the explicit reaction bound dt*2|chi|/k_min < 0.5");

    const double diff = beta2 / (dy * dy);
    std::vector<double> lower(nodes), diag(nodes), upper(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double adv = grid.y(j) / (2.0 * dy);
        diag[j] = 1.0 + r * 2.0 * diff;
        if (j == 0) {
            upper[j] = -r * 2.0 * diff;
        } else if (j == nodes - 1) {
            lower[j] = -r * 2.0 * diff;
        } else {
            lower[j] = -r * (diff + adv);
            upper[j] = -r * (diff - adv);
        }
    }
    const Tridiagonal system(std::move(lower), std::move(diag), std::move(upper));

    PdeSolution sol;
    sol.grid = grid;
    sol.chi0 = ric.chi;
    sol.terminal.assign(nodes, xT);
    if (store_field) sol.field.resize((n + 1) * nodes);

    std::vector<double> x = sol.terminal;
    auto record = [&](std::size_t i) {
        double mx = -HUGE_VAL, mn = HUGE_VAL;
        for (std::size_t j = 0; j < nodes; ++j) {
            sol.sup_error = std::max(sol.sup_error, std::abs(x[j] - ric.chi[i]));
            mx = std::max(mx, x[j]);
            mn = std::min(mn, x[j]);
        }
        if (i == n) {
            sol.max_value = mx;
            sol.min_value = mn;
        } else {
            sol.max_value = std::max(sol.max_value, mx);
            sol.min_value = std::min(sol.min_value, mn);
        }
        if (store_field) std::copy(x.begin(), x.end(), sol.field.begin() + static_cast<std::ptrdiff_t>(i * nodes));
    };
    record(n);

    double prev_max = std::abs(xT);
    for (std::size_t i = n; i-- > 0;) {
        const double inv_kappa = 1.0 / ric.kappa[i + 1];
        for (std::size_t j = 0; j < nodes; ++j)
            x[j] += dt * (-problem.phi + x[j] * x[j] * one_plus_eta[j] * inv_kappa);
        system.solve(x);

        double cur_max = 0.0;
        for (double v : x) {
            if (!std::isfinite(v)) throw NumericalFailure("pde: non-finite value at t = " + std::to_string(tgrid[i]));
            cur_max = std::max(cur_max, std::abs(v));
        }
        if (cur_max > 10.0 * prev_max && cur_max > 1e-300)
            throw NumericalFailure("pde: divergence detected at t = " + std::to_string(tgrid[i]));
        prev_max = cur_max;
        record(i);
    }
    sol.initial = x;
    return sol;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

ScalingStudy epsilon_scaling_study(const ExecutionProblem& problem, const ImpactModel& impact,
                                   std::vector<double> eps_list, const PdeOptions& opts,
                                   std::size_t workers) {
    if (eps_list.empty()) throw InvalidParameter("scaling study: empty eps list");
    for (double e : eps_list)
        if (!(e > 0.0)) throw InvalidParameter("scaling study: eps values must be positive");
    std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
    if (std::adjacent_find(eps_list.begin(), eps_list.end()) != eps_list.end())
        throw InvalidParameter("scaling study: duplicate eps values");

    ScalingStudy study;
    study.rows.resize(eps_list.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < eps_list.size();) {
            try {
                const ImpactModel im = impact.with_eps(eps_list[k]);
                const PdeSolution s = solve_chi_pde(problem, im, make_pde_grid(im, problem.T, opts));
                study.rows[k].eps = eps_list[k];
                study.rows[k].sup_error = s.sup_error;
                study.rows[k].C_hat = s.sup_error / eps_list[k];
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(workers == 0 ? eps_list.size() : workers, eps_list.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);

    constexpr double kExact = 1e-6;
    const bool all_exact = std::all_of(study.rows.begin(), study.rows.end(),
                                       [](const ScalingRow& r) { return r.sup_error < kExact; });
    for (std::size_t k = 1; k < study.rows.size(); ++k) {
        if (study.rows[k - 1].sup_error >= kExact)
            study.rows[k].ratio = study.rows[k].sup_error / study.rows[k - 1].sup_error;
    }
    if (all_exact) {
        study.verdict = Verdict::Pass;
        study.notes.emplace_back("all errors below 1e-6; ratios undefined");
        return study;
    }
    if (study.rows.size() < 2) {
        study.verdict = Verdict::Inconclusive;
        study.notes.emplace_back("a single eps gives no ratio; supply at least two values");
        return study;
    }

    bool ok = true;
    const std::size_t m = study.rows.size();
    for (std::size_t k = (m >= 3 ? m - 2 : 1); k < m; ++k) {
        const auto& ratio = study.rows[k].ratio;
        if (!ratio || *ratio < 0.35 || *ratio > 0.65) {
            ok = false;
            study.notes.emplace_back("ratio at eps = " + std::to_string(study.rows[k].eps) + " outside [0.35, 0.65]");
        }
    }
    const double ca = study.rows[m - 2].C_hat, cb = study.rows[m - 1].C_hat;
    if (std::abs(ca - cb) >= 0.5 * std::min(ca, cb)) {
        ok = false;
        study.notes.emplace_back("C_hat varies by 50% or more across the two smallest eps");
    }
    study.verdict = ok ? Verdict::Pass : Verdict::Fail;
    return study;
}

}  // namespace fmrexec
