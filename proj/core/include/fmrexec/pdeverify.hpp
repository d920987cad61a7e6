#pragma once

/**
 * @file pdeverify.hpp
 * @brief Numerical check that the full (t, y) Riccati PDE solution stays
 *        within O(eps) of the zero-order coefficient chi_0(t).
 *
 * chi^eps solves
 *
 *   d_t chi - phi + chi^2 / k(t, y) + (1/eps) L0 chi = 0,  chi(T, y) = -varphi + b/2,
 *
 * with L0 = -y d_y + beta^2 d_yy. The solver steps backward in time with an
 * IMEX scheme: L0 implicit (one tridiagonal solve per step, centred
 * differences, zero-flux boundaries at +-L), reaction explicit.
 */

#include "fmrexec/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fmrexec {

struct PdeOptions {
    std::size_t M = 400;        ///< y intervals
    double L_over_beta = 8.0;   ///< half-width in stationary standard deviations
    double dt_over_eps = 2e-3;  ///< time step as a fraction of eps
};

struct PdeGrid {
    double L = 0.0;
    std::size_t M = 0;
    std::size_t n_steps = 0;
    double T = 1.0;
    double eps = 0.0;

    double dy() const { return 2.0 * L / static_cast<double>(M); }
    double dt() const { return T / static_cast<double>(n_steps); }
    double y(std::size_t j) const { return -L + dy() * static_cast<double>(j); }
    std::size_t nodes() const { return M + 1; }
};

/// Grid for a given eps; throws InvalidParameter if L < 6 beta.
PdeGrid make_pde_grid(const ImpactModel& impact, double T, const PdeOptions& opts = {});

struct PdeSolution {
    PdeGrid grid;
    std::vector<double> chi0;      ///< RK4 zero-order coefficient at the time nodes
    std::vector<double> initial;   ///< chi^eps(0, y_j)
    std::vector<double> terminal;  ///< chi^eps(T, y_j)
    std::vector<double> field;     ///< (n_steps+1) x (M+1), row-major by time; only when requested
    double sup_error = 0.0;        ///< max |chi^eps - chi_0| over all nodes
    double min_value = 0.0;
    double max_value = 0.0;

    bool has_field() const { return !field.empty(); }
    double at(std::size_t i, std::size_t j) const { return field[i * grid.nodes() + j]; }
};

/// Throws NumericalFailure on divergence or NaN, InvalidParameter if the
/// explicit reaction step violates dt * 2 |chi|_max / k_min < 0.5.
PdeSolution solve_chi_pde(const ExecutionProblem& problem, const ImpactModel& impact,
                          const PdeGrid& grid, bool store_field = false);

struct ScalingRow {
    double eps = 0.0;
    double sup_error = 0.0;
    std::optional<double> ratio;  ///< error(eps) / error(previous, larger eps)
    double C_hat = 0.0;           ///< sup_error / eps
};

enum class Verdict { Pass, Fail, Inconclusive };

struct ScalingStudy {
    std::vector<ScalingRow> rows;  ///< ordered by decreasing eps
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::string> notes;
};

const char* to_string(Verdict v);

/// Runs one solve per eps (concurrently, up to `workers`; 0 = one thread per eps).
/// Pass: every error below 1e-6, or the last two ratios in [0.35, 0.65] and
/// C_hat of the two smallest eps within 50% of each other.
ScalingStudy epsilon_scaling_study(const ExecutionProblem& problem, const ImpactModel& impact,
                                   std::vector<double> eps_list, const PdeOptions& opts = {},
                                   std::size_t workers = 0);

}  // namespace fmrexec
