#pragma once

#include "fmrexec/model.hpp"

#include <vector>

namespace fmrexec {

/// Raised when the closed form is asked for a nonnegative terminal value.
class InvalidTerminal : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Zero-order quadratic value coefficient chi_0(t) = h^(2)(t) + b/2 on a grid.
 *
 * chi_0 solves chi' - phi + chi^2 / kappa(t) = 0 backward from
 * chi(T) = -varphi + b/2. logG holds Lambda(t) = int_0^t chi_0/kappa du, the
 * log of the integrating factor, at the grid nodes.
 */
struct RiccatiSolution {
    TimeGrid grid;
    std::vector<double> chi;
    std::vector<double> kappa;
    std::vector<double> logG;

    double chi_over_kappa(std::size_t i) const { return chi[i] / kappa[i]; }

    /// Linear interpolation of chi between nodes.
    double chi_at(double t) const;
    /// Linear interpolation of Lambda between nodes.
    double log_integrating_factor(double t) const;
};

/// Classical RK4 backward from T. Throws NumericalFailure on blow-up.
RiccatiSolution solve_riccati(const ExecutionProblem& problem, const ImpactModel& impact,
                              const TimeGrid& grid);

/// Closed-form solution for constant kappa; test oracle.
double riccati_closed_form(double kappa, double phi, double varphi, double b, double T, double t);

/// exp(Lambda(s) - Lambda(t)), t <= s.
double integrating_factor(const RiccatiSolution& sol, double t, double s);

}  // namespace fmrexec
