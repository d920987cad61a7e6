#include "fmrexec/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fmrexec {

namespace {

// Cubic Hermite interpolant on [0, 1] from values and scaled derivatives.
double hermite(double x0, double dx0, double x1, double dx1, double theta) {
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    return (2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * dx0 + (-2 * t3 + 3 * t2) * x1 +
           (t3 - t2) * dx1;
}

}  // namespace

RiccatiSolution solve_riccati(const ExecutionProblem& problem, const ImpactModel& impact,
                              const TimeGrid& grid) {
    if (!(problem.phi >= 0.0)) throw InvalidParameter("phi must be >= 0");
    if (!(problem.varphi >= 0.5 * problem.b))
        throw InvalidParameter("terminal value -varphi + b/2 must be <= 0");
    if (std::abs(grid.horizon() - problem.T) > 1e-12 * problem.T)
        throw InvalidParameter("time grid horizon differs from problem.T");

    const std::size_t n = grid.steps();
    const double dt = grid.dt();
    const double phi = problem.phi;

    RiccatiSolution sol{grid, std::vector<double>(n + 1), std::vector<double>(n + 1),
                        std::vector<double>(n + 1)};
    for (std::size_t i = 0; i <= n; ++i) sol.kappa[i] = impact.kappa(grid[i]);

    double kappa_max = *std::max_element(sol.kappa.begin(), sol.kappa.end());
    const double limit = 1e6 * std::max(problem.varphi, std::sqrt(phi * kappa_max));

    auto rhs = [&](double t, double x) { return phi - x * x / impact.kappa_unchecked(t); };

    // One RK4 step from (t, x) with signed step h, plus the Simpson increment of
    // int chi/kappa over the step (midpoint chi from the cubic Hermite interpolant).
    struct Step {
        double x;
        double dlog;
    };
    auto step = [&](double t, double x, double h) {
        const double k1 = rhs(t, x);
        const double k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
        const double k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
        const double k4 = rhs(t + h, x + h * k3);
        const double next = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        const double xm = hermite(x, h * k1, next, h * rhs(t + h, next), 0.5);
        const double integral = h / 6.0 *
                                (x / impact.kappa_unchecked(t) + 4 * xm / impact.kappa_unchecked(t + 0.5 * h) +
                                 next / impact.kappa_unchecked(t + h));
        return Step{next, integral};
    };

    // The linearised backward problem has rate 2|chi|/kappa, which near T can
    // exceed the RK4 stability bound for large varphi. Such intervals are
    // split into substeps with rate * h <= kMaxRate.
    constexpr double kMaxRate = 0.25;
    std::vector<double> dlog(n);
    sol.chi[n] = problem.terminal_chi();
    for (std::size_t i = n; i-- > 0;) {
        const double t1 = grid[i + 1];
        const double kmin = std::min(sol.kappa[i], sol.kappa[i + 1]);
        const double rate = 2.0 * std::max(std::abs(sol.chi[i + 1]), std::sqrt(phi * kappa_max)) / kmin;
        const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(rate * dt / kMaxRate)));
        const double h = -dt / static_cast<double>(m);
        double x = sol.chi[i + 1];
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double t = k == 0 ? t1 : t1 + h * static_cast<double>(k);
            const Step st = step(t, x, h);
            x = st.x;
            acc -= st.dlog;  // forward integral over [t_i, t_{i+1}]
        }
        if (!std::isfinite(x) || std::abs(x) > limit)
            throw NumericalFailure("Riccati solution blew up at t=" + std::to_string(grid[i]));
        sol.chi[i] = x;
        dlog[i] = acc;
    }

    sol.logG[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) sol.logG[i + 1] = sol.logG[i] + dlog[i];
    return sol;
}

double RiccatiSolution::chi_at(double t) const {
    const auto [i, w] = grid.locate(t);
    return (1.0 - w) * chi[i] + w * chi[i + 1];
}

double RiccatiSolution::log_integrating_factor(double t) const {
    const auto [i, w] = grid.locate(t);
    return (1.0 - w) * logG[i] + w * logG[i + 1];
}

double integrating_factor(const RiccatiSolution& sol, double t, double s) {
    if (t > s) throw std::domain_error("integrating_factor requires t <= s");
    return std::exp(sol.log_integrating_factor(s) - sol.log_integrating_factor(t));
}

double riccati_closed_form(double kappa, double phi, double varphi, double b, double T, double t) {
    if (!(kappa > 0.0)) throw InvalidParameter("closed form needs kappa > 0");
    if (!(phi > 0.0)) throw InvalidParameter("closed form needs phi > 0");
    const double xT = -varphi + 0.5 * b;
    if (xT >= 0.0) throw InvalidTerminal("closed form needs -varphi + b/2 < 0");
    const double c = std::sqrt(kappa * phi);
    const double g = std::sqrt(phi / kappa);
    if (xT == -c) return -c;
    // chi = c (1 + z e^{2g(T-t)}) / (1 - z e^{2g(T-t)}), z = (xT - c)/(xT + c),
    // rewritten with w = e^{-2g(T-t)} so that large g(T-t) stays finite.
    const double z = (xT - c) / (xT + c);
    const double w = std::exp(-2.0 * g * (T - t));
    return c * (w + z) / (w - z);
}

}  // namespace fmrexec
