#pragma once

/**
 * @file signal.hpp
 * @brief Closed-form machinery for an OU trading signal.
 *
 * With dmu = (A mu + mu_bar) dt + B dW' and integrating factor
 * G(t,s) = exp(int_t^s chi_0/kappa du), the zero-order linear coefficient is
 *
 *   h0^(1)(t, mu) = gamma . (Phi1(t) mu + Phi0(t) mu_bar)
 *
 *   Phi1(t) = int_t^T G(t,s) e^{A(s-t)} ds
 *   Phi0(t) = int_t^T G(t,s) int_t^s e^{A(s-u)} du ds
 *   Phi2(t) = int_t^T G(t,s) chi_0(s)/kappa(s) Phi1(s) ds      (entrywise)
 *
 * and the first-order control correction is V_eps . C1(t) with
 * C1(t) = B^T (Phi2(t)^T gamma) / (2 kappa(t)), V_eps = sqrt(2 eps) beta rho.
 */

#include "fmrexec/model.hpp"
#include "fmrexec/riccati.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace fmrexec {

class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Scaling and squaring with a truncated Taylor series. Throws
/// std::overflow_error when the 1-norm of M exceeds 1e3.
Matrix mat_exp(const Matrix& M);

/// Moments of the OU signal over a horizon tau:
/// mu_{t+tau} | mu_t ~ N(propagator mu_t + drift_integral mu_bar, covariance).
struct OuTransition {
    Matrix propagator;      ///< e^{A tau}
    Matrix drift_integral;  ///< int_0^tau e^{A u} du
    Matrix covariance;      ///< int_0^tau e^{A u} B B^T e^{A^T u} du
};

OuTransition ou_transition(const SignalModel& signal, double tau);

enum class Phi0Method { Auto, Shortcut, Nested };

std::vector<Matrix> compute_phi1(const RiccatiSolution& riccati, const SignalModel& signal);
std::vector<Matrix> compute_phi0(const RiccatiSolution& riccati, const SignalModel& signal,
                                 const std::vector<Matrix>& phi1,
                                 Phi0Method method = Phi0Method::Auto);
std::vector<Matrix> compute_phi2(const RiccatiSolution& riccati, const std::vector<Matrix>& phi1);

/// psi(t) = int_t^T G(t,s) ds at every node.
std::vector<double> discount_integral(const RiccatiSolution& riccati);

/// sqrt(2 eps) beta rho. Identity eta only; throws Unsupported otherwise.
Vector compute_V_eps(const ImpactModel& impact, const SignalModel& signal);

/// Everything the three policies need, precomputed on one grid.
struct StrategyTables {
    TimeGrid grid;
    RiccatiSolution riccati;
    ImpactModel impact;
    SignalModel signal;
    Vector gamma;
    double b = 0.0;

    std::vector<Matrix> Phi1;
    std::vector<Matrix> Phi0;
    std::vector<Matrix> Phi2;
    std::vector<Vector> C1;
    std::optional<Vector> V_eps;    ///< empty when eta is not the identity
    std::vector<Vector> h0_coeffA;  ///< Phi1(t)^T gamma
    std::vector<double> h0_const;   ///< gamma^T Phi0(t) mu_bar
    std::vector<double> correction; ///< V_eps . C1(t), zero when V_eps is empty

    std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
};

/// Riccati solve plus every table. The grid needs at least 4 steps.
StrategyTables build_tables(const ExecutionProblem& problem, const ImpactModel& impact,
                            const SignalModel& signal, const TimeGrid& grid);

/// Recomputes C1 (and the cached correction) from the stored Phi2.
void compute_C1(StrategyTables& tables);

/// gamma^T Phi1(t) mu + gamma^T Phi0(t) mu_bar, linear in t between nodes.
double h1_zero_order(const StrategyTables& tables, double t, const Vector& mu);

/**
 * int_t^T E[(h0^(1))^2(s, mu_s) | mu_t = mu] / (4 kappa(s)) ds from the
 * Gaussian conditional moments of the OU signal. Exact Simpson over nodes at
 * grid times, linear in t between nodes.
 */
double h0_zero_order(const StrategyTables& tables, double t, const Vector& mu);

}  // namespace fmrexec
