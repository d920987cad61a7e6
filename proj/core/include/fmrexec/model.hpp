#pragma once

/**
 * @file model.hpp
 * @brief Domain types for execution under fast mean-reverting stochastic impact.
 *
 * The controlled system is
 *
 *   dS = (gamma . mu + b nu) dt + sigma dW
 *   dX = -(S + k(t, Y) nu) nu dt
 *   dQ = nu dt
 *   dmu = (A mu + mu_bar) dt + B dW'
 *   dY = -(1/eps) Y dt + sqrt(2/eps) beta dW*
 *
 * with temporary impact k(t, y) = kappa(t) / (1 + eta(y)). Time is normalised
 * so that one trading day is T = 1.
 */

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmrexec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a parameter set violates a model invariant.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when the Brownian correlation matrix has no Cholesky factor.
class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by numerical kernels on divergence, blow-up or NaN.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Economic parameters of the liquidation problem and the initial state.
struct ExecutionProblem {
    Vector gamma;         ///< signal loading, price drift per unit signal
    double b = 0.0;       ///< permanent impact
    double sigma = 0.0;   ///< price volatility
    double phi = 0.0;     ///< running inventory penalty
    double varphi = 0.0;  ///< terminal liquidation penalty
    double T = 1.0;       ///< horizon (1 = one trading day)
    double S0 = 0.0;
    double X0 = 0.0;
    double Q0 = 0.0;
    Vector mu0;

    std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }

    /// Terminal value of the shifted Riccati coefficient, -varphi + b/2.
    double terminal_chi() const { return -varphi + 0.5 * b; }

    /// Full invariant check, including varphi > b/2. Throws InvalidParameter.
    void validate() const;
};

enum class EtaKind { Identity, ScaledTanh };

/// Deterministic diurnal curve kappa(t), the map eta and the fast factor.
class ImpactModel {
public:
    struct Params {
        std::vector<double> kappa;  ///< polynomial coefficients alpha_1..alpha_J
        EtaKind eta_kind = EtaKind::Identity;
        double eta_scale = 0.5;     ///< a in eta(y) = a tanh(y)
        double eps = 0.0035;
        double beta_param = 0.26984;
        double eta_clamp = 0.05;    ///< lower clamp delta for 1 + eta
        double horizon = 1.0;
    };

    /// Validates and checks kappa > 0 on a dense grid of [0, horizon].
    explicit ImpactModel(Params p);

    /// Constant kappa, identity eta.
    static ImpactModel constant(double kappa, double eps = 0.0035, double beta = 0.26984);

    double kappa(double t) const;
    double eta(double y) const;
    double eta_clamped(double y) const;
    double k(double t, double y) const;

    /// Unchecked polynomial evaluation (hot paths that already hold t in range).
    double kappa_unchecked(double t) const noexcept;

    const std::vector<double>& coefficients() const { return p_.kappa; }
    EtaKind eta_kind() const { return p_.eta_kind; }
    double eta_scale() const { return p_.eta_scale; }
    double eps() const { return p_.eps; }
    double beta() const { return p_.beta_param; }
    double clamp() const { return p_.eta_clamp; }
    double horizon() const { return p_.horizon; }
    const Params& params() const { return p_; }

    /// Copy with a different fast time scale.
    ImpactModel with_eps(double eps) const;

private:
    Params p_;
};

/// Free-function forms of the impact evaluations.
double kappa_eval(const ImpactModel& impact, double t);
double k_eval(const ImpactModel& impact, double t, double y);

/// Multidimensional OU trading signal and its correlation with W*.
struct SignalModel {
    Matrix A;
    Matrix B;
    Vector mu_bar;
    Vector rho;

    std::size_t dim() const { return static_cast<std::size_t>(A.rows()); }

    /// Dimension and range checks. Throws InvalidParameter.
    void validate() const;

    /// False if some eigenvalue of A has positive real part.
    bool is_stationary() const;

    static SignalModel scalar(double a, double b, double mu_bar, double rho);
};

/// Correlation of (W, W'_1..W'_d, W*) and its lower Cholesky factor.
struct Correlation {
    Matrix matrix;
    Matrix factor;
};

Correlation build_correlation(const SignalModel& signal);

/// Uniform grid 0 = t_0 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid(double T, std::size_t n_steps);

    std::size_t steps() const { return n_; }
    std::size_t size() const { return n_ + 1; }
    double horizon() const { return T_; }
    double dt() const { return T_ / static_cast<double>(n_); }
    double operator[](std::size_t i) const {
        return i == n_ ? T_ : T_ * static_cast<double>(i) / static_cast<double>(n_);
    }

    /// Index i and weight w such that t = (1-w) t_i + w t_{i+1}; i <= N-1.
    std::pair<std::size_t, double> locate(double t) const;

private:
    double T_;
    std::size_t n_;
};

}  // namespace fmrexec
