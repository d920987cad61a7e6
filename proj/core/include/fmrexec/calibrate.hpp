#pragma once

/**
 * @file calibrate.hpp
 * @brief Estimate kappa(t), the implied eta path and the OU parameters
 *        (eps, beta) from a per-second impact series.
 *
 * Steps: least-squares polynomial fit of kappa_t; adjust the coefficients so
 * the implied eta_t = fit(t)/kappa_t - 1 has zero empirical mean; regress
 * eta increments on eta to recover the mean-reversion time scale and the
 * stationary standard deviation beta (stationary variance beta^2).
 */

#include "fmrexec/model.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fmrexec {

class EstimationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Observed kappa at t_i = i/N, i = 1..N.
struct ImpactSeries {
    std::vector<double> t;
    std::vector<double> value;

    /// Uniform timestamps i/N for i = 1..N.
    static ImpactSeries from_values(std::vector<double> values);
    std::size_t size() const { return value.size(); }
    void validate() const;
};

struct PolynomialFit {
    std::vector<double> alpha;
    double r2 = 0.0;
    bool positive_on_grid = true;  ///< false raises a positivity warning upstream
};

PolynomialFit fit_kappa_polynomial(const ImpactSeries& series, std::size_t order = 8);

double polynomial_eval(const std::vector<double>& alpha, double t);

/// Empirical mean of fit(t_i)/kappa_i - 1.
double implied_eta_mean(const ImpactSeries& series, const std::vector<double>& alpha);

struct MeanZeroAdjustment {
    std::vector<double> alpha;
    double residual_mean = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

MeanZeroAdjustment adjust_mean_zero(const ImpactSeries& series, const std::vector<double>& alpha_init,
                                    double tol = 1e-12, std::size_t max_iter = 50);

std::vector<double> implied_eta(const ImpactSeries& series, const std::vector<double>& alpha);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct OuEstimate {
    double slope = 0.0;      ///< OLS slope of increments on level
    double slope_se = 0.0;
    double intercept = 0.0;
    double resid_var = 0.0;  ///< one-step residual variance s^2
    double eps_hat = 0.0;
    double beta_hat = 0.0;
    Interval eps_ci;         ///< 95%, from the slope interval
    Interval beta_ci;        ///< 95%, Delta method
    double r2 = 0.0;
    bool boundary = false;   ///< persistence not significantly positive
    std::vector<double> residuals;
};

/// Throws EstimationFailed when there is no mean reversion or no variation.
OuEstimate estimate_ou(const std::vector<double>& eta, double dt);

struct CalibrationResult {
    std::vector<double> alpha;
    std::vector<double> alpha_initial;
    std::vector<double> eta_path;
    OuEstimate ou;
    double fit_r2 = 0.0;
    bool positivity_warning = false;
    bool adjust_converged = false;
    double eta_mean = 0.0;
    std::vector<std::pair<double, double>> lag1_sample;  ///< (eta_i, eta_{i+1})
};

CalibrationResult calibrate(const ImpactSeries& series, std::size_t order = 8,
                            std::size_t lag1_sample_size = 500);

/// Synthetic day: kappa_i = k(t_i, Y_i) with exact OU steps for Y (stationary
/// start). Identity eta, clamped as in the simulator.
ImpactSeries synthesize_series(const ImpactModel& impact, std::size_t n, std::uint64_t seed);

/// Exact OU path Y_0 ~ N(0, beta^2), n+1 points spaced dt.
std::vector<double> simulate_ou_path(double eps, double beta, double dt, std::size_t n,
                                     std::uint64_t seed);

}  // namespace fmrexec
