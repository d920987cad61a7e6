#include "fmrexec/calibrate.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace fmrexec {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

ImpactSeries ImpactSeries::from_values(std::vector<double> values) {
    ImpactSeries s;
    const auto n = values.size();
    s.t.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.t[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    s.value = std::move(values);
    return s;
}

void ImpactSeries::validate() const {
    if (value.empty()) throw InvalidParameter("impact series is empty");
    if (t.size() != value.size()) throw InvalidParameter("impact series timestamps and values differ in length");
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!(value[i] > 0.0) || !std::isfinite(value[i]))
            throw InvalidParameter("impact series value at row " + std::to_string(i + 1) + " is not positive");
        if (i > 0 && !(t[i] > t[i - 1]))
            throw InvalidParameter("impact series timestamps must increase (row " + std::to_string(i + 1) + ")");
    }
}

double polynomial_eval(const std::vector<double>& alpha, double t) {
    double acc = 0.0;
    for (auto it = alpha.rbegin(); it != alpha.rend(); ++it) acc = acc * t + *it;
    return acc;
}

PolynomialFit fit_kappa_polynomial(const ImpactSeries& series, std::size_t order) {
    series.validate();
    const auto n = static_cast<Eigen::Index>(series.size());
    const auto J = static_cast<Eigen::Index>(order);
    if (order == 0 || n <= J) throw EstimationFailed("polynomial fit needs N > J >= 1");

    Matrix V(n, J);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = series.t[static_cast<std::size_t>(i)];
        double p = 1.0;
        for (Eigen::Index j = 0; j < J; ++j, p *= t) V(i, j) = p;
        y[i] = series.value[static_cast<std::size_t>(i)];
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(V);
    if (qr.rank() < J) throw EstimationFailed("polynomial design matrix is rank deficient");
    const Vector coef = qr.solve(y);

    PolynomialFit fit;
    fit.alpha.assign(coef.data(), coef.data() + coef.size());
    const Vector resid = y - V * coef;
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();
    fit.r2 = sst > 0.0 ? 1.0 - resid.squaredNorm() / sst : 1.0;
    for (double t : series.t)
        if (!(polynomial_eval(fit.alpha, t) > 0.0)) fit.positive_on_grid = false;
    return fit;
}

double implied_eta_mean(const ImpactSeries& series, const std::vector<double>& alpha) {
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i)
        acc += polynomial_eval(alpha, series.t[i]) / series.value[i] - 1.0;
    return acc / static_cast<double>(series.size());
}

MeanZeroAdjustment adjust_mean_zero(const ImpactSeries& series, const std::vector<double>& alpha_init,
                                    double tol, std::size_t max_iter) {
    series.validate();
    const std::size_t J = alpha_init.size();
    // The mean of the implied eta is affine in alpha: f(alpha) = g . alpha - 1
    // with g_j = mean(t^j / kappa). Only one direction is pinned down, so the
    // Gauss-Newton step moves along alpha itself, rescaling the fitted curve
    // and keeping its least-squares shape. A zero curve falls back to g.
    std::vector<double> g(J, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        double p = 1.0 / series.value[i];
        for (std::size_t j = 0; j < J; ++j, p *= series.t[i]) g[j] += p;
    }
    for (double& v : g) v /= static_cast<double>(series.size());

    MeanZeroAdjustment out;
    out.alpha = alpha_init;
    out.residual_mean = implied_eta_mean(series, out.alpha);
    std::vector<double> best = out.alpha;
    double best_abs = std::abs(out.residual_mean);
    while (std::abs(out.residual_mean) > tol && out.iterations < max_iter) {
        std::vector<double> dir = out.alpha;
        double slope = std::inner_product(g.begin(), g.end(), dir.begin(), 0.0);
        if (!(std::abs(slope) > 0.0)) {
            dir = g;
            slope = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
            if (!(slope > 0.0)) break;
        }
        const double step = out.residual_mean / slope;
        for (std::size_t j = 0; j < J; ++j) out.alpha[j] -= step * dir[j];
        out.residual_mean = implied_eta_mean(series, out.alpha);
        ++out.iterations;
        if (std::abs(out.residual_mean) < best_abs) {
            best_abs = std::abs(out.residual_mean);
            best = out.alpha;
        }
    }
    out.converged = best_abs <= tol;
    if (!out.converged) {
        out.alpha = best;
        out.residual_mean = implied_eta_mean(series, best);
    }
    return out;
}

std::vector<double> implied_eta(const ImpactSeries& series, const std::vector<double>& alpha) {
    std::vector<double> eta(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        eta[i] = polynomial_eval(alpha, series.t[i]) / series.value[i] - 1.0;
    return eta;
}

OuEstimate estimate_ou(const std::vector<double>& eta, double dt) {
    if (eta.size() < 4) throw EstimationFailed("OU regression needs at least 4 observations");
    if (!(dt > 0.0)) throw EstimationFailed("OU regression needs dt > 0");
    const std::size_t n = eta.size() - 1;

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += eta[i];
        my += eta[i + 1] - eta[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = eta[i] - mx;
        const double dy = (eta[i + 1] - eta[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw EstimationFailed("eta path has no variation; cannot estimate OU parameters");

    OuEstimate est;
    est.slope = sxy / sxx;
    est.intercept = my - est.slope * mx;
    if (!(est.slope < 0.0)) throw EstimationFailed("no mean reversion: regression slope is >= 0");

    est.residuals.resize(n);
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (eta[i + 1] - eta[i]) - est.intercept - est.slope * eta[i];
        est.residuals[i] = r;
        ssr += r * r;
    }
    const double dof = static_cast<double>(n) - 2.0;
    est.resid_var = ssr / dof;
    est.slope_se = std::sqrt(est.resid_var / sxx);
    est.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;

    // one-step persistence e^{-dt/eps}
    const double persistence = 1.0 + est.slope;
    est.boundary = persistence - kZ95 * est.slope_se <= 0.0;
    const double p = est.boundary ? std::max(persistence, std::max(est.slope_se, 1e-300)) : persistence;
    auto eps_of = [dt](double q) { return -dt / std::log(q); };
    est.eps_hat = eps_of(p);

    const double one_minus_p2 = 1.0 - p * p;
    const double s = std::sqrt(est.resid_var);
    est.beta_hat = s / std::sqrt(one_minus_p2);

    const double p_lo = persistence - kZ95 * est.slope_se;
    const double p_hi = persistence + kZ95 * est.slope_se;
    est.eps_ci.lo = p_lo > 0.0 ? eps_of(p_lo) : 0.0;
    est.eps_ci.hi = p_hi < 1.0 ? eps_of(p_hi) : std::numeric_limits<double>::infinity();

    const double d_ds = 1.0 / std::sqrt(one_minus_p2);
    const double d_dp = s * p / std::pow(one_minus_p2, 1.5);
    const double var_s = est.resid_var / (2.0 * dof);
    const double sd_beta = std::sqrt(d_ds * d_ds * var_s + d_dp * d_dp * est.slope_se * est.slope_se);
    est.beta_ci = {std::max(0.0, est.beta_hat - kZ95 * sd_beta), est.beta_hat + kZ95 * sd_beta};
    return est;
}

CalibrationResult calibrate(const ImpactSeries& series, std::size_t order, std::size_t lag1_sample_size) {
    CalibrationResult res;
    const PolynomialFit fit = fit_kappa_polynomial(series, order);
    res.alpha_initial = fit.alpha;
    res.fit_r2 = fit.r2;

    const MeanZeroAdjustment adj = adjust_mean_zero(series, fit.alpha);
    res.alpha = adj.alpha;
    res.adjust_converged = adj.converged;
    for (double t : series.t)
        if (!(polynomial_eval(res.alpha, t) > 0.0)) res.positivity_warning = true;

    res.eta_path = implied_eta(series, res.alpha);
    res.eta_mean = std::accumulate(res.eta_path.begin(), res.eta_path.end(), 0.0) /
                   static_cast<double>(res.eta_path.size());

    if (lag1_sample_size > 0 && res.eta_path.size() > 1) {
        const std::size_t pairs = res.eta_path.size() - 1;
        const std::size_t stride = std::max<std::size_t>(1, pairs / lag1_sample_size);
        for (std::size_t i = 0; i < pairs && res.lag1_sample.size() < lag1_sample_size; i += stride)
            res.lag1_sample.emplace_back(res.eta_path[i], res.eta_path[i + 1]);
    }

    const double dt = series.size() > 1 ? series.t[1] - series.t[0] : 1.0;
    res.ou = estimate_ou(res.eta_path, dt);
    return res;
}

std::vector<double> simulate_ou_path(double eps, double beta, double dt, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double decay = std::exp(-dt / eps);
    const double vol = beta * std::sqrt(-std::expm1(-2.0 * dt / eps));
    std::vector<double> y(n + 1);
    y[0] = beta * normal(rng);
    for (std::size_t i = 0; i < n; ++i) y[i + 1] = y[i] * decay + vol * normal(rng);
    return y;
}

ImpactSeries synthesize_series(const ImpactModel& impact, std::size_t n, std::uint64_t seed) {
    const double dt = 1.0 / static_cast<double>(n);
    const std::vector<double> y = simulate_ou_path(impact.eps(), impact.beta(), dt, n, seed);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1) * dt;
        values[i] = impact.kappa(t * impact.horizon()) / (1.0 + impact.eta_clamped(y[i + 1]));
    }
    return ImpactSeries::from_values(std::move(values));
}

}  // namespace fmrexec
