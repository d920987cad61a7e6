#include "fmrexec/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace fmrexec {

namespace {

constexpr double kTimeSlack = 1e-12;
constexpr std::size_t kPositivityGrid = 2001;

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void ExecutionProblem::validate() const {
    if (gamma.size() == 0) throw InvalidParameter("problem.gamma must have at least one entry");
    if (mu0.size() != gamma.size())
        throw InvalidParameter("problem.mu0 must have the same length as problem.gamma");
    if (!(T > 0.0)) throw InvalidParameter("problem.T must be > 0");
    if (!(phi >= 0.0)) throw InvalidParameter("problem.phi must be >= 0");
    if (!(varphi >= 0.0)) throw InvalidParameter("problem.varphi must be >= 0");
    if (!(sigma >= 0.0)) throw InvalidParameter("problem.sigma must be >= 0");
    if (!(varphi > 0.5 * b))
        throw InvalidParameter("problem.varphi must exceed b/2 (got varphi=" + fmt_double(varphi) +
                               ", b=" + fmt_double(b) + ")");
}

ImpactModel::ImpactModel(Params p) : p_(std::move(p)) {
    if (p_.kappa.empty()) throw InvalidParameter("impact.kappa needs at least one coefficient");
    if (!(p_.eps > 0.0)) throw InvalidParameter("impact.eps must be > 0");
    if (!(p_.beta_param > 0.0)) throw InvalidParameter("impact.beta_param must be > 0");
    if (!(p_.eta_clamp > 0.0 && p_.eta_clamp < 1.0))
        throw InvalidParameter("impact.eta_clamp must lie in (0, 1)");
    if (!(p_.horizon > 0.0)) throw InvalidParameter("impact horizon must be > 0");
    if (p_.eta_kind == EtaKind::ScaledTanh && !(p_.eta_scale >= 0.0 && p_.eta_scale < 1.0))
        throw InvalidParameter("impact.eta_scale must lie in [0, 1) for scaled_tanh");
    for (std::size_t i = 0; i < kPositivityGrid; ++i) {
        const double t = p_.horizon * static_cast<double>(i) / (kPositivityGrid - 1);
        const double v = kappa_unchecked(t);
        if (!(v > 0.0))
            throw InvalidParameter("impact.kappa is not positive at t=" + fmt_double(t) +
                                   " (value " + fmt_double(v) + ")");
    }
}

ImpactModel ImpactModel::constant(double kappa, double eps, double beta) {
    Params p;
    p.kappa = {kappa};
    p.eps = eps;
    p.beta_param = beta;
    return ImpactModel(std::move(p));
}

double ImpactModel::kappa_unchecked(double t) const noexcept {
    double acc = 0.0;
    for (auto it = p_.kappa.rbegin(); it != p_.kappa.rend(); ++it) acc = acc * t + *it;
    return acc;
}

double ImpactModel::kappa(double t) const {
    if (!(t >= -kTimeSlack && t <= p_.horizon + kTimeSlack))
        throw std::domain_error("kappa evaluated outside [0, T]: t=" + fmt_double(t));
    return kappa_unchecked(std::clamp(t, 0.0, p_.horizon));
}

double ImpactModel::eta(double y) const {
    switch (p_.eta_kind) {
        case EtaKind::Identity: return y;
        case EtaKind::ScaledTanh: return p_.eta_scale * std::tanh(y);
    }
    return y;
}

double ImpactModel::eta_clamped(double y) const { return std::max(eta(y), p_.eta_clamp - 1.0); }

double ImpactModel::k(double t, double y) const { return kappa(t) / (1.0 + eta_clamped(y)); }

ImpactModel ImpactModel::with_eps(double eps) const {
    Params p = p_;
    p.eps = eps;
    return ImpactModel(std::move(p));
}

double kappa_eval(const ImpactModel& impact, double t) { return impact.kappa(t); }

double k_eval(const ImpactModel& impact, double t, double y) { return impact.k(t, y); }

void SignalModel::validate() const {
    const auto d = A.rows();
    if (d == 0 || A.cols() != d) throw InvalidParameter("signal.A must be a non-empty square matrix");
    if (B.rows() != d || B.cols() != d) throw InvalidParameter("signal.B must be d x d");
    if (mu_bar.size() != d) throw InvalidParameter("signal.mu_bar must have length d");
    if (rho.size() != d) throw InvalidParameter("signal.rho must have length d");
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(rho[i] > -1.0 && rho[i] < 1.0))
            throw InvalidParameter("signal.rho entries must lie in (-1, 1)");
}

bool SignalModel::is_stationary() const {
    Eigen::EigenSolver<Matrix> es(A, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i].real() > 0.0) return false;
    return true;
}

SignalModel SignalModel::scalar(double a, double b, double mu_bar, double rho) {
    SignalModel s;
    s.A = Matrix::Constant(1, 1, a);
    s.B = Matrix::Constant(1, 1, b);
    s.mu_bar = Vector::Constant(1, mu_bar);
    s.rho = Vector::Constant(1, rho);
    return s;
}

Correlation build_correlation(const SignalModel& signal) {
    const auto d = signal.rho.size();
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(signal.rho[i] > -1.0 && signal.rho[i] < 1.0))
            throw InvalidParameter("signal.rho entries must lie in (-1, 1)");

    // ordering: W, W'_1..W'_d, W*
    const auto n = d + 2;
    Correlation c;
    c.matrix = Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i < d; ++i) {
        c.matrix(1 + i, n - 1) = signal.rho[i];
        c.matrix(n - 1, 1 + i) = signal.rho[i];
    }
    Eigen::LLT<Matrix> llt(c.matrix);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("Brownian correlation matrix is not positive definite");
    c.factor = llt.matrixL();
    // LLT happily factors matrices that are singular to rounding
    if (c.factor.diagonal().minCoeff() < 1e-7)
        throw NotPositiveDefinite("Brownian correlation matrix is numerically singular");
    return c;
}

TimeGrid::TimeGrid(double T, std::size_t n_steps) : T_(T), n_(n_steps) {
    if (!(T > 0.0)) throw InvalidParameter("time grid horizon must be > 0");
    if (n_steps == 0) throw InvalidParameter("time grid needs at least one step");
}

std::pair<std::size_t, double> TimeGrid::locate(double t) const {
    if (!(t >= -kTimeSlack && t <= T_ + kTimeSlack))
        throw std::domain_error("time outside grid: t=" + fmt_double(t));
    const double x = std::clamp(t, 0.0, T_) / dt();
    auto i = static_cast<std::size_t>(std::floor(x));
    if (i >= n_) return {n_ - 1, 1.0};
    return {i, x - static_cast<double>(i)};
}

}  // namespace fmrexec
