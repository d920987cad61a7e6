#include "fmrexec/signal.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <utility>

namespace fmrexec {

namespace {

/**
 * Tail integrals out[i] = int_{t_i}^{T} f_i(s) ds for every node.
 *
 * integrand(i, j) is the anchored integrand f_i at node t_j (j may be i-1;
 * the kernels extend smoothly below their anchor). shift(i, k, out[i+k])
 * carries the tail from anchor t_{i+k} back to anchor t_i. An even number of
 * remaining intervals uses Simpson on [t_i, t_{i+2}]; an odd number uses a
 * 4-point cubic rule on the single interval [t_i, t_{i+1}].
 */
template <class T, class Integrand, class Shift>
std::vector<T> tail_integrals(std::size_t n, double h, const T& zero, Integrand integrand,
                              Shift shift) {
    std::vector<T> out(n + 1, zero);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t remaining = n - i;
        if (remaining % 2 == 0) {
            T local = (h / 3.0) * (integrand(i, i) + 4.0 * integrand(i, i + 1) + integrand(i, i + 2));
            out[i] = local + shift(i, 2, out[i + 2]);
            continue;
        }
        T local;
        if (remaining == 1) {
            // last interval, nodes t_{N-3}..t_N
            local = (h / 24.0) * (integrand(i, i - 2) - 5.0 * integrand(i, i - 1) +
                                  19.0 * integrand(i, i) + 9.0 * integrand(i, i + 1));
        } else if (i == 0) {
            local = (h / 24.0) * (9.0 * integrand(i, 0) + 19.0 * integrand(i, 1) -
                                  5.0 * integrand(i, 2) + integrand(i, 3));
        } else {
            local = (h / 24.0) * (-integrand(i, i - 1) + 13.0 * integrand(i, i) +
                                  13.0 * integrand(i, i + 1) - integrand(i, i + 2));
        }
        out[i] = local + shift(i, 1, out[i + 1]);
    }
    return out;
}

// Powers e^{A k dt} and integrals K(k dt) for k in [-2, 3].
struct StepOperators {
    static constexpr int kMin = -2;
    static constexpr int kMax = 3;
    std::vector<Matrix> E;
    std::vector<Matrix> K;

    StepOperators(const Matrix& A, double dt) {
        const auto d = A.rows();
        Matrix aug = Matrix::Zero(2 * d, 2 * d);
        aug.topLeftCorner(d, d) = A;
        aug.topRightCorner(d, d) = Matrix::Identity(d, d);
        for (int k = kMin; k <= kMax; ++k) {
            const Matrix full = mat_exp(aug * (k * dt));
            E.push_back(full.topLeftCorner(d, d));
            K.push_back(full.topRightCorner(d, d));
        }
    }
    const Matrix& e(int k) const { return E[static_cast<std::size_t>(k - kMin)]; }
    const Matrix& k_int(int k) const { return K[static_cast<std::size_t>(k - kMin)]; }
};

void require_grid(const RiccatiSolution& r) {
    if (r.grid.steps() < 4) throw InvalidParameter("strategy tables need at least 4 grid steps");
}

double simpson_uniform(const std::vector<double>& v, double h) {
    const std::size_t n = v.size() - 1;  // intervals
    if (n == 0) return 0.0;
    if (n == 1) return 0.5 * h * (v[0] + v[1]);
    double acc = 0.0;
    std::size_t even = n;
    if (n % 2 == 1) {
        // 3/8 rule on the last three intervals
        even = n - 3;
        acc += 3.0 * h / 8.0 * (v[n - 3] + 3.0 * v[n - 2] + 3.0 * v[n - 1] + v[n]);
    }
    for (std::size_t i = 0; i + 2 <= even; i += 2) acc += h / 3.0 * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
    return acc;
}

}  // namespace

OuTransition ou_transition(const SignalModel& signal, double tau) {
    const auto d = signal.A.rows();
    OuTransition tr;
    Matrix aug = Matrix::Zero(2 * d, 2 * d);
    aug.topLeftCorner(d, d) = signal.A;
    aug.topRightCorner(d, d) = Matrix::Identity(d, d);
    const Matrix full = mat_exp(aug * tau);
    tr.propagator = full.topLeftCorner(d, d);
    tr.drift_integral = full.topRightCorner(d, d);

    // Van Loan: exp([[-A, BB^T], [0, A^T]] tau) = [[F11, F12], [0, F22]],
    // covariance = F22^T F12
    Matrix vl = Matrix::Zero(2 * d, 2 * d);
    vl.topLeftCorner(d, d) = -signal.A;
    vl.topRightCorner(d, d) = signal.B * signal.B.transpose();
    vl.bottomRightCorner(d, d) = signal.A.transpose();
    const Matrix f = mat_exp(vl * tau);
    tr.covariance = f.bottomRightCorner(d, d).transpose() * f.topRightCorner(d, d);
    tr.covariance = 0.5 * (tr.covariance + tr.covariance.transpose());
    return tr;
}

std::vector<double> discount_integral(const RiccatiSolution& r) {
    require_grid(r);
    const auto& lg = r.logG;
    return tail_integrals<double>(
        r.grid.steps(), r.grid.dt(), 0.0,
        [&](std::size_t i, std::size_t j) { return std::exp(lg[j] - lg[i]); },
        [&](std::size_t i, std::size_t k, double tail) { return std::exp(lg[i + k] - lg[i]) * tail; });
}

std::vector<Matrix> compute_phi1(const RiccatiSolution& r, const SignalModel& signal) {
    require_grid(r);
    const auto d = signal.A.rows();
    const StepOperators ops(signal.A, r.grid.dt());
    const auto& lg = r.logG;
    auto offset = [](std::size_t i, std::size_t j) {
        return static_cast<int>(j) - static_cast<int>(i);
    };
    return tail_integrals<Matrix>(
        r.grid.steps(), r.grid.dt(), Matrix::Zero(d, d),
        [&](std::size_t i, std::size_t j) -> Matrix {
            return std::exp(lg[j] - lg[i]) * ops.e(offset(i, j));
        },
        [&](std::size_t i, std::size_t k, const Matrix& tail) -> Matrix {
            return std::exp(lg[i + k] - lg[i]) * (tail * ops.e(static_cast<int>(k)));
        });
}

std::vector<Matrix> compute_phi0(const RiccatiSolution& r, const SignalModel& signal,
                                 const std::vector<Matrix>& phi1, Phi0Method method) {
    require_grid(r);
    const auto d = signal.A.rows();
    const std::vector<double> psi = discount_integral(r);

    if (method == Phi0Method::Auto) {
        Eigen::JacobiSVD<Matrix> svd(signal.A);
        method = svd.singularValues().minCoeff() > 1e-8 ? Phi0Method::Shortcut : Phi0Method::Nested;
    }

    if (method == Phi0Method::Shortcut) {
        // int_t^s e^{A(s-u)} du = (e^{A(s-t)} - I) A^{-1}, so Phi0 = (Phi1 - psi I) A^{-1}
        const Matrix a_inv = signal.A.inverse();
        const Matrix I = Matrix::Identity(d, d);
        std::vector<Matrix> out(phi1.size());
        for (std::size_t i = 0; i < phi1.size(); ++i) out[i] = (phi1[i] - psi[i] * I) * a_inv;
        return out;
    }

    // K(s - t_i) = K(k dt) + e^{A k dt} K(s - t_{i+k}), no inverse of A needed
    const StepOperators ops(signal.A, r.grid.dt());
    const auto& lg = r.logG;
    auto offset = [](std::size_t i, std::size_t j) {
        return static_cast<int>(j) - static_cast<int>(i);
    };
    return tail_integrals<Matrix>(
        r.grid.steps(), r.grid.dt(), Matrix::Zero(d, d),
        [&](std::size_t i, std::size_t j) -> Matrix {
            return std::exp(lg[j] - lg[i]) * ops.k_int(offset(i, j));
        },
        [&](std::size_t i, std::size_t k, const Matrix& tail) -> Matrix {
            const int kk = static_cast<int>(k);
            return std::exp(lg[i + k] - lg[i]) * (ops.k_int(kk) * psi[i + k] + ops.e(kk) * tail);
        });
}

std::vector<Matrix> compute_phi2(const RiccatiSolution& r, const std::vector<Matrix>& phi1) {
    require_grid(r);
    const auto d = phi1.front().rows();
    const auto& lg = r.logG;
    return tail_integrals<Matrix>(
        r.grid.steps(), r.grid.dt(), Matrix::Zero(d, d),
        [&](std::size_t i, std::size_t j) -> Matrix {
            return (std::exp(lg[j] - lg[i]) * r.chi_over_kappa(j)) * phi1[j];
        },
        [&](std::size_t i, std::size_t k, const Matrix& tail) -> Matrix {
            return std::exp(lg[i + k] - lg[i]) * tail;
        });
}

Vector compute_V_eps(const ImpactModel& impact, const SignalModel& signal) {
    if (impact.eta_kind() != EtaKind::Identity)
        throw Unsupported("V_eps needs the Poisson solution for eta; only identity eta is supported");
    return std::sqrt(2.0 * impact.eps()) * impact.beta() * signal.rho;
}

void compute_C1(StrategyTables& tables) {
    const std::size_t n = tables.Phi2.size();
    tables.C1.resize(n);
    tables.correction.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector weights = tables.Phi2[i].transpose() * tables.gamma;  // gamma . Phi2 column i
        tables.C1[i] = tables.signal.B.transpose() * weights / (2.0 * tables.riccati.kappa[i]);
        if (tables.V_eps) tables.correction[i] = tables.V_eps->dot(tables.C1[i]);
    }
}

StrategyTables build_tables(const ExecutionProblem& problem, const ImpactModel& impact,
                            const SignalModel& signal, const TimeGrid& grid) {
    signal.validate();
    if (problem.gamma.size() != signal.A.rows())
        throw InvalidParameter("gamma and signal dimensions differ");

    StrategyTables t{grid, solve_riccati(problem, impact, grid), impact, signal, problem.gamma,
                     problem.b, {}, {}, {}, {}, std::nullopt, {}, {}, {}};
    t.Phi1 = compute_phi1(t.riccati, signal);
    t.Phi0 = compute_phi0(t.riccati, signal, t.Phi1);
    t.Phi2 = compute_phi2(t.riccati, t.Phi1);
    if (impact.eta_kind() == EtaKind::Identity) t.V_eps = compute_V_eps(impact, signal);
    compute_C1(t);

    const std::size_t n = grid.size();
    t.h0_coeffA.resize(n);
    t.h0_const.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.h0_coeffA[i] = t.Phi1[i].transpose() * t.gamma;
        t.h0_const[i] = t.gamma.dot(t.Phi0[i] * signal.mu_bar);
    }
    return t;
}

double h1_zero_order(const StrategyTables& tables, double t, const Vector& mu) {
    if (mu.size() != tables.gamma.size()) throw std::invalid_argument("h1_zero_order: dimension mismatch");
    const auto [i, w] = tables.grid.locate(t);
    const double lo = tables.h0_coeffA[i].dot(mu) + tables.h0_const[i];
    const double hi = tables.h0_coeffA[i + 1].dot(mu) + tables.h0_const[i + 1];
    return (1.0 - w) * lo + w * hi;
}

namespace {

double h0_at_node(const StrategyTables& tables, std::size_t i, const Vector& mu) {
    const std::size_t n = tables.grid.steps();
    if (i == n) return 0.0;
    const OuTransition step = ou_transition(tables.signal, tables.grid.dt());
    const auto d = tables.signal.A.rows();

    Matrix E = Matrix::Identity(d, d);
    Matrix K = Matrix::Zero(d, d);
    Matrix S = Matrix::Zero(d, d);
    std::vector<double> values(n - i + 1);
    for (std::size_t j = i; j <= n; ++j) {
        const Vector mean = E * mu + K * tables.signal.mu_bar;
        const Vector& a = tables.h0_coeffA[j];
        const double m = a.dot(mean) + tables.h0_const[j];
        values[j - i] = (m * m + a.dot(S * a)) / (4.0 * tables.riccati.kappa[j]);
        // advance the conditional moments by one step
        K = step.drift_integral + step.propagator * K;
        S = step.covariance + step.propagator * S * step.propagator.transpose();
        E = step.propagator * E;
    }
    return simpson_uniform(values, tables.grid.dt());
}

}  // namespace

double h0_zero_order(const StrategyTables& tables, double t, const Vector& mu) {
    if (mu.size() != tables.gamma.size()) throw std::invalid_argument("h0_zero_order: dimension mismatch");
    const auto [i, w] = tables.grid.locate(t);
    if (w == 0.0) return h0_at_node(tables, i, mu);
    if (w == 1.0) return h0_at_node(tables, i + 1, mu);
    return (1.0 - w) * h0_at_node(tables, i, mu) + w * h0_at_node(tables, i + 1, mu);
}

}  // namespace fmrexec
