#include <doctest.h>

#include "fmrexec/signal.hpp"
#include "fmrexec/strategy.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace fmrexec;

namespace {

struct Scalar {
    double kappa = 1.0, phi = 1.0, varphi = 2.0, b = 0.0;
    double gamma = 1.0, a = -10.0, B = 1.0, mu_bar = 0.0, rho = -0.5;
    std::size_t n = 2000;

    StrategyTables build() const {
        ExecutionProblem p;
        p.gamma = Vector::Constant(1, gamma);
        p.mu0 = Vector::Zero(1);
        p.phi = phi;
        p.varphi = varphi;
        p.b = b;
        return build_tables(p, ImpactModel::constant(kappa), SignalModel::scalar(a, B, mu_bar, rho),
                            TimeGrid(1.0, n));
    }
};

Vector mu1(double v) { return Vector::Constant(1, v); }

Matrix series_exp(const Matrix& M) {
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const MatL m = M.cast<long double>();
    MatL term = MatL::Identity(M.rows(), M.cols());
    MatL sum = term;
    for (int k = 1; k <= 200; ++k) {
        term = term * m / static_cast<long double>(k);
        sum += term;
    }
    return sum.cast<double>();
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("matrix exponential") {
    CHECK(mat_exp(Matrix::Zero(3, 3)) == Matrix::Identity(3, 3));
    const Matrix d = Matrix::Constant(1, 1, -10.0) * 0.1;
    CHECK(mat_exp(d)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix M(3, 3);
        for (Eigen::Index i = 0; i < 9; ++i) M(i) = 1.5 * z(rng);
        const Matrix ref = series_exp(M);
        CHECK(max_abs(mat_exp(M) - ref) < 1e-13 * std::max(1.0, max_abs(ref)));
    }
    CHECK_THROWS_AS(mat_exp(Matrix::Constant(2, 2, 600.0)), std::overflow_error);
    CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("OU transition moments for a scalar signal") {
    const double a = -3.0, b = 0.7, tau = 0.4;
    const auto tr = ou_transition(SignalModel::scalar(a, b, 0.0, 0.0), tau);
    CHECK(tr.propagator(0, 0) == doctest::Approx(std::exp(a * tau)).epsilon(1e-14));
    CHECK(tr.drift_integral(0, 0) == doctest::Approx(std::expm1(a * tau) / a).epsilon(1e-14));
    CHECK(tr.covariance(0, 0) == doctest::Approx(b * b * std::expm1(2 * a * tau) / (2 * a)).epsilon(1e-13));
}

TEST_CASE("tables vanish at the horizon") {
    Scalar s;
    s.n = 200;
    s.mu_bar = 0.3;
    const auto t = s.build();
    const auto N = t.grid.steps();
    CHECK(max_abs(t.Phi1[N]) == 0.0);
    CHECK(max_abs(t.Phi0[N]) == 0.0);
    CHECK(max_abs(t.Phi2[N]) == 0.0);
    CHECK(t.C1[N].norm() == 0.0);
    CHECK(h1_zero_order(t, 1.0, mu1(2.0)) == 0.0);
    CHECK(h0_zero_order(t, 1.0, mu1(2.0)) == 0.0);
}

TEST_CASE("Phi1 in the analytic cases") {
    Scalar s;
    s.phi = 0.0;
    s.varphi = 0.0;  // chi = 0, G = 1
    s.a = 0.0;
    auto t = s.build();
    for (std::size_t i = 0; i <= t.grid.steps(); i += 50)
        CHECK(std::abs(t.Phi1[i](0, 0) - (1.0 - t.grid[i])) < 1e-12);
    // h1 = (T - t) mu when gamma = 1, mu_bar = 0
    CHECK(h1_zero_order(t, 0.25, mu1(3.0)) == doctest::Approx(0.75 * 3.0).epsilon(1e-12));

    s.a = -10.0;
    t = s.build();
    for (std::size_t i = 0; i <= t.grid.steps(); i += 50) {
        const double tau = 1.0 - t.grid[i];
        CHECK(std::abs(t.Phi1[i](0, 0) - (-std::expm1(-10.0 * tau)) / 10.0) < 1e-6);
    }
}

TEST_CASE("Phi tables match quadrature of the analytic weight") {
    Scalar s;
    const auto t = s.build();
    const oracle::ScalarTables ref{{s.kappa, s.phi, s.varphi, s.b}, s.a};
    for (std::size_t i : {0u, 700u, 1500u, 1990u}) {
        const double ti = t.grid[i];
        CHECK(std::abs(t.Phi1[i](0, 0) - ref.phi1(ti)) < 1e-8);
        CHECK(std::abs(t.Phi0[i](0, 0) - ref.phi0(ti)) < 1e-8);
    }
    for (std::size_t i : {0u, 1000u, 1900u}) CHECK(std::abs(t.Phi2[i](0, 0) - ref.phi2(t.grid[i])) < 1e-6);
}

TEST_CASE("Phi0 shortcut agrees with nested quadrature") {
    SUBCASE("scalar") {
        Scalar s;
        const auto t = s.build();
        const auto nested = compute_phi0(t.riccati, t.signal, t.Phi1, Phi0Method::Nested);
        const auto shortcut = compute_phi0(t.riccati, t.signal, t.Phi1, Phi0Method::Shortcut);
        for (std::size_t i = 0; i < nested.size(); ++i) REQUIRE(max_abs(nested[i] - shortcut[i]) < 1e-8);
    }
    SUBCASE("coupled two-factor signal") {
        ExecutionProblem p;
        p.gamma = Vector(2);
        p.gamma << 0.1, -0.05;
        p.mu0 = Vector::Zero(2);
        p.phi = 1e-6;
        p.varphi = 1e-3;
        p.b = 1e-6;
        SignalModel sig;
        sig.A = Matrix(2, 2);
        sig.A << -10, 2, -1, -4;
        sig.B = Matrix::Identity(2, 2);
        sig.mu_bar = Vector::Ones(2);
        sig.rho = Vector::Constant(2, -0.3);
        const auto t = build_tables(p, ImpactModel::constant(4e-6), sig, TimeGrid(1.0, 2000));
        const auto nested = compute_phi0(t.riccati, sig, t.Phi1, Phi0Method::Nested);
        const auto shortcut = compute_phi0(t.riccati, sig, t.Phi1, Phi0Method::Shortcut);
        for (std::size_t i = 0; i < nested.size(); ++i) REQUIRE(max_abs(nested[i] - shortcut[i]) < 1e-8);
    }
}

TEST_CASE("Phi0 does not enter the control when mu_bar = 0") {
    Scalar s;
    s.n = 400;
    auto t = s.build();
    const double before = nu_TS(t, 0.3, mu1(0.8), 1.0);
    for (auto& m : t.Phi0) m.array() += 5.0;
    for (std::size_t i = 0; i < t.Phi0.size(); ++i) t.h0_const[i] = t.gamma.dot(t.Phi0[i] * t.signal.mu_bar);
    CHECK(nu_TS(t, 0.3, mu1(0.8), 1.0) == before);
}

TEST_CASE("Phi2 vanishes with chi") {
    Scalar s;
    s.phi = 0.0;
    s.varphi = 0.0;
    const auto t = s.build();
    for (const auto& m : t.Phi2) REQUIRE(max_abs(m) == 0.0);
    for (const auto& c : t.C1) REQUIRE(c.norm() == 0.0);
}

TEST_CASE("first-order factor loading") {
    const auto impact = ImpactModel::constant(1.0, 0.0035, 0.26984);
    CHECK(compute_V_eps(impact, SignalModel::scalar(-10, 1, 0, 0.0))[0] == 0.0);
    const double v = compute_V_eps(impact, SignalModel::scalar(-10, 1, 0, -0.5))[0];
    CHECK(v == doctest::Approx(-0.0112884).epsilon(1e-5));
    const double v4 = compute_V_eps(impact.with_eps(4 * 0.0035), SignalModel::scalar(-10, 1, 0, -0.5))[0];
    CHECK(v4 == doctest::Approx(2 * v).epsilon(1e-14));

    ImpactModel::Params p;
    p.kappa = {1.0};
    p.eta_kind = EtaKind::ScaledTanh;
    CHECK_THROWS_AS(compute_V_eps(ImpactModel(p), SignalModel::scalar(-10, 1, 0, -0.5)), Unsupported);
}

TEST_CASE("zero loading switches off the signal terms") {
    Scalar s;
    s.gamma = 0.0;
    s.n = 200;
    s.mu_bar = 0.4;
    const auto t = s.build();
    CHECK(h1_zero_order(t, 0.2, mu1(1.5)) == 0.0);
    CHECK(h0_zero_order(t, 0.2, mu1(1.5)) == 0.0);
    for (const auto& c : t.C1) REQUIRE(c.norm() == 0.0);
}

TEST_CASE("signal terms scale with the loading") {
    Scalar s;
    s.n = 400;
    s.mu_bar = 0.4;
    const auto t1 = s.build();
    s.gamma *= 2;
    const auto t2 = s.build();
    const auto mu = mu1(0.7);
    CHECK(h1_zero_order(t2, 0.3, mu) == doctest::Approx(2 * h1_zero_order(t1, 0.3, mu)).epsilon(1e-13));
    CHECK(h0_zero_order(t2, 0.3, mu) == doctest::Approx(4 * h0_zero_order(t1, 0.3, mu)).epsilon(1e-13));
    for (std::size_t i = 0; i < t1.C1.size(); i += 40)
        CHECK(t2.C1[i][0] == doctest::Approx(2 * t1.C1[i][0]).epsilon(1e-13));
}

TEST_CASE("h0 matches a Monte Carlo average over signal paths") {
    Scalar s;
    s.n = 200;
    s.mu_bar = 2.0;
    s.B = 3.0;
    const auto t = s.build();
    const double mu0 = 1.0;
    const double exact = h0_zero_order(t, 0.0, mu1(mu0));

    const auto tr = ou_transition(t.signal, t.grid.dt());
    const double e = tr.propagator(0, 0), k = tr.drift_integral(0, 0) * s.mu_bar;
    const double sd = std::sqrt(tr.covariance(0, 0));
    const double h = t.grid.dt();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int d = 0; d < draws; ++d) {
        double mu = mu0, acc = 0.0;
        for (std::size_t j = 0; j <= s.n; ++j) {
            const double h1 = t.h0_coeffA[j][0] * mu + t.h0_const[j];
            const double w = (j == 0 || j == s.n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            acc += w * h1 * h1 / (4.0 * t.riccati.kappa[j]);
            mu = e * mu + k + sd * z(rng);
        }
        acc *= h / 3.0;
        sum += acc;
        sum2 += acc * acc;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - exact) < 3 * se);
    CHECK(se < 0.05 * std::abs(exact));
}

TEST_CASE("C1 magnitude is not monotone in the running penalty") {
    // larger phi steepens chi/kappa but shortens the discounting window; over a
    // wide range the two effects trade places
    const double b = 1.4275e-6;
    ExecutionProblem p;
    p.gamma = Vector::Constant(1, 0.1);
    p.mu0 = Vector::Zero(1);
    p.b = b;
    p.varphi = 1e3 * b;
    ImpactModel::Params ip;
    ip.kappa = {6e-6, -1.4e-5, 1.4e-5, -3e-6};
    const ImpactModel impact(ip);
    const auto sig = SignalModel::scalar(-10, 1, 0, -0.5);
    std::vector<double> c;
    for (double m : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
        p.phi = m * b;
        c.push_back(std::abs(build_tables(p, impact, sig, TimeGrid(1.0, 2000)).C1[0][0]));
    }
    const auto peak = std::max_element(c.begin(), c.end()) - c.begin();
    CHECK(peak > 0);
    CHECK(peak < static_cast<long>(c.size()) - 1);
}

TEST_CASE("table construction validates its inputs") {
    Scalar s;
    s.n = 3;
    CHECK_THROWS_AS(s.build(), InvalidParameter);
    ExecutionProblem p;
    p.gamma = Vector::Zero(2);
    p.mu0 = Vector::Zero(2);
    p.varphi = 1.0;
    CHECK_THROWS_AS(build_tables(p, ImpactModel::constant(1.0), SignalModel::scalar(-1, 1, 0, 0), TimeGrid(1.0, 10)),
                    InvalidParameter);
}
