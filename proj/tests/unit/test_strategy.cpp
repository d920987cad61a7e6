#include <doctest.h>

#include "fmrexec/config.hpp"
#include "fmrexec/sim.hpp"
#include "fmrexec/strategy.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace fmrexec;

namespace {

const std::filesystem::path kSource = FMREXEC_SOURCE_DIR;

Vector mu1(double v) { return Vector::Constant(1, v); }

StrategyTables scalar_tables(double phi, double varphi, double gamma, double a, double rho, double kappa = 1.0,
                             std::size_t n = 400, double eps = 0.0035) {
    ExecutionProblem p;
    p.gamma = Vector::Constant(1, gamma);
    p.mu0 = Vector::Zero(1);
    p.phi = phi;
    p.varphi = varphi;
    return build_tables(p, ImpactModel::constant(kappa, eps), SignalModel::scalar(a, 1.0, 0.0, rho),
                        TimeGrid(1.0, n));
}

RunConfig msft() {
    auto cfg = load_config(kSource / "configs/msft_like.json");
    cfg.grid_steps = 2000;
    return cfg;
}

StrategyTables msft_tables(const RunConfig& cfg) {
    return build_tables(cfg.problem, ImpactModel(cfg.impact), cfg.signal, TimeGrid(cfg.problem.T, cfg.grid_steps));
}

}  // namespace

TEST_CASE("policy names") {
    CHECK(parse_policy("ac") == PolicyKind::AC);
    CHECK(parse_policy("TS") == PolicyKind::TS);
    CHECK(parse_policy("first_order") == PolicyKind::FirstOrder);
    CHECK(parse_policy("FO") == PolicyKind::FirstOrder);
    CHECK(to_string(PolicyKind::FirstOrder) == "FirstOrder");
    CHECK_THROWS_AS(parse_policy("vwap"), std::invalid_argument);
}

TEST_CASE("Almgren-Chriss rate") {
    // phi = 1, kappa = 1, chi(T) = -1 is the fixed point chi = -1
    const auto t = scalar_tables(1.0, 1.0, 0.0, -10.0, 0.0);
    CHECK(nu_AC(t, 0.4, 0.0) == 0.0);
    CHECK(nu_AC(t, 0.4, 1e4) == doctest::Approx(-1e4).epsilon(1e-12));
}

TEST_CASE("trading speed at the open increases with the running penalty") {
    auto cfg = msft();
    const double b = cfg.problem.b, q0 = cfg.problem.Q0;
    cfg.problem.phi = b;
    const double low = std::abs(nu_AC(msft_tables(cfg), 0.0, q0));
    cfg.problem.phi = 10 * b;
    const double high = std::abs(nu_AC(msft_tables(cfg), 0.0, q0));
    CHECK(high > low);
}

TEST_CASE("signal-adjusted rate") {
    const auto off = scalar_tables(1.0, 3.0, 0.0, -10.0, -0.5);
    CHECK(nu_TS(off, 0.3, mu1(2.0), 50.0) == nu_AC(off, 0.3, 50.0));

    const auto on = scalar_tables(1.0, 3.0, 0.2, -10.0, -0.5);
    CHECK(nu_TS(on, 1.0, mu1(2.0), 50.0) == nu_AC(on, 1.0, 50.0));
    CHECK(nu_TS(on, 0.3, mu1(2.0), 50.0) != nu_AC(on, 0.3, 50.0));

    // chi = 0, A = 0, gamma = 1: h1 = (T - t) mu, so nu = (T - t) mu / 2
    const auto flat = scalar_tables(0.0, 0.0, 1.0, 0.0, 0.0);
    CHECK(nu_TS(flat, 0.2, mu1(3.0), 0.0) == doctest::Approx(0.8 * 3.0 / 2).epsilon(1e-12));
}

TEST_CASE("first-order rate") {
    const auto uncorrelated = scalar_tables(1.0, 3.0, 0.2, -10.0, 0.0);
    CHECK(nu_first_order(uncorrelated, 0.3, mu1(1.0), 7.0, 0.0) == nu_TS(uncorrelated, 0.3, mu1(1.0), 7.0));

    const auto modulation_only = scalar_tables(1.0, 3.0, 0.0, -10.0, 0.0);
    CHECK(nu_first_order(modulation_only, 0.3, mu1(1.0), 7.0, 0.5) ==
          doctest::Approx(1.5 * nu_AC(modulation_only, 0.3, 7.0)).epsilon(1e-14));

    const auto t = scalar_tables(1.0, 3.0, 0.2, -10.0, -0.5);
    const double base = nu_first_order(t, 0.3, mu1(1.0), 7.0, 0.0);
    REQUIRE(base != 0.0);
    for (double y : {-2.0, -0.99, -0.5, 0.3, 1.7}) {
        const double ratio = nu_first_order(t, 0.3, mu1(1.0), 7.0, y) / base;
        CHECK(ratio == doctest::Approx(1.0 + t.impact.eta_clamped(y)).epsilon(1e-14));
    }
    CHECK(nu_first_order(t, 0.3, mu1(1.0), 7.0, 0.4, false) == base);
    CHECK(evaluate(Policy::first_order(), t, 0.3, mu1(1.0), 7.0, 0.4) ==
          nu_first_order(t, 0.3, mu1(1.0), 7.0, 0.4));
}

TEST_CASE("first-order rate needs identity eta") {
    ExecutionProblem p;
    p.gamma = Vector::Constant(1, 0.1);
    p.mu0 = Vector::Zero(1);
    p.phi = 1.0;
    p.varphi = 1.0;
    ImpactModel::Params ip;
    ip.kappa = {1.0};
    ip.eta_kind = EtaKind::ScaledTanh;
    const auto t = build_tables(p, ImpactModel(ip), SignalModel::scalar(-10, 1, 0, -0.5), TimeGrid(1.0, 100));
    CHECK_FALSE(t.V_eps.has_value());
    CHECK_THROWS_AS(nu_first_order(t, 0.1, mu1(0.0), 1.0, 0.0), Unsupported);
    CHECK_NOTHROW(nu_TS(t, 0.1, mu1(0.0), 1.0));
}

TEST_CASE("all policies sell a long position without a signal") {
    auto cfg = msft();
    cfg.problem.gamma.setZero();
    const auto t = msft_tables(cfg);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double time = 0.999 * u(rng), q = 1.0 + 1e4 * u(rng), y = 2 * u(rng) - 1;
        const Vector mu = mu1(4 * u(rng) - 2);
        CHECK(nu_AC(t, time, q) < 0.0);
        CHECK(nu_TS(t, time, mu, q) < 0.0);
        CHECK(evaluate(Policy::first_order(), t, time, mu, q, y) < 0.0);
    }
}

TEST_CASE("signal-adjusted rate is the first-order condition of the quadratic value") {
    const auto cfg = msft();
    const auto t = msft_tables(cfg);
    const ValueTerms zero_order{true, false};
    for (double time : {0.0, 0.31, 0.77, 0.995}) {
        for (double q : {0.0, 3000.0, 1e4}) {
            const Vector mu = mu1(0.6);
            // value is quadratic in q, so the central difference is exact up to rounding
            const double dq = 1.0;
            auto reduced = [&](double qq) { return value_first_order(t, time, 0.0, 0.0, mu, qq, zero_order); };
            const double dh = (reduced(q + dq) - reduced(q - dq)) / (2 * dq);
            const auto [i, w] = t.grid.locate(time);
            const double kappa = (1 - w) * t.riccati.kappa[i] + w * t.riccati.kappa[i + 1];
            const double foc = (t.b * q + dh) / (2 * kappa);
            const double nu = nu_TS(t, time, mu, q);
            CHECK(std::abs(foc - nu) < 1e-10 * std::max(1.0, std::abs(nu)) + 1e-6);
        }
    }
}

TEST_CASE("value reductions") {
    const auto flat = scalar_tables(1.0, 3.0, 0.0, -10.0, -0.5);
    CHECK(value_first_order(flat, 1.0, 12.5, 100.0, mu1(0.3), 0.0) == 12.5);
    const double q = 40.0, S = 100.0, x = -5.0;
    const double expected = x + q * S + (flat.riccati.chi_at(0.4) - 0.0) * q * q;
    CHECK(value_first_order(flat, 0.4, x, S, mu1(0.3), q) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("first-order value correction shrinks like sqrt(eps)") {
    std::vector<double> scaled;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const auto t = scalar_tables(1.0, 3.0, 0.2, -10.0, -0.5, 1.0, 400, eps);
        const double with = value_first_order(t, 0.2, 0.0, 1.0, mu1(0.5), 10.0);
        const double without = value_first_order(t, 0.2, 0.0, 1.0, mu1(0.5), 10.0, {true, false});
        REQUIRE(with != without);
        scaled.push_back((with - without) / std::sqrt(eps));
    }
    for (double s : scaled) CHECK(s == doctest::Approx(scaled.front()).epsilon(1e-10));
}

TEST_CASE("first-order rate traces the signal-adjusted rate on average") {
    // On first-order paths, nu_1 - nu_TS = eta nu_TS + (1 + eta) V_eps . C1 at
    // the path's own state. Its mean is V_eps . C1 plus the signal term
    // gamma Phi1 E[Y mu] / (2 kappa), which is of the same order because rho
    // couples the fast factor to the signal, plus chi Cov(Y, q) / kappa, where
    // integrating nu = (1 + Y) base gives Cov(Y_t, q_t) ~ base beta^2 eps.
    // E[Y_t] = 0 exactly, so Y chi qbar / kappa is a zero-mean control variate.
    auto cfg = msft();
    cfg.problem.phi = 10 * cfg.problem.b;
    const auto t = msft_tables(cfg);
    const ImpactModel impact(cfg.impact);
    SimConfig sc;
    sc.n_paths = 2000;
    sc.n_steps = 2000;
    sc.seed = 4242;
    sc.store_stride = 250;
    sc.workers = 0;
    sc.policy = Policy::first_order();
    const auto fo = simulate(cfg.problem, impact, cfg.signal, t, sc);

    const double a = cfg.signal.A(0, 0), rho = cfg.signal.rho[0], eps = impact.eps(), beta = impact.beta();
    const std::size_t rows = fo.paths.front().t.size();
    const double n = static_cast<double>(fo.paths.size());
    for (std::size_t r = 1; r + 1 < rows; ++r) {
        const double time = fo.paths.front().t[r];
        const auto [i, w] = t.grid.locate(time);
        auto lerp = [&](const auto& v) { return (1 - w) * v[i] + w * v[i + 1]; };
        const double kappa = lerp(t.riccati.kappa), chi = lerp(t.riccati.chi);
        const double gphi1 = (1 - w) * t.h0_coeffA[i][0] + w * t.h0_coeffA[i + 1][0];

        double qbar = 0.0;
        for (const auto& path : fo.paths) qbar += path.Q[r];
        qbar /= n;
        double sum = 0.0, sum2 = 0.0, base = 0.0;
        for (const auto& path : fo.paths) {
            const double ts = nu_TS(t, time, mu1(path.mu[r]), path.Q[r]);
            const double d = path.nu[r] - ts;
            base += ts + lerp(t.correction);
            const double adjusted = d - path.Y[r] * chi * qbar / kappa;
            sum += adjusted;
            sum2 += adjusted * adjusted;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));

        const double rate = 1.0 / eps - a;
        const double cov_y_mu = rho * beta * std::sqrt(2.0 / eps) * (-std::expm1(-rate * time)) / rate;
        const double cov_y_q = base / n * beta * beta * eps * (-std::expm1(-time / eps));
        const double expected = lerp(t.correction) + gphi1 * cov_y_mu / (2 * kappa) + chi * cov_y_q / kappa;
        INFO("t = " << time << " mean = " << mean << " se = " << se << " expected = " << expected);
        CHECK(std::abs(mean - expected) < 2 * se);
    }
}
