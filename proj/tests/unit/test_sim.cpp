#include <doctest.h>

#include "fmrexec/config.hpp"
#include "fmrexec/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <set>

using namespace fmrexec;

namespace {

const std::filesystem::path kSource = FMREXEC_SOURCE_DIR;

struct Setup {
    RunConfig cfg;
    ImpactModel impact;
    StrategyTables tables;

    explicit Setup(RunConfig c)
        : cfg(std::move(c)),
          impact(cfg.impact),
          tables(build_tables(cfg.problem, impact, cfg.signal, TimeGrid(cfg.problem.T, cfg.grid_steps))) {}

    SimBatch run(Policy policy, std::size_t paths, std::size_t steps, std::size_t stride = 0,
                 std::size_t workers = 1, std::uint64_t seed = 77, bool freeze = false) const {
        SimConfig sc;
        sc.n_paths = paths;
        sc.n_steps = steps;
        sc.seed = seed;
        sc.policy = policy;
        sc.store_stride = stride;
        sc.workers = workers;
        sc.freeze_factor = freeze;
        return simulate(cfg.problem, impact, cfg.signal, tables, sc);
    }
};

RunConfig msft(double phi_multiple = 1.0) {
    auto cfg = load_config(kSource / "configs/msft_like.json");
    cfg.grid_steps = 2000;
    cfg.problem.phi = phi_multiple * cfg.problem.b;
    return cfg;
}

// No trading: no running penalty and a terminal value chi(T) = 0.
RunConfig idle() {
    auto cfg = msft();
    cfg.problem.b = 0.0;
    cfg.problem.phi = 0.0;
    cfg.problem.varphi = 0.0;
    cfg.problem.sigma = 0.0;
    cfg.problem.gamma.setZero();
    return cfg;
}

std::vector<double> costs(const SimBatch& b) {
    std::vector<double> out;
    for (const auto& p : b.terminal) out.push_back(p.cost);
    return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

SimBatch fake_batch(std::vector<double> cost) {
    SimBatch b;
    b.seed = 1;
    b.n_steps = 10;
    for (double c : cost) {
        PathTerminal p;
        p.cost = c;
        b.terminal.push_back(p);
    }
    return b;
}

}  // namespace

TEST_CASE("no trading leaves cash and inventory untouched") {
    const Setup s(idle());
    const auto batch = s.run(Policy::ac(), 20, 500, 50);
    const auto& pr = s.cfg.problem;
    for (const auto& p : batch.terminal) {
        CHECK(p.X == pr.X0);
        CHECK(p.Q == pr.Q0);
        CHECK(p.S == pr.S0);
        CHECK(p.cost == pr.X0 + pr.Q0 * pr.S0);
    }
    for (const auto& path : batch.paths)
        for (double nu : path.nu) CHECK(nu == 0.0);
}

TEST_CASE("cost is cash plus marked inventory") {
    const Setup s(msft(10));
    const auto batch = s.run(Policy::first_order(), 50, 2000);
    for (const auto& p : batch.terminal) CHECK(p.cost == p.X + p.Q * p.S);
}

TEST_CASE("cash-inventory identity holds to first order in the step") {
    auto cfg = msft(10);
    cfg.problem.sigma = 0.0;  // leaves the O(dt) drift term only
    const Setup s(cfg);
    auto gap = [&](std::size_t steps) {
        const auto b = s.run(Policy::first_order(), 20, steps);
        double acc = 0.0;
        for (const auto& p : b.terminal) acc += std::abs(p.cost - p.reduced_cost);
        return acc / b.terminal.size();
    };
    const double g1 = gap(1000), g2 = gap(2000), g3 = gap(4000);
    CHECK(g1 > 0.0);
    CHECK(g1 / g2 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(g2 / g3 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("a slow factor matches the frozen-factor reference") {
    auto cfg = msft(10);
    cfg.impact.eps = 1e6;
    cfg.signal.rho.setZero();
    const Setup s(cfg);
    const auto live = costs(s.run(Policy::ts(), 500, 2000));
    const auto frozen = costs(s.run(Policy::ts(), 500, 2000, 0, 1, 77, true));
    std::vector<double> diff(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) diff[i] = live[i] - frozen[i];
    const double m = mean(diff);
    double var = 0.0;
    for (double d : diff) var += (d - m) * (d - m);
    const double se = std::sqrt(var / (diff.size() - 1) / diff.size());
    const auto live_sd = std::sqrt(std::inner_product(live.begin(), live.end(), live.begin(), 0.0) / live.size() -
                                   mean(live) * mean(live));
    CHECK(std::abs(m) <= 3 * se + 1e-9 * std::abs(mean(live)));
    CHECK(std::abs(m) < 1e-3 * live_sd);
}

TEST_CASE("batches are reproducible and independent of the worker count") {
    const Setup s(msft(5));
    const auto a = s.run(Policy::first_order(), 64, 1000, 100, 1);
    const auto b = s.run(Policy::first_order(), 64, 1000, 100, 4);
    const auto c = s.run(Policy::first_order(), 64, 1000, 100, 0);
    REQUIRE(a.terminal.size() == b.terminal.size());
    CHECK(std::memcmp(a.terminal.data(), b.terminal.data(), a.terminal.size() * sizeof(PathTerminal)) == 0);
    CHECK(std::memcmp(a.terminal.data(), c.terminal.data(), a.terminal.size() * sizeof(PathTerminal)) == 0);
    for (std::size_t p = 0; p < a.paths.size(); ++p) {
        CHECK(a.paths[p].Q == b.paths[p].Q);
        CHECK(a.paths[p].Y == b.paths[p].Y);
        CHECK(a.paths[p].mu == b.paths[p].mu);
    }
    const auto other = s.run(Policy::first_order(), 64, 1000, 0, 1, 78);
    CHECK(other.terminal.front().cost != a.terminal.front().cost);
}

TEST_CASE("path seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(path_seed(20140528, i));
    CHECK(seen.size() == 10000);
    CHECK(path_seed(1, 0) != path_seed(2, 0));
    CHECK(path_seed(1, 5) == path_seed(1, 5));
}

TEST_CASE("stored trajectories") {
    const Setup s(msft());
    const auto b = s.run(Policy::ts(), 3, 1000, 100);
    REQUIRE(b.has_trajectories());
    const auto& p = b.paths.front();
    CHECK(p.t.size() == 11);
    CHECK(p.t.front() == 0.0);
    CHECK(p.t.back() == 1.0);
    CHECK(p.mu.size() == 11 * b.dim);
    CHECK(p.Q.front() == s.cfg.problem.Q0);
    CHECK(p.Q.back() == b.terminal.front().Q);
    CHECK_FALSE(s.run(Policy::ts(), 3, 1000).has_trajectories());
}

TEST_CASE("simulation validates its configuration") {
    const Setup s(msft());
    CHECK_THROWS_AS(s.run(Policy::ac(), 0, 100), InvalidParameter);
    CHECK_THROWS_AS(s.run(Policy::ac(), 1, 1), InvalidParameter);
}

TEST_CASE("savings in basis points") {
    const auto a = fake_batch({100.0, -50.0, 3.0});
    const auto same = savings_bps(a, a);
    for (double v : same.bps) CHECK(v == 0.0);
    CHECK(same.median == 0.0);

    const auto doubled = savings_bps(a, fake_batch({200.0, -100.0, 6.0}));
    for (double v : doubled.bps) CHECK(v == doctest::Approx(-5000.0));

    const auto zero = savings_bps(a, fake_batch({200.0, 0.0, 6.0}));
    CHECK(zero.excluded == 1);
    CHECK(std::isnan(zero.bps[1]));
    CHECK(zero.median == doctest::Approx(-5000.0));

    CHECK_THROWS_AS(savings_bps(a, fake_batch({1.0})), std::invalid_argument);
    auto uncoupled = fake_batch({1.0, 2.0, 3.0});
    uncoupled.seed = 2;
    CHECK_THROWS_AS(savings_bps(a, uncoupled), std::invalid_argument);
}

TEST_CASE("quantiles and histograms") {
    CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.1) == doctest::Approx(1.9));
    CHECK(quantile({7}, 0.9) == 7);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);

    const auto h = make_histogram({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 5);
    CHECK(h.edges.size() == 6);
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() == 9.0);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 10);
}

TEST_CASE("inventory quantiles of a policy against itself vanish") {
    const Setup s(msft());
    const auto b = s.run(Policy::first_order(), 40, 1000, 50);
    const auto q = inventory_quantiles(b, b);
    CHECK(q.levels == std::vector<double>{0.1, 0.5, 0.9});
    for (const auto& curve : q.values)
        for (double v : curve) CHECK(v == 0.0);
    CHECK_THROWS_AS(inventory_quantiles(b, s.run(Policy::ac(), 40, 1000)), std::invalid_argument);
}

TEST_CASE("inventory deviation fans") {
    const Setup s(msft(10));
    const auto fo = s.run(Policy::first_order(), 2000, 2340, 39, 0);
    const auto ts = s.run(Policy::ts(), 2000, 2340, 39, 0);
    const auto ac = s.run(Policy::ac(), 2000, 2340, 39, 0);
    const auto vs_ts = inventory_quantiles(fo, ts);
    const auto vs_ac = inventory_quantiles(fo, ac);
    const double q0 = s.cfg.problem.Q0;

    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(vs_ts.values[l].front() == 0.0);
        CHECK(vs_ac.values[l].front() == 0.0);
    }
    double spread_ts = 0.0, spread_ac = 0.0, median_ts = 0.0;
    for (std::size_t k = 0; k < vs_ts.t.size(); ++k) {
        spread_ts = std::max(spread_ts, vs_ts.values[2][k] - vs_ts.values[0][k]);
        spread_ac = std::max(spread_ac, vs_ac.values[2][k] - vs_ac.values[0][k]);
        median_ts = std::max(median_ts, std::abs(vs_ts.values[1][k]));
    }
    CHECK(median_ts < 0.005 * q0);
    CHECK(spread_ac > spread_ts);

    // the outer quantiles against AC peak shortly after the open and recede
    const auto& upper = vs_ac.values[2];
    const auto peak = std::max_element(upper.begin(), upper.end()) - upper.begin();
    const double t_peak = vs_ac.t[static_cast<std::size_t>(peak)];
    INFO("upper quantile peaks at t = " << t_peak);
    CHECK(t_peak > 0.0);
    CHECK(t_peak < 0.5);
    CHECK(upper.back() < 0.5 * upper[static_cast<std::size_t>(peak)]);
}

TEST_CASE("terminal inventory shrinks with the liquidation penalty") {
    auto cfg = msft();
    std::vector<double> mean_abs_q;
    for (double m : {1.0, 1e3, 1e5}) {
        cfg.problem.varphi = m * cfg.problem.b;
        const Setup s(cfg);
        const auto b = s.run(Policy::ac(), 100, 2000);
        double acc = 0.0;
        for (const auto& p : b.terminal) acc += std::abs(p.Q);
        mean_abs_q.push_back(acc / b.terminal.size());
    }
    CHECK(mean_abs_q[1] <= mean_abs_q[0]);
    CHECK(mean_abs_q[2] <= mean_abs_q[1]);
}
