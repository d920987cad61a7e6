#include "fmrexec/calibrate.hpp"
#include "fmrexec/pdeverify.hpp"
#include "fmrexec/sim.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fmrexec;

namespace {

ExecutionProblem msft_problem(double phi_multiple) {
    ExecutionProblem p;
    p.gamma = Vector::Constant(1, 0.1);
    p.mu0 = Vector::Constant(1, 1.0);
    p.b = 1.4275e-6;
    p.sigma = 0.1;
    p.phi = phi_multiple * p.b;
    p.varphi = 1e3 * p.b;
    p.S0 = 100.0;
    p.Q0 = 1e4;
    return p;
}

ImpactModel msft_impact() {
    ImpactModel::Params ip;
    ip.kappa = {6e-6, -1.4e-5, 1.4e-5, -3e-6};
    return ImpactModel(ip);
}

void BM_MatExp(benchmark::State& state) {
    const auto d = state.range(0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix M(d, d);
    for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = z(rng);
    for (auto _ : state) benchmark::DoNotOptimize(mat_exp(M));
}
BENCHMARK(BM_MatExp)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

void BM_SolveRiccati(benchmark::State& state) {
    const auto p = msft_problem(10);
    const auto impact = msft_impact();
    const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(solve_riccati(p, impact, grid));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SolveRiccati)->Arg(1000)->Arg(10000);

void BM_BuildTables(benchmark::State& state) {
    const auto p = msft_problem(10);
    const auto impact = msft_impact();
    const auto signal = SignalModel::scalar(-10.0, 1.0, 0.0, -0.5);
    const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_tables(p, impact, signal, grid));
}
BENCHMARK(BM_BuildTables)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
    const auto p = msft_problem(10);
    const auto impact = msft_impact();
    const auto signal = SignalModel::scalar(-10.0, 1.0, 0.0, -0.5);
    const auto tables = build_tables(p, impact, signal, TimeGrid(1.0, 10000));
    SimConfig cfg;
    cfg.n_paths = 64;
    cfg.n_steps = 23400;
    cfg.seed = 7;
    cfg.policy = Policy::first_order();
    cfg.workers = 1;
    for (auto _ : state) benchmark::DoNotOptimize(simulate(p, impact, signal, tables, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.n_paths * cfg.n_steps));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_Calibrate(benchmark::State& state) {
    const auto series = synthesize_series(msft_impact(), 23400, 20140528);
    for (auto _ : state) benchmark::DoNotOptimize(calibrate(series, 8));
}
BENCHMARK(BM_Calibrate)->Unit(benchmark::kMillisecond);

void BM_PdeSolve(benchmark::State& state) {
    ExecutionProblem p;
    p.gamma = Vector::Zero(1);
    p.mu0 = Vector::Zero(1);
    p.phi = 1.0;
    p.varphi = 1.0;
    ImpactModel::Params ip;
    ip.kappa = {1.0};
    ip.eta_kind = EtaKind::ScaledTanh;
    ip.eta_scale = 0.5;
    ip.eps = 0.1;
    ip.beta_param = 0.27;
    const ImpactModel impact(ip);
    PdeOptions o;
    o.M = static_cast<std::size_t>(state.range(0));
    const auto grid = make_pde_grid(impact, 1.0, o);
    for (auto _ : state) benchmark::DoNotOptimize(solve_chi_pde(p, impact, grid));
}
BENCHMARK(BM_PdeSolve)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
