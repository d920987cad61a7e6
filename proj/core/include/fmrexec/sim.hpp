#pragma once

/**
 * @file sim.hpp
 * @brief Monte Carlo engine for the controlled price / cash / inventory system.
 *
 * Each path owns a generator seeded from (seed, path index), so batches run
 * with the same seed under different policies share their Brownian
 * increments, and results do not depend on the number of workers.
 */

#include "fmrexec/model.hpp"
#include "fmrexec/strategy.hpp"

#include <cstdint>
#include <vector>

namespace fmrexec {

struct SimConfig {
    std::size_t n_paths = 1;
    std::size_t n_steps = 23400;
    std::uint64_t seed = 0;
    Policy policy;
    std::size_t store_stride = 0;  ///< 0: terminal records only
    std::size_t workers = 1;       ///< 0: hardware concurrency
    double y0 = 0.0;
    bool freeze_factor = false;    ///< hold Y at y0 (deterministic-impact reference)
};

struct PathTerminal {
    double X = 0.0;
    double Q = 0.0;
    double S = 0.0;
    double cost = 0.0;          ///< X_T + Q_T S_T
    double reduced_cost = 0.0;  ///< x + qS - sum k nu^2 dt + sum Q dS
};

/// Stride-subsampled trajectory; mu is stored row-major, dim() entries per row.
struct PathTrajectory {
    std::vector<double> t, S, X, Q, nu, Y;
    std::vector<double> mu;
};

struct SimBatch {
    Policy policy;
    std::uint64_t seed = 0;
    std::size_t n_steps = 0;
    std::size_t store_stride = 0;
    std::size_t dim = 0;
    std::vector<PathTerminal> terminal;
    std::vector<PathTrajectory> paths;  ///< empty unless store_stride > 0

    bool has_trajectories() const { return !paths.empty(); }
};

/// Per-path seed derived from the batch seed (splitmix64 mixing).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_index);

SimBatch simulate(const ExecutionProblem& problem, const ImpactModel& impact,
                  const SignalModel& signal, const StrategyTables& tables, const SimConfig& cfg);

struct Histogram {
    std::vector<double> edges;  ///< size counts.size() + 1
    std::vector<std::size_t> counts;
};

Histogram make_histogram(const std::vector<double>& values, std::size_t bins);

struct SavingsReport {
    std::vector<double> bps;  ///< per path; NaN where the benchmark cost is zero
    std::size_t excluded = 0;
    double median = 0.0;
    Histogram histogram;
};

/// (C - C_bench) / C_bench * 1e4 per path. Batches must be coupled.
SavingsReport savings_bps(const SimBatch& batch, const SimBatch& benchmark, std::size_t bins = 50);

/// Linear-interpolation quantile (type 7); sorts a copy.
double quantile(std::vector<double> values, double level);

struct QuantileCurves {
    std::vector<double> t;
    std::vector<double> levels;
    std::vector<std::vector<double>> values;  ///< values[level][time]
};

/// Pointwise quantiles of Q^batch - Q^benchmark over the stored times.
QuantileCurves inventory_quantiles(const SimBatch& batch, const SimBatch& benchmark,
                                   const std::vector<double>& levels = {0.1, 0.5, 0.9});

}  // namespace fmrexec
