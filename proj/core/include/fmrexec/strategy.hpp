#pragma once

#include "fmrexec/signal.hpp"

#include <string>
#include <string_view>

namespace fmrexec {

enum class PolicyKind { AC, TS, FirstOrder };

struct Policy {
    PolicyKind kind = PolicyKind::AC;
    /// FirstOrder only: multiply by (1 + eta(y)).
    bool apply_impact_modulation = true;

    static Policy ac() { return {PolicyKind::AC, true}; }
    static Policy ts() { return {PolicyKind::TS, true}; }
    static Policy first_order(bool modulate = true) { return {PolicyKind::FirstOrder, modulate}; }
};

std::string_view to_string(PolicyKind kind);
/// Accepts AC, TS, FirstOrder (case-insensitive; also "first_order", "FO").
PolicyKind parse_policy(std::string_view name);

/// Almgren-Chriss: chi_0(t) q / kappa(t).
double nu_AC(const StrategyTables& tables, double t, double q);

/// With trading signal: (chi_0(t) q + h0^(1)(t, mu) / 2) / kappa(t).
double nu_TS(const StrategyTables& tables, double t, const Vector& mu, double q);

/// (1 + eta(y)) (nu_TS + V_eps . C1(t)); throws Unsupported without V_eps.
double nu_first_order(const StrategyTables& tables, double t, const Vector& mu, double q, double y,
                      bool apply_impact_modulation = true);

double evaluate(const Policy& policy, const StrategyTables& tables, double t, const Vector& mu,
                double q, double y);

/// Which terms of the first-order value approximation to include.
struct ValueTerms {
    bool signal_constant = true;  ///< h0^(0)(t, mu)
    bool first_order = true;      ///< V_eps . phi1(t) q
};

/**
 * x + qS + h0^(0) + h0^(1) q + (chi_0 - b/2) q^2 + V_eps . phi1 q.
 * The first-order constant term h1^(0) is not included.
 */
double value_first_order(const StrategyTables& tables, double t, double x, double S,
                         const Vector& mu, double q, ValueTerms terms = {});

}  // namespace fmrexec
