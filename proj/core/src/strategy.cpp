#include "fmrexec/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace fmrexec {

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::AC: return "AC";
        case PolicyKind::TS: return "TS";
        case PolicyKind::FirstOrder: return "FirstOrder";
    }
    return "?";
}

PolicyKind parse_policy(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "ac") return PolicyKind::AC;
    if (s == "ts") return PolicyKind::TS;
    if (s == "firstorder" || s == "first_order" || s == "fo") return PolicyKind::FirstOrder;
    throw std::invalid_argument("unknown policy '" + std::string(name) + "' (AC | TS | FirstOrder)");
}

namespace {

struct NodeView {
    double chi;
    double kappa;
};

NodeView interpolate(const StrategyTables& tables, std::size_t i, double w) {
    const auto& r = tables.riccati;
    return {(1.0 - w) * r.chi[i] + w * r.chi[i + 1], (1.0 - w) * r.kappa[i] + w * r.kappa[i + 1]};
}

}  // namespace

double nu_AC(const StrategyTables& tables, double t, double q) {
    const auto [i, w] = tables.grid.locate(t);
    const auto v = interpolate(tables, i, w);
    return v.chi * q / v.kappa;
}

double nu_TS(const StrategyTables& tables, double t, const Vector& mu, double q) {
    const auto [i, w] = tables.grid.locate(t);
    const auto v = interpolate(tables, i, w);
    return (v.chi * q + 0.5 * h1_zero_order(tables, t, mu)) / v.kappa;
}

double nu_first_order(const StrategyTables& tables, double t, const Vector& mu, double q, double y,
                      bool apply_impact_modulation) {
    if (!tables.V_eps) throw Unsupported("first-order policy needs V_eps (identity eta)");
    const auto [i, w] = tables.grid.locate(t);
    const double corr = (1.0 - w) * tables.correction[i] + w * tables.correction[i + 1];
    const double base = nu_TS(tables, t, mu, q) + corr;
    if (!apply_impact_modulation) return base;
    return (1.0 + tables.impact.eta_clamped(y)) * base;
}

double evaluate(const Policy& policy, const StrategyTables& tables, double t, const Vector& mu,
                double q, double y) {
    switch (policy.kind) {
        case PolicyKind::AC: return nu_AC(tables, t, q);
        case PolicyKind::TS: return nu_TS(tables, t, mu, q);
        case PolicyKind::FirstOrder:
            return nu_first_order(tables, t, mu, q, y, policy.apply_impact_modulation);
    }
    return 0.0;
}

double value_first_order(const StrategyTables& tables, double t, double x, double S,
                         const Vector& mu, double q, ValueTerms terms) {
    const auto [i, w] = tables.grid.locate(t);
    const auto v = interpolate(tables, i, w);
    double value = x + q * S + h1_zero_order(tables, t, mu) * q + (v.chi - 0.5 * tables.b) * q * q;
    if (terms.signal_constant) value += h0_zero_order(tables, t, mu);
    if (terms.first_order && tables.V_eps) {
        // phi1 = 2 kappa C1, so V_eps . phi1 = 2 kappa (V_eps . C1)
        const double corr = (1.0 - w) * tables.correction[i] + w * tables.correction[i + 1];
        value += 2.0 * v.kappa * corr * q;
    }
    return value;
}

}  // namespace fmrexec
