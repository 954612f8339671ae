#pragma once

#include "treeshadow/market.hpp"
#include "treeshadow/primal.hpp"
#include "treeshadow/tree.hpp"

#include <iosfwd>
#include <vector>

namespace treeshadow::dual {

// Node-indexed density pair. z0 is a martingale with z0(root) = 1; z1 is a
// martingale with z1/z0 valued in the bid-ask spread [(1-lambda)S, S].
struct ConsistentPriceSystem {
    std::vector<double> z0;
    std::vector<double> z1;
};

// Max violation of the martingale towers, spread containment and root
// normalisation, each relative to its natural scale.
struct CpsDiagnostics {
    double tower_violation = 0.0;
    double spread_violation = 0.0;
    double root_error = 0.0;
};
CpsDiagnostics check_cps(const tree::ScenarioTree& t, const market::CostSpec& cost,
                         const ConsistentPriceSystem& cps);

struct DualSolution {
    ConsistentPriceSystem cps;
    double y = 1.0;
    double value = 0.0;  // v(y) = sum_leaves p_leaf V(y z0_leaf)
    primal::SolverReport report;
};

// Minimise E[V(y Z0_T)] over consistent price systems (leaf-parameterised;
// interior values are induced by the towers, spread constraints are enforced
// by an augmented Lagrangian with an exact feasibility polish).
DualSolution minimize_dual(const tree::ScenarioTree& t, const market::CostSpec& cost,
                           double y, const primal::UtilitySpec& utility,
                           const primal::SolverConfig& cfg = {},
                           const ConsistentPriceSystem* warm_start = nullptr);

struct DualCurvePoint {
    double y = 0.0;
    double value = 0.0;
    double derivative_formula = 0.0;  // E[Z0_T V'(y Z0_T)]
    double derivative_fd = 0.0;       // central finite differences on the grid
};
std::vector<DualCurvePoint> dual_value_curve(const tree::ScenarioTree& t,
                                             const market::CostSpec& cost,
                                             const primal::UtilitySpec& utility,
                                             std::vector<double> ys,
                                             const primal::SolverConfig& cfg = {});

struct ConjugacyReport {
    double u_x = 0.0;            // primal value
    double v_plus_xy = 0.0;      // min over y of v(y) + x y
    double gap = 0.0;            // |u_x - v_plus_xy|
    double gap_rel = 0.0;
    double y_hat = 0.0;          // argmin of v(y) + x y
    double u_prime_x = 0.0;      // finite-difference u'(x)
    double y_vs_uprime_rel = 0.0;    // |y_hat - u'(x)| / u'(x)
    double marginal_identity_abs = 0.0;  // |x u'(x) - E[g U'(g)]|
    primal::PrimalSolution primal_solution;
    DualSolution dual_solution;  // at y_hat
};

// u(x) vs inf_y { v(y) + x y } with the minimiser located by golden-section
// over log y; also checks y_hat against the finite-difference u'(x) and the
// marginal identity x u'(x) = E[g U'(g)].
ConjugacyReport conjugacy_check(const tree::ScenarioTree& t, const market::CostSpec& cost,
                                const primal::UtilitySpec& utility, double x,
                                const primal::SolverConfig& cfg = {});

// CSV with header node_id,z0,z1.
void export_csv(const ConsistentPriceSystem& cps, std::ostream& os);

}  // namespace treeshadow::dual
