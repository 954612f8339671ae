#pragma once

#include "treeshadow/market.hpp"
#include "treeshadow/tree.hpp"

#include <functional>
#include <string>
#include <vector>

namespace treeshadow::primal {

// Utility on the whole real line with its derivative pair and Legendre
// transform V(y) = sup_x { U(x) - xy }.
struct UtilitySpec {
    std::string name;
    std::function<double(double)> u;
    std::function<double(double)> u_prime;      // > 0, strictly decreasing
    std::function<double(double)> u_prime_inv;  // (0,inf) -> R
    std::function<double(double)> v;            // convex on (0,inf)
    std::function<double(double)> v_prime;
    double u_at_infinity = 0.0;  // also the continuous extension V(0)
};

// U(x) = -exp(-x): U' = exp(-x), (U')^{-1}(y) = -ln y, V(y) = y ln y - y.
UtilitySpec exponential_utility();

struct SolverConfig {
    double tol = 1e-9;      // KKT residual target, relative to the objective scale
    int max_iters = 200000;
    double step0 = 1.0;
};

struct SolverReport {
    int iterations = 0;
    double kkt_residual = 0.0;  // relative
    bool converged = false;
};

struct PrimalSolution {
    market::Strategy strategy;      // includes the liquidating leaf trades
    market::TradePlan plan;         // optimal volumes at non-leaf nodes
    double value = 0.0;             // u(x)
    std::vector<double> terminal_wealth;  // V^liq per leaf, ordered by leaf id
    std::vector<int> leaf_ids;
    double y_hat = 0.0;             // u'(x) estimate (filled by conjugacy_check)
    SolverReport report;
};

// Thrown when the iteration cap is hit before the KKT target; carries the
// best iterate found.
struct SolverError : std::runtime_error {
    SolverError(const std::string& msg, PrimalSolution best_)
        : std::runtime_error(msg), best(std::move(best_)) {}
    PrimalSolution best;
};

// Maximise sum_leaves p_leaf * U(V^liq_leaf) over per-node (buy, sell) >= 0.
// Projected gradient ascent (Barzilai-Borwein steps, non-monotone line search)
// with an active-set Newton polish; overlapping buy/sell volumes at a node are
// cancelled pairwise afterwards.
PrimalSolution maximize_utility(const tree::ScenarioTree& t, const market::CostSpec& cost,
                                const UtilitySpec& utility, const SolverConfig& cfg = {});

// Frictionless variant of the objective evaluated under arbitrary node prices
// (used by shadow verification, where prices = extracted shadow prices).
PrimalSolution maximize_utility_with_prices(const tree::ScenarioTree& t,
                                            const std::vector<double>& node_prices,
                                            const market::CostSpec& cost,
                                            const UtilitySpec& utility,
                                            const SolverConfig& cfg = {});

struct CurvePoint {
    double x = 0.0;
    double value = 0.0;
    double derivative = 0.0;  // central finite differences on the xs grid
};
std::vector<CurvePoint> indirect_utility_curve(const tree::ScenarioTree& t,
                                               const market::CostSpec& cost,
                                               const UtilitySpec& utility,
                                               std::vector<double> xs,
                                               const SolverConfig& cfg = {});

}  // namespace treeshadow::primal
