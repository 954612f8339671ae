#pragma once

#include "treeshadow/dual.hpp"
#include "treeshadow/market.hpp"
#include "treeshadow/primal.hpp"
#include "treeshadow/tree.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace treeshadow::shadow {

enum class Binding { Ask, Bid, Interior, Undefined };

struct ShadowConfig {
    double tol_zero = 1e-12;     // z0 below this leaves s_hat undefined
    double tol_bind_rel = 1e-8;  // binding classification tolerance, times S
};

// Candidate frictionless price s_hat = z1/z0 per node, with its position in
// the bid-ask spread. Nodes with z0 <= tol_zero are flagged Undefined.
struct ShadowPrice {
    std::vector<double> s_hat;
    std::vector<Binding> binding;
    ShadowConfig config;

    bool defined(int node) const { return binding[node] != Binding::Undefined; }
};

ShadowPrice extract_shadow(const dual::DualSolution& dual, const tree::ScenarioTree& t,
                           const market::CostSpec& cost, const ShadowConfig& cfg = {});

// Expected terminal slackness
//   E[ sum (s_hat - (1-lambda)S) dsell + sum (S - s_hat) dbuy ] >= 0,
// which vanishes exactly at a jointly optimal primal/dual pair.
double slackness(const tree::ScenarioTree& t, const market::Strategy& strategy,
                 const ShadowPrice& shadow, const market::CostSpec& cost);

struct CheckResult {
    std::string name;
    double max_violation = 0.0;
    bool passing = false;
    std::vector<int> offending_nodes;  // capped at 50
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool all_passing = false;
    std::vector<int> undefined_nodes;
    double frictionless_value = 0.0;  // re-optimisation under s_hat at lambda = 0
    double frictionless_value_gap = 0.0;
    double max_position_gap = 0.0;
};

// Runs the full battery: spread containment, trade-only-at-binding-nodes
// complementary slackness, frictionless re-optimisation under s_hat
// (value and net positions), and E[A_T] at the solved pair.
VerifyReport verify_shadow(const tree::ScenarioTree& t, const market::CostSpec& cost,
                           const primal::UtilitySpec& utility,
                           const primal::PrimalSolution& primal_sol,
                           const dual::DualSolution& dual_sol,
                           const primal::SolverConfig& cfg = {},
                           const ShadowConfig& shadow_cfg = {});

// max over non-leaf nodes with defined s_hat of
//   | sum_children p_c (z0_c/z0_i)(s_hat_c/s_hat_i) - 1 |,
// the exact martingale property of s_hat under the z0-implied measure.
double girsanov_check(const dual::DualSolution& dual, const ShadowPrice& shadow,
                      const tree::ScenarioTree& t);

struct TouchingStats {
    double frac_paths_touch_ask = 0.0;
    double frac_paths_touch_bid = 0.0;
    double frac_paths_touch_both = 0.0;
    double max_log_spread_excursion = 0.0;  // max of log S - log s_hat
    double log_spread_width = 0.0;          // -log(1-lambda)
    bool containment_ok = false;  // 0 <= log S - log s_hat <= width (+1e-10)
    std::vector<std::vector<double>> difference_process;  // D = log S - log s_hat per path
};

TouchingStats touching_stats(const ShadowPrice& shadow, const tree::ScenarioTree& t,
                             const market::CostSpec& cost);

struct ItoCoefficients {
    std::vector<int> nodes;  // non-leaf binary nodes with sigma_hat above the guard
    std::vector<double> mu_hat, sigma_hat, alpha_hat;
    double max_identity_residual = 0.0;  // max |alpha_hat - mu_hat/sigma_hat|
};

// Discrete drift/volatility of s_hat and the Girsanov kernel alpha_hat of z0,
// per binary node; checks alpha_hat = mu_hat / sigma_hat.
ItoCoefficients ito_coefficients(const ShadowPrice& shadow, const dual::DualSolution& dual,
                                 const tree::ScenarioTree& t);

void to_json(const VerifyReport& report, std::ostream& os);

}  // namespace treeshadow::shadow
