#pragma once

#include "treeshadow/dual.hpp"
#include "treeshadow/fbm.hpp"
#include "treeshadow/market.hpp"
#include "treeshadow/primal.hpp"
#include "treeshadow/tree.hpp"

#include <string>
#include <vector>

namespace treeshadow::diagnostics {

// First time |X_t - X_0| >= barrier; "never" if the barrier is not reached.
struct HittingRule {
    double barrier = 0.4;
};

struct StickinessReport {
    double delta = 0.0;
    std::string tau_rule;
    double empirical_prob = 0.0;
    long n_paths = 0;
    double standard_error = 0.0;  // sqrt(p (1-p) / n)

    // positivity at 3 standard errors, the only assertion the estimate supports
    bool positive_at_3se() const { return empirical_prob > 3.0 * standard_error; }
};

// Frequency of { tau < T and sup_{t in [tau, T]} |X_t - X_tau| < delta } over
// the sampled paths.
StickinessReport stickiness_estimate(const fbm::PathSet& paths, double delta,
                                     const HittingRule& rule);

struct FLambdaPoint {
    double lambda = 0.0;
    double f = 0.0;  // -u^{(lambda)}(0) for exponential utility
};

// f(lambda) on a fixed quantised tree family; exponential utility only.
std::vector<FLambdaPoint> f_lambda_curve(const fbm::FbmSpec& spec, int depth,
                                         std::vector<double> lambdas,
                                         const primal::SolverConfig& cfg = {});

// Enter a fixed long position when B first crosses entry_level, exit at T.
struct MomentumRule {
    double entry_level = 0.5;
    double position = 1.0;  // must be bounded
};

struct PayoffSummary {
    double mean = 0.0;
    double min = 0.0;
    double prob_geq_m = 0.0;  // P(payoff >= m)
    double m = 0.0;
    double se_mean = 0.0;
};

struct ArbitrageDemo {
    PayoffSummary frictionless;  // lambda = 0 channel
    PayoffSummary with_cost;
    double mean_gap = 0.0;            // frictionless mean - cost-channel mean
    double expected_cost_bound = 0.0; // lambda * E[sum S * sell volume]
};

// Evaluates the rule on geometric price paths S = exp(sigma B + mu t) both
// frictionlessly and under cost lambda.
ArbitrageDemo arbitrage_demo(const fbm::PathSet& paths, double lambda,
                             const MomentumRule& rule, double m_threshold);

struct DivergenceRow {
    int n = 0;
    double u_n = 0.0;
    double total_variation = 0.0;  // shares, at the optimum
    double head_mass = 0.0;        // dual z0 mass on the head branch
};

// Solves primal and dual across the divergence tree family.
std::vector<DivergenceRow> divergence_demo(const std::vector<int>& n_values,
                                           double tail_prob, double lambda, double x,
                                           const primal::SolverConfig& cfg = {});

}  // namespace treeshadow::diagnostics
