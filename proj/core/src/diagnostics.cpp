#include "treeshadow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace treeshadow::diagnostics {

StickinessReport stickiness_estimate(const fbm::PathSet& paths, double delta,
                                     const HittingRule& rule) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (!(rule.barrier >= 0.0) || !std::isfinite(rule.barrier))
        throw std::invalid_argument("hitting barrier must be finite and >= 0");

    const int n = paths.n_paths();
    const int steps = paths.spec.n_steps;
    long hits = 0;
    for (int p = 0; p < n; ++p) {
        // tau = first grid time with |X_t - X_0| >= barrier; X_0 = 0
        int tau = -1;
        for (int k = 0; k < steps; ++k) {
            if (std::abs(paths.values(p, k)) >= rule.barrier) {
                tau = k;
                break;
            }
        }
        if (tau < 0 || tau == steps - 1) continue;  // requires tau < T
        const double x_tau = paths.values(p, tau);
        bool inside = true;
        for (int k = tau; k < steps && inside; ++k)
            inside = std::abs(paths.values(p, k) - x_tau) < delta;
        if (inside) ++hits;
    }

    StickinessReport rep;
    rep.delta = delta;
    rep.tau_rule = "first |X - X_0| >= " + std::to_string(rule.barrier);
    rep.n_paths = n;
    rep.empirical_prob = n > 0 ? static_cast<double>(hits) / n : 0.0;
    rep.standard_error =
        n > 0 ? std::sqrt(rep.empirical_prob * (1.0 - rep.empirical_prob) / n) : 0.0;
    return rep;
}

std::vector<FLambdaPoint> f_lambda_curve(const fbm::FbmSpec& spec, int depth,
                                         std::vector<double> lambdas,
                                         const primal::SolverConfig& cfg) {
    const auto t = tree::fbm_quantization_tree(spec, depth);
    const auto utility = primal::exponential_utility();
    std::vector<FLambdaPoint> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        market::CostSpec cost{lambda, 0.0};
        const auto sol = primal::maximize_utility(t, cost, utility, cfg);
        out.push_back({lambda, -sol.value});
    }
    return out;
}

ArbitrageDemo arbitrage_demo(const fbm::PathSet& paths, double lambda,
                             const MomentumRule& rule, double m_threshold) {
    if (!std::isfinite(rule.position))
        throw std::invalid_argument("momentum rule: position must be bounded");
    market::CostSpec cost{lambda, 0.0};
    cost.validate();

    const int n = paths.n_paths();
    const int steps = paths.spec.n_steps;
    const double sigma = paths.spec.sigma, mu = paths.spec.mu;
    const double horizon = paths.spec.horizon;

    auto summarize = [&](const std::vector<double>& payoff) {
        PayoffSummary s;
        s.m = m_threshold;
        if (payoff.empty()) return s;
        double sum = 0.0, sq = 0.0;
        s.min = payoff[0];
        long geq = 0;
        for (double v : payoff) {
            sum += v;
            sq += v * v;
            s.min = std::min(s.min, v);
            if (v >= m_threshold) ++geq;
        }
        s.mean = sum / payoff.size();
        s.prob_geq_m = static_cast<double>(geq) / payoff.size();
        const double var = std::max(sq / payoff.size() - s.mean * s.mean, 0.0);
        s.se_mean = std::sqrt(var / payoff.size());
        return s;
    };

    std::vector<double> pf(n, 0.0), pc(n, 0.0);
    double traded = 0.0;  // E[S_T * sell volume]
    for (int p = 0; p < n; ++p) {
        // entry checked at t = 0 (B = 0) first, then on the grid
        int entry = (0.0 >= rule.entry_level) ? 0 : -1;
        for (int k = 0; k < steps && entry < 0; ++k)
            if (paths.values(p, k) >= rule.entry_level) entry = k + 1;
        if (entry < 0 || rule.position == 0.0) continue;
        const double t_in = horizon * entry / steps;
        const double b_in = entry == 0 ? 0.0 : paths.values(p, entry - 1);
        const double s_in = std::exp(sigma * b_in + mu * t_in);
        const double s_out = std::exp(sigma * paths.values(p, steps - 1) + mu * horizon);
        pf[p] = rule.position * (s_out - s_in);
        pc[p] = rule.position * ((1.0 - lambda) * s_out - s_in);
        traded += rule.position * s_out;
    }

    ArbitrageDemo demo;
    demo.frictionless = summarize(pf);
    demo.with_cost = summarize(pc);
    demo.mean_gap = demo.frictionless.mean - demo.with_cost.mean;
    demo.expected_cost_bound = n > 0 ? lambda * traded / n : 0.0;
    return demo;
}

std::vector<DivergenceRow> divergence_demo(const std::vector<int>& n_values,
                                           double tail_prob, double lambda, double x,
                                           const primal::SolverConfig& cfg) {
    if (!(lambda > 0.0 && lambda < 0.5))
        throw std::invalid_argument("divergence demo requires lambda in (0, 1/2)");
    const auto utility = primal::exponential_utility();
    std::vector<DivergenceRow> out;
    out.reserve(n_values.size());
    for (int n : n_values) {
        const auto t = tree::example_divergence_tree(n, tail_prob);
        market::CostSpec cost{lambda, x};
        const auto rep = dual::conjugacy_check(t, cost, utility, x, cfg);

        DivergenceRow row;
        row.n = n;
        row.u_n = rep.u_x;
        const auto prob = t.node_probability();
        double tv = 0.0;
        for (int l : t.leaves()) {
            tv += prob[l] * (rep.primal_solution.strategy.buys[l] +
                             rep.primal_solution.strategy.sells[l]);
        }
        row.total_variation = tv;
        // head branch = second child of the root (the coin shows head)
        const int head = t.nodes[t.root()].children.at(1);
        double mass = 0.0;
        for (int l : t.leaves()) {
            // leaf lies under the head child iff its path passes through it
            int cur = l;
            while (t.nodes[cur].parent > 0) cur = t.nodes[cur].parent;
            if (cur == head) mass += prob[l] * rep.dual_solution.cps.z0[l];
        }
        row.head_mass = mass;
        out.push_back(row);
    }
    return out;
}

}  // namespace treeshadow::diagnostics
