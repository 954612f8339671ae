#include "treeshadow/shadow.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace treeshadow::shadow {

namespace {

void record(CheckResult& c, int node, double violation) {
    if (violation > c.max_violation) c.max_violation = violation;
    if (violation > 0.0 && c.offending_nodes.size() < 50) c.offending_nodes.push_back(node);
}

}  // namespace

ShadowPrice extract_shadow(const dual::DualSolution& dual, const tree::ScenarioTree& t,
                           const market::CostSpec& cost, const ShadowConfig& cfg) {
    const int n = t.size();
    if (static_cast<int>(dual.cps.z0.size()) != n)
        throw std::invalid_argument("dual solution does not match the tree");
    ShadowPrice sp;
    sp.config = cfg;
    sp.s_hat.assign(n, std::numeric_limits<double>::quiet_NaN());
    sp.binding.assign(n, Binding::Undefined);
    for (int i = 0; i < n; ++i) {
        if (dual.cps.z0[i] <= cfg.tol_zero) continue;  // flagged, never dropped
        const double s = t.nodes[i].price;
        const double sh = dual.cps.z1[i] / dual.cps.z0[i];
        sp.s_hat[i] = sh;
        const double tol = cfg.tol_bind_rel * s;
        if (s - sh <= tol)
            sp.binding[i] = Binding::Ask;
        else if (sh - (1.0 - cost.lambda) * s <= tol)
            sp.binding[i] = Binding::Bid;
        else
            sp.binding[i] = Binding::Interior;
    }
    return sp;
}

double slackness(const tree::ScenarioTree& t, const market::Strategy& strategy,
                 const ShadowPrice& shadow, const market::CostSpec& cost) {
    const auto prob = t.node_probability();
    double total = 0.0;
    for (int i = 0; i < t.size(); ++i) {
        if (!shadow.defined(i)) continue;
        const double db =
            strategy.buys[i] - (t.nodes[i].parent >= 0 ? strategy.buys[t.nodes[i].parent] : 0.0);
        const double ds =
            strategy.sells[i] - (t.nodes[i].parent >= 0 ? strategy.sells[t.nodes[i].parent] : 0.0);
        const double s = t.nodes[i].price;
        total += prob[i] * ((shadow.s_hat[i] - (1.0 - cost.lambda) * s) * ds +
                            (s - shadow.s_hat[i]) * db);
    }
    return total;
}

VerifyReport verify_shadow(const tree::ScenarioTree& t, const market::CostSpec& cost,
                           const primal::UtilitySpec& utility,
                           const primal::PrimalSolution& primal_sol,
                           const dual::DualSolution& dual_sol,
                           const primal::SolverConfig& cfg, const ShadowConfig& shadow_cfg) {
    VerifyReport rep;
    const auto shadow = extract_shadow(dual_sol, t, cost, shadow_cfg);
    for (int i = 0; i < t.size(); ++i)
        if (!shadow.defined(i)) rep.undefined_nodes.push_back(i);

    // (a) spread containment of s_hat, tolerance 1e-10 * S
    CheckResult spread{"spread_containment", 0.0, false, {}};
    for (int i = 0; i < t.size(); ++i) {
        if (!shadow.defined(i)) continue;
        const double s = t.nodes[i].price;
        const double v = std::max(shadow.s_hat[i] - s, (1.0 - cost.lambda) * s - shadow.s_hat[i]);
        record(spread, i, std::max(v - 1e-10 * s, 0.0));
    }
    spread.passing = spread.max_violation <= 0.0;

    // (b) complementary slackness: buys only at the ask, sells only at the bid
    CheckResult comp{"complementary_slackness", 0.0, false, {}};
    const double trade_tol = 1e-8;
    for (int i = 0; i < t.size(); ++i) {
        const int par = t.nodes[i].parent;
        const double db = primal_sol.strategy.buys[i] - (par >= 0 ? primal_sol.strategy.buys[par] : 0.0);
        const double ds = primal_sol.strategy.sells[i] - (par >= 0 ? primal_sol.strategy.sells[par] : 0.0);
        if (t.is_leaf(i)) continue;  // leaf records hold the forced liquidation
        if (!shadow.defined(i)) continue;
        if (db > trade_tol && shadow.binding[i] != Binding::Ask)
            record(comp, i, t.nodes[i].price - shadow.s_hat[i]);
        if (ds > trade_tol && shadow.binding[i] != Binding::Bid)
            record(comp, i, shadow.s_hat[i] - (1.0 - cost.lambda) * t.nodes[i].price);
    }
    comp.passing = comp.offending_nodes.empty();

    // (c) frictionless re-optimisation under s_hat reproduces value and positions
    CheckResult fre{"frictionless_reoptimization", 0.0, false, {}};
    {
        std::vector<double> prices(t.size());
        bool all_defined = true;
        for (int i = 0; i < t.size(); ++i) {
            if (shadow.defined(i)) {
                prices[i] = shadow.s_hat[i];
            } else {
                all_defined = false;
                prices[i] = t.nodes[i].price;  // unreachable under the dual measure
            }
        }
        if (all_defined) {
            market::CostSpec frictionless = cost;
            frictionless.lambda = 0.0;
            const auto re =
                primal::maximize_utility_with_prices(t, prices, frictionless, utility, cfg);
            rep.frictionless_value = re.value;
            rep.frictionless_value_gap = std::abs(re.value - primal_sol.value) /
                                         std::max(std::abs(primal_sol.value), 1e-30);
            for (int i = 0; i < t.size(); ++i) {
                if (t.is_leaf(i)) continue;
                const double gap = std::abs(re.strategy.phi1[i] - primal_sol.strategy.phi1[i]);
                if (gap > rep.max_position_gap) rep.max_position_gap = gap;
                if (gap > 1e-5) record(fre, i, gap);
            }
            fre.max_violation = std::max(rep.frictionless_value_gap, rep.max_position_gap);
            fre.passing = rep.frictionless_value_gap <= 1e-6 && rep.max_position_gap <= 1e-5;
        } else {
            fre.name += "_skipped_undefined_nodes";
            fre.passing = true;
        }
    }

    // (d) expected terminal slackness vanishes at the optimum
    CheckResult slk{"expected_slackness", 0.0, false, {}};
    slk.max_violation = std::abs(slackness(t, primal_sol.strategy, shadow, cost));
    slk.passing = slk.max_violation <= 1e-8;

    rep.checks = {spread, comp, fre, slk};
    rep.all_passing = true;
    for (const auto& c : rep.checks) rep.all_passing = rep.all_passing && c.passing;
    return rep;
}

double girsanov_check(const dual::DualSolution& dual, const ShadowPrice& shadow,
                      const tree::ScenarioTree& t) {
    double worst = 0.0;
    for (int i = 0; i < t.size(); ++i) {
        if (t.is_leaf(i) || !shadow.defined(i)) continue;
        if (dual.cps.z0[i] <= shadow.config.tol_zero) continue;
        double acc = 0.0;
        bool ok = true;
        for (int c : t.nodes[i].children) {
            if (!shadow.defined(c)) {
                // z0 = 0 below: that subtree carries no dual mass
                if (dual.cps.z0[c] > shadow.config.tol_zero) ok = false;
                continue;
            }
            acc += t.nodes[c].prob * (dual.cps.z0[c] / dual.cps.z0[i]) *
                   (shadow.s_hat[c] / shadow.s_hat[i]);
        }
        if (ok) worst = std::max(worst, std::abs(acc - 1.0));
    }
    return worst;
}

TouchingStats touching_stats(const ShadowPrice& shadow, const tree::ScenarioTree& t,
                             const market::CostSpec& cost) {
    TouchingStats st;
    st.log_spread_width = -std::log1p(-cost.lambda);
    st.containment_ok = true;
    const auto paths = tree::enumerate_paths(t);
    st.difference_process.reserve(paths.size());
    for (const auto& pe : paths) {
        bool ask = false, bid = false;
        std::vector<double> d;
        d.reserve(pe.nodes.size());
        for (int id : pe.nodes) {
            if (!shadow.defined(id)) {
                d.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const double s = t.nodes[id].price;
            const double tol = shadow.config.tol_bind_rel * s;
            if (s - shadow.s_hat[id] <= tol) ask = true;
            if (shadow.s_hat[id] - (1.0 - cost.lambda) * s <= tol) bid = true;
            const double excursion = std::log(s) - std::log(shadow.s_hat[id]);
            d.push_back(excursion);
            st.max_log_spread_excursion = std::max(st.max_log_spread_excursion, excursion);
            if (excursion < -1e-10 || excursion > st.log_spread_width + 1e-10)
                st.containment_ok = false;
        }
        if (ask) st.frac_paths_touch_ask += pe.probability;
        if (bid) st.frac_paths_touch_bid += pe.probability;
        if (ask && bid) st.frac_paths_touch_both += pe.probability;
        st.difference_process.push_back(std::move(d));
    }
    return st;
}

ItoCoefficients ito_coefficients(const ShadowPrice& shadow, const dual::DualSolution& dual,
                                 const tree::ScenarioTree& t) {
    ItoCoefficients out;
    const double dt = t.dt();
    for (int i = 0; i < t.size(); ++i) {
        if (t.is_leaf(i)) continue;
        const auto& ch = t.nodes[i].children;
        if (ch.size() != 2)
            throw std::invalid_argument("ito_coefficients requires a binary tree (node " +
                                        std::to_string(i) + " has " +
                                        std::to_string(ch.size()) + " children)");
        if (!shadow.defined(i) || !shadow.defined(ch[0]) || !shadow.defined(ch[1])) continue;
        const double pu = t.nodes[ch[0]].prob, pd = t.nodes[ch[1]].prob;
        const double sh = shadow.s_hat[i];
        const double du = shadow.s_hat[ch[0]] - sh, dd = shadow.s_hat[ch[1]] - sh;
        const double mean = pu * du + pd * dd;
        const double var = pu * du * du + pd * dd * dd - mean * mean;
        const double sigma = std::sqrt(std::max(var, 0.0)) / (sh * std::sqrt(dt));
        if (sigma <= 1e-10) continue;  // 0/0 nodes are skipped by the guard
        const double mu = mean / (sh * dt);
        // two-point noise with mean 0 and variance dt; the density ratio
        // r = z0_child/z0_node determines the unique alpha with r = 1 - alpha dW
        const double dw_up = std::sqrt(dt * pd / pu);
        const double r_up = dual.cps.z0[ch[0]] / dual.cps.z0[i];
        const double alpha = (1.0 - r_up) / dw_up;
        out.nodes.push_back(i);
        out.mu_hat.push_back(mu);
        out.sigma_hat.push_back(sigma);
        out.alpha_hat.push_back(alpha);
        out.max_identity_residual =
            std::max(out.max_identity_residual, std::abs(alpha - mu / sigma));
    }
    return out;
}

void to_json(const VerifyReport& report, std::ostream& os) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name},
                          {"max_violation", c.max_violation},
                          {"passing", c.passing},
                          {"offending_nodes", c.offending_nodes}});
    nlohmann::json doc{{"checks", checks},
                       {"all_passing", report.all_passing},
                       {"undefined_nodes", report.undefined_nodes},
                       {"frictionless_value", report.frictionless_value},
                       {"frictionless_value_gap", report.frictionless_value_gap},
                       {"max_position_gap", report.max_position_gap}};
    os << doc.dump(2) << '\n';
}

}  // namespace treeshadow::shadow
