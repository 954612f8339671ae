#include "treeshadow/primal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace treeshadow::primal {

UtilitySpec exponential_utility() {
    UtilitySpec u;
    u.name = "exponential";
    u.u = [](double x) { return -std::exp(-x); };
    u.u_prime = [](double x) { return std::exp(-x); };
    u.u_prime_inv = [](double y) { return -std::log(y); };
    u.v = [](double y) { return y > 0.0 ? y * std::log(y) - y : 0.0; };
    u.v_prime = [](double y) { return std::log(y); };
    u.u_at_infinity = 0.0;
    return u;
}

namespace {

// Concave objective F(plan) = sum_l p_l U(V_l) with V_l affine in the volumes
// up to the piecewise-linear leaf close-out. Variables live at non-leaf nodes.
class Objective {
  public:
    Objective(const tree::ScenarioTree& t, const market::CostSpec& cost,
              const UtilitySpec& utility, const std::vector<double>* prices)
        : t_(t), cost_(cost), u_(utility) {
        const int n = t.size();
        price_.resize(n);
        for (int i = 0; i < n; ++i) {
            price_[i] = prices ? (*prices)[i] : t.nodes[i].price;
            if (!(price_[i] > 0.0))
                throw std::invalid_argument("node prices must be strictly positive");
        }
        prob_ = t.node_probability();
        node_var_.assign(n, -1);
        for (int i = 0; i < n; ++i) {
            if (!t.is_leaf(i)) {
                node_var_[i] = static_cast<int>(var_node_.size());
                var_node_.push_back(i);
            } else {
                leaves_.push_back(i);
            }
        }
        cash_.resize(n);
        pos_.resize(n);
        acc_a_.resize(n);
        acc_m_plus_.resize(n);
        acc_m_minus_.resize(n);
        leaf_value_.resize(n);
        leaf_m_plus_.resize(n);
        leaf_m_minus_.resize(n);
    }

    int n_vars() const { return 2 * static_cast<int>(var_node_.size()); }
    const std::vector<int>& var_nodes() const { return var_node_; }
    const std::vector<int>& leaves() const { return leaves_; }
    double price(int node) const { return price_[node]; }
    double prob(int node) const { return prob_[node]; }
    double bid(int node) const { return (1.0 - cost_.lambda) * price_[node]; }

    // v is laid out as [buy_0, sell_0, buy_1, sell_1, ...] over var_nodes.
    double eval(const Eigen::VectorXd& v) {
        const int n = t_.size();
        for (int i = 0; i < n; ++i) {
            const auto& nd = t_.nodes[i];
            const double cash0 = nd.parent < 0 ? cost_.initial_cash : cash_[nd.parent];
            const double pos0 = nd.parent < 0 ? 0.0 : pos_[nd.parent];
            if (node_var_[i] >= 0) {
                const double b = v[2 * node_var_[i]];
                const double s = v[2 * node_var_[i] + 1];
                cash_[i] = cash0 - price_[i] * b + bid(i) * s;
                pos_[i] = pos0 + b - s;
            } else {
                // leaf: close out the inherited position at this node's bid/ask
                leaf_value_[i] = cash0 + std::max(pos0, 0.0) * bid(i) -
                                 std::max(-pos0, 0.0) * price_[i];
                if (pos0 > 0.0) {
                    leaf_m_plus_[i] = leaf_m_minus_[i] = bid(i);
                } else if (pos0 < 0.0) {
                    leaf_m_plus_[i] = leaf_m_minus_[i] = price_[i];
                } else {
                    leaf_m_plus_[i] = bid(i);
                    leaf_m_minus_[i] = price_[i];
                }
                cash_[i] = leaf_value_[i];
                pos_[i] = 0.0;
            }
        }
        double f = 0.0;
        for (int l : leaves_) f += prob_[l] * u_.u(leaf_value_[l]);
        return f;
    }

    // One-sided partial derivatives after eval(); d_plus <= d_minus by concavity.
    void gradient(Eigen::VectorXd& d_plus, Eigen::VectorXd& d_minus) {
        const int n = t_.size();
        for (int i = n - 1; i >= 0; --i) {
            if (t_.is_leaf(i)) {
                const double g = prob_[i] * u_.u_prime(leaf_value_[i]);
                acc_a_[i] = g;
                acc_m_plus_[i] = g * leaf_m_plus_[i];
                acc_m_minus_[i] = g * leaf_m_minus_[i];
            } else {
                double a = 0.0, mp = 0.0, mm = 0.0;
                for (int c : t_.nodes[i].children) {
                    a += acc_a_[c];
                    mp += acc_m_plus_[c];
                    mm += acc_m_minus_[c];
                }
                acc_a_[i] = a;
                acc_m_plus_[i] = mp;
                acc_m_minus_[i] = mm;
            }
        }
        d_plus.resize(n_vars());
        d_minus.resize(n_vars());
        for (std::size_t k = 0; k < var_node_.size(); ++k) {
            const int i = var_node_[k];
            d_plus[2 * k] = acc_m_plus_[i] - price_[i] * acc_a_[i];
            d_minus[2 * k] = acc_m_minus_[i] - price_[i] * acc_a_[i];
            d_plus[2 * k + 1] = bid(i) * acc_a_[i] - acc_m_minus_[i];
            d_minus[2 * k + 1] = bid(i) * acc_a_[i] - acc_m_plus_[i];
        }
    }

    // Dense Hessian restricted to the free variables (after eval()).
    Eigen::MatrixXd hessian(const std::vector<int>& free_idx) {
        const int n = t_.size();
        // subtree sums of p U''(V), p U'' m, p U'' m^2 with m the one-sided
        // close-out marginal (ask side at an exact zero position)
        std::vector<double> t0(n, 0.0), t1(n, 0.0), t2(n, 0.0);
        const double h = 1e-6;
        for (int i = n - 1; i >= 0; --i) {
            if (t_.is_leaf(i)) {
                const double x = leaf_value_[i];
                const double upp =
                    (u_.u_prime(x + h) - u_.u_prime(x - h)) / (2.0 * h);  // U'' < 0
                const double m = leaf_m_plus_[i];
                const double w = prob_[i] * upp;
                t0[i] = w;
                t1[i] = w * m;
                t2[i] = w * m * m;
            } else {
                for (int c : t_.nodes[i].children) {
                    t0[i] += t0[c];
                    t1[i] += t1[c];
                    t2[i] += t2[c];
                }
            }
        }
        std::vector<int> where(n_vars(), -1);
        for (std::size_t r = 0; r < free_idx.size(); ++r) where[free_idx[r]] = static_cast<int>(r);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(free_idx.size(), free_idx.size());
        // k-coefficients: c_buy = (m - S_i), c_sell = -(m - (1-lambda) S_i)
        auto kcoef = [&](int var) {
            const int node = var_node_[var / 2];
            return (var % 2 == 0) ? -price_[node] : -bid(node);
        };
        auto sgn = [&](int var) { return (var % 2 == 0) ? 1.0 : -1.0; };
        for (std::size_t kj = 0; kj < var_node_.size(); ++kj) {
            const int j = var_node_[kj];
            // pair j with every ancestor-or-self variable node i
            for (int i = j; i >= 0; i = t_.nodes[i].parent) {
                if (node_var_[i] < 0) continue;
                const int ki = node_var_[i];
                for (int a = 0; a < 2; ++a) {
                    const int va = 2 * ki + a;
                    if (where[va] < 0) continue;
                    for (int b = 0; b < 2; ++b) {
                        const int vb = 2 * kj + b;
                        if (where[vb] < 0) continue;
                        const double ka = kcoef(va), kb = kcoef(vb);
                        const double val = sgn(va) * sgn(vb) *
                                           (t2[j] + (ka + kb) * t1[j] + ka * kb * t0[j]);
                        H(where[va], where[vb]) += val;
                        if (i != j) H(where[vb], where[va]) += val;
                    }
                }
            }
        }
        return H;
    }

    double leaf_value(int leaf) const { return leaf_value_[leaf]; }

  private:
    const tree::ScenarioTree& t_;
    market::CostSpec cost_;
    const UtilitySpec& u_;
    std::vector<double> price_, prob_;
    std::vector<int> var_node_, node_var_, leaves_;
    std::vector<double> cash_, pos_;
    std::vector<double> acc_a_, acc_m_plus_, acc_m_minus_;
    std::vector<double> leaf_value_, leaf_m_plus_, leaf_m_minus_;
};

double kkt_residual(const Eigen::VectorXd& v, const Eigen::VectorXd& d_plus,
                    const Eigen::VectorXd& d_minus) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] <= 0.0) {
            r = std::max(r, std::max(d_plus[i], 0.0));
        } else {
            r = std::max(r, std::max(d_plus[i], 0.0) + std::max(-d_minus[i], 0.0));
        }
    }
    return r;
}

struct SolveResult {
    Eigen::VectorXd v;
    double value = 0.0;
    SolverReport report;
};

SolveResult solve_concave(Objective& obj, const SolverConfig& cfg, double scale_hint) {
    const int nv = obj.n_vars();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nv);
    double f = obj.eval(v);
    Eigen::VectorXd dp, dm;
    obj.gradient(dp, dm);

    const double fscale = std::max({std::abs(f), scale_hint, 1e-12});
    const double res_scale = 1.0 / fscale;
    auto rel_res = [&](const Eigen::VectorXd& vv, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& m) { return kkt_residual(vv, p, m) * res_scale; };

    SolveResult out;
    double res = rel_res(v, dp, dm);
    int iter = 0;
    std::deque<double> recent{f};
    Eigen::VectorXd v_prev = v, g_prev = dp;
    double alpha = cfg.step0 / std::max(dp.cwiseAbs().maxCoeff(), 1e-30) * fscale;
    int stall = 0;
    double best_res = res;

    auto newton_polish = [&]() {
        for (int round = 0; round < 40 && res > cfg.tol; ++round) {
            std::vector<int> free_idx;
            for (int i = 0; i < nv; ++i)
                if (v[i] > 0.0 || dp[i] > 0.0) free_idx.push_back(i);
            if (free_idx.empty()) break;
            Eigen::MatrixXd h = obj.hessian(free_idx);  // negative semi-definite
            Eigen::MatrixXd a = -h;
            const double ridge = std::max(1e-14 * a.diagonal().maxCoeff(), 1e-300);
            a.diagonal().array() += ridge;
            Eigen::VectorXd g(free_idx.size());
            for (std::size_t r = 0; r < free_idx.size(); ++r) g[r] = dp[free_idx[r]];
            Eigen::VectorXd d = a.ldlt().solve(g);
            if (!d.allFinite()) break;
            double beta = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                Eigen::VectorXd vt = v;
                for (std::size_t r = 0; r < free_idx.size(); ++r)
                    vt[free_idx[r]] = std::max(0.0, v[free_idx[r]] + beta * d[r]);
                const double ft = obj.eval(vt);
                if (std::isfinite(ft) && ft >= f - 1e-16 * std::abs(f)) {
                    // accept only if it helps the residual or the value
                    Eigen::VectorXd tp, tm;
                    obj.gradient(tp, tm);
                    const double rt = rel_res(vt, tp, tm);
                    if (rt < res || ft > f) {
                        v = vt;
                        f = ft;
                        dp = tp;
                        dm = tm;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
                beta *= 0.5;
            }
            if (!accepted) break;
        }
        f = obj.eval(v);  // leave the workspace consistent with v
    };

    while (res > cfg.tol && iter < cfg.max_iters) {
        ++iter;
        // projected ascent step with non-monotone backtracking
        const double f_ref = *std::min_element(recent.begin(), recent.end());
        double a = std::min(std::max(alpha, 1e-18 * fscale), 1e18 * fscale);
        bool accepted = false;
        Eigen::VectorXd vt, gp, gm;
        double ft = 0.0;
        for (int ls = 0; ls < 70; ++ls) {
            vt = (v + a * dp).cwiseMax(0.0);
            ft = obj.eval(vt);
            const double pred = dp.dot(vt - v);
            if (std::isfinite(ft) && ft >= f_ref + 1e-4 * pred && pred >= 0.0) {
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if (!accepted) {
            newton_polish();
            if (res <= cfg.tol) break;
            ++stall;
            if (stall >= 3) break;
            alpha = cfg.step0 * fscale;
            continue;
        }
        obj.gradient(gp, gm);
        const Eigen::VectorXd dv = vt - v;
        const Eigen::VectorXd dg = gp - dp;
        const double dvdg = dv.dot(dg);
        const double dvdv = dv.squaredNorm();
        const double dgdg = dg.squaredNorm();
        // Barzilai-Borwein step for the next iteration (alternate the two rules)
        if (dvdg < 0.0) {
            alpha = (iter % 2 == 0) ? dvdv / (-dvdg) : (-dvdg) / std::max(dgdg, 1e-300);
        } else {
            alpha *= 2.0;
        }
        v = vt;
        f = ft;
        dp = gp;
        dm = gm;
        res = rel_res(v, dp, dm);
        best_res = std::min(best_res, res);
        recent.push_back(f);
        if (recent.size() > 10) recent.pop_front();

        if (iter % 100 == 0 && res > cfg.tol) newton_polish();
    }
    if (res > cfg.tol) newton_polish();

    out.v = v;
    out.value = f;
    out.report.iterations = iter;
    out.report.kkt_residual = res;
    out.report.converged = res <= cfg.tol;
    (void)v_prev;
    (void)g_prev;
    return out;
}

PrimalSolution assemble(const tree::ScenarioTree& t, const market::CostSpec& cost,
                        Objective& obj, const SolveResult& sr) {
    // cancel overlapping buy/sell volumes pairwise (canonical representative)
    market::TradePlan plan = market::TradePlan::zero(t.size());
    const auto& vn = obj.var_nodes();
    for (std::size_t k = 0; k < vn.size(); ++k) {
        double b = sr.v[2 * k], s = sr.v[2 * k + 1];
        const double overlap = std::min(b, s);
        plan.buy[vn[k]] = b - overlap;
        plan.sell[vn[k]] = s - overlap;
    }

    PrimalSolution sol;
    sol.plan = plan;
    sol.strategy = market::self_finance(t, plan, cost, /*close_out_leaves=*/true);
    sol.leaf_ids = t.leaves();
    sol.terminal_wealth.reserve(sol.leaf_ids.size());
    double value = 0.0;
    // re-evaluate through the ledger; must agree with the solver objective
    for (int l : sol.leaf_ids) sol.terminal_wealth.push_back(sol.strategy.phi0[l]);
    (void)value;
    sol.value = sr.value;
    sol.report = sr.report;
    sol.y_hat = std::numeric_limits<double>::quiet_NaN();
    return sol;
}

}  // namespace

PrimalSolution maximize_utility(const tree::ScenarioTree& t, const market::CostSpec& cost,
                                const UtilitySpec& utility, const SolverConfig& cfg) {
    cost.validate();
    Objective obj(t, cost, utility, nullptr);
    SolveResult sr = solve_concave(obj, cfg, std::abs(utility.u(cost.initial_cash)));
    PrimalSolution sol = assemble(t, cost, obj, sr);
    if (!sr.report.converged)
        throw SolverError("primal solver: iteration cap reached with relative KKT residual " +
                              std::to_string(sr.report.kkt_residual),
                          std::move(sol));
    return sol;
}

PrimalSolution maximize_utility_with_prices(const tree::ScenarioTree& t,
                                            const std::vector<double>& node_prices,
                                            const market::CostSpec& cost,
                                            const UtilitySpec& utility,
                                            const SolverConfig& cfg) {
    cost.validate();
    if (static_cast<int>(node_prices.size()) != t.size())
        throw std::invalid_argument("price vector size does not match the tree");
    Objective obj(t, cost, utility, &node_prices);
    SolveResult sr = solve_concave(obj, cfg, std::abs(utility.u(cost.initial_cash)));
    PrimalSolution sol = assemble(t, cost, obj, sr);
    if (!sr.report.converged)
        throw SolverError("primal solver (custom prices): iteration cap reached, residual " +
                              std::to_string(sr.report.kkt_residual),
                          std::move(sol));
    return sol;
}

std::vector<CurvePoint> indirect_utility_curve(const tree::ScenarioTree& t,
                                               const market::CostSpec& cost,
                                               const UtilitySpec& utility,
                                               std::vector<double> xs,
                                               const SolverConfig& cfg) {
    if (!std::is_sorted(xs.begin(), xs.end()))
        throw std::invalid_argument("xs must be sorted");
    std::vector<CurvePoint> out;
    out.reserve(xs.size());
    for (double x : xs) {
        market::CostSpec c = cost;
        c.initial_cash = x;
        const auto sol = maximize_utility(t, c, utility, cfg);
        out.push_back({x, sol.value, 0.0});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.size() < 2) {
            out[i].derivative = std::numeric_limits<double>::quiet_NaN();
        } else if (i == 0) {
            out[i].derivative = (out[1].value - out[0].value) / (xs[1] - xs[0]);
        } else if (i + 1 == out.size()) {
            out[i].derivative =
                (out[i].value - out[i - 1].value) / (xs[i] - xs[i - 1]);
        } else {
            out[i].derivative =
                (out[i + 1].value - out[i - 1].value) / (xs[i + 1] - xs[i - 1]);
        }
    }
    return out;
}

}  // namespace treeshadow::primal
