#include "treeshadow/dual.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace treeshadow::dual {

namespace {

constexpr double kZeroClamp = 1e-14;  // z0 floor during optimisation

struct Towers {
    // interior values induced from the leaves by the martingale towers
    void init(const tree::ScenarioTree& t) {
        n = t.size();
        z0.assign(n, 0.0);
        z1.assign(n, 0.0);
    }
    void propagate(const tree::ScenarioTree& t) {
        for (int i = n - 1; i >= 0; --i) {
            if (t.is_leaf(i)) continue;
            double a = 0.0, b = 0.0;
            for (int c : t.nodes[i].children) {
                a += t.nodes[c].prob * z0[c];
                b += t.nodes[c].prob * z1[c];
            }
            z0[i] = a;
            z1[i] = b;
        }
    }
    int n = 0;
    std::vector<double> z0, z1;
};

// Reachable z1 intervals given fixed z0 (bottom-up); empty intersection means
// the current z0 admits no spread-valued martingale selection.
struct IntervalRecursion {
    std::vector<double> lo, hi;
    bool feasible = true;
    double worst_gap = 0.0;

    void compute(const tree::ScenarioTree& t, const market::CostSpec& cost,
                 const std::vector<double>& z0) {
        const int n = t.size();
        lo.assign(n, 0.0);
        hi.assign(n, 0.0);
        feasible = true;
        worst_gap = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            double a = (1.0 - cost.lambda) * t.nodes[i].price * z0[i];
            double b = t.nodes[i].price * z0[i];
            if (!t.is_leaf(i)) {
                double ca = 0.0, cb = 0.0;
                for (int c : t.nodes[i].children) {
                    ca += t.nodes[c].prob * lo[c];
                    cb += t.nodes[c].prob * hi[c];
                }
                a = std::max(a, ca);
                b = std::min(b, cb);
            }
            if (a > b) {
                const double gap = a - b;
                worst_gap = std::max(worst_gap, gap / std::max(t.nodes[i].price * z0[i], 1e-300));
                const double mid = 0.5 * (a + b);
                a = b = mid;
                feasible = false;
            }
            lo[i] = a;
            hi[i] = b;
        }
    }
};

// Top-down selection of an exactly feasible z1 martingale closest to a target.
void select_z1(const tree::ScenarioTree& t, const IntervalRecursion& iv,
               const std::vector<double>& target, std::vector<double>& z1) {
    const int n = t.size();
    z1.assign(n, 0.0);
    z1[0] = std::clamp(target[0], iv.lo[0], iv.hi[0]);
    for (int i = 0; i < n; ++i) {
        if (t.is_leaf(i)) continue;
        const auto& ch = t.nodes[i].children;
        double sum = 0.0;
        for (int c : ch) {
            z1[c] = std::clamp(target[c], iv.lo[c], iv.hi[c]);
            sum += t.nodes[c].prob * z1[c];
        }
        double r = z1[i] - sum;  // water-fill the residual within the child intervals
        for (int pass = 0; pass < 2 && std::abs(r) > 0.0; ++pass) {
            for (int c : ch) {
                if (r > 0.0) {
                    const double room = iv.hi[c] - z1[c];
                    const double take = std::min(room, r / t.nodes[c].prob);
                    z1[c] += take;
                    r -= take * t.nodes[c].prob;
                } else if (r < 0.0) {
                    const double room = z1[c] - iv.lo[c];
                    const double take = std::min(room, -r / t.nodes[c].prob);
                    z1[c] -= take;
                    r += take * t.nodes[c].prob;
                }
            }
        }
    }
}

struct AlWorkspace {
    std::vector<double> mult_lo, mult_hi;  // spread constraint multipliers
    double mult_eq = 0.0;                  // root normalisation multiplier
    double rho = 1.0;
};

// Augmented Lagrangian value and leaf gradient at the current leaf variables.
class AlProblem {
  public:
    AlProblem(const tree::ScenarioTree& t, const market::CostSpec& cost, double y,
              const primal::UtilitySpec& u)
        : t_(t), cost_(cost), y_(y), u_(u) {
        prob_ = t.node_probability();
        leaves_ = t.leaves();
        leaf_of_.assign(t.size(), -1);
        for (std::size_t k = 0; k < leaves_.size(); ++k) leaf_of_[leaves_[k]] = static_cast<int>(k);
        tw_.init(t);
        d0_.resize(t.size());
        d1_.resize(t.size());
        sens0_.resize(t.size());
        sens1_.resize(t.size());
    }

    const std::vector<int>& leaves() const { return leaves_; }
    int n_leaves() const { return static_cast<int>(leaves_.size()); }

    // objective value only (no AL terms)
    double objective(const Eigen::VectorXd& z0_leaf) const {
        double f = 0.0;
        for (int k = 0; k < n_leaves(); ++k)
            f += prob_[leaves_[k]] * u_.v(y_ * z0_leaf[k]);
        return f;
    }

    double al_value(const Eigen::VectorXd& z0_leaf, const Eigen::VectorXd& z1_leaf,
                    const AlWorkspace& ws) {
        load(z0_leaf, z1_leaf);
        tw_.propagate(t_);
        double val = objective(z0_leaf);
        const double e = tw_.z0[0] - 1.0;
        val += ws.mult_eq * e + 0.5 * ws.rho * e * e;
        for (int i = 0; i < t_.size(); ++i) {
            const double s = t_.nodes[i].price;
            const double g1 = (1.0 - cost_.lambda) * s * tw_.z0[i] - tw_.z1[i];
            const double g2 = tw_.z1[i] - s * tw_.z0[i];
            val += penalty(ws.mult_lo[i], g1, ws.rho);
            val += penalty(ws.mult_hi[i], g2, ws.rho);
        }
        return val;
    }

    void al_gradient(const Eigen::VectorXd& z0_leaf, const Eigen::VectorXd& z1_leaf,
                     const AlWorkspace& ws, Eigen::VectorXd& g0, Eigen::VectorXd& g1v) {
        load(z0_leaf, z1_leaf);
        tw_.propagate(t_);
        for (int i = 0; i < t_.size(); ++i) {
            const double s = t_.nodes[i].price;
            const double c1 = (1.0 - cost_.lambda) * s * tw_.z0[i] - tw_.z1[i];
            const double c2 = tw_.z1[i] - s * tw_.z0[i];
            const double s1 = std::max(0.0, ws.mult_lo[i] + ws.rho * c1);
            const double s2 = std::max(0.0, ws.mult_hi[i] + ws.rho * c2);
            d0_[i] = s1 * (1.0 - cost_.lambda) * s - s2 * s;
            d1_[i] = -s1 + s2;
        }
        d0_[0] += ws.mult_eq + ws.rho * (tw_.z0[0] - 1.0);
        // adjoint sweep: sens_child = d_child + prob_child * sens_parent
        sens0_[0] = d0_[0];
        sens1_[0] = d1_[0];
        for (int i = 1; i < t_.size(); ++i) {
            const auto& nd = t_.nodes[i];
            sens0_[i] = d0_[i] + nd.prob * sens0_[nd.parent];
            sens1_[i] = d1_[i] + nd.prob * sens1_[nd.parent];
        }
        g0.resize(n_leaves());
        g1v.resize(n_leaves());
        for (int k = 0; k < n_leaves(); ++k) {
            const int l = leaves_[k];
            g0[k] = prob_[l] * y_ * u_.v_prime(std::max(y_ * z0_leaf[k], 1e-300)) + sens0_[l];
            g1v[k] = sens1_[l];
        }
    }

    // constraint violations at the current towers
    void violations(const Eigen::VectorXd& z0_leaf, const Eigen::VectorXd& z1_leaf,
                    std::vector<double>& g1, std::vector<double>& g2, double& eq) {
        load(z0_leaf, z1_leaf);
        tw_.propagate(t_);
        g1.resize(t_.size());
        g2.resize(t_.size());
        for (int i = 0; i < t_.size(); ++i) {
            const double s = t_.nodes[i].price;
            g1[i] = (1.0 - cost_.lambda) * s * tw_.z0[i] - tw_.z1[i];
            g2[i] = tw_.z1[i] - s * tw_.z0[i];
        }
        eq = tw_.z0[0] - 1.0;
    }

    const Towers& towers() const { return tw_; }
    const std::vector<double>& prob() const { return prob_; }

  private:
    static double penalty(double mult, double g, double rho) {
        const double m = std::max(0.0, mult + rho * g);
        return (m * m - mult * mult) / (2.0 * rho);
    }
    void load(const Eigen::VectorXd& z0_leaf, const Eigen::VectorXd& z1_leaf) {
        for (int k = 0; k < n_leaves(); ++k) {
            tw_.z0[leaves_[k]] = z0_leaf[k];
            tw_.z1[leaves_[k]] = z1_leaf[k];
        }
    }

    const tree::ScenarioTree& t_;
    market::CostSpec cost_;
    double y_;
    const primal::UtilitySpec& u_;
    std::vector<double> prob_;
    std::vector<int> leaves_, leaf_of_;
    Towers tw_;
    std::vector<double> d0_, d1_, sens0_, sens1_;
};

void check_v_convex(const primal::UtilitySpec& u) {
    // sampled second differences of the Legendre transform
    double prev = 0.0;
    bool first = true;
    for (double y : {0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0}) {
        const double h = 1e-4 * y;
        const double dd = (u.v(y + h) - 2.0 * u.v(y) + u.v(y - h)) / (h * h);
        if (dd < -1e-6) throw std::invalid_argument("utility: V is not convex near y=" +
                                                    std::to_string(y));
        (void)prev;
        (void)first;
    }
}

}  // namespace

CpsDiagnostics check_cps(const tree::ScenarioTree& t, const market::CostSpec& cost,
                         const ConsistentPriceSystem& cps) {
    CpsDiagnostics d;
    for (int i = 0; i < t.size(); ++i) {
        const auto& nd = t.nodes[i];
        if (!t.is_leaf(i)) {
            double a = 0.0, b = 0.0;
            for (int c : nd.children) {
                a += t.nodes[c].prob * cps.z0[c];
                b += t.nodes[c].prob * cps.z1[c];
            }
            const double s0 = std::max(std::abs(cps.z0[i]), 1e-30);
            const double s1 = std::max(std::abs(cps.z1[i]), 1e-30);
            d.tower_violation = std::max(d.tower_violation,
                                         std::max(std::abs(a - cps.z0[i]) / s0,
                                                  std::abs(b - cps.z1[i]) / s1));
        }
        const double scale = std::max(nd.price * cps.z0[i], 1e-30);
        const double lo = (1.0 - cost.lambda) * nd.price * cps.z0[i] - cps.z1[i];
        const double hi = cps.z1[i] - nd.price * cps.z0[i];
        d.spread_violation = std::max(d.spread_violation, std::max(lo, hi) / scale);
    }
    d.root_error = std::abs(cps.z0[0] - 1.0);
    return d;
}

DualSolution minimize_dual(const tree::ScenarioTree& t, const market::CostSpec& cost,
                           double y, const primal::UtilitySpec& utility,
                           const primal::SolverConfig& cfg,
                           const ConsistentPriceSystem* warm_start) {
    cost.validate();
    if (!(y > 0.0)) throw std::invalid_argument("y must be > 0");
    check_v_convex(utility);
    if (!tree::cps_feasible(t, cost.lambda))
        throw std::runtime_error(
            "dual: no consistent price system exists on this tree for lambda=" +
            std::to_string(cost.lambda));

    AlProblem prob(t, cost, y, utility);
    const int nl = prob.n_leaves();
    const auto& leaves = prob.leaves();

    Eigen::VectorXd z0(nl), z1(nl);
    if (warm_start && static_cast<int>(warm_start->z0.size()) == t.size()) {
        for (int k = 0; k < nl; ++k) {
            z0[k] = std::max(warm_start->z0[leaves[k]], kZeroClamp);
            const double lo = (1.0 - cost.lambda) * t.nodes[leaves[k]].price * z0[k];
            const double hi = t.nodes[leaves[k]].price * z0[k];
            z1[k] = std::clamp(warm_start->z1[leaves[k]], lo, hi);
        }
    } else {
        // feasible start: z0 = 1 with a spread-valued martingale selection
        std::vector<double> ones(t.size(), 1.0);
        IntervalRecursion iv;
        iv.compute(t, cost, ones);
        std::vector<double> mid(t.size());
        for (int i = 0; i < t.size(); ++i) mid[i] = 0.5 * (iv.lo[i] + iv.hi[i]);
        std::vector<double> sel;
        select_z1(t, iv, mid, sel);
        for (int k = 0; k < nl; ++k) {
            z0[k] = 1.0;
            z1[k] = sel[leaves[k]];
        }
    }

    AlWorkspace ws;
    ws.mult_lo.assign(t.size(), 0.0);
    ws.mult_hi.assign(t.size(), 0.0);
    ws.rho = 10.0;

    const double vscale = std::max(1.0, std::abs(prob.objective(z0)));
    const double feas_target = 1e-13;
    const double grad_target = cfg.tol * vscale;

    auto project = [&](Eigen::VectorXd& a, Eigen::VectorXd& b) {
        for (int k = 0; k < nl; ++k) {
            a[k] = std::max(a[k], kZeroClamp);
            const double lo = (1.0 - cost.lambda) * t.nodes[leaves[k]].price * a[k];
            const double hi = t.nodes[leaves[k]].price * a[k];
            b[k] = std::clamp(b[k], lo, hi);
        }
    };
    project(z0, z1);

    std::vector<double> g1, g2;
    double eq = 0.0;
    double prev_viol = std::numeric_limits<double>::infinity();
    int total_iters = 0;
    double inner_res = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < 120; ++outer) {
        const double inner_tol =
            std::max(grad_target, std::min(1e-4, prev_viol * 1e-2) * vscale);
        // inner projected BB descent on the augmented Lagrangian
        double f = prob.al_value(z0, z1, ws);
        Eigen::VectorXd gz0, gz1;
        prob.al_gradient(z0, z1, ws, gz0, gz1);
        std::deque<double> recent{f};
        double alpha = 1.0 / std::max(1e-12, std::max(gz0.cwiseAbs().maxCoeff(),
                                                      gz1.cwiseAbs().maxCoeff()));
        const int inner_cap = std::max(200, cfg.max_iters / 100);
        for (int it = 0; it < inner_cap; ++it) {
            ++total_iters;
            // projected-gradient residual
            Eigen::VectorXd p0 = z0 - gz0, p1 = z1 - gz1;
            project(p0, p1);
            inner_res = std::max((p0 - z0).cwiseAbs().maxCoeff(),
                                 (p1 - z1).cwiseAbs().maxCoeff());
            if (inner_res <= inner_tol) break;

            const double f_ref = *std::max_element(recent.begin(), recent.end());
            double a = std::clamp(alpha, 1e-16, 1e16);
            Eigen::VectorXd z0t, z1t;
            double ft = 0.0;
            bool ok = false;
            for (int ls = 0; ls < 60; ++ls) {
                z0t = z0 - a * gz0;
                z1t = z1 - a * gz1;
                project(z0t, z1t);
                ft = prob.al_value(z0t, z1t, ws);
                const double pred = gz0.dot(z0t - z0) + gz1.dot(z1t - z1);
                if (std::isfinite(ft) && ft <= f_ref + 1e-4 * pred && pred <= 0.0) {
                    ok = true;
                    break;
                }
                a *= 0.5;
            }
            if (!ok) break;
            Eigen::VectorXd ng0, ng1;
            prob.al_gradient(z0t, z1t, ws, ng0, ng1);
            const double dvdg = (z0t - z0).dot(ng0 - gz0) + (z1t - z1).dot(ng1 - gz1);
            const double dvdv = (z0t - z0).squaredNorm() + (z1t - z1).squaredNorm();
            const double dgdg = (ng0 - gz0).squaredNorm() + (ng1 - gz1).squaredNorm();
            alpha = (dvdg > 0.0)
                        ? ((it % 2 == 0) ? dvdv / dvdg : dvdg / std::max(dgdg, 1e-300))
                        : a * 2.0;
            z0 = z0t;
            z1 = z1t;
            f = ft;
            gz0 = ng0;
            gz1 = ng1;
            recent.push_back(f);
            if (recent.size() > 8) recent.pop_front();
        }

        prob.violations(z0, z1, g1, g2, eq);
        double viol = std::abs(eq);
        for (int i = 0; i < t.size(); ++i) {
            const double s = std::max(t.nodes[i].price, 1e-30);
            viol = std::max(viol, std::max(g1[i], g2[i]) / s);
        }
        if (viol <= feas_target && inner_res <= grad_target) break;

        for (int i = 0; i < t.size(); ++i) {
            ws.mult_lo[i] = std::max(0.0, ws.mult_lo[i] + ws.rho * g1[i]);
            ws.mult_hi[i] = std::max(0.0, ws.mult_hi[i] + ws.rho * g2[i]);
        }
        ws.mult_eq += ws.rho * eq;
        if (viol > 0.5 * prev_viol) ws.rho = std::min(ws.rho * 5.0, 1e14);
        prev_viol = viol;
    }

    // --- exact feasibility polish -------------------------------------------
    DualSolution sol;
    sol.y = y;
    sol.cps.z0.assign(t.size(), 0.0);
    sol.cps.z1.assign(t.size(), 0.0);

    // normalise the root exactly, rescaling all of (z0, z1) jointly
    Towers tw;
    tw.init(t);
    for (int k = 0; k < nl; ++k) {
        tw.z0[leaves[k]] = z0[k];
        tw.z1[leaves[k]] = z1[k];
    }
    tw.propagate(t);
    const double root = tw.z0[0];
    if (!(root > 0.0)) throw std::runtime_error("dual: degenerate root density");
    for (int k = 0; k < nl; ++k) {
        z0[k] /= root;
        z1[k] /= root;
    }

    // try releasing clamped leaves to exactly zero if that preserves
    // feasibility and does not worsen the objective
    {
        Eigen::VectorXd z0r = z0;
        bool any = false;
        for (int k = 0; k < nl; ++k)
            if (z0r[k] <= 2.0 * kZeroClamp) {
                z0r[k] = 0.0;
                any = true;
            }
        if (any) {
            Towers tz;
            tz.init(t);
            for (int k = 0; k < nl; ++k) tz.z0[leaves[k]] = z0r[k];
            tz.propagate(t);
            IntervalRecursion ivr;
            ivr.compute(t, cost, tz.z0);
            if (ivr.feasible && std::abs(tz.z0[0] - 1.0) < 1e-12 &&
                prob.objective(z0r) <= prob.objective(z0) + 1e-15) {
                z0 = z0r;
            }
        }
    }

    // exact z1 selection via the interval recursion, closest to the iterate
    Towers tz;
    tz.init(t);
    for (int k = 0; k < nl; ++k) tz.z0[leaves[k]] = std::max(z0[k], 0.0);
    tz.propagate(t);
    IntervalRecursion iv;
    iv.compute(t, cost, tz.z0);
    std::vector<double> target(t.size(), 0.0);
    for (int k = 0; k < nl; ++k) target[leaves[k]] = z1[k];
    {
        Towers t1;
        t1.init(t);
        for (int k = 0; k < nl; ++k) t1.z1[leaves[k]] = z1[k];
        t1.propagate(t);
        target = t1.z1;
    }
    std::vector<double> z1sel;
    select_z1(t, iv, target, z1sel);

    sol.cps.z0 = tz.z0;
    sol.cps.z1 = z1sel;
    sol.value = 0.0;
    for (int k = 0; k < nl; ++k)
        sol.value += prob.prob()[leaves[k]] * utility.v(y * sol.cps.z0[leaves[k]]);
    sol.report.iterations = total_iters;
    sol.report.kkt_residual = inner_res / vscale;
    sol.report.converged = inner_res <= grad_target * 10.0;
    return sol;
}

std::vector<DualCurvePoint> dual_value_curve(const tree::ScenarioTree& t,
                                             const market::CostSpec& cost,
                                             const primal::UtilitySpec& utility,
                                             std::vector<double> ys,
                                             const primal::SolverConfig& cfg) {
    if (!std::is_sorted(ys.begin(), ys.end()))
        throw std::invalid_argument("ys must be sorted");
    std::vector<DualCurvePoint> out;
    out.reserve(ys.size());
    ConsistentPriceSystem warm;
    const auto prob = t.node_probability();
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const auto sol =
            minimize_dual(t, cost, ys[i], utility, cfg, warm.z0.empty() ? nullptr : &warm);
        warm = sol.cps;
        DualCurvePoint p;
        p.y = ys[i];
        p.value = sol.value;
        p.derivative_formula = 0.0;
        for (int l : t.leaves())
            p.derivative_formula +=
                prob[l] * sol.cps.z0[l] *
                (sol.cps.z0[l] > 0.0 ? utility.v_prime(ys[i] * sol.cps.z0[l]) : 0.0);
        out.push_back(p);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.size() < 2) {
            out[i].derivative_fd = std::numeric_limits<double>::quiet_NaN();
        } else if (i == 0) {
            out[i].derivative_fd = (out[1].value - out[0].value) / (ys[1] - ys[0]);
        } else if (i + 1 == out.size()) {
            out[i].derivative_fd = (out[i].value - out[i - 1].value) / (ys[i] - ys[i - 1]);
        } else {
            out[i].derivative_fd =
                (out[i + 1].value - out[i - 1].value) / (ys[i + 1] - ys[i - 1]);
        }
    }
    return out;
}

ConjugacyReport conjugacy_check(const tree::ScenarioTree& t, const market::CostSpec& cost,
                                const primal::UtilitySpec& utility, double x,
                                const primal::SolverConfig& cfg) {
    market::CostSpec c = cost;
    c.initial_cash = x;
    ConjugacyReport rep;
    rep.primal_solution = primal::maximize_utility(t, c, utility, cfg);
    rep.u_x = rep.primal_solution.value;

    ConsistentPriceSystem warm;
    auto phi = [&](double y) {
        const auto sol = minimize_dual(t, c, y, utility, cfg,
                                       warm.z0.empty() ? nullptr : &warm);
        warm = sol.cps;
        return std::make_pair(sol.value + x * y, sol);
    };

    // coarse log-scan to bracket the minimiser of v(y) + x y
    const double y_center = std::max(utility.u_prime(x), 1e-12);
    double best_ly = std::log(y_center);
    double best_val = std::numeric_limits<double>::infinity();
    DualSolution best_sol;
    for (int k = -12; k <= 12; ++k) {
        const double ly = std::log(y_center) + 0.5 * k;
        auto [val, sol] = phi(std::exp(ly));
        if (val < best_val) {
            best_val = val;
            best_ly = ly;
            best_sol = sol;
        }
    }
    // golden-section over log y
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = best_ly - 0.5, hi = best_ly + 0.5;
    double l1 = hi - gr * (hi - lo), l2 = lo + gr * (hi - lo);
    auto [f1, s1] = phi(std::exp(l1));
    auto [f2, s2] = phi(std::exp(l2));
    for (int it = 0; it < 80 && (hi - lo) > 1e-11; ++it) {
        if (f1 <= f2) {
            hi = l2;
            l2 = l1;
            f2 = f1;
            s2 = s1;
            l1 = hi - gr * (hi - lo);
            std::tie(f1, s1) = phi(std::exp(l1));
        } else {
            lo = l1;
            l1 = l2;
            f1 = f2;
            s1 = s2;
            l2 = lo + gr * (hi - lo);
            std::tie(f2, s2) = phi(std::exp(l2));
        }
    }
    if (f1 <= f2 && f1 <= best_val) {
        best_val = f1;
        best_sol = s1;
    } else if (f2 < f1 && f2 <= best_val) {
        best_val = f2;
        best_sol = s2;
    }

    rep.v_plus_xy = best_val;
    rep.y_hat = best_sol.y;
    rep.dual_solution = best_sol;
    rep.gap = std::abs(rep.u_x - rep.v_plus_xy);
    rep.gap_rel = rep.gap / std::max(std::abs(rep.u_x), 1e-30);

    // finite-difference u'(x)
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    market::CostSpec cp = c, cm = c;
    cp.initial_cash = x + h;
    cm.initial_cash = x - h;
    const double up = primal::maximize_utility(t, cp, utility, cfg).value;
    const double um = primal::maximize_utility(t, cm, utility, cfg).value;
    rep.u_prime_x = (up - um) / (2.0 * h);
    rep.y_vs_uprime_rel =
        std::abs(rep.y_hat - rep.u_prime_x) / std::max(rep.u_prime_x, 1e-30);

    // marginal identity x u'(x) = E[g U'(g)]
    double egu = 0.0;
    const auto prob = t.node_probability();
    for (std::size_t k = 0; k < rep.primal_solution.leaf_ids.size(); ++k) {
        const double g = rep.primal_solution.terminal_wealth[k];
        egu += prob[rep.primal_solution.leaf_ids[k]] * g * utility.u_prime(g);
    }
    rep.marginal_identity_abs = std::abs(x * rep.u_prime_x - egu);
    rep.primal_solution.y_hat = rep.y_hat;
    return rep;
}

void export_csv(const ConsistentPriceSystem& cps, std::ostream& os) {
    os << "node_id,z0,z1\n" << std::setprecision(17);
    for (std::size_t i = 0; i < cps.z0.size(); ++i)
        os << i << ',' << cps.z0[i] << ',' << cps.z1[i] << '\n';
}

}  // namespace treeshadow::dual
