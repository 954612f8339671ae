#include "treeshadow/market.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace treeshadow::market {

void CostSpec::validate() const {
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("lambda must lie in [0,1)");
    if (!std::isfinite(initial_cash))
        throw std::invalid_argument("initial_cash must be finite");
}

void PriceModel::validate() const {
    if (kind == Kind::GeometricFbm) {
        fbm.validate();
    } else {
        if (prices.empty()) throw std::invalid_argument("custom price sequence is empty");
        for (double p : prices)
            if (!(p > 0.0)) throw std::invalid_argument("prices must be strictly positive");
    }
}

Strategy self_finance(const tree::ScenarioTree& t, const TradePlan& plan,
                      const CostSpec& cost, bool close_out_leaves) {
    cost.validate();
    const int n = t.size();
    if (static_cast<int>(plan.buy.size()) != n || static_cast<int>(plan.sell.size()) != n)
        throw std::invalid_argument("trade plan size does not match the tree");
    for (int i = 0; i < n; ++i)
        if (plan.buy[i] < 0.0 || plan.sell[i] < 0.0)
            throw std::invalid_argument("trade volumes must be non-negative (node " +
                                        std::to_string(i) + ")");

    Strategy s;
    s.phi0.resize(n);
    s.phi1.resize(n);
    s.buys.resize(n);
    s.sells.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& nd = t.nodes[i];
        double db = plan.buy[i], ds = plan.sell[i];
        double cash0, pos0, b0, s0;
        if (nd.parent < 0) {
            cash0 = cost.initial_cash;
            pos0 = b0 = s0 = 0.0;
        } else {
            cash0 = s.phi0[nd.parent];
            pos0 = s.phi1[nd.parent];
            b0 = s.buys[nd.parent];
            s0 = s.sells[nd.parent];
        }
        if (close_out_leaves && t.is_leaf(i)) {
            // liquidate so that phi1 at the leaf is exactly 0
            const double net = pos0 + db - ds;
            db += std::max(-net, 0.0);
            ds += std::max(net, 0.0);
        }
        s.phi0[i] = cash0 - nd.price * db + (1.0 - cost.lambda) * nd.price * ds;
        s.phi1[i] = pos0 + db - ds;
        s.buys[i] = b0 + db;
        s.sells[i] = s0 + ds;
    }
    return s;
}

double liquidation_value(const tree::ScenarioTree& t, const Strategy& s,
                         const CostSpec& cost, int node) {
    const double phi1 = s.phi1[node];
    const double price = t.nodes[node].price;
    return s.phi0[node] + std::max(phi1, 0.0) * (1.0 - cost.lambda) * price -
           std::max(-phi1, 0.0) * price;
}

TotalVariation total_variation(const tree::ScenarioTree& t, const Strategy& s,
                               const CostSpec& cost, int node) {
    TotalVariation tv;
    tv.shares = s.buys[node] + s.sells[node];
    std::vector<int> path;
    for (int cur = node; cur >= 0; cur = t.nodes[cur].parent) path.push_back(cur);
    double prev = cost.initial_cash;  // phi0 starts at x before the time-0 trade
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        tv.cash += std::abs(s.phi0[*it] - prev);
        prev = s.phi0[*it];
    }
    return tv;
}

bool is_admissible(const tree::ScenarioTree& t, const Strategy& s, const CostSpec& cost,
                   double bound) {
    if (std::isinf(bound)) return true;
    if (bound < 0.0) throw std::invalid_argument("admissibility bound must be >= 0");
    for (int i = 0; i < t.size(); ++i)
        if (liquidation_value(t, s, cost, i) < -bound) return false;
    return true;
}

void export_csv(const Strategy& s, std::ostream& os) {
    os << "node_id,phi0,phi1,buys,sells\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.phi0.size(); ++i)
        os << i << ',' << s.phi0[i] << ',' << s.phi1[i] << ',' << s.buys[i] << ','
           << s.sells[i] << '\n';
}

PathLedger self_finance_path(const std::vector<double>& prices,
                             const std::vector<double>& buy,
                             const std::vector<double>& sell, const CostSpec& cost) {
    cost.validate();
    if (buy.size() != prices.size() || sell.size() != prices.size())
        throw std::invalid_argument("path ledger: size mismatch");
    PathLedger led;
    led.phi0.resize(prices.size());
    led.phi1.resize(prices.size());
    double cash = cost.initial_cash, pos = 0.0;
    for (std::size_t k = 0; k < prices.size(); ++k) {
        if (buy[k] < 0.0 || sell[k] < 0.0)
            throw std::invalid_argument("trade volumes must be non-negative");
        if (!(prices[k] > 0.0)) throw std::invalid_argument("prices must be positive");
        cash += -prices[k] * buy[k] + (1.0 - cost.lambda) * prices[k] * sell[k];
        pos += buy[k] - sell[k];
        led.phi0[k] = cash;
        led.phi1[k] = pos;
    }
    return led;
}

}  // namespace treeshadow::market
