#pragma once

#include "treeshadow/fbm.hpp"
#include "treeshadow/tree.hpp"

#include <iosfwd>
#include <vector>

namespace treeshadow::market {

// Proportional transaction costs: buy at the ask S, sell at the bid (1-lambda)S.
// lambda = 0 is the frictionless special case used by shadow verification.
struct CostSpec {
    double lambda = 0.0;
    double initial_cash = 0.0;  // x

    void validate() const;  // 0 <= lambda < 1
};

// Price model descriptor used by experiment configs.
struct PriceModel {
    enum class Kind { GeometricFbm, CustomSequence };
    Kind kind = Kind::GeometricFbm;
    fbm::FbmSpec fbm;            // S_t = exp(sigma*B_t + mu*t)
    std::vector<double> prices;  // explicit positive prices per time step

    void validate() const;
};

// Per-node trade volumes, both >= 0. Entries for leaves are ignored by the
// ledger (leaf records close out the position instead).
struct TradePlan {
    std::vector<double> buy;
    std::vector<double> sell;

    static TradePlan zero(int n_nodes) { return {std::vector<double>(n_nodes, 0.0),
                                                 std::vector<double>(n_nodes, 0.0)}; }
};

// Node-indexed holdings after the trade at that node, with the cumulative
// buy/sell decomposition along the root path.
struct Strategy {
    std::vector<double> phi0;   // cash
    std::vector<double> phi1;   // shares = buys - sells
    std::vector<double> buys;   // cumulative, non-decreasing along paths
    std::vector<double> sells;  // cumulative, non-decreasing along paths
};

// Propagates the equality form of the self-financing ledger node by node:
//   phi0(child) - phi0(node) = -S_child*dbuy + (1-lambda)*S_child*dsell,
// starting from phi0(root) = x - cost of the time-0 trade. When
// close_out_leaves is set, each leaf additionally liquidates the inherited
// position at its own bid/ask so that phi1(leaf) = 0.
Strategy self_finance(const tree::ScenarioTree& t, const TradePlan& plan,
                      const CostSpec& cost, bool close_out_leaves = false);

// V^liq = phi0 + (phi1)^+ (1-lambda) S - (phi1)^- S at the given node.
double liquidation_value(const tree::ScenarioTree& t, const Strategy& s,
                         const CostSpec& cost, int node);

struct TotalVariation {
    double cash = 0.0;    // sum of |phi0 increments| along the root path
    double shares = 0.0;  // buys + sells at the node
};
TotalVariation total_variation(const tree::ScenarioTree& t, const Strategy& s,
                               const CostSpec& cost, int node);

// True iff V^liq >= -bound at every node. bound = +infinity always passes.
bool is_admissible(const tree::ScenarioTree& t, const Strategy& s, const CostSpec& cost,
                   double bound);

// CSV with header node_id,phi0,phi1,buys,sells.
void export_csv(const Strategy& s, std::ostream& os);

// Ledger along a single price path: trade (buy[k], sell[k]) at prices[k],
// starting from cash x, shares 0. Returns holdings after each step.
struct PathLedger {
    std::vector<double> phi0;
    std::vector<double> phi1;
};
PathLedger self_finance_path(const std::vector<double>& prices,
                             const std::vector<double>& buy,
                             const std::vector<double>& sell, const CostSpec& cost);

}  // namespace treeshadow::market
