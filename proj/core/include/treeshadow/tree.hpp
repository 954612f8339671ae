#pragma once

#include "treeshadow/fbm.hpp"

#include <iosfwd>
#include <vector>

namespace treeshadow::tree {

struct Node {
    int id = 0;
    int parent = -1;  // -1 at the root
    int time = 0;     // time index, 0 at the root
    double prob = 1.0;   // branch probability from the parent (1 at the root)
    double price = 1.0;  // S > 0
    std::vector<int> children;
};

// Finite rooted tree of price nodes; all leaves at the same depth. Nodes are
// stored id-ordered with parents before children.
struct ScenarioTree {
    std::vector<Node> nodes;
    int depth = 0;
    double horizon = 1.0;  // real time at depth; dt = horizon / depth

    int root() const { return 0; }
    int size() const { return static_cast<int>(nodes.size()); }
    bool is_leaf(int id) const { return nodes[id].children.empty(); }
    double dt() const { return depth > 0 ? horizon / depth : 1.0; }

    std::vector<int> leaves() const;
    // absolute probability of reaching each node (product of branch probs)
    std::vector<double> node_probability() const;

    void validate() const;  // throws std::invalid_argument on broken invariants
};

// Convenience builder: node i has parent[i] (-1 for the root), branch
// probability prob[i] and price price[i]; children are derived.
ScenarioTree build_tree(const std::vector<int>& parent, const std::vector<double>& prob,
                        const std::vector<double>& price, double horizon = 1.0);

// Binary moment-matched quantisation of a geometric fBm price model. At each
// node the two children carry log-price increments (conditional mean +- std)
// given the node's realised history, probability 1/2 each; S = exp(sigma*B + mu*t).
// Stored non-recombining: the conditioning depends on the whole history.
ScenarioTree fbm_quantization_tree(const fbm::FbmSpec& spec, int depth);

// Finite analogue of a price process that starts at 2 and is absorbed at 1,
// with a coin flip deciding between "stays at 2" (probability tail_prob) and a
// birth-death branch that may rise through levels 3..n_levels+1 before
// absorption. P(reach the j-th rising level | head branch) = exp(-j^2).
ScenarioTree example_divergence_tree(int n_levels, double tail_prob);

struct PathEntry {
    int leaf = 0;
    std::vector<int> nodes;  // root..leaf
    double probability = 0.0;
};
std::vector<PathEntry> enumerate_paths(const ScenarioTree& t);

// True iff a [(1-lambda)S, S]-valued process with the martingale hull property
// exists on the tree (finite-tree consistency check; lambda = 0 reduces to
// classical no-arbitrage of the tree).
bool cps_feasible(const ScenarioTree& t, double lambda);

// JSON array of {id, parent, p, t, S}, ordered by id; parent of the root is -1.
void to_json(const ScenarioTree& t, std::ostream& os);
ScenarioTree from_json(std::istream& is);

}  // namespace treeshadow::tree
