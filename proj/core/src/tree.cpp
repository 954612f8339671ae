#include "treeshadow/tree.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace treeshadow::tree {

std::vector<int> ScenarioTree::leaves() const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.children.empty()) out.push_back(n.id);
    return out;
}

std::vector<double> ScenarioTree::node_probability() const {
    std::vector<double> p(nodes.size(), 0.0);
    p[0] = 1.0;
    for (const auto& n : nodes)
        if (n.parent >= 0) p[n.id] = p[n.parent] * n.prob;
    return p;
}

void ScenarioTree::validate() const {
    if (nodes.empty()) throw std::invalid_argument("tree: empty");
    if (nodes[0].parent != -1 || nodes[0].time != 0 || nodes[0].prob != 1.0)
        throw std::invalid_argument("tree: node 0 must be the root with probability 1");
    for (const auto& n : nodes) {
        if (n.id != &n - nodes.data()) throw std::invalid_argument("tree: ids must be dense");
        if (n.id > 0 && (n.parent < 0 || n.parent >= n.id))
            throw std::invalid_argument("tree: parents must precede children");
        if (n.id > 0 && n.time != nodes[n.parent].time + 1)
            throw std::invalid_argument("tree: child time must be parent time + 1");
        if (!(n.price > 0.0)) throw std::invalid_argument("tree: prices must be positive");
        if (!n.children.empty()) {
            double s = 0.0;
            for (int c : n.children) s += nodes[c].prob;
            if (std::abs(s - 1.0) > 1e-12)
                throw std::invalid_argument("tree: branch probabilities at node " +
                                            std::to_string(n.id) + " sum to " +
                                            std::to_string(s));
        } else if (n.time != depth) {
            throw std::invalid_argument("tree: leaf " + std::to_string(n.id) +
                                        " not at depth " + std::to_string(depth));
        }
    }
}

ScenarioTree build_tree(const std::vector<int>& parent, const std::vector<double>& prob,
                        const std::vector<double>& price, double horizon) {
    if (parent.size() != prob.size() || parent.size() != price.size())
        throw std::invalid_argument("build_tree: size mismatch");
    ScenarioTree t;
    t.nodes.resize(parent.size());
    int depth = 0;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        Node& n = t.nodes[i];
        n.id = static_cast<int>(i);
        n.parent = parent[i];
        n.prob = prob[i];
        n.price = price[i];
        n.time = (n.parent < 0) ? 0 : t.nodes[n.parent].time + 1;
        if (n.parent >= 0) t.nodes[n.parent].children.push_back(n.id);
        depth = std::max(depth, n.time);
    }
    t.depth = depth;
    t.horizon = horizon;
    t.validate();
    return t;
}

ScenarioTree fbm_quantization_tree(const fbm::FbmSpec& spec, int depth) {
    spec.validate();
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (depth > 14)
        throw std::runtime_error("fbm_quantization_tree: depth " + std::to_string(depth) +
                                 " exceeds the non-recombining guard (node count 2^" +
                                 std::to_string(depth + 1) + " - 1 > 32767)");

    fbm::FbmSpec grid_spec = spec;
    grid_spec.n_steps = depth;
    const auto grid = fbm::covariance(grid_spec);

    // Prediction weights per level; shared by all nodes of that level.
    std::vector<fbm::ConditionalWeights> level(depth);
    level[0].stddev = std::sqrt(grid.cov(0, 0));
    for (int k = 1; k < depth; ++k) level[k] = fbm::conditional_weights(grid, k);

    ScenarioTree t;
    t.depth = depth;
    t.horizon = spec.horizon;
    t.nodes.reserve((std::size_t(2) << depth) - 1);
    std::vector<double> bval;  // realised fBm value per node
    bval.reserve((std::size_t(2) << depth) - 1);

    t.nodes.push_back(Node{0, -1, 0, 1.0, 1.0, {}});
    bval.push_back(0.0);

    for (int done = 0; done < static_cast<int>(t.nodes.size()); ++done) {
        const int k = t.nodes[done].time;
        if (k == depth) continue;
        // conditional mean of B_{t_{k+1}} - B_{t_k} given the realised history
        double mean = 0.0;
        if (k > 0) {
            std::vector<double> hist(k);
            int node = done;
            for (int i = k - 1; i >= 0; --i) {
                hist[i] = bval[node];
                node = t.nodes[node].parent;
            }
            for (int i = 0; i < k; ++i) mean += level[k].weights(i) * hist[i];
        }
        const double sd = level[k].stddev;
        const double tnext = spec.horizon * (k + 1) / depth;
        for (int dir : {+1, -1}) {
            const double b = bval[done] + mean + dir * sd;
            Node child;
            child.id = static_cast<int>(t.nodes.size());
            child.parent = done;
            child.time = k + 1;
            child.prob = 0.5;
            child.price = std::exp(spec.sigma * b + spec.mu * tnext);
            t.nodes[done].children.push_back(child.id);
            t.nodes.push_back(std::move(child));
            bval.push_back(b);
        }
    }
    t.validate();
    return t;
}

ScenarioTree example_divergence_tree(int n_levels, double tail_prob) {
    if (n_levels < 2) throw std::invalid_argument("n_levels must be >= 2");
    if (!(tail_prob > 0.0 && tail_prob < 1.0))
        throw std::invalid_argument("tail_prob must lie in (0,1)");

    const int m = n_levels - 1;  // rising levels with prices 3..n_levels+1
    const int depth = n_levels + 1;
    ScenarioTree t;
    t.depth = depth;
    t.horizon = depth;

    auto add = [&](int parent, double prob, double price) {
        Node n;
        n.id = static_cast<int>(t.nodes.size());
        n.parent = parent;
        n.time = (parent < 0) ? 0 : t.nodes[parent].time + 1;
        n.prob = prob;
        n.price = price;
        if (parent >= 0) t.nodes[parent].children.push_back(n.id);
        t.nodes.push_back(std::move(n));
        return t.nodes.back().id;
    };
    auto chain_to_depth = [&](int from, double price) {
        int cur = from;
        while (t.nodes[cur].time < depth) cur = add(cur, 1.0, price);
    };

    const int root = add(-1, 1.0, 2.0);
    chain_to_depth(add(root, tail_prob, 2.0), 2.0);  // coin: tail, price pinned at 2

    int in_play = add(root, 1.0 - tail_prob, 2.0);   // coin: head, chain starts at 2
    for (int j = 1; j <= m; ++j) {
        // P(reach level j | head) = exp(-j^2), so the up-step probability is
        // exp(-j^2) / exp(-(j-1)^2).
        const double up = std::exp(-(2.0 * j - 1.0));
        if (!(up > 0.0 && up < 1.0))
            throw std::invalid_argument("divergence tree: degenerate branch probability");
        chain_to_depth(add(in_play, 1.0 - up, 1.0), 1.0);  // absorbed at 1
        in_play = add(in_play, up, 2.0 + j);
    }
    chain_to_depth(add(in_play, 1.0, 1.0), 1.0);  // top level must come down
    t.validate();
    return t;
}

std::vector<PathEntry> enumerate_paths(const ScenarioTree& t) {
    std::vector<PathEntry> out;
    std::vector<int> path;
    // iterative DFS keeping the current root..node path
    std::vector<std::pair<int, int>> frames{{t.root(), 0}};
    path.push_back(t.root());
    while (!frames.empty()) {
        auto& [node, next_child] = frames.back();
        if (t.is_leaf(node)) {
            PathEntry e;
            e.leaf = node;
            e.nodes = path;
            double p = 1.0;
            for (int id : path) p *= t.nodes[id].prob;
            e.probability = p;
            out.push_back(std::move(e));
            frames.pop_back();
            path.pop_back();
            continue;
        }
        if (next_child < static_cast<int>(t.nodes[node].children.size())) {
            const int c = t.nodes[node].children[next_child++];
            frames.emplace_back(c, 0);
            path.push_back(c);
        } else {
            frames.pop_back();
            path.pop_back();
        }
    }
    return out;
}

bool cps_feasible(const ScenarioTree& t, double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("lambda must lie in [0,1)");
    const int n = t.size();
    std::vector<double> lo(n), hi(n);
    for (int id = n - 1; id >= 0; --id) {
        const Node& nd = t.nodes[id];
        double a = (1.0 - lambda) * nd.price;
        double b = nd.price;
        if (!nd.children.empty()) {
            double cl = std::numeric_limits<double>::infinity();
            double ch = -cl;
            for (int c : nd.children) {
                cl = std::min(cl, lo[c]);
                ch = std::max(ch, hi[c]);
            }
            a = std::max(a, cl);
            b = std::min(b, ch);
        }
        if (a > b + 1e-14 * nd.price) return false;
        lo[id] = a;
        hi[id] = b;
    }
    return true;
}

void to_json(const ScenarioTree& t, std::ostream& os) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : t.nodes) {
        arr.push_back({{"id", n.id},
                       {"parent", n.parent},
                       {"p", n.prob},
                       {"t", n.time},
                       {"S", n.price}});
    }
    nlohmann::json doc{{"horizon", t.horizon}, {"nodes", arr}};
    os << doc.dump(2) << '\n';
}

ScenarioTree from_json(std::istream& is) {
    nlohmann::json doc = nlohmann::json::parse(is);
    const auto& arr = doc.contains("nodes") ? doc.at("nodes") : doc;
    std::vector<int> parent;
    std::vector<double> prob, price;
    for (const auto& j : arr) {
        if (static_cast<int>(parent.size()) != j.at("id").get<int>())
            throw std::invalid_argument("tree json: nodes must be ordered by id");
        parent.push_back(j.at("parent").get<int>());
        prob.push_back(j.at("p").get<double>());
        price.push_back(j.at("S").get<double>());
    }
    const double horizon =
        doc.contains("horizon") ? doc.at("horizon").get<double>() : 1.0;
    return build_tree(parent, prob, price, horizon);
}

}  // namespace treeshadow::tree
