#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "treexp/common.hpp"

namespace treexp {

namespace detail {

/// Union-find with path compression, for Kruskal and cycle checks.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
        for (int i = 0; i < n; ++i) parent_[static_cast<std::size_t>(i)] = i;
    }
    int find(int x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
            x = parent_[static_cast<std::size_t>(x)];
        }
        return x;
    }
    /// Returns false if already connected.
    bool unite(int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra == rb) return false;
        if (size_[static_cast<std::size_t>(ra)] < size_[static_cast<std::size_t>(rb)]) std::swap(ra, rb);
        parent_[static_cast<std::size_t>(rb)] = ra;
        size_[static_cast<std::size_t>(ra)] += size_[static_cast<std::size_t>(rb)];
        return true;
    }

private:
    std::vector<int> parent_;
    std::vector<std::size_t> size_;
};

}  // namespace detail

/// Undirected simple graph on nodes {0, ..., d-1} given by its edge list.
/// Edges are stored canonically sorted; no self-loops, no duplicates.
class EdgeSet {
public:
    EdgeSet(int num_nodes, std::vector<NodePair> edges)
        : num_nodes_(num_nodes), edges_(std::move(edges)) {
        if (num_nodes < 2) throw ValidationError("need at least two nodes");
        for (auto& e : edges_) {
            if (e.first == e.second) throw ValidationError("self-loop in edge set");
            if (e.first > e.second) std::swap(e.first, e.second);
            if (e.first < 0 || e.second >= num_nodes_)
                throw ValidationError("edge endpoint out of range");
        }
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw ValidationError("duplicate edge");
    }

    int num_nodes() const { return num_nodes_; }
    const std::vector<NodePair>& edges() const { return edges_; }
    std::size_t size() const { return edges_.size(); }

    bool contains(NodePair e) const {
        if (e.first > e.second) std::swap(e.first, e.second);
        return std::binary_search(edges_.begin(), edges_.end(), e);
    }

    bool is_acyclic() const {
        detail::UnionFind uf(num_nodes_);
        for (const auto& [a, b] : edges_)
            if (!uf.unite(a, b)) return false;
        return true;
    }

    bool is_spanning_tree() const {
        return edges_.size() == static_cast<std::size_t>(num_nodes_ - 1) && is_acyclic();
    }

    /// All pairs {i,j} not in the edge set, lexicographic.
    std::vector<NodePair> non_edges() const {
        std::vector<NodePair> out;
        for (int i = 0; i < num_nodes_; ++i)
            for (int j = i + 1; j < num_nodes_; ++j)
                if (!contains({i, j})) out.emplace_back(i, j);
        return out;
    }

    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes_));
        for (const auto& [a, b] : edges_) {
            adj[static_cast<std::size_t>(a)].push_back(b);
            adj[static_cast<std::size_t>(b)].push_back(a);
        }
        for (auto& nb : adj) std::sort(nb.begin(), nb.end());
        return adj;
    }

    bool operator==(const EdgeSet& o) const {
        return num_nodes_ == o.num_nodes_ && edges_ == o.edges_;
    }
    bool operator<(const EdgeSet& o) const { return edges_ < o.edges_; }

private:
    int num_nodes_;
    std::vector<NodePair> edges_;
};

/// Groups of node pairs whose weights agreed within the tie tolerance during
/// an MWST run.  Only groups of two or more pairs are reported.
struct TieReport {
    std::vector<std::vector<NodePair>> groups;
    bool any() const { return !groups.empty(); }
};

struct MwstResult {
    EdgeSet tree;
    TieReport ties;
};

/// Maximum-weight spanning tree by Kruskal with union-find.  Deterministic:
/// equal weights are broken by lexicographic pair order.  Weights must be
/// given for all C(d,2) pairs.
inline MwstResult mwst(int d, const std::map<NodePair, double>& weights, double tau_tie = kTieTol) {
    if (d < 2) throw ValidationError("need at least two nodes");
    const std::size_t expect = static_cast<std::size_t>(d) * static_cast<std::size_t>(d - 1) / 2;
    std::vector<std::pair<NodePair, double>> items;
    items.reserve(expect);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            auto it = weights.find({i, j});
            if (it == weights.end())
                throw ValidationError("missing weight for pair " + pair_str({i, j}));
            items.emplace_back(NodePair{i, j}, it->second);
        }

    // sort by weight descending, pair lexicographic ascending on equal weight
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    TieReport ties;
    {
        // cluster consecutive weights within tau_tie
        std::size_t i = 0;
        while (i < items.size()) {
            std::size_t j = i + 1;
            while (j < items.size() && std::abs(items[j - 1].second - items[j].second) <= tau_tie) ++j;
            if (j - i >= 2) {
                std::vector<NodePair> g;
                for (std::size_t t = i; t < j; ++t) g.push_back(items[t].first);
                std::sort(g.begin(), g.end());
                ties.groups.push_back(std::move(g));
            }
            i = j;
        }
    }

    detail::UnionFind uf(d);
    std::vector<NodePair> chosen;
    for (const auto& [e, w] : items) {
        if (uf.unite(e.first, e.second)) {
            chosen.push_back(e);
            if (chosen.size() == static_cast<std::size_t>(d - 1)) break;
        }
    }
    return MwstResult{EdgeSet(d, std::move(chosen)), std::move(ties)};
}

/// Edges of the unique path in a spanning tree connecting the endpoints of
/// e_prime, ordered from e_prime.first to e_prime.second.  If e_prime is
/// itself a tree edge the path is that single edge.
inline std::vector<NodePair> path_between(const EdgeSet& tree, NodePair e_prime) {
    if (!tree.is_spanning_tree()) throw ValidationError("path_between requires a spanning tree");
    const int d = tree.num_nodes();
    if (e_prime.first < 0 || e_prime.first >= d || e_prime.second < 0 || e_prime.second >= d ||
        e_prime.first == e_prime.second)
        throw ValidationError("invalid node pair");
    const auto adj = tree.adjacency();
    std::vector<int> prev(static_cast<std::size_t>(d), -1);
    std::queue<int> q;
    q.push(e_prime.first);
    prev[static_cast<std::size_t>(e_prime.first)] = e_prime.first;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        if (u == e_prime.second) break;
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (prev[static_cast<std::size_t>(v)] < 0) {
                prev[static_cast<std::size_t>(v)] = u;
                q.push(v);
            }
        }
    }
    if (prev[static_cast<std::size_t>(e_prime.second)] < 0)
        throw ValidationError("nodes are disconnected");
    std::vector<NodePair> path;
    for (int v = e_prime.second; v != e_prime.first; v = prev[static_cast<std::size_t>(v)])
        path.push_back(make_pair_sorted(prev[static_cast<std::size_t>(v)], v));
    std::reverse(path.begin(), path.end());
    return path;
}

/// Hop count of the path between u and v.
inline int path_length(const EdgeSet& tree, int u, int v) {
    if (u == v) return 0;
    return static_cast<int>(path_between(tree, {u, v}).size());
}

/// Max hop-distance over all node pairs.
inline int diameter(const EdgeSet& tree) {
    if (!tree.is_spanning_tree()) throw ValidationError("diameter requires a spanning tree");
    const int d = tree.num_nodes();
    const auto adj = tree.adjacency();
    int best = 0;
    for (int s = 0; s < d; ++s) {
        std::vector<int> dist(static_cast<std::size_t>(d), -1);
        std::queue<int> q;
        q.push(s);
        dist[static_cast<std::size_t>(s)] = 0;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            best = std::max(best, dist[static_cast<std::size_t>(u)]);
            for (int v : adj[static_cast<std::size_t>(u)])
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                    q.push(v);
                }
        }
    }
    return best;
}

/// All d^(d-2) spanning trees on d nodes, lexicographic by edge list.
/// Guarded by d <= 8; the count grows as d^(d-2).
inline std::vector<EdgeSet> enumerate_spanning_trees(int d) {
    if (d < 2) throw ValidationError("need at least two nodes");
    if (d > 8) throw TooLarge("spanning-tree enumeration limited to d <= 8");
    std::vector<NodePair> pairs;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) pairs.emplace_back(i, j);
    const int m = static_cast<int>(pairs.size());
    std::vector<EdgeSet> out;
    std::vector<int> pick(static_cast<std::size_t>(d - 1));

    // iterate over all (d-1)-subsets of the pair list in lexicographic order
    for (int i = 0; i < d - 1; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        detail::UnionFind uf(d);
        bool tree = true;
        for (int i : pick)
            if (!uf.unite(pairs[static_cast<std::size_t>(i)].first, pairs[static_cast<std::size_t>(i)].second)) {
                tree = false;
                break;
            }
        if (tree) {
            std::vector<NodePair> es;
            for (int i : pick) es.push_back(pairs[static_cast<std::size_t>(i)]);
            out.emplace_back(d, std::move(es));
        }
        // next combination
        int idx = d - 2;
        while (idx >= 0 && pick[static_cast<std::size_t>(idx)] == m - (d - 1) + idx) --idx;
        if (idx < 0) break;
        ++pick[static_cast<std::size_t>(idx)];
        for (int j = idx + 1; j < d - 1; ++j)
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

/// True iff the acyclic input has strictly fewer than d-1 edges.
/// Throws on cyclic input.
inline bool is_proper_forest(const EdgeSet& structure) {
    if (!structure.is_acyclic()) throw ValidationError("is_proper_forest requires an acyclic input");
    return structure.size() < static_cast<std::size_t>(structure.num_nodes() - 1);
}

}  // namespace treexp
