#pragma once

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "treexp/dist.hpp"
#include "treexp/trees.hpp"

namespace treexp {

/// Default dense-table budget: marginalization and to_dense refuse above this.
inline constexpr std::size_t kDenseBudget = std::size_t{1} << 24;

/// Tree-factorized distribution: spanning structure, node marginals, and
/// pairwise marginals on the edges, P(x) = prod_i P_i(x_i) *
/// prod_(i,j) P_ij(x_i,x_j) / (P_i(x_i) P_j(x_j)).
///
/// Ground-truth models require every edge marginal to be non-product (the
/// spanning-tree assumption); models learned from samples may violate that
/// at small n and are built through from_learned().
class TreeModel {
public:
    /// edge_marginals: per canonical edge (i<j), k*k row-major table of
    /// P(x_i, x_j).  node_marginals: d tables of k entries.
    TreeModel(EdgeSet structure, Alphabet alphabet,
              std::vector<std::vector<double>> node_marginals,
              std::map<NodePair, std::vector<double>> edge_marginals)
        : TreeModel(std::move(structure), alphabet, std::move(node_marginals),
                    std::move(edge_marginals), /*require_nonproduct=*/true) {}

    static TreeModel from_learned(EdgeSet structure, Alphabet alphabet,
                                  std::vector<std::vector<double>> node_marginals,
                                  std::map<NodePair, std::vector<double>> edge_marginals) {
        return TreeModel(std::move(structure), alphabet, std::move(node_marginals),
                         std::move(edge_marginals), /*require_nonproduct=*/false);
    }

    const EdgeSet& structure() const { return structure_; }
    const Alphabet& alphabet() const { return alphabet_; }
    int num_vars() const { return structure_.num_nodes(); }
    const std::vector<double>& node_marginal(int i) const {
        return node_marginals_[static_cast<std::size_t>(i)];
    }
    const std::vector<double>& edge_marginal(NodePair e) const {
        if (e.first > e.second) std::swap(e.first, e.second);
        return edge_marginals_.at(e);
    }
    const std::map<NodePair, std::vector<double>>& edge_marginals() const { return edge_marginals_; }

    double evaluate(std::span<const int> x) const {
        const int d = num_vars();
        const int k = alphabet_.size();
        if (static_cast<int>(x.size()) != d) throw ValidationError("outcome has wrong arity");
        for (int v : x)
            if (v < 0 || v >= k) throw ValidationError("symbol out of range");
        double p = 1.0;
        for (int i = 0; i < d; ++i) {
            const double pi = node_marginals_[static_cast<std::size_t>(i)][static_cast<std::size_t>(x[static_cast<std::size_t>(i)])];
            if (pi <= 0.0) return 0.0;
            p *= pi;
        }
        for (const auto& [e, tab] : edge_marginals_) {
            const double pij = tab[static_cast<std::size_t>(x[static_cast<std::size_t>(e.first)] * k +
                                                            x[static_cast<std::size_t>(e.second)])];
            if (pij <= 0.0) return 0.0;
            const double pi = node_marginals_[static_cast<std::size_t>(e.first)][static_cast<std::size_t>(x[static_cast<std::size_t>(e.first)])];
            const double pj = node_marginals_[static_cast<std::size_t>(e.second)][static_cast<std::size_t>(x[static_cast<std::size_t>(e.second)])];
            p *= pij / (pi * pj);
        }
        return p;
    }

    DenseJoint to_dense(std::size_t budget = kDenseBudget) const {
        const int d = num_vars();
        const int k = alphabet_.size();
        const std::size_t cells = detail::pow_size(k, d);
        if (cells > budget) throw TooLarge("dense table exceeds the cell budget");
        std::vector<double> probs(cells);
        std::vector<int> x(static_cast<std::size_t>(d), 0);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            std::size_t rest = cell;
            for (int v = d - 1; v >= 0; --v) {
                x[static_cast<std::size_t>(v)] = static_cast<int>(rest % static_cast<std::size_t>(k));
                rest /= static_cast<std::size_t>(k);
            }
            probs[cell] = evaluate(x);
        }
        return DenseJoint(d, alphabet_, std::move(probs));
    }

    /// Ancestral sampling rooted at node 0 (BFS order down the tree);
    /// deterministic given the seed.
    SampleMatrix sample(std::size_t n, std::uint64_t seed) const {
        if (n < 1) throw ValidationError("need n >= 1 samples");
        const int d = num_vars();
        const int k = alphabet_.size();

        // visit order and, per visited node, its parent
        const auto adj = structure_.adjacency();
        std::vector<int> order, parent(static_cast<std::size_t>(d), -1);
        {
            std::vector<bool> seen(static_cast<std::size_t>(d), false);
            std::queue<int> q;
            q.push(0);
            seen[0] = true;
            while (!q.empty()) {
                const int u = q.front();
                q.pop();
                order.push_back(u);
                for (int v : adj[static_cast<std::size_t>(u)])
                    if (!seen[static_cast<std::size_t>(v)]) {
                        seen[static_cast<std::size_t>(v)] = true;
                        parent[static_cast<std::size_t>(v)] = u;
                        q.push(v);
                    }
            }
        }

        // conditional CDFs: for node v with parent u, cdf[v][xu*k + a] = P(x_v <= a | x_u = xu)
        std::vector<std::vector<double>> cdf(static_cast<std::size_t>(d));
        for (int v : order) {
            auto& c = cdf[static_cast<std::size_t>(v)];
            const int u = parent[static_cast<std::size_t>(v)];
            if (u < 0) {
                c.resize(static_cast<std::size_t>(k));
                double acc = 0.0;
                for (int a = 0; a < k; ++a) {
                    acc += node_marginals_[0][static_cast<std::size_t>(a)];
                    c[static_cast<std::size_t>(a)] = acc;
                }
            } else {
                c.resize(static_cast<std::size_t>(k * k));
                const NodePair e = make_pair_sorted(u, v);
                const auto& tab = edge_marginals_.at(e);
                const auto& pu = node_marginals_[static_cast<std::size_t>(u)];
                for (int xu = 0; xu < k; ++xu) {
                    double acc = 0.0;
                    for (int a = 0; a < k; ++a) {
                        const double joint = (u == e.first)
                                                 ? tab[static_cast<std::size_t>(xu * k + a)]
                                                 : tab[static_cast<std::size_t>(a * k + xu)];
                        if (pu[static_cast<std::size_t>(xu)] > 0.0)
                            acc += joint / pu[static_cast<std::size_t>(xu)];
                        c[static_cast<std::size_t>(xu * k + a)] = acc;
                    }
                }
            }
        }

        Rng rng(seed);
        SampleMatrix out(d, alphabet_);
        std::vector<std::uint8_t> row(static_cast<std::size_t>(d));
        for (std::size_t s = 0; s < n; ++s) {
            for (int v : order) {
                const int u = parent[static_cast<std::size_t>(v)];
                const double r = rng.next_double();
                const double* c = cdf[static_cast<std::size_t>(v)].data();
                int base = 0;
                if (u >= 0) base = static_cast<int>(row[static_cast<std::size_t>(u)]) * k;
                int a = 0;
                while (a < k - 1 && r >= c[base + a]) ++a;
                row[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(a);
            }
            out.push_row_unchecked(row);
        }
        return out;
    }

private:
    TreeModel(EdgeSet structure, Alphabet alphabet,
              std::vector<std::vector<double>> node_marginals,
              std::map<NodePair, std::vector<double>> edge_marginals, bool require_nonproduct)
        : structure_(std::move(structure)),
          alphabet_(alphabet),
          node_marginals_(std::move(node_marginals)),
          edge_marginals_(std::move(edge_marginals)) {
        const int d = structure_.num_nodes();
        const int k = alphabet_.size();
        if (!structure_.is_spanning_tree()) throw ValidationError("structure must be a spanning tree");
        if (static_cast<int>(node_marginals_.size()) != d)
            throw ValidationError("need one marginal per node");
        for (auto& m : node_marginals_) {
            if (static_cast<int>(m.size()) != k) throw ValidationError("node marginal has wrong size");
            normalize_checked(m, "node marginal");
        }
        if (edge_marginals_.size() != structure_.size())
            throw ValidationError("need one pairwise marginal per edge");
        for (auto& [e, tab] : edge_marginals_) {
            if (!structure_.contains(e)) throw ValidationError("pairwise marginal on a non-edge");
            if (static_cast<int>(tab.size()) != k * k)
                throw ValidationError("edge marginal has wrong size");
            normalize_checked(tab, "edge marginal");

            // single-variable marginals of the edge table must match the node marginals
            const auto& pi = node_marginals_[static_cast<std::size_t>(e.first)];
            const auto& pj = node_marginals_[static_cast<std::size_t>(e.second)];
            double max_dev = 0.0, max_prod_dev = 0.0;
            for (int a = 0; a < k; ++a) {
                double ri = 0.0, cj = 0.0;
                for (int b = 0; b < k; ++b) {
                    ri += tab[static_cast<std::size_t>(a * k + b)];
                    cj += tab[static_cast<std::size_t>(b * k + a)];
                }
                max_dev = std::max(max_dev, std::abs(ri - pi[static_cast<std::size_t>(a)]));
                max_dev = std::max(max_dev, std::abs(cj - pj[static_cast<std::size_t>(a)]));
            }
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                    max_prod_dev = std::max(max_prod_dev,
                                            std::abs(tab[static_cast<std::size_t>(a * k + b)] -
                                                     pi[static_cast<std::size_t>(a)] * pj[static_cast<std::size_t>(b)]));
            if (max_dev > 1e-10)
                throw ValidationError("edge marginal " + pair_str(e) +
                                      " is inconsistent with the node marginals");
            if (require_nonproduct && max_prod_dev <= kTieTol)
                throw ValidationError("edge marginal " + pair_str(e) +
                                      " is a product distribution; structure is not a spanning tree");
        }
    }

    static void normalize_checked(std::vector<double>& v, const char* what) {
        double sum = 0.0;
        for (double p : v) {
            if (!(p >= 0.0)) throw ValidationError(std::string(what) + " has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRenormTol)
            throw ValidationError(std::string(what) + " does not sum to 1");
        if (std::abs(sum - 1.0) > kSumTol)
            for (double& p : v) p /= sum;
    }

    EdgeSet structure_;
    Alphabet alphabet_;
    std::vector<std::vector<double>> node_marginals_;
    std::map<NodePair, std::vector<double>> edge_marginals_;
};

/// Sample n rows from an arbitrary dense joint by CDF inversion.
inline SampleMatrix sample_dense(const DenseJoint& joint, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("need n >= 1 samples");
    const int d = joint.num_vars();
    const int k = joint.alphabet().size();
    std::vector<double> cdf(joint.table_size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += joint.probs()[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;
    Rng rng(seed);
    SampleMatrix out(d, joint.alphabet());
    std::vector<std::uint8_t> row(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < n; ++s) {
        const double r = rng.next_double();
        const std::size_t cell = static_cast<std::size_t>(
            std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        std::size_t rest = cell;
        for (int v = d - 1; v >= 0; --v) {
            row[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(rest % static_cast<std::size_t>(k));
            rest /= static_cast<std::size_t>(k);
        }
        out.push_row_unchecked(row);
    }
    return out;
}

}  // namespace treexp
