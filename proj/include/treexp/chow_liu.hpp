#pragma once

#include <map>
#include <vector>

#include "treexp/model.hpp"

namespace treexp {

/// Output of maximum-likelihood tree learning: the MWST structure over the
/// empirical mutual informations, and the model whose edge marginals are the
/// empirical pairwise marginals on the chosen edges.
struct LearnResult {
    EdgeSet structure;
    TreeModel model;
    std::map<NodePair, double> mi_table;
    TieReport ties;
};

namespace detail {

/// Pairwise empirical tables for all C(d,2) pairs in one pass.
/// Returns k*k row-major counts per canonical pair.
inline std::map<NodePair, std::vector<std::uint64_t>> pair_counts(const SampleMatrix& samples) {
    const int d = samples.num_vars();
    const int k = samples.alphabet().size();
    std::map<NodePair, std::vector<std::uint64_t>> counts;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            counts[{i, j}].assign(static_cast<std::size_t>(k * k), 0);
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        const auto row = samples.row(r);
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j)
                ++counts[{i, j}][static_cast<std::size_t>(row[static_cast<std::size_t>(i)] * k +
                                                          row[static_cast<std::size_t>(j)])];
    }
    return counts;
}

inline double mi_from_table(const std::vector<double>& p, int k) {
    std::vector<double> pi(static_cast<std::size_t>(k), 0.0), pj(static_cast<std::size_t>(k), 0.0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            pi[static_cast<std::size_t>(a)] += p[static_cast<std::size_t>(a * k + b)];
            pj[static_cast<std::size_t>(b)] += p[static_cast<std::size_t>(a * k + b)];
        }
    double mi = 0.0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double v = p[static_cast<std::size_t>(a * k + b)];
            if (v > 0.0)
                mi += v * std::log(v / (pi[static_cast<std::size_t>(a)] * pj[static_cast<std::size_t>(b)]));
        }
    return std::max(mi, 0.0);
}

}  // namespace detail

/// MWST over a mutual-information table; delegation target for learn().
inline MwstResult structure_from_mi(int d, const std::map<NodePair, double>& mi_table,
                                    double tau_tie = kTieTol) {
    return mwst(d, mi_table, tau_tie);
}

/// Chow-Liu maximum-likelihood estimation: structure by MWST over empirical
/// mutual informations, parameters from the empirical pairwise marginals.
/// Empirical MI uses the 0 log 0 convention directly; no smoothing.
inline LearnResult learn(const SampleMatrix& samples) {
    if (samples.rows() == 0) throw ValidationError("empty sample set");
    const int d = samples.num_vars();
    const int k = samples.alphabet().size();
    const double n = static_cast<double>(samples.rows());

    const auto counts = detail::pair_counts(samples);
    std::map<NodePair, std::vector<double>> tables;
    std::map<NodePair, double> mi_table;
    for (const auto& [e, c] : counts) {
        std::vector<double> p(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) p[i] = static_cast<double>(c[i]) / n;
        mi_table[e] = detail::mi_from_table(p, k);
        tables[e] = std::move(p);
    }

    MwstResult ms = structure_from_mi(d, mi_table);

    // node marginals from any pairwise table containing the node
    std::vector<std::vector<double>> node_marg(static_cast<std::size_t>(d),
                                               std::vector<double>(static_cast<std::size_t>(k), 0.0));
    {
        const auto& t = tables.at({0, 1});
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) {
                node_marg[0][static_cast<std::size_t>(a)] += t[static_cast<std::size_t>(a * k + b)];
                node_marg[1][static_cast<std::size_t>(b)] += t[static_cast<std::size_t>(a * k + b)];
            }
        for (int v = 2; v < d; ++v) {
            const auto& tv = tables.at({0, v});
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                    node_marg[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)] +=
                        tv[static_cast<std::size_t>(a * k + b)];
        }
    }

    std::map<NodePair, std::vector<double>> edge_marg;
    for (const auto& e : ms.tree.edges()) edge_marg[e] = tables.at(e);

    TreeModel model = TreeModel::from_learned(ms.tree, samples.alphabet(), node_marg, edge_marg);
    return LearnResult{ms.tree, std::move(model), std::move(mi_table), std::move(ms.ties)};
}

}  // namespace treexp
