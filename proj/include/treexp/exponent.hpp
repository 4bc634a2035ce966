#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "treexp/chow_liu.hpp"
#include "treexp/crossover.hpp"
#include "treexp/model.hpp"

namespace treexp {

enum class RateMode { exact, approx };

struct PairRate {
    NodePair e;        // replacement candidate on the path
    NodePair eprime;   // non-edge
    double rate;       // +inf allowed
};

/// Result of the error-exponent search: the minimum crossover rate over all
/// (path edge, non-edge) candidates, the minimizing pair, and the dominant
/// error tree obtained by the single-edge swap.
struct ExponentReport {
    double k_p;
    NodePair dominant_nonedge;
    NodePair replacement;
    EdgeSet dominant_error_tree;
    std::vector<PairRate> pair_rates;
    std::vector<std::pair<NodePair, NodePair>> co_minimal;  // (e, e') pairs tied with the minimum
    int evaluations;
    RateMode mode;
};

using RateFn = std::function<double(NodePair e, NodePair eprime)>;

/// Tie tolerance when comparing crossover rates; looser than the weight tie
/// tolerance because exact rates carry solver noise.
inline constexpr double kRateTieTol = 1e-9;

/// The edge on the tree path of e_prime with the smallest crossover rate
/// against e_prime; rates tied within kRateTieTol resolve to the
/// lexicographically smallest edge.
inline std::pair<NodePair, double> dominant_replacement(const EdgeSet& tree, NodePair e_prime,
                                                        const RateFn& rate_fn) {
    e_prime = make_pair_sorted(e_prime.first, e_prime.second);
    if (tree.contains(e_prime)) throw ValidationError("e' must not be a tree edge");
    auto path = path_between(tree, e_prime);
    std::sort(path.begin(), path.end());
    std::vector<double> rates;
    rates.reserve(path.size());
    double best_rate = kInf;
    for (const auto& e : path) {
        rates.push_back(rate_fn(e, e_prime));
        best_rate = std::min(best_rate, rates.back());
    }
    for (std::size_t i = 0; i < path.size(); ++i)
        if (rates[i] - best_rate <= kRateTieTol) return {path[i], rates[i]};
    return {path.back(), best_rate};  // unreachable
}

namespace detail {

inline RateFn make_rate_fn(const DenseJoint& dense, RateMode mode, const SolverConfig& cfg) {
    return [&dense, mode, cfg](NodePair e, NodePair ep) {
        const CrossoverProblem prob = make_crossover_problem(dense, e, ep);
        if (mode == RateMode::exact) return exact_rate(prob, cfg).rate;
        return approx_rate(prob, cfg.var_tol);
    };
}

struct SearchRow {
    NodePair eprime;
    NodePair e;
    double rate;
};

/// Shared (e', e in Path(e')) scan used by both the tree exponent and the
/// non-tree generalization.  `excluded` may veto a candidate swap; a vetoed
/// swap never contributes a rate.  Rows come out in lexicographic (e', e)
/// order, one per evaluated candidate.
inline std::vector<SearchRow> scan_swaps(
    const EdgeSet& tree, const RateFn& rate_fn,
    const std::function<bool(NodePair e, NodePair eprime)>& excluded) {
    std::vector<SearchRow> rows;
    for (const auto& ep : tree.non_edges()) {
        auto path = path_between(tree, ep);
        std::sort(path.begin(), path.end());
        for (const auto& e : path) {
            if (excluded && excluded(e, ep)) continue;
            rows.push_back(SearchRow{ep, e, rate_fn(e, ep)});
        }
    }
    return rows;
}

struct MinResult {
    double k;
    NodePair eprime{-1, -1};
    NodePair e{-1, -1};
    std::vector<std::pair<NodePair, NodePair>> co_minimal;
};

inline MinResult reduce_min(const std::vector<SearchRow>& rows, double rate_tie_tol) {
    MinResult m{kInf, {-1, -1}, {-1, -1}, {}};
    for (const auto& r : rows) {
        if (r.rate < m.k) {
            m.k = r.rate;
            m.eprime = r.eprime;
            m.e = r.e;
        }
    }
    if (std::isfinite(m.k)) {
        for (const auto& r : rows)
            if (r.rate - m.k <= rate_tie_tol) m.co_minimal.emplace_back(r.e, r.eprime);
        // deterministic representative: lexicographically smallest (e', e)
        for (const auto& r : rows) {
            if (r.rate - m.k <= rate_tie_tol) {
                m.eprime = r.eprime;
                m.e = r.e;
                break;
            }
        }
    }
    return m;
}

}  // namespace detail

/// Number of (e, e') crossover evaluations the exponent search performs:
/// the sum of path lengths over all non-edges.  Bounded above by
/// diam(T) * (d-1) * (d-2) / 2.
inline int evaluation_budget(const EdgeSet& tree) {
    if (!tree.is_spanning_tree()) throw ValidationError("evaluation_budget requires a spanning tree");
    int count = 0;
    for (const auto& ep : tree.non_edges())
        count += static_cast<int>(path_between(tree, ep).size());
    return count;
}

/// The error exponent for ML tree-structure learning: the minimum crossover
/// rate over all non-edges e' and edges on their tree paths, together with
/// the dominant error tree E ∪ {e*} \ {r(e*)}.
inline ExponentReport error_exponent(const TreeModel& model, RateMode mode,
                                     const SolverConfig& cfg = {},
                                     std::size_t dense_budget = kDenseBudget) {
    const DenseJoint dense = model.to_dense(dense_budget);
    const RateFn rate_fn = detail::make_rate_fn(dense, mode, cfg);
    const auto rows = detail::scan_swaps(model.structure(), rate_fn, nullptr);
    const auto m = detail::reduce_min(rows, kRateTieTol);

    std::vector<NodePair> edges = model.structure().edges();
    std::erase(edges, m.e);
    edges.push_back(m.eprime);
    EdgeSet dominant(model.structure().num_nodes(), std::move(edges));
    if (!dominant.is_spanning_tree())
        throw ValidationError("dominant error tree is not spanning");  // unreachable by construction

    std::vector<PairRate> pair_rates;
    pair_rates.reserve(rows.size());
    for (const auto& r : rows) pair_rates.push_back(PairRate{r.e, r.eprime, r.rate});
    return ExponentReport{m.k,      m.eprime,   m.e,
                          dominant, pair_rates, m.co_minimal,
                          static_cast<int>(rows.size()), mode};
}

// ---------------------------------------------------------------------------
// Positivity of the exponent
// ---------------------------------------------------------------------------

struct PositivityCertificate {
    bool positive;
    /// Violating pair when not positive: (e', e) with e on Path(e') and
    /// I(P_e') >= I(P_e) - tol.
    std::optional<std::pair<NodePair, NodePair>> witness;
    bool proper_forest;  // structural cross-check: some tree edge has ~zero MI
    EdgeSet structure;   // the tree the conditions were checked against
};

/// Checks the mutual-information strict-inequality condition exhaustively:
/// I(P_e') < I(P_e) for every non-edge e' and every e on its path.  The
/// structure is the MWST of the true MI table (which is E_P when P is
/// tree-Markov).  Also cross-checks the proper-forest condition by looking
/// for tree edges with vanishing mutual information.
inline PositivityCertificate positivity_certificate(const DenseJoint& dense, double tol = 1e-10) {
    if (!dense.strictly_positive())
        throw NotStrictlyPositive("positivity_certificate requires a strictly positive distribution");
    const int d = dense.num_vars();
    std::map<NodePair, double> mi;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const int keep[2] = {i, j};
            mi[{i, j}] = mutual_information(marginalize(dense, std::span<const int>(keep, 2)));
        }
    const EdgeSet tree = mwst(d, mi).tree;

    std::optional<std::pair<NodePair, NodePair>> witness;
    for (const auto& ep : tree.non_edges()) {
        auto path = path_between(tree, ep);
        std::sort(path.begin(), path.end());
        for (const auto& e : path) {
            if (mi.at(ep) >= mi.at(e) - tol) {
                witness = std::make_pair(ep, e);
                break;
            }
        }
        if (witness) break;
    }

    bool forest = false;
    for (const auto& e : tree.edges())
        if (mi.at(e) <= tol) forest = true;

    return PositivityCertificate{!witness.has_value(), witness, forest, tree};
}

inline PositivityCertificate positivity_certificate(const TreeModel& model, double tol = 1e-10) {
    return positivity_certificate(model.to_dense(), tol);
}

/// Proper-forest test for a structure derived from a distribution: the MWST
/// of the true mutual informations with vanishing-MI edges dropped.  True
/// iff the dependency structure has fewer than d-1 edges.
inline bool is_proper_forest(const DenseJoint& dense, double tol = 1e-10) {
    const int d = dense.num_vars();
    std::map<NodePair, double> mi;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const int keep[2] = {i, j};
            mi[{i, j}] = mutual_information(marginalize(dense, std::span<const int>(keep, 2)));
        }
    const EdgeSet tree = mwst(d, mi).tree;
    std::vector<NodePair> kept;
    for (const auto& e : tree.edges())
        if (mi.at(e) > tol) kept.push_back(e);
    return is_proper_forest(EdgeSet(d, std::move(kept)));
}

/// Log of the finite-sample bound on the structure-learning error
/// probability: log[ (d-1)^2 (d-2)/2 * C(n+1+|X|^4, n+1) * exp(-n K_P) ].
inline double finite_sample_bound(double k_p, int d, const Alphabet& alphabet, std::uint64_t n) {
    if (n < 1) throw ValidationError("need n >= 1");
    if (k_p < 0.0) throw ValidationError("exponent must be nonnegative");
    const double prefactor = std::log(static_cast<double>(d - 1) * static_cast<double>(d - 1) *
                                      static_cast<double>(d - 2) / 2.0);
    const double a = static_cast<double>(n) + 1.0;
    double x4 = 1.0;
    for (int i = 0; i < 4; ++i) x4 *= static_cast<double>(alphabet.size());
    const double log_binom = std::lgamma(a + x4 + 1.0) - std::lgamma(a + 1.0) - std::lgamma(x4 + 1.0);
    return prefactor + log_binom - static_cast<double>(n) * k_p;
}

// ---------------------------------------------------------------------------
// Non-tree distributions: reverse I-projection and generalized exponent
// ---------------------------------------------------------------------------

struct ProjectionSet {
    double pi_star;                     // D(P || closest tree distribution)
    double max_weight;                  // max over trees of sum of edge MIs
    std::vector<EdgeSet> structures;    // all trees within tau_tie of max_weight
    std::vector<TreeModel> models;      // projected models (P's marginals on the edges)

    bool contains(const EdgeSet& s) const {
        for (const auto& q : structures)
            if (q == s) return true;
        return false;
    }
};

namespace detail {

/// Reverse I-projection of P onto a fixed tree structure: P's own node
/// marginals and pairwise marginals on the chosen edges.
inline TreeModel project_onto(const DenseJoint& dense, const EdgeSet& structure) {
    const int d = dense.num_vars();
    const int k = dense.alphabet().size();
    std::vector<std::vector<double>> node_marg;
    node_marg.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const int keep[1] = {i};
        node_marg.push_back(marginalize(dense, std::span<const int>(keep, 1)).probs());
    }
    std::map<NodePair, std::vector<double>> edge_marg;
    for (const auto& e : structure.edges()) {
        const int keep[2] = {e.first, e.second};
        edge_marg[e] = marginalize(dense, std::span<const int>(keep, 2)).probs();
    }
    (void)k;
    return TreeModel::from_learned(structure, dense.alphabet(), std::move(node_marg),
                                   std::move(edge_marg));
}

}  // namespace detail

/// All spanning trees attaining the maximum total mutual-information weight
/// within tau_tie, each with its projected tree model.  Enumerative: d <= 8.
inline ProjectionSet optimal_projections(const DenseJoint& dense, double tau_tie = kTieTol,
                                         std::size_t /*budget*/ = kDenseBudget) {
    const int d = dense.num_vars();
    std::map<NodePair, double> mi;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const int keep[2] = {i, j};
            mi[{i, j}] = mutual_information(marginalize(dense, std::span<const int>(keep, 2)));
        }
    const auto trees = enumerate_spanning_trees(d);
    double max_w = -kInf;
    std::vector<double> weights;
    weights.reserve(trees.size());
    for (const auto& t : trees) {
        double w = 0.0;
        for (const auto& e : t.edges()) w += mi.at(e);
        weights.push_back(w);
        max_w = std::max(max_w, w);
    }
    ProjectionSet ps{kInf, max_w, {}, {}};
    for (std::size_t i = 0; i < trees.size(); ++i) {
        if (max_w - weights[i] <= tau_tie) {
            ps.structures.push_back(trees[i]);
            ps.models.push_back(detail::project_onto(dense, trees[i]));
            ps.pi_star = std::min(ps.pi_star, kl_divergence(dense, ps.models.back().to_dense()));
        }
    }
    return ps;
}

/// One vetoed swap during the generalized search: replacing `e` by `eprime`
/// inside `structure` lands in another optimal projection, which is not an
/// error.
struct ExclusionRecord {
    EdgeSet structure;
    NodePair eprime;
    NodePair e;
};

struct GeneralizedExponentReport {
    ExponentReport base;                 // k_p, dominant pair, dominant error tree, rate table
    ProjectionSet projections;
    EdgeSet dominant_structure;          // the optimal-projection edge set attaining the minimum
    std::vector<ExclusionRecord> exclusions;
    /// Non-edges whose every candidate swap was excluded, per structure;
    /// they contribute rate +inf and are never selected.
    std::vector<std::pair<EdgeSet, NodePair>> infinite_nonedges;
};

/// Error exponent for the redefined error event {E_learned not in the set of
/// optimal tree projections}: a triple minimization over optimal structures,
/// their non-edges, and path edges, excluding swaps that stay inside the
/// projection set.  Reduces exactly to error_exponent when the projection
/// set is a singleton.
inline GeneralizedExponentReport generalized_exponent(const DenseJoint& dense, RateMode mode,
                                                      const SolverConfig& cfg = {},
                                                      double tau_tie = kTieTol) {
    ProjectionSet ps = optimal_projections(dense, tau_tie);
    const RateFn rate_fn = detail::make_rate_fn(dense, mode, cfg);

    std::vector<ExclusionRecord> exclusions;
    std::vector<std::pair<EdgeSet, NodePair>> infinite_nonedges;
    double best_k = kInf;
    std::size_t best_q = 0;
    std::vector<detail::SearchRow> best_rows;
    std::vector<std::pair<NodePair, NodePair>> best_co;
    NodePair best_ep{-1, -1}, best_e{-1, -1};
    int evaluations = 0;

    for (std::size_t qi = 0; qi < ps.structures.size(); ++qi) {
        const EdgeSet& eq = ps.structures[qi];
        auto excluded = [&](NodePair e, NodePair ep) {
            std::vector<NodePair> swapped = eq.edges();
            std::erase(swapped, e);
            swapped.push_back(ep);
            const EdgeSet candidate(eq.num_nodes(), std::move(swapped));
            if (ps.contains(candidate)) {
                exclusions.push_back(ExclusionRecord{eq, ep, e});
                return true;
            }
            return false;
        };
        const auto rows = detail::scan_swaps(eq, rate_fn, excluded);
        evaluations += static_cast<int>(rows.size());

        // non-edges with every swap excluded contribute +inf by convention
        for (const auto& ep : eq.non_edges()) {
            const bool any = std::any_of(rows.begin(), rows.end(),
                                         [&ep](const detail::SearchRow& r) { return r.eprime == ep; });
            if (!any) infinite_nonedges.emplace_back(eq, ep);
        }

        const auto m = detail::reduce_min(rows, kRateTieTol);
        if (m.k < best_k) {
            best_k = m.k;
            best_q = qi;
            best_rows = rows;
            best_co = m.co_minimal;
            best_ep = m.eprime;
            best_e = m.e;
        }
    }

    if (!std::isfinite(best_k))
        throw ValidationError(
            "every single-edge swap of every optimal structure stays inside the projection set; "
            "the redefined error event has no dominant swap");

    const EdgeSet dominant_structure = ps.structures[best_q];
    std::vector<NodePair> edges = dominant_structure.edges();
    std::erase(edges, best_e);
    edges.push_back(best_ep);
    EdgeSet dominant(dense.num_vars(), std::move(edges));

    std::vector<PairRate> pair_rates;
    for (const auto& r : best_rows) pair_rates.push_back(PairRate{r.e, r.eprime, r.rate});
    ExponentReport base{best_k,   best_ep,    best_e,
                        dominant, pair_rates, best_co,
                        evaluations, mode};
    return GeneralizedExponentReport{std::move(base), std::move(ps), dominant_structure,
                                     std::move(exclusions), std::move(infinite_nonedges)};
}

}  // namespace treexp
