#pragma once

#include <cmath>
#include <map>
#include <thread>
#include <vector>

#include "treexp/chow_liu.hpp"
#include "treexp/exponent.hpp"
#include "treexp/model.hpp"

namespace treexp {

// ---------------------------------------------------------------------------
// Experiment models
// ---------------------------------------------------------------------------

/// Four-node binary star parameterized by gamma: hub marginal
/// P(x0=0) = 1/3, leaves with P(xi=0|x0=0) = 1/2+gamma and
/// P(xi=0|x0=1) = 1/2-gamma.
inline TreeModel star4(double gamma) {
    if (!(gamma > 0.0 && gamma < 0.5)) throw ValidationError("gamma must lie in (0, 1/2)");
    const double p0 = 1.0 / 3.0;
    std::vector<std::vector<double>> node_marg(4);
    node_marg[0] = {p0, 1.0 - p0};
    const double leaf0 = p0 * (0.5 + gamma) + (1.0 - p0) * (0.5 - gamma);
    for (int i = 1; i < 4; ++i) node_marg[static_cast<std::size_t>(i)] = {leaf0, 1.0 - leaf0};
    std::map<NodePair, std::vector<double>> edge_marg;
    for (int i = 1; i < 4; ++i) {
        edge_marg[{0, i}] = {p0 * (0.5 + gamma), p0 * (0.5 - gamma),
                             (1.0 - p0) * (0.5 - gamma), (1.0 - p0) * (0.5 + gamma)};
    }
    std::vector<NodePair> edges{{0, 1}, {0, 2}, {0, 3}};
    return TreeModel(EdgeSet(4, std::move(edges)), Alphabet(2), std::move(node_marg),
                     std::move(edge_marg));
}

/// Symmetric star on d nodes built from a 4-variable joint q_ab over
/// (hub, leaf_i, leaf_j, leaf_k).  Requires I(Q_a) > I(Q_b) > 0 for the
/// hub-leaf marginal Q_a (positions 0,1) and leaf-leaf marginal Q_b
/// (positions 2,3), and that q_ab is exactly the 4-node marginal of the
/// star the hub-leaf pair induces.
inline TreeModel symmetric_star(int d, const DenseJoint& q_ab, double tol = 1e-10) {
    if (d < 4) throw ValidationError("symmetric star needs d >= 4");
    if (q_ab.num_vars() != 4) throw ValidationError("q_ab must be a 4-variable joint");
    const int k = q_ab.alphabet().size();

    const DenseJoint qa = marginalize(q_ab, {0, 1});
    const DenseJoint qb = marginalize(q_ab, {2, 3});
    const double ia = mutual_information(qa);
    const double ib = mutual_information(qb);
    if (!(ia > ib && ib > 0.0))
        throw ValidationError("symmetric star requires I(Q_a) > I(Q_b) > 0");

    const DenseJoint hub = marginalize(q_ab, {0});
    const DenseJoint leaf = marginalize(qa, {1});

    // the star's implied 4-node marginal must reproduce q_ab
    {
        std::vector<int> x(4);
        for (int x0 = 0; x0 < k; ++x0)
            for (int x1 = 0; x1 < k; ++x1)
                for (int x2 = 0; x2 < k; ++x2)
                    for (int x3 = 0; x3 < k; ++x3) {
                        const double ph = hub.probs()[static_cast<std::size_t>(x0)];
                        if (ph <= 0.0) throw ValidationError("hub marginal has a zero entry");
                        const double implied = ph *
                            (qa.probs()[static_cast<std::size_t>(x0 * k + x1)] / ph) *
                            (qa.probs()[static_cast<std::size_t>(x0 * k + x2)] / ph) *
                            (qa.probs()[static_cast<std::size_t>(x0 * k + x3)] / ph);
                        x = {x0, x1, x2, x3};
                        if (std::abs(implied - q_ab.at(x)) > tol)
                            throw ValidationError(
                                "q_ab is inconsistent with the star factorization of its own "
                                "hub-leaf marginal");
                    }
    }

    std::vector<std::vector<double>> node_marg(static_cast<std::size_t>(d), leaf.probs());
    node_marg[0] = hub.probs();
    std::map<NodePair, std::vector<double>> edge_marg;
    for (int i = 1; i < d; ++i) edge_marg[{0, i}] = qa.probs();
    std::vector<NodePair> edges;
    for (int i = 1; i < d; ++i) edges.emplace_back(0, i);
    return TreeModel(EdgeSet(d, std::move(edges)), q_ab.alphabet(), std::move(node_marg),
                     std::move(edge_marg));
}

/// Binary tree model with all parameters drawn uniformly: root marginal
/// P(x_root = 0) ~ U[0,1] and each child's conditionals P(child=0|parent)
/// ~ U[0,1], root at node 0.  Strictly positive with probability one.
inline TreeModel example2_random_tree(const EdgeSet& structure, std::uint64_t seed) {
    if (!structure.is_spanning_tree()) throw ValidationError("structure must be a spanning tree");
    const int d = structure.num_nodes();
    Rng rng(seed);

    const auto adj = structure.adjacency();
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

    std::vector<std::vector<double>> node_marg(static_cast<std::size_t>(d));
    std::map<NodePair, std::vector<double>> edge_marg;
    const double r0 = rng.next_open();
    node_marg[0] = {r0, 1.0 - r0};
    for (int v : order) {
        const int u = parent[static_cast<std::size_t>(v)];
        if (u < 0) continue;
        const double c0 = rng.next_open();  // P(x_v = 0 | x_u = 0)
        const double c1 = rng.next_open();  // P(x_v = 0 | x_u = 1)
        const auto& pu = node_marg[static_cast<std::size_t>(u)];
        // joint over (u, v)
        const double j00 = pu[0] * c0, j01 = pu[0] * (1.0 - c0);
        const double j10 = pu[1] * c1, j11 = pu[1] * (1.0 - c1);
        node_marg[static_cast<std::size_t>(v)] = {j00 + j10, j01 + j11};
        const NodePair e = make_pair_sorted(u, v);
        if (u == e.first)
            edge_marg[e] = {j00, j01, j10, j11};
        else
            edge_marg[e] = {j00, j10, j01, j11};
    }
    return TreeModel(structure, Alphabet(2), std::move(node_marg), std::move(edge_marg));
}

/// The three-variable table parameterized by (xi, kappa); strictly positive
/// and non-tree (Markov on the complete graph).
inline DenseJoint table1_distribution(double xi, double kappa) {
    if (!(xi > 0.0 && xi < 1.0 / 3.0)) throw ValidationError("xi must lie in (0, 1/3)");
    if (!(kappa > 0.0 && kappa < 0.5)) throw ValidationError("kappa must lie in (0, 1/2)");
    const double a = (0.5 - xi) * (0.5 - kappa);
    const double b = (0.5 + xi) * (0.5 - kappa);
    const double u = (1.0 / 3.0 + xi) * kappa;
    const double v = (2.0 / 3.0 - xi) * kappa;
    // cells in row-major (x1, x2, x3) order
    return DenseJoint(3, Alphabet(2), {a, b, u, v, v, u, a, b});
}

// ---------------------------------------------------------------------------
// Monte Carlo error-probability estimation
// ---------------------------------------------------------------------------

struct SimConfig {
    std::size_t n = 100;        // samples per run
    std::size_t runs = 1000;    // M
    std::uint64_t seed = 1;
    int workers = 1;            // results are independent of this
};

/// Warn-level guard: the desk-scale default is 1e5 runs; configurations
/// beyond 1e7 are refused unless force is set.
inline constexpr std::size_t kRunsHardWarning = 10000000;

struct SimResult {
    std::uint64_t errors = 0;
    std::uint64_t runs = 0;
    double p_hat = 0.0;
    double simulated_rate = kInf;  // -(1/n) log p_hat; +inf when errors == 0
    bool insufficient_runs = false;  // no errors observed
    /// displaced-edge histogram: count of runs whose learned structure
    /// differs from the reference by exactly k edges (k = 0 means correct).
    std::map<int, std::uint64_t> displaced_edges;
};

namespace detail {

/// Structure-only Chow-Liu: empirical pairwise MIs + MWST.
inline EdgeSet learn_structure(const SampleMatrix& samples) {
    const int d = samples.num_vars();
    const int k = samples.alphabet().size();
    const double n = static_cast<double>(samples.rows());
    const auto counts = pair_counts(samples);
    std::map<NodePair, double> mi;
    std::vector<double> p(static_cast<std::size_t>(k * k));
    for (const auto& [e, c] : counts) {
        for (std::size_t i = 0; i < c.size(); ++i) p[i] = static_cast<double>(c[i]) / n;
        mi[e] = mi_from_table(p, k);
    }
    return structure_from_mi(d, mi).tree;
}

inline int displaced_count(const EdgeSet& learned, const EdgeSet& truth) {
    int displaced = 0;
    for (const auto& e : learned.edges())
        if (!truth.contains(e)) ++displaced;
    return displaced;
}

template <typename SampleFn, typename IsErrorFn>
SimResult run_simulation(const SimConfig& cfg, const EdgeSet& reference, SampleFn&& sample_fn,
                         IsErrorFn&& is_error) {
    if (cfg.runs == 0) throw ValidationError("need at least one run");
    if (cfg.runs > kRunsHardWarning)
        throw ValidationError("runs above 1e7 refused; scale the experiment down");
    const int workers = std::max(1, cfg.workers);

    struct Local {
        std::uint64_t errors = 0;
        std::map<int, std::uint64_t> displaced;
    };
    std::vector<Local> locals(static_cast<std::size_t>(workers));

    auto work = [&](int w) {
        Local& loc = locals[static_cast<std::size_t>(w)];
        for (std::size_t r = static_cast<std::size_t>(w); r < cfg.runs; r += static_cast<std::size_t>(workers)) {
            const std::uint64_t run_seed = mix_seed(cfg.seed, r);
            const SampleMatrix samples = sample_fn(run_seed);
            const EdgeSet learned = learn_structure(samples);
            const int disp = displaced_count(learned, reference);
            ++loc.displaced[disp];
            if (is_error(learned)) ++loc.errors;
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }

    SimResult out;
    out.runs = cfg.runs;
    for (const auto& loc : locals) {
        out.errors += loc.errors;
        for (const auto& [k2, v] : loc.displaced) out.displaced_edges[k2] += v;
    }
    out.p_hat = static_cast<double>(out.errors) / static_cast<double>(cfg.runs);
    if (out.errors == 0) {
        out.simulated_rate = kInf;
        out.insufficient_runs = true;
    } else {
        out.simulated_rate = -std::log(out.p_hat) / static_cast<double>(cfg.n);
    }
    return out;
}

}  // namespace detail

/// The five-step protocol: sample n observations, learn the Chow-Liu
/// structure, declare an error when it differs from the model's edge set;
/// repeat over `runs` and report the error fraction and simulated rate.
/// Bit-identical results for any worker count given the same seed.
inline SimResult estimate_error_probability(const TreeModel& model, const SimConfig& cfg) {
    const EdgeSet truth = model.structure();
    return detail::run_simulation(
        cfg, truth, [&](std::uint64_t run_seed) { return model.sample(cfg.n, run_seed); },
        [&](const EdgeSet& learned) { return !(learned == truth); });
}

/// Non-tree variant: an error is a learned structure outside the set of
/// optimal tree projections of the given distribution.
inline SimResult estimate_generalized_error_probability(const DenseJoint& dense, const SimConfig& cfg,
                                                        double tau_tie = kTieTol) {
    const ProjectionSet ps = optimal_projections(dense, tau_tie);
    // histogram reference: the lexicographically first optimal structure
    const EdgeSet reference = ps.structures.front();
    return detail::run_simulation(
        cfg, reference, [&](std::uint64_t run_seed) { return sample_dense(dense, cfg.n, run_seed); },
        [&](const EdgeSet& learned) { return !ps.contains(learned); });
}

}  // namespace treexp
