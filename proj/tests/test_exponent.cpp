#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"
#include "treexp/exponent.hpp"
#include "treexp/simulate.hpp"

using namespace treexp;
using namespace treexp::testutil;
using Catch::Approx;

namespace {

int symmetric_difference(const EdgeSet& a, const EdgeSet& b) {
    int n = 0;
    for (const auto& e : a.edges())
        if (!b.contains(e)) ++n;
    for (const auto& e : b.edges())
        if (!a.contains(e)) ++n;
    return n;
}

}  // namespace

TEST_CASE("dominant replacement edge") {
    SECTION("symmetric star ties break lexicographically") {
        const auto model = star4(0.2);
        const auto dense = model.to_dense();
        const RateFn fn = [&dense](NodePair e, NodePair ep) {
            return approx_rate(make_crossover_problem(dense, e, ep));
        };
        const auto [edge, rate] = dominant_replacement(model.structure(), {1, 2}, fn);
        CHECK(edge == NodePair{0, 1});
        CHECK(rate > 0.0);
    }
    SECTION("chain argmin matches exhaustive evaluation") {
        Rng rng(12);
        const EdgeSet chain(4, {{0, 1}, {1, 2}, {2, 3}});
        const auto model = example2_random_tree(chain, 99);
        const auto dense = model.to_dense();
        const RateFn fn = [&dense](NodePair e, NodePair ep) {
            return approx_rate(make_crossover_problem(dense, e, ep));
        };
        const auto [edge, rate] = dominant_replacement(chain, {0, 3}, fn);
        double best = kInf;
        NodePair best_e{-1, -1};
        for (const auto& e : path_between(chain, {0, 3})) {
            const double r = fn(e, {0, 3});
            if (r < best) {
                best = r;
                best_e = e;
            }
        }
        CHECK(edge == best_e);
        CHECK(rate == Approx(best).margin(1e-15));
    }
    SECTION("tree edges rejected as the non-edge") {
        const EdgeSet chain(4, {{0, 1}, {1, 2}, {2, 3}});
        const RateFn fn = [](NodePair, NodePair) { return 1.0; };
        CHECK_THROWS_AS(dominant_replacement(chain, {1, 2}, fn), ValidationError);
    }
}

TEST_CASE("evaluation budget") {
    SECTION("star counts") {
        std::vector<NodePair> es;
        for (int i = 1; i < 9; ++i) es.emplace_back(0, i);
        const EdgeSet star9(9, std::move(es));
        CHECK(evaluation_budget(star9) <= diameter(star9) * 8 * 7 / 2);
        CHECK(diameter(star9) * 8 * 7 / 2 == 56);
        const EdgeSet star4_edges(4, {{0, 1}, {0, 2}, {0, 3}});
        CHECK(evaluation_budget(star4_edges) == 6);
    }
    SECTION("chain count is the sum of path lengths") {
        const EdgeSet chain(4, {{0, 1}, {1, 2}, {2, 3}});
        CHECK(evaluation_budget(chain) == 7);  // paths of length 2, 2, 3
        CHECK(7 <= diameter(chain) * 3 * 2 / 2);
    }
    SECTION("bound holds on every four-node tree and larger samples") {
        for (const auto& t : enumerate_spanning_trees(4))
            CHECK(evaluation_budget(t) <= diameter(t) * 3 * 2 / 2);
        const EdgeSet balanced(7, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {2, 6}});
        CHECK(evaluation_budget(balanced) <= diameter(balanced) * 6 * 5 / 2);
    }
}

TEST_CASE("error exponent on the star model") {
    const auto model = star4(0.2);
    const SolverConfig cfg;

    SECTION("exact mode equals one dominant-pair solve") {
        const auto rep = error_exponent(model, RateMode::exact, cfg);
        CHECK(rep.evaluations == 6);
        CHECK(rep.k_p > 0.0);
        // all six pair rates agree by symmetry
        for (const auto& pr : rep.pair_rates) CHECK(pr.rate == Approx(rep.k_p).margin(1e-8));
        // one direct solve of the dominant pair reproduces the exponent
        const auto dense = model.to_dense();
        const auto direct =
            exact_rate(make_crossover_problem(dense, rep.replacement, rep.dominant_nonedge), cfg);
        CHECK(std::abs(direct.rate - rep.k_p) <= 1e-8);
        CHECK(symmetric_difference(rep.dominant_error_tree, model.structure()) == 2);
    }
    SECTION("approx mode equals the closed-form minimum") {
        const auto rep = error_exponent(model, RateMode::approx, cfg);
        const auto dense = model.to_dense();
        double expect = kInf;
        std::pair<NodePair, NodePair> argmin{{-1, -1}, {-1, -1}};
        for (const auto& ep : model.structure().non_edges()) {
            for (const auto& e : path_between(model.structure(), ep)) {
                const double r = approx_rate(make_crossover_problem(dense, e, ep));
                if (r < expect) {
                    expect = r;
                    argmin = {e, ep};
                }
            }
        }
        CHECK(rep.k_p == Approx(expect).margin(1e-15));
        CHECK(rep.pair_rates.size() == 6);
        // argmin agreement up to the symmetric ties
        bool found = false;
        for (const auto& [e, ep] : rep.co_minimal)
            if (e == argmin.first && ep == argmin.second) found = true;
        CHECK(found);
    }
}

TEST_CASE("dominant error tree differs from the truth by one edge") {
    Rng rng(515);
    for (const auto& structure : enumerate_spanning_trees(4)) {
        const auto model = example2_random_tree(structure, rng.next_u64());
        const auto rep = error_exponent(model, RateMode::approx);
        CHECK(rep.dominant_error_tree.is_spanning_tree());
        CHECK(symmetric_difference(rep.dominant_error_tree, structure) == 2);
        CHECK(rep.evaluations <= diameter(structure) * 3 * 2 / 2);
        CHECK(rep.evaluations == evaluation_budget(structure));
    }
}

TEST_CASE("positivity certificate") {
    SECTION("random spanning models are positive") {
        Rng rng(606);
        const auto trees = enumerate_spanning_trees(4);
        for (int rep = 0; rep < 100; ++rep) {
            const auto& structure = trees[static_cast<std::size_t>(rng.next_u64() % trees.size())];
            const auto model = example2_random_tree(structure, rng.next_u64());
            const auto cert = positivity_certificate(model);
            CHECK(cert.positive);
            CHECK_FALSE(cert.witness.has_value());
            CHECK_FALSE(cert.proper_forest);
        }
    }
    SECTION("independent component yields an equality witness") {
        // x0 independent of a dependent pair (x1, x2)
        const DenseJoint dep(2, Alphabet(2), {0.4, 0.1, 0.1, 0.4});
        std::vector<double> probs(8);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                    probs[static_cast<std::size_t>(a * 4 + b * 2 + c)] =
                        0.5 * dep.probs()[static_cast<std::size_t>(b * 2 + c)];
        const DenseJoint joint(3, Alphabet(2), std::move(probs));
        const auto cert = positivity_certificate(joint);
        CHECK_FALSE(cert.positive);
        REQUIRE(cert.witness.has_value());
        const auto [ep, e] = *cert.witness;
        const double mi_ep = mutual_information(marginalize(joint, std::vector<int>{ep.first, ep.second}));
        const double mi_e = mutual_information(marginalize(joint, std::vector<int>{e.first, e.second}));
        CHECK(std::abs(mi_ep - mi_e) <= 1e-10);
        CHECK(cert.proper_forest);
    }
    SECTION("star model is positive") {
        const auto cert = positivity_certificate(star4(0.2));
        CHECK(cert.positive);
        CHECK_FALSE(cert.witness.has_value());
    }
    SECTION("dependency structures derived from distributions") {
        CHECK_FALSE(is_proper_forest(star4(0.2).to_dense()));
        const std::vector<std::vector<double>> marg{{0.3, 0.7}, {0.6, 0.4}, {0.5, 0.5}};
        CHECK(is_proper_forest(product_dense(marg, 2)));
    }
    SECTION("positivity of the input distribution is required") {
        std::vector<double> probs(8, 1.0 / 7.0);
        probs[5] = 0.0;
        CHECK_THROWS_AS(positivity_certificate(DenseJoint(3, Alphabet(2), std::move(probs))),
                        NotStrictlyPositive);
    }
}

TEST_CASE("finite sample bound") {
    SECTION("prefactor arithmetic at d = 4") {
        // (d-1)^2 (d-2) / 2 = 9; with K = 0 only the polynomial term remains
        const double b1 = finite_sample_bound(0.0, 4, Alphabet(2), 100);
        const double expect = std::log(9.0) + std::lgamma(101.0 + 16.0 + 1.0) - std::lgamma(102.0) -
                              std::lgamma(17.0);
        CHECK(b1 == Approx(expect).margin(1e-10));
    }
    SECTION("decay term scales linearly in n") {
        const double b1 = finite_sample_bound(0.5, 4, Alphabet(2), 100);
        const double b0 = finite_sample_bound(0.0, 4, Alphabet(2), 100);
        CHECK(b0 - b1 == Approx(100 * 0.5).margin(1e-9));
    }
}

TEST_CASE("optimal projections") {
    SECTION("a tree distribution projects onto itself") {
        const auto model = star4(0.1);
        const auto ps = optimal_projections(model.to_dense());
        REQUIRE(ps.structures.size() == 1);
        CHECK(ps.structures.front() == model.structure());
        CHECK(ps.pi_star == Approx(0.0).margin(1e-12));
    }
    SECTION("the perturbed symmetric table has exactly two projections") {
        const auto joint = table1_distribution(0.1, 0.01);
        const auto ps = optimal_projections(joint);
        REQUIRE(ps.structures.size() == 2);
        for (const auto& s : ps.structures) CHECK(s.contains({0, 1}));
        CHECK(ps.structures[0] == EdgeSet(3, {{0, 1}, {0, 2}}));
        CHECK(ps.structures[1] == EdgeSet(3, {{0, 1}, {1, 2}}));
        CHECK(ps.pi_star > 0.0);
        // the two tied non-hub pairs carry equal mutual information
        const double i02 = mutual_information(marginalize(joint, {0, 2}));
        const double i12 = mutual_information(marginalize(joint, {1, 2}));
        CHECK(std::abs(i02 - i12) <= 1e-12);
    }
    SECTION("random non-tree distributions project uniquely") {
        Rng rng(7117);
        int singletons = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const auto dense = random_dense(3, 2, rng);
            if (optimal_projections(dense).structures.size() == 1) ++singletons;
        }
        CHECK(singletons == 100);
    }
}

TEST_CASE("generalized exponent") {
    const SolverConfig cfg;
    SECTION("reduces to the tree exponent on tree inputs") {
        Rng rng(321);
        const auto trees = enumerate_spanning_trees(4);
        for (int rep = 0; rep < 5; ++rep) {
            const auto& structure = trees[static_cast<std::size_t>(rng.next_u64() % trees.size())];
            const auto model = example2_random_tree(structure, rng.next_u64());
            const auto dense = model.to_dense();
            const auto tree_rep = error_exponent(model, RateMode::approx, cfg);
            const auto gen_rep = generalized_exponent(dense, RateMode::approx, cfg);
            CHECK(gen_rep.base.k_p == tree_rep.k_p);
            CHECK(gen_rep.base.dominant_nonedge == tree_rep.dominant_nonedge);
            CHECK(gen_rep.base.replacement == tree_rep.replacement);
            CHECK(gen_rep.base.dominant_error_tree == tree_rep.dominant_error_tree);
            CHECK(gen_rep.exclusions.empty());
            CHECK(gen_rep.infinite_nonedges.empty());
        }
    }
    SECTION("swaps between optimal structures are excluded") {
        const auto joint = table1_distribution(0.1, 0.01);
        const auto rep = generalized_exponent(joint, RateMode::approx, cfg);
        REQUIRE(rep.projections.structures.size() == 2);
        CHECK_FALSE(rep.exclusions.empty());
        // every exclusion must map one optimal structure into the other
        for (const auto& ex : rep.exclusions) {
            auto edges = ex.structure.edges();
            std::erase(edges, ex.e);
            edges.push_back(ex.eprime);
            CHECK(rep.projections.contains(EdgeSet(3, edges)));
        }
        // the dominant swap leaves the projection set
        auto edges = rep.dominant_structure.edges();
        std::erase(edges, rep.base.replacement);
        edges.push_back(rep.base.dominant_nonedge);
        CHECK_FALSE(rep.projections.contains(EdgeSet(3, edges)));
        CHECK(rep.base.k_p > 0.0);
        CHECK(std::isfinite(rep.base.k_p));
    }
    SECTION("every swap excluded leaves no error event") {
        // exchangeable three-variable distribution: all pairwise marginals are
        // the same table, all three trees tie, and every single-edge swap of
        // an optimal tree lands on another optimal tree
        const DenseJoint sym(3, Alphabet(2),
                             {0.245, 0.085, 0.085, 0.08, 0.085, 0.08, 0.08, 0.26});
        const auto ps = optimal_projections(sym);
        REQUIRE(ps.structures.size() == 3);
        CHECK_THROWS_AS(generalized_exponent(sym, RateMode::approx, cfg), ValidationError);
    }
    SECTION("fully excluded non-edges are reported with infinite rate and skipped") {
        // the exchangeable triple with an independent fourth variable: swaps
        // among the tied triangle edges are never errors, so the non-edge
        // inside the triangle is infinite for star-at-0 structures, while
        // non-edges touching the isolated node still carry finite rates
        const std::vector<double> sym{0.245, 0.085, 0.085, 0.08, 0.085, 0.08, 0.08, 0.26};
        std::vector<double> probs(16);
        for (int c = 0; c < 8; ++c)
            for (int x3 = 0; x3 < 2; ++x3)
                probs[static_cast<std::size_t>(c * 2 + x3)] = sym[static_cast<std::size_t>(c)] * 0.5;
        const DenseJoint joint(4, Alphabet(2), std::move(probs));
        const auto ps = optimal_projections(joint);
        REQUIRE(ps.structures.size() == 9);  // three tied trees x three connectors
        const auto rep = generalized_exponent(joint, RateMode::approx, cfg);
        CHECK(std::isfinite(rep.base.k_p));
        CHECK(rep.base.k_p > 0.0);
        CHECK_FALSE(rep.infinite_nonedges.empty());
        for (const auto& pr : rep.base.pair_rates) CHECK(std::isfinite(pr.rate));
    }
}
