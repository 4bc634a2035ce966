#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"
#include "treexp/simulate.hpp"

using namespace treexp;
using namespace treexp::testutil;
using Catch::Approx;

TEST_CASE("star model construction") {
    SECTION("parameter range enforced") {
        CHECK_THROWS_AS(star4(0.0), ValidationError);
        CHECK_THROWS_AS(star4(0.5), ValidationError);
        CHECK_THROWS_AS(star4(-0.1), ValidationError);
    }
    SECTION("all sixteen cells positive and normalized") {
        const auto dense = star4(0.2).to_dense();
        CHECK(dense.strictly_positive());
        double sum = 0.0;
        for (double p : dense.probs()) sum += p;
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
    SECTION("edge strength grows with gamma and vanishes as gamma -> 0") {
        double prev = -1.0;
        for (double g : {1e-4, 0.05, 0.1, 0.2}) {
            const auto dense = star4(g).to_dense();
            const double mi = mutual_information(marginalize(dense, {0, 1}));
            CHECK(mi > prev);
            prev = mi;
        }
        const auto tiny = star4(1e-4).to_dense();
        CHECK(mutual_information(marginalize(tiny, {0, 1})) < 1e-6);
    }
    SECTION("edges dominate non-edges and edges tie by symmetry") {
        const auto dense = star4(0.2).to_dense();
        const double i01 = mutual_information(marginalize(dense, {0, 1}));
        const double i02 = mutual_information(marginalize(dense, {0, 2}));
        const double i03 = mutual_information(marginalize(dense, {0, 3}));
        const double i12 = mutual_information(marginalize(dense, {1, 2}));
        CHECK(i01 > i12);
        CHECK(i01 == Approx(i02).margin(1e-14));
        CHECK(i01 == Approx(i03).margin(1e-14));
    }
}

TEST_CASE("symmetric star from a four-variable joint") {
    SECTION("the star model qualifies with its own marginal") {
        const auto model = star4(0.2);
        const auto q_ab = model.to_dense();  // vars (hub, leaf, leaf, leaf)
        const auto rebuilt = symmetric_star(4, q_ab);
        CHECK(rebuilt.structure() == model.structure());
        const auto dense = rebuilt.to_dense();
        const auto expect = model.to_dense();
        for (std::size_t i = 0; i < dense.probs().size(); ++i)
            CHECK(dense.probs()[i] == Approx(expect.probs()[i]).margin(1e-12));
    }
    SECTION("larger stars reuse the same pair distributions") {
        const auto q_ab = star4(0.2).to_dense();
        const auto nine = symmetric_star(9, q_ab);
        CHECK(nine.num_vars() == 9);
        CHECK(diameter(nine.structure()) == 2);
        // every edge carries the hub-leaf marginal
        const auto qa = marginalize(q_ab, {0, 1});
        for (const auto& [e, tab] : nine.edge_marginals())
            for (std::size_t i = 0; i < tab.size(); ++i)
                CHECK(tab[i] == Approx(qa.probs()[i]).margin(1e-14));
        // and every non-edge pair of the dense joint reproduces the leaf-leaf
        // marginal (checked on a 4-node sub-join for budget reasons)
        const auto sub = marginalize(star4(0.2).to_dense(), {1, 2});
        const auto qb = marginalize(q_ab, {2, 3});
        for (std::size_t i = 0; i < sub.probs().size(); ++i)
            CHECK(sub.probs()[i] == Approx(qb.probs()[i]).margin(1e-14));
    }
    SECTION("mutual information ordering is enforced") {
        // swapping the hub-leaf and leaf-leaf roles reverses the ordering
        const auto q_ab = star4(0.2).to_dense();
        std::vector<double> swapped(16);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                    for (int d2 = 0; d2 < 2; ++d2)
                        swapped[static_cast<std::size_t>(c * 8 + d2 * 4 + a * 2 + b)] =
                            q_ab.probs()[static_cast<std::size_t>(a * 8 + b * 4 + c * 2 + d2)];
        CHECK_THROWS_AS(symmetric_star(4, DenseJoint(4, Alphabet(2), swapped)), ValidationError);
    }
    SECTION("inconsistent joints are rejected") {
        Rng rng(17);
        const auto arbitrary = random_dense(4, 2, rng);
        CHECK_THROWS_AS(symmetric_star(4, arbitrary), ValidationError);
    }
}

TEST_CASE("random binary tree models") {
    Rng rng(99);
    const auto trees = enumerate_spanning_trees(4);
    SECTION("always strictly positive") {
        for (int rep = 0; rep < 100; ++rep) {
            const auto& structure = trees[static_cast<std::size_t>(rng.next_u64() % trees.size())];
            const auto model = example2_random_tree(structure, rng.next_u64());
            CHECK(model.to_dense().strictly_positive());
        }
    }
    SECTION("deterministic per seed") {
        const auto a = example2_random_tree(trees[3], 1234);
        const auto b = example2_random_tree(trees[3], 1234);
        const auto da = a.to_dense();
        const auto db = b.to_dense();
        for (std::size_t i = 0; i < da.probs().size(); ++i) CHECK(da.probs()[i] == db.probs()[i]);
        const auto c = example2_random_tree(trees[3], 1235);
        const auto dc = c.to_dense();
        bool differs = false;
        for (std::size_t i = 0; i < da.probs().size(); ++i)
            if (da.probs()[i] != dc.probs()[i]) differs = true;
        CHECK(differs);
    }
    SECTION("binary alphabet only") {
        // the generator draws Bernoulli parameters, so the structure is the
        // only degree of freedom
        const auto model = example2_random_tree(trees[0], 7);
        CHECK(model.alphabet().size() == 2);
    }
}

TEST_CASE("perturbed symmetric three-variable table") {
    SECTION("normalization identity") {
        const auto joint = table1_distribution(0.1, 0.1);
        double sum = 0.0;
        for (double p : joint.probs()) sum += p;
        CHECK(sum == Approx(1.0).margin(1e-15));
        CHECK(joint.strictly_positive());
    }
    SECTION("parameter ranges") {
        CHECK_THROWS_AS(table1_distribution(0.4, 0.1), ValidationError);
        CHECK_THROWS_AS(table1_distribution(0.1, 0.6), ValidationError);
        CHECK_THROWS_AS(table1_distribution(0.0, 0.1), ValidationError);
    }
    SECTION("closed-form strongest-pair information") {
        for (double kappa : {0.3, 0.1, 0.01}) {
            const auto joint = table1_distribution(0.1, kappa);
            const double expect = std::log(2.0) + (1 - 2 * kappa) * std::log(1 - 2 * kappa) +
                                  2 * kappa * std::log(2 * kappa);
            CHECK(mutual_information(marginalize(joint, {0, 1})) == Approx(expect).margin(1e-13));
        }
    }
    SECTION("the two weaker pairs tie for every parameter choice") {
        for (double xi : {0.05, 0.1, 0.2})
            for (double kappa : {0.3, 0.1, 0.01}) {
                const auto joint = table1_distribution(xi, kappa);
                const double i02 = mutual_information(marginalize(joint, {0, 2}));
                const double i12 = mutual_information(marginalize(joint, {1, 2}));
                CHECK(std::abs(i02 - i12) <= 1e-12);
            }
    }
}

TEST_CASE("error probability estimation") {
    const auto model = star4(0.2);
    SECTION("deterministic across reruns") {
        const SimConfig cfg{100, 2000, 77, 1};
        const auto a = estimate_error_probability(model, cfg);
        const auto b = estimate_error_probability(model, cfg);
        CHECK(a.errors == b.errors);
        CHECK(a.displaced_edges == b.displaced_edges);
    }
    SECTION("bit-identical for one and four workers") {
        SimConfig one{80, 3000, 909, 1};
        SimConfig four{80, 3000, 909, 4};
        const auto a = estimate_error_probability(model, one);
        const auto b = estimate_error_probability(model, four);
        CHECK(a.errors == b.errors);
        CHECK(a.p_hat == b.p_hat);
        CHECK(a.displaced_edges == b.displaced_edges);
    }
    SECTION("no errors at consistency scale") {
        const SimConfig cfg{100000, 100, 4242, 4};
        const auto res = estimate_error_probability(model, cfg);
        CHECK(res.errors == 0);
        CHECK(res.p_hat == 0.0);
        CHECK(std::isinf(res.simulated_rate));
        CHECK(res.insufficient_runs);
    }
    SECTION("single-sample runs collapse to the tie-break tree") {
        // with one sample every empirical mutual information is zero, so the
        // learner returns the lexicographically smallest tree every time
        const EdgeSet chain(4, {{0, 1}, {1, 2}, {2, 3}});
        const auto chain_model = example2_random_tree(chain, 5);
        const SimConfig cfg{1, 500, 3, 1};
        const auto a = estimate_error_probability(chain_model, cfg);
        const auto b = estimate_error_probability(chain_model, cfg);
        CHECK(a.errors == b.errors);
        CHECK(a.p_hat == 1.0);  // the tie-break star never matches the chain
        const auto c = estimate_error_probability(model, cfg);
        CHECK(c.p_hat == 0.0);  // while the star is the tie-break winner itself
    }
    SECTION("erroneous structures are mostly single-edge swaps at scale") {
        const SimConfig cfg{250, 20000, 11, 4};
        const auto res = estimate_error_probability(model, cfg);
        REQUIRE(res.errors > 0);
        std::uint64_t erroneous = 0;
        for (const auto& [k, v] : res.displaced_edges)
            if (k > 0) erroneous += v;
        CHECK(erroneous == res.errors);
        std::uint64_t modal = 0;
        int modal_k = -1;
        for (const auto& [k, v] : res.displaced_edges) {
            if (k > 0 && v > modal) {
                modal = v;
                modal_k = k;
            }
        }
        CHECK(modal_k == 1);
    }
    SECTION("run caps enforced") {
        CHECK_THROWS_AS(estimate_error_probability(model, SimConfig{10, 20000001, 1, 1}),
                        ValidationError);
    }
}

TEST_CASE("generalized error probability estimation") {
    SECTION("tree inputs reduce to plain structure comparison") {
        const auto model = star4(0.2);
        const auto dense = model.to_dense();
        const SimConfig cfg{60, 1500, 21, 2};
        const auto gen = estimate_generalized_error_probability(dense, cfg);
        // replay the same protocol by hand: singleton projection set means the
        // error event is exactly {learned != truth}
        std::uint64_t errors = 0;
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            const auto samples = sample_dense(dense, cfg.n, mix_seed(cfg.seed, r));
            if (!(learn(samples).structure == model.structure())) ++errors;
        }
        CHECK(gen.errors == errors);
    }
    SECTION("either optimal structure counts as success") {
        const auto joint = table1_distribution(0.1, 0.01);
        const SimConfig cfg{2000, 1000, 5, 2};
        const auto res = estimate_generalized_error_probability(joint, cfg);
        // learning lands on one of the two tied structures almost always
        CHECK(res.p_hat < 0.05);
    }
    SECTION("error probability decreases with n") {
        const auto joint = table1_distribution(0.3, 0.3);
        std::vector<double> ps;
        for (std::size_t n : {std::size_t{20}, std::size_t{100}, std::size_t{1000}}) {
            const SimConfig cfg{n, 2000, 31, 2};
            ps.push_back(estimate_generalized_error_probability(joint, cfg).p_hat);
        }
        CHECK(ps[0] > ps[2]);
        CHECK(ps[0] >= ps[1]);
        CHECK(ps[1] >= ps[2]);
        CHECK(ps[0] > 0.0);
    }
}
