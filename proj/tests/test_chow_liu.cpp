#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"
#include "treexp/chow_liu.hpp"
#include "treexp/simulate.hpp"

using namespace treexp;
using namespace treexp::testutil;
using Catch::Approx;

namespace {

double sample_log_likelihood(const TreeModel& model, const SampleMatrix& samples) {
    double ll = 0.0;
    std::vector<int> x(static_cast<std::size_t>(samples.num_vars()));
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        for (int v = 0; v < samples.num_vars(); ++v) x[static_cast<std::size_t>(v)] = samples.at(r, v);
        ll += std::log(model.evaluate(x));
    }
    return ll;
}

/// Tree model with the given structure and the samples' empirical marginals.
TreeModel empirical_model_on(const EdgeSet& structure, const SampleMatrix& samples) {
    const int d = samples.num_vars();
    const int k = samples.alphabet().size();
    const double n = static_cast<double>(samples.rows());
    const auto counts = treexp::detail::pair_counts(samples);
    std::vector<std::vector<double>> node_marg(static_cast<std::size_t>(d),
                                               std::vector<double>(static_cast<std::size_t>(k), 0.0));
    for (std::size_t r = 0; r < samples.rows(); ++r)
        for (int v = 0; v < d; ++v)
            node_marg[static_cast<std::size_t>(v)][static_cast<std::size_t>(samples.at(r, v))] += 1.0 / n;
    std::map<NodePair, std::vector<double>> edge_marg;
    for (const auto& e : structure.edges()) {
        const auto& c = counts.at(e);
        std::vector<double> t(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) t[i] = static_cast<double>(c[i]) / n;
        edge_marg[e] = std::move(t);
    }
    return TreeModel::from_learned(structure, samples.alphabet(), std::move(node_marg),
                                   std::move(edge_marg));
}

}  // namespace

TEST_CASE("two-node learning returns the empirical table") {
    SampleMatrix samples(2, Alphabet(2));
    samples.push_row(std::vector<int>{0, 0});
    samples.push_row(std::vector<int>{0, 0});
    samples.push_row(std::vector<int>{1, 1});
    samples.push_row(std::vector<int>{0, 1});
    const auto res = learn(samples);
    CHECK(res.structure.edges() == std::vector<NodePair>{{0, 1}});
    const auto& tab = res.model.edge_marginal({0, 1});
    CHECK(tab[0] == Approx(0.5).margin(1e-15));
    CHECK(tab[1] == Approx(0.25).margin(1e-15));
    CHECK(tab[3] == Approx(0.25).margin(1e-15));
}

TEST_CASE("learned tree maximizes the sample log-likelihood") {
    Rng rng(777);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = trial % 2 == 0 ? 3 : 4;
        const std::size_t n = 2 + trial % 5;  // up to 6 samples
        SampleMatrix samples(d, Alphabet(2));
        std::vector<int> row(static_cast<std::size_t>(d));
        for (std::size_t r = 0; r < n; ++r) {
            for (auto& v : row) v = static_cast<int>(rng.next_u64() & 1);
            samples.push_row(row);
        }
        const auto res = learn(samples);
        const double learned_ll = sample_log_likelihood(res.model, samples);
        for (const auto& structure : enumerate_spanning_trees(d)) {
            const auto alt = empirical_model_on(structure, samples);
            const double alt_ll = sample_log_likelihood(alt, samples);
            CHECK(learned_ll >= alt_ll - 1e-10);
        }
    }
}

TEST_CASE("true mutual information weights recover the true structure") {
    Rng rng(2121);
    for (const auto& structure : enumerate_spanning_trees(4)) {
        const auto model = example2_random_tree(structure, rng.next_u64());
        const auto dense = model.to_dense();
        std::map<NodePair, double> mi;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                mi[{i, j}] = mutual_information(marginalize(dense, std::vector<int>{i, j}));
        CHECK(structure_from_mi(4, mi).tree == structure);
    }
}

TEST_CASE("structure learning is consistent on the star model") {
    const auto model = star4(0.2);
    int correct = 0;
    const int runs = 1000;
    for (int r = 0; r < runs; ++r) {
        const auto samples = model.sample(10000, mix_seed(99, static_cast<std::uint64_t>(r)));
        if (learn(samples).structure == model.structure()) ++correct;
    }
    CHECK(correct >= 999);
}

TEST_CASE("relearning from the empirical atoms is idempotent") {
    Rng rng(4242);
    SampleMatrix samples(3, Alphabet(2));
    std::vector<int> row(3);
    for (int r = 0; r < 64; ++r) {
        for (auto& v : row) v = static_cast<int>(rng.next_u64() & 1);
        samples.push_row(row);
    }
    const auto first = learn(samples);

    // feed the exact atoms of the empirical distribution back in
    const auto emp = empirical_distribution(samples);
    SampleMatrix atoms(3, Alphabet(2));
    std::vector<int> x(3);
    for (std::size_t cell = 0; cell < emp.counts.size(); ++cell) {
        std::size_t rest = cell;
        for (int v = 2; v >= 0; --v) {
            x[static_cast<std::size_t>(v)] = static_cast<int>(rest % 2);
            rest /= 2;
        }
        for (std::uint64_t c = 0; c < emp.counts[cell]; ++c) atoms.push_row(x);
    }
    const auto second = learn(atoms);
    CHECK(first.structure == second.structure);
    for (const auto& [e, tab] : first.model.edge_marginals()) {
        const auto& tab2 = second.model.edge_marginal(e);
        for (std::size_t i = 0; i < tab.size(); ++i) CHECK(tab[i] == Approx(tab2[i]).margin(1e-15));
    }
    for (const auto& [e, v] : first.mi_table) CHECK(second.mi_table.at(e) == Approx(v).margin(1e-15));
}

TEST_CASE("single sample learns a degenerate but valid result") {
    SampleMatrix samples(3, Alphabet(2));
    samples.push_row(std::vector<int>{1, 0, 1});
    const auto res = learn(samples);
    CHECK(res.structure.is_spanning_tree());
    CHECK(res.model.evaluate(std::vector<int>{1, 0, 1}) == Approx(1.0).margin(1e-12));
    // all pairwise MIs are zero and tie
    REQUIRE(res.ties.any());
    CHECK(res.ties.groups.front().size() == 3);
}

TEST_CASE("out-of-range symbols are rejected before learning") {
    SampleMatrix samples(2, Alphabet(3));
    samples.push_row(std::vector<int>{0, 2});
    CHECK_THROWS_AS(samples.push_row(std::vector<int>{0, 3}), ValidationError);
}
