#pragma once

#include <vector>

#include "treexp/common.hpp"
#include "treexp/dist.hpp"

namespace treexp::testutil {

/// Strictly positive random distribution (Dirichlet(1) via exponential spacings).
inline DenseJoint random_dense(int num_vars, int k, Rng& rng) {
    std::size_t cells = 1;
    for (int i = 0; i < num_vars; ++i) cells *= static_cast<std::size_t>(k);
    std::vector<double> p(cells);
    double sum = 0.0;
    for (auto& v : p) {
        v = -std::log(rng.next_open());
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return DenseJoint(num_vars, Alphabet(k), std::move(p));
}

inline DenseJoint uniform_dense(int num_vars, int k) {
    std::size_t cells = 1;
    for (int i = 0; i < num_vars; ++i) cells *= static_cast<std::size_t>(k);
    return DenseJoint(num_vars, Alphabet(k),
                      std::vector<double>(cells, 1.0 / static_cast<double>(cells)));
}

/// Product of independent single-variable distributions.
inline DenseJoint product_dense(const std::vector<std::vector<double>>& marginals, int k) {
    const int d = static_cast<int>(marginals.size());
    std::size_t cells = 1;
    for (int i = 0; i < d; ++i) cells *= static_cast<std::size_t>(k);
    std::vector<double> p(cells, 1.0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::size_t rest = cell;
        for (int v = d - 1; v >= 0; --v) {
            p[cell] *= marginals[static_cast<std::size_t>(v)][rest % static_cast<std::size_t>(k)];
            rest /= static_cast<std::size_t>(k);
        }
    }
    return DenseJoint(d, Alphabet(k), std::move(p));
}

}  // namespace treexp::testutil
