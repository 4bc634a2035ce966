#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "treexp/common.hpp"

namespace treexp {

/// Finite symbol set {0, ..., size-1}.
class Alphabet {
public:
    explicit Alphabet(int size) : size_(size) {
        if (size < 2) throw ValidationError("alphabet size must be at least 2");
    }
    int size() const { return size_; }
    bool operator==(const Alphabet&) const = default;

private:
    int size_;
};

namespace detail {

inline std::size_t pow_size(int base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) {
        if (r > (std::size_t{1} << 56) / static_cast<std::size_t>(base))
            throw TooLarge("probability table too large");
        r *= static_cast<std::size_t>(base);
    }
    return r;
}

/// x log x with the 0 log 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

/// Explicit joint probability table over X^d, row-major in variable order
/// (variable 0 has the largest stride).  Immutable after construction.
class DenseJoint {
public:
    DenseJoint(int num_vars, Alphabet alphabet, std::vector<double> probs)
        : num_vars_(num_vars), alphabet_(alphabet), probs_(std::move(probs)) {
        if (num_vars < 1) throw ValidationError("need at least one variable");
        const std::size_t expect = detail::pow_size(alphabet_.size(), num_vars_);
        if (probs_.size() != expect)
            throw ValidationError("table has " + std::to_string(probs_.size()) +
                                  " cells, expected " + std::to_string(expect));
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0))  // also rejects NaN
                throw ValidationError("probabilities must be nonnegative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRenormTol)
            throw ValidationError("table sums to " + std::to_string(sum) + ", not 1");
        if (std::abs(sum - 1.0) > kSumTol) {
            for (double& p : probs_) p /= sum;
        }
        strictly_positive_ = std::all_of(probs_.begin(), probs_.end(),
                                         [](double p) { return p > 0.0; });
    }

    int num_vars() const { return num_vars_; }
    const Alphabet& alphabet() const { return alphabet_; }
    std::size_t table_size() const { return probs_.size(); }
    const std::vector<double>& probs() const { return probs_; }
    bool strictly_positive() const { return strictly_positive_; }

    std::size_t index_of(std::span<const int> x) const {
        if (static_cast<int>(x.size()) != num_vars_)
            throw ValidationError("outcome has wrong arity");
        std::size_t idx = 0;
        for (int v = 0; v < num_vars_; ++v) {
            if (x[v] < 0 || x[v] >= alphabet_.size())
                throw ValidationError("symbol out of range");
            idx = idx * static_cast<std::size_t>(alphabet_.size()) + static_cast<std::size_t>(x[v]);
        }
        return idx;
    }

    double at(std::span<const int> x) const { return probs_[index_of(x)]; }

private:
    int num_vars_;
    Alphabet alphabet_;
    std::vector<double> probs_;
    bool strictly_positive_;
};

/// Sum out all variables not in `keep`; result variable order follows `keep`.
inline DenseJoint marginalize(const DenseJoint& joint, std::span<const int> keep) {
    const int d = joint.num_vars();
    const int k = joint.alphabet().size();
    if (keep.empty()) throw ValidationError("keep set must be nonempty");
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    for (int v : keep) {
        if (v < 0 || v >= d) throw ValidationError("invalid variable index in keep set");
        if (seen[static_cast<std::size_t>(v)]) throw ValidationError("duplicate index in keep set");
        seen[static_cast<std::size_t>(v)] = true;
    }
    const int m = static_cast<int>(keep.size());
    std::vector<double> out(detail::pow_size(k, m), 0.0);

    // stride of source variable v in the flat table
    std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
    for (int v = d - 2; v >= 0; --v)
        stride[static_cast<std::size_t>(v)] = stride[static_cast<std::size_t>(v) + 1] * static_cast<std::size_t>(k);

    const auto& src = joint.probs();
    std::vector<int> digit(static_cast<std::size_t>(d), 0);
    for (std::size_t cell = 0; cell < src.size(); ++cell) {
        std::size_t rest = cell;
        for (int v = d - 1; v >= 0; --v) {
            digit[static_cast<std::size_t>(v)] = static_cast<int>(rest % static_cast<std::size_t>(k));
            rest /= static_cast<std::size_t>(k);
        }
        std::size_t dst = 0;
        for (int j = 0; j < m; ++j)
            dst = dst * static_cast<std::size_t>(k) + static_cast<std::size_t>(digit[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])]);
        out[dst] += src[cell];
    }
    return DenseJoint(m, joint.alphabet(), std::move(out));
}

inline DenseJoint marginalize(const DenseJoint& joint, std::initializer_list<int> keep) {
    return marginalize(joint, std::span<const int>(keep.begin(), keep.size()));
}

/// Shannon entropy in nats, 0 log 0 = 0.
inline double entropy(const DenseJoint& p) {
    double h = 0.0;
    for (double pi : p.probs()) h -= detail::xlogx(pi);
    return h;
}

/// Mutual information of a two-variable joint, in nats.
inline double mutual_information(const DenseJoint& pair) {
    if (pair.num_vars() != 2) throw ValidationError("mutual_information needs a 2-variable joint");
    const int k = pair.alphabet().size();
    const auto& p = pair.probs();
    std::vector<double> pi(static_cast<std::size_t>(k), 0.0), pj(static_cast<std::size_t>(k), 0.0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double v = p[static_cast<std::size_t>(a * k + b)];
            pi[static_cast<std::size_t>(a)] += v;
            pj[static_cast<std::size_t>(b)] += v;
        }
    double mi = 0.0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double v = p[static_cast<std::size_t>(a * k + b)];
            if (v > 0.0) mi += v * std::log(v / (pi[static_cast<std::size_t>(a)] * pj[static_cast<std::size_t>(b)]));
        }
    return std::max(mi, 0.0);
}

/// D(q || p) in nats.  Throws SupportViolation where q > 0 and p = 0.
inline double kl_divergence(const DenseJoint& q, const DenseJoint& p) {
    if (q.num_vars() != p.num_vars() || q.alphabet().size() != p.alphabet().size())
        throw ValidationError("kl_divergence requires identically shaped tables");
    const auto& qv = q.probs();
    const auto& pv = p.probs();
    double d = 0.0;
    for (std::size_t i = 0; i < qv.size(); ++i) {
        if (qv[i] > 0.0) {
            if (pv[i] <= 0.0)
                throw SupportViolation("q has mass outside the support of p");
            d += qv[i] * std::log(qv[i] / pv[i]);
        }
    }
    return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Pair joints and information densities
// ---------------------------------------------------------------------------

/// Joint distribution on the 3 or 4 distinct nodes spanned by a node-pair
/// pair (e, e'); the table is over `vars` in listed order.
struct PairJoint {
    std::vector<int> vars;  // global node ids
    DenseJoint table;       // 3- or 4-variable joint

    bool share_flag() const { return vars.size() == 3; }
};

inline PairJoint make_pair_joint(const DenseJoint& joint, std::span<const int> vars) {
    if (vars.size() != 3 && vars.size() != 4)
        throw ValidationError("a pair joint spans 3 or 4 variables");
    return PairJoint{std::vector<int>(vars.begin(), vars.end()), marginalize(joint, vars)};
}

/// Positions (indices into PairJoint::vars) of a sub-pair.
using SubPair = std::pair<int, int>;

/// Pointwise log P_e(x_e) / (P_i(x_i) P_j(x_j)) lifted to the pair joint's
/// outcome space; one entry per joint outcome, in nats.  Its expectation
/// under the pair joint is the mutual information of the e-marginal.
inline std::vector<double> information_density(const PairJoint& pj, SubPair which) {
    const int m = pj.table.num_vars();
    const int k = pj.table.alphabet().size();
    if (which.first < 0 || which.first >= m || which.second < 0 || which.second >= m ||
        which.first == which.second)
        throw ValidationError("invalid sub-pair positions");
    const int keep[2] = {which.first, which.second};
    const DenseJoint sub = marginalize(pj.table, std::span<const int>(keep, 2));
    const auto& s2 = sub.probs();
    std::vector<double> pi(static_cast<std::size_t>(k), 0.0), pj2(static_cast<std::size_t>(k), 0.0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            pi[static_cast<std::size_t>(a)] += s2[static_cast<std::size_t>(a * k + b)];
            pj2[static_cast<std::size_t>(b)] += s2[static_cast<std::size_t>(a * k + b)];
        }
    std::vector<double> dens(static_cast<std::size_t>(k * k), 0.0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double num = s2[static_cast<std::size_t>(a * k + b)];
            const double den = pi[static_cast<std::size_t>(a)] * pj2[static_cast<std::size_t>(b)];
            if (den <= 0.0)
                throw ValidationError("information density undefined on zero marginals");
            // num = 0 cells carry no mass under the pair joint; log 0 = -inf there
            dens[static_cast<std::size_t>(a * k + b)] = num > 0.0 ? std::log(num / den) : -kInf;
        }

    // lift the k*k pairwise densities to the full outcome space
    std::vector<double> out(pj.table.table_size());
    std::vector<int> digit(static_cast<std::size_t>(m), 0);
    for (std::size_t cell = 0; cell < out.size(); ++cell) {
        std::size_t rest = cell;
        for (int v = m - 1; v >= 0; --v) {
            digit[static_cast<std::size_t>(v)] = static_cast<int>(rest % static_cast<std::size_t>(k));
            rest /= static_cast<std::size_t>(k);
        }
        out[cell] = dens[static_cast<std::size_t>(digit[static_cast<std::size_t>(which.first)] * k +
                                                  digit[static_cast<std::size_t>(which.second)])];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Samples and empirical distributions
// ---------------------------------------------------------------------------

/// n rows of d symbols each, stored flat.  Symbols are validated against the
/// alphabet at construction.
class SampleMatrix {
public:
    SampleMatrix(int num_vars, Alphabet alphabet)
        : num_vars_(num_vars), alphabet_(alphabet) {
        if (num_vars < 1) throw ValidationError("need at least one variable");
    }

    void push_row(std::span<const int> row) {
        if (static_cast<int>(row.size()) != num_vars_)
            throw ValidationError("sample row has wrong arity");
        for (int s : row) {
            if (s < 0 || s >= alphabet_.size())
                throw ValidationError("symbol out of range in sample row");
            cells_.push_back(static_cast<std::uint8_t>(s));
        }
        ++rows_;
    }

    /// Append without per-symbol validation; for internal samplers.
    void push_row_unchecked(std::span<const std::uint8_t> row) {
        cells_.insert(cells_.end(), row.begin(), row.end());
        ++rows_;
    }

    std::size_t rows() const { return rows_; }
    int num_vars() const { return num_vars_; }
    const Alphabet& alphabet() const { return alphabet_; }

    int at(std::size_t r, int v) const {
        return static_cast<int>(cells_[r * static_cast<std::size_t>(num_vars_) + static_cast<std::size_t>(v)]);
    }

    std::span<const std::uint8_t> row(std::size_t r) const {
        return {cells_.data() + r * static_cast<std::size_t>(num_vars_), static_cast<std::size_t>(num_vars_)};
    }

    /// New matrix keeping the listed columns, in order.
    SampleMatrix select_columns(std::span<const int> cols) const {
        SampleMatrix out(static_cast<int>(cols.size()), alphabet_);
        std::vector<std::uint8_t> row_buf(cols.size());
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t j = 0; j < cols.size(); ++j) {
                const int c = cols[j];
                if (c < 0 || c >= num_vars_) throw ValidationError("invalid column index");
                row_buf[j] = cells_[r * static_cast<std::size_t>(num_vars_) + static_cast<std::size_t>(c)];
            }
            out.push_row_unchecked(row_buf);
        }
        return out;
    }

private:
    int num_vars_;
    Alphabet alphabet_;
    std::size_t rows_ = 0;
    std::vector<std::uint8_t> cells_;
};

/// Integer outcome counts; normalized counts form the type (empirical
/// distribution) of the sample set.
struct EmpiricalCounts {
    int num_vars;
    Alphabet alphabet;
    std::vector<std::uint64_t> counts;
    std::uint64_t n;

    DenseJoint normalized() const {
        if (n == 0) throw ValidationError("empty sample set");
        std::vector<double> p(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            p[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
        return DenseJoint(num_vars, alphabet, std::move(p));
    }
};

inline EmpiricalCounts empirical_distribution(const SampleMatrix& samples) {
    if (samples.rows() == 0) throw ValidationError("empty sample set");
    const int d = samples.num_vars();
    const int k = samples.alphabet().size();
    EmpiricalCounts ec{d, samples.alphabet(),
                       std::vector<std::uint64_t>(detail::pow_size(k, d), 0), samples.rows()};
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        std::size_t idx = 0;
        const auto row = samples.row(r);
        for (int v = 0; v < d; ++v)
            idx = idx * static_cast<std::size_t>(k) + row[static_cast<std::size_t>(v)];
        ++ec.counts[idx];
    }
    return ec;
}

}  // namespace treexp
