#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace treexp {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Input could not be parsed (file format, malformed rows).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A domain invariant was violated (normalization, index range, shape).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// q places mass where the reference distribution has none.
class SupportViolation : public ValidationError {
public:
    explicit SupportViolation(const std::string& what) : ValidationError(what) {}
};

/// Operation requires a strictly positive distribution.
class NotStrictlyPositive : public ValidationError {
public:
    explicit NotStrictlyPositive(const std::string& what) : ValidationError(what) {}
};

/// Dense table would exceed the cell budget.
class TooLarge : public ValidationError {
public:
    explicit TooLarge(const std::string& what) : ValidationError(what) {}
};

/// Var(s_e' - s_e) below tolerance while the mutual informations differ;
/// the closed-form rate is outside its validity regime.
class DegenerateInfoDensity : public std::runtime_error {
public:
    explicit DegenerateInfoDensity(const std::string& what) : std::runtime_error(what) {}
};

/// Empirical table has zero cells and smoothing was not enabled.
class ZeroCellsWithoutSmoothing : public ValidationError {
public:
    explicit ZeroCellsWithoutSmoothing(const std::string& what) : ValidationError(what) {}
};

// ---------------------------------------------------------------------------
// Numeric conventions
// ---------------------------------------------------------------------------

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Normalization: inputs must sum to 1 within this tolerance to be accepted
/// as-is; constructors renormalize when within kRenormTol and reject beyond.
inline constexpr double kSumTol = 1e-12;
inline constexpr double kRenormTol = 1e-9;

/// Absolute tolerance for weight ties (MWST tie reports, projection sets).
inline constexpr double kTieTol = 1e-12;

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// All randomized code takes explicit 64-bit seeds.  Per-run seeds for
// parallel work are derived with mix(seed, index) so results do not depend
// on the worker count.  The generator and the uniform mapping are fixed
// here rather than taken from <random> distributions, whose outputs are
// implementation-defined.
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; a fixed 64-bit mixing function.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Small deterministic PRNG (xorshift-star family seeded through splitmix64).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x8f1bbcdcbfa53e0bULL)) {
        if (state_ == 0) state_ = 0x6a09e667f3bcc909ULL;
    }

    std::uint64_t next_u64() {
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in the open interval (0, 1).
    double next_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// Unordered node pair stored canonically as (min, max).
using NodePair = std::pair<int, int>;

inline NodePair make_pair_sorted(int a, int b) {
    if (a == b) throw ValidationError("node pair must join two distinct nodes");
    return a < b ? NodePair{a, b} : NodePair{b, a};
}

inline std::string pair_str(const NodePair& p) {
    return "(" + std::to_string(p.first) + "," + std::to_string(p.second) + ")";
}

}  // namespace treexp
