#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "treexp/dist.hpp"
#include "treexp/lbfgs.hpp"

namespace treexp {

/// The pairwise marginal data and labels for one crossover-rate computation:
/// which sub-pair of the pair joint plays the edge e and which the
/// non-edge e'.
struct CrossoverProblem {
    PairJoint pair;
    SubPair e_pos;
    SubPair eprime_pos;
};

/// Extract the crossover problem for node pairs (e, e') from a full joint.
/// The pair joint is over the distinct nodes of e then e'; when the pairs
/// share a node the table has 3 variables, otherwise 4.
inline CrossoverProblem make_crossover_problem(const DenseJoint& joint, NodePair e, NodePair eprime) {
    e = make_pair_sorted(e.first, e.second);
    eprime = make_pair_sorted(eprime.first, eprime.second);
    if (e == eprime) throw ValidationError("e and e' must be distinct node pairs");
    std::vector<int> vars{e.first, e.second};
    for (int v : {eprime.first, eprime.second})
        if (v != e.first && v != e.second) vars.push_back(v);
    auto pos_of = [&vars](int node) {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == node) return static_cast<int>(i);
        throw ValidationError("node not present in pair joint");
    };
    PairJoint pj = make_pair_joint(joint, vars);
    return CrossoverProblem{std::move(pj), SubPair{0, 1},
                            SubPair{pos_of(eprime.first), pos_of(eprime.second)}};
}

struct SolverConfig {
    int restarts = 20;
    double constraint_tol = 1e-8;   // |I(Q*_e') - I(Q*_e)| at convergence
    double objective_tol = 1e-10;   // stationarity of the inner minimization
    double var_tol = 1e-12;         // degenerate Var(s_e' - s_e) threshold
    double mi_equal_tol = 1e-12;    // treat I(P_e) = I(P_e') as already feasible
    double penalty_init = 1.0;
    double penalty_growth = 10.0;
    int penalty_stages = 6;
    int max_inner_iterations = 600;
    int polish_iterations = 10;
    std::uint64_t seed = 0x7265737461727473ULL;
    bool smoothing = false;  // empirical rates: add 1/(2n) to zero-celled tables
};

struct RestartSummary {
    double best_objective = kInf;
    double worst_converged_objective = kInf;
    double spread = 0.0;  // worst_converged - best among converged restarts
    int converged_count = 0;
};

struct CrossoverOutcome {
    double rate;
    DenseJoint q_star;
    double constraint_residual;
    int restarts_used;
    bool converged;
    RestartSummary objective_summary;
};

/// Thrown when no restart satisfies the constraint tolerance; carries the
/// best candidate found.
class SolverNonConvergence : public std::runtime_error {
public:
    SolverNonConvergence(const std::string& what, CrossoverOutcome best)
        : std::runtime_error(what), best_candidate(std::move(best)) {}
    CrossoverOutcome best_candidate;
};

namespace detail {

/// Workspace for the constrained minimization
///     min D(Q || P)  s.t.  I(Q_e') = I(Q_e)
/// over the simplex on the pair joint's outcome space.  Q is parameterized
/// through a softmax map from free reals, which keeps iterates strictly
/// positive; the equality constraint is handled by quadratic-penalty
/// continuation and a final Newton polish along its gradient.
class CrossoverSolver {
public:
    explicit CrossoverSolver(const CrossoverProblem& problem)
        : p_(problem.pair.table.probs()), k_(problem.pair.table.alphabet().size()) {
        const int m = problem.pair.table.num_vars();
        n_ = p_.size();
        map_e_.resize(n_);
        map_ep_.resize(n_);
        std::vector<int> digit(static_cast<std::size_t>(m));
        for (std::size_t cell = 0; cell < n_; ++cell) {
            std::size_t rest = cell;
            for (int v = m - 1; v >= 0; --v) {
                digit[static_cast<std::size_t>(v)] = static_cast<int>(rest % static_cast<std::size_t>(k_));
                rest /= static_cast<std::size_t>(k_);
            }
            map_e_[cell] = digit[static_cast<std::size_t>(problem.e_pos.first)] * k_ +
                           digit[static_cast<std::size_t>(problem.e_pos.second)];
            map_ep_[cell] = digit[static_cast<std::size_t>(problem.eprime_pos.first)] * k_ +
                            digit[static_cast<std::size_t>(problem.eprime_pos.second)];
        }
        pe_.resize(static_cast<std::size_t>(k_ * k_));
        pep_.resize(static_cast<std::size_t>(k_ * k_));
        se_.resize(static_cast<std::size_t>(k_ * k_));
        sep_.resize(static_cast<std::size_t>(k_ * k_));
        ri_.resize(static_cast<std::size_t>(k_));
        ci_.resize(static_cast<std::size_t>(k_));
        q_.resize(n_);
    }

    std::size_t dim() const { return n_; }

    /// Softmax map; writes q_ and returns nothing.  Guarded against overflow.
    void to_simplex(const std::vector<double>& theta) {
        double mx = theta[0];
        for (double t : theta) mx = std::max(mx, t);
        double z = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            q_[i] = std::exp(theta[i] - mx);
            z += q_[i];
        }
        for (std::size_t i = 0; i < n_; ++i) q_[i] = std::max(q_[i] / z, 1e-300);
    }

    /// Statistics of the current q_: KL objective, constraint value
    /// g = I(q_e') - I(q_e), and their gradients with respect to theta.
    struct Stats {
        double objective;
        double constraint;
        double mi_e;
        double mi_ep;
    };

    Stats stats(std::vector<double>* grad_obj, std::vector<double>* grad_con) {
        std::fill(pe_.begin(), pe_.end(), 0.0);
        std::fill(pep_.begin(), pep_.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            pe_[static_cast<std::size_t>(map_e_[i])] += q_[i];
            pep_[static_cast<std::size_t>(map_ep_[i])] += q_[i];
        }
        const double mi_e = pair_mi(pe_, se_);
        const double mi_ep = pair_mi(pep_, sep_);
        double d = 0.0;
        for (std::size_t i = 0; i < n_; ++i) d += q_[i] * std::log(q_[i] / p_[i]);
        const double g = mi_ep - mi_e;
        if (grad_obj) {
            grad_obj->resize(n_);
            grad_con->resize(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                const double lo = std::log(q_[i] / p_[i]);
                (*grad_obj)[i] = q_[i] * (lo - d);
                const double ds = sep_[static_cast<std::size_t>(map_ep_[i])] -
                                  se_[static_cast<std::size_t>(map_e_[i])];
                (*grad_con)[i] = q_[i] * (ds - g);
            }
        }
        return Stats{d, g, mi_e, mi_ep};
    }

    const std::vector<double>& q() const { return q_; }

private:
    /// MI of a k*k table and its information densities (log p/(p_i p_j)).
    double pair_mi(const std::vector<double>& tab, std::vector<double>& dens) {
        std::fill(ri_.begin(), ri_.end(), 0.0);
        std::fill(ci_.begin(), ci_.end(), 0.0);
        for (int a = 0; a < k_; ++a)
            for (int b = 0; b < k_; ++b) {
                ri_[static_cast<std::size_t>(a)] += tab[static_cast<std::size_t>(a * k_ + b)];
                ci_[static_cast<std::size_t>(b)] += tab[static_cast<std::size_t>(a * k_ + b)];
            }
        double mi = 0.0;
        for (int a = 0; a < k_; ++a)
            for (int b = 0; b < k_; ++b) {
                const std::size_t idx = static_cast<std::size_t>(a * k_ + b);
                const double v = std::max(tab[idx], 1e-300);
                dens[idx] = std::log(v / (ri_[static_cast<std::size_t>(a)] * ci_[static_cast<std::size_t>(b)]));
                mi += tab[idx] * dens[idx];
            }
        return mi;
    }

    std::vector<double> p_;
    int k_;
    std::size_t n_ = 0;
    std::vector<int> map_e_, map_ep_;
    std::vector<double> pe_, pep_, se_, sep_, q_;
    std::vector<double> ri_, ci_;
};

struct RestartResult {
    double objective = kInf;
    double residual = kInf;
    bool converged = false;
    std::vector<double> q;
};

inline RestartResult solve_one_start(CrossoverSolver& solver, std::vector<double> theta,
                                     const SolverConfig& cfg) {
    LbfgsOptions opt;
    opt.max_iterations = cfg.max_inner_iterations;
    opt.grad_tol = std::min(1e-11, cfg.objective_tol);

    std::vector<double> go, gc;
    double mu = cfg.penalty_init;
    bool inner_ok = false;
    for (int stage = 0; stage < cfg.penalty_stages; ++stage) {
        auto fg = [&](const std::vector<double>& th, std::vector<double>& grad) {
            solver.to_simplex(th);
            const auto st = solver.stats(&go, &gc);
            grad.resize(th.size());
            for (std::size_t i = 0; i < th.size(); ++i)
                grad[i] = go[i] + 2.0 * mu * st.constraint * gc[i];
            return st.objective + mu * st.constraint * st.constraint;
        };
        auto r = minimize_lbfgs(fg, std::move(theta), opt);
        theta = std::move(r.x);
        inner_ok = r.converged;
        mu *= cfg.penalty_growth;
    }

    // Newton polish: one-dimensional steps along the constraint gradient
    // direction to drive |g| to zero with negligible objective change.
    for (int it = 0; it < cfg.polish_iterations; ++it) {
        solver.to_simplex(theta);
        const auto st = solver.stats(&go, &gc);
        if (std::abs(st.constraint) < 1e-13) break;
        double denom = 0.0;
        for (double v : gc) denom += v * v;
        if (denom <= 0.0) break;
        const double step = st.constraint / denom;
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= step * gc[i];
    }

    solver.to_simplex(theta);
    const auto st = solver.stats(nullptr, nullptr);
    RestartResult out;
    out.objective = st.objective;
    out.residual = std::abs(st.constraint);
    out.converged = inner_ok && out.residual <= cfg.constraint_tol;
    out.q = solver.q();
    return out;
}

}  // namespace detail

/// Exact crossover rate: the constrained KL minimization solved by softmax
/// reparameterization, quadratic-penalty continuation (x`penalty_growth`
/// per stage) and multi-start.  Starting points: the pair joint itself, the
/// uniform distribution (always feasible), and seeded Dirichlet(1) draws.
/// The best converged restart wins, ordered by (objective, restart index).
inline CrossoverOutcome exact_rate(const CrossoverProblem& problem, const SolverConfig& cfg = {}) {
    if (!problem.pair.table.strictly_positive())
        throw NotStrictlyPositive("exact_rate requires a strictly positive pair joint");

    detail::CrossoverSolver solver(problem);
    const std::size_t n = solver.dim();
    const auto& p = problem.pair.table.probs();

    // already feasible: the minimizing distribution is the pair joint
    {
        const int keep_e[2] = {problem.e_pos.first, problem.e_pos.second};
        const int keep_ep[2] = {problem.eprime_pos.first, problem.eprime_pos.second};
        const double mi_e = mutual_information(marginalize(problem.pair.table, std::span<const int>(keep_e, 2)));
        const double mi_ep = mutual_information(marginalize(problem.pair.table, std::span<const int>(keep_ep, 2)));
        if (std::abs(mi_e - mi_ep) <= cfg.mi_equal_tol)
            return CrossoverOutcome{0.0, problem.pair.table, std::abs(mi_e - mi_ep), 0, true,
                                    RestartSummary{0.0, 0.0, 0.0, 0}};
    }

    Rng rng(cfg.seed);
    std::vector<detail::RestartResult> results;
    results.reserve(static_cast<std::size_t>(cfg.restarts));
    for (int t = 0; t < cfg.restarts; ++t) {
        std::vector<double> theta(n);
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) theta[i] = std::log(p[i]);
        } else if (t == 1) {
            std::fill(theta.begin(), theta.end(), 0.0);  // uniform, always feasible
        } else {
            // Dirichlet(1): exponential spacings, in log space
            for (std::size_t i = 0; i < n; ++i)
                theta[i] = std::log(-std::log(rng.next_open()));
        }
        results.push_back(detail::solve_one_start(solver, std::move(theta), cfg));
    }

    RestartSummary summary;
    int best_idx = -1;
    for (int t = 0; t < cfg.restarts; ++t) {
        const auto& r = results[static_cast<std::size_t>(t)];
        if (!r.converged) continue;
        ++summary.converged_count;
        if (best_idx < 0 || r.objective < results[static_cast<std::size_t>(best_idx)].objective)
            best_idx = t;
    }
    if (best_idx < 0) {
        // best effort by residual, then objective
        int fallback = 0;
        for (int t = 1; t < cfg.restarts; ++t)
            if (results[static_cast<std::size_t>(t)].residual <
                results[static_cast<std::size_t>(fallback)].residual)
                fallback = t;
        const auto& r = results[static_cast<std::size_t>(fallback)];
        CrossoverOutcome best{r.objective,
                              DenseJoint(problem.pair.table.num_vars(), problem.pair.table.alphabet(),
                                         r.q),
                              r.residual, cfg.restarts, false, summary};
        throw SolverNonConvergence("no restart met the constraint tolerance", std::move(best));
    }

    summary.best_objective = results[static_cast<std::size_t>(best_idx)].objective;
    summary.worst_converged_objective = summary.best_objective;
    for (const auto& r : results)
        if (r.converged)
            summary.worst_converged_objective = std::max(summary.worst_converged_objective, r.objective);
    summary.spread = summary.worst_converged_objective - summary.best_objective;

    DenseJoint q_star(problem.pair.table.num_vars(), problem.pair.table.alphabet(),
                      results[static_cast<std::size_t>(best_idx)].q);
    const double rate = kl_divergence(q_star, problem.pair.table);  // rate == D(q* || P) by construction
    return CrossoverOutcome{rate, std::move(q_star),
                            results[static_cast<std::size_t>(best_idx)].residual, cfg.restarts, true,
                            summary};
}

/// Inverse-variance weighting factor computed through the 2x2 least-squares
/// system: psi = [(L K^-1 L^T)^-1]_11 with L = [s_e' - s_e ; 1] and
/// K^-1 = diag(P).  Equals 1 / Var(s_e' - s_e); kept as an independent
/// algebraic route for cross-checking.
inline double psi_weighting(const CrossoverProblem& problem) {
    if (!problem.pair.table.strictly_positive())
        throw NotStrictlyPositive("psi_weighting requires a strictly positive pair joint");
    const auto se = information_density(problem.pair, problem.e_pos);
    const auto sep = information_density(problem.pair, problem.eprime_pos);
    const auto& p = problem.pair.table.probs();
    // M = L diag(p) L^T, rows of L: (s_e' - s_e), all-ones
    double m11 = 0.0, m12 = 0.0, m22 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double ds = sep[i] - se[i];
        m11 += p[i] * ds * ds;
        m12 += p[i] * ds;
        m22 += p[i];
    }
    const double det = m11 * m22 - m12 * m12;
    if (det <= 0.0) throw DegenerateInfoDensity("singular least-squares system");
    return m22 / det;  // (1,1) entry of the 2x2 inverse
}

/// Euclidean (SNR) approximation of the crossover rate:
/// (I(P_e') - I(P_e))^2 / (2 Var(s_e' - s_e)), expectations under the pair
/// joint.  Symmetric in e and e'.
inline double approx_rate(const CrossoverProblem& problem, double var_tol = 1e-12) {
    if (!problem.pair.table.strictly_positive())
        throw NotStrictlyPositive("approx_rate requires a strictly positive pair joint");
    const auto se = information_density(problem.pair, problem.e_pos);
    const auto sep = information_density(problem.pair, problem.eprime_pos);
    const auto& p = problem.pair.table.probs();
    double mean = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) mean += p[i] * (sep[i] - se[i]);
    double var = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double c = (sep[i] - se[i]) - mean;
        var += p[i] * c * c;
    }
    // mean = I(P_e') - I(P_e); a vanishing numerator dominates a degenerate variance
    if (var < var_tol) {
        if (std::abs(mean) <= 1e-12) return 0.0;
        throw DegenerateInfoDensity("Var(s_e' - s_e) below tolerance with distinct mutual informations");
    }
    return (mean * mean) / (2.0 * var);
}

/// eps-very-noisy test: L-infinity distance between the two pairwise
/// marginals of the pair joint below eps.
inline bool is_very_noisy(const CrossoverProblem& problem, double eps) {
    const int keep_e[2] = {problem.e_pos.first, problem.e_pos.second};
    const int keep_ep[2] = {problem.eprime_pos.first, problem.eprime_pos.second};
    const auto pe = marginalize(problem.pair.table, std::span<const int>(keep_e, 2));
    const auto pep = marginalize(problem.pair.table, std::span<const int>(keep_ep, 2));
    double linf = 0.0;
    for (std::size_t i = 0; i < pe.probs().size(); ++i)
        linf = std::max(linf, std::abs(pe.probs()[i] - pep.probs()[i]));
    return linf < eps;
}

/// Plug-in crossover rate: exact_rate applied to the empirical pair joint of
/// the given samples (columns = the pair joint's variables, in order).
/// Zero cells require cfg.smoothing, which adds 1/(2n) per cell and
/// renormalizes.
inline CrossoverOutcome empirical_rate(const SampleMatrix& samples, SubPair e_pos, SubPair eprime_pos,
                                       const SolverConfig& cfg = {}) {
    if (samples.rows() == 0) throw ValidationError("empty sample set");
    if (samples.num_vars() != 3 && samples.num_vars() != 4)
        throw ValidationError("empirical_rate expects samples restricted to the 3 or 4 pair variables");
    const EmpiricalCounts counts = empirical_distribution(samples);
    std::vector<double> probs(counts.counts.size());
    bool has_zero = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = static_cast<double>(counts.counts[i]);
        if (counts.counts[i] == 0) has_zero = true;
    }
    double total = static_cast<double>(counts.n);
    if (has_zero) {
        if (!cfg.smoothing)
            throw ZeroCellsWithoutSmoothing(
                "empirical pair joint has zero cells; enable smoothing or draw more samples");
        const double eta = 1.0 / (2.0 * static_cast<double>(counts.n));
        for (double& c : probs) c += eta;
        total += eta * static_cast<double>(probs.size());
    }
    for (double& c : probs) c /= total;

    std::vector<int> vars(static_cast<std::size_t>(samples.num_vars()));
    for (std::size_t i = 0; i < vars.size(); ++i) vars[i] = static_cast<int>(i);
    CrossoverProblem prob{PairJoint{vars, DenseJoint(samples.num_vars(), samples.alphabet(), std::move(probs))},
                          e_pos, eprime_pos};
    return exact_rate(prob, cfg);
}

}  // namespace treexp
