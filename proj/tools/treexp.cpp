// treexp command-line front end: model/sample I/O around the library's
// learning, rate, exponent, projection, and simulation operations.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treexp/chow_liu.hpp"
#include "treexp/exponent.hpp"
#include "treexp/io.hpp"
#include "treexp/simulate.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitUsage = 4;
constexpr int kExitSolver = 5;

using nlohmann::json;
using namespace treexp;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("TREEXP_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ValidationError("TREEXP_SEED is not a valid unsigned integer");
        }
    }
    return 20110418;
}

struct SolverFlags {
    SolverConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--restarts", cfg.restarts, "solver restarts")->capture_default_str();
        cmd->add_option("--constraint-tol", cfg.constraint_tol, "feasibility tolerance")
            ->capture_default_str();
        cmd->add_option("--objective-tol", cfg.objective_tol, "stationarity tolerance")
            ->capture_default_str();
        cmd->add_option("--penalty-init", cfg.penalty_init, "initial penalty weight")
            ->capture_default_str();
        cmd->add_option("--penalty-growth", cfg.penalty_growth, "penalty growth per stage")
            ->capture_default_str();
        cmd->add_option("--penalty-stages", cfg.penalty_stages, "penalty continuation stages")
            ->capture_default_str();
        cmd->add_option("--solver-seed", cfg.seed, "seed for solver restarts");
        cmd->add_flag("--smoothing", cfg.smoothing, "smooth zero cells in empirical tables");
    }
};

NodePair parse_node_pair(const std::string& s) {
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream iss(t);
    int a = -1, b = -1;
    if (!(iss >> a >> b)) throw ValidationError("expected a node pair like 1,2: got '" + s + "'");
    std::string rest;
    if (iss >> rest) throw ValidationError("expected exactly two nodes in '" + s + "'");
    return make_pair_sorted(a, b);
}

std::vector<double> parse_double_list(const std::string& s) {
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream iss(t);
    std::vector<double> out;
    for (double v; iss >> v;) out.push_back(v);
    if (out.empty()) throw ValidationError("empty list '" + s + "'");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream iss(t);
    std::vector<std::size_t> out;
    for (long long v; iss >> v;) {
        if (v < 1) throw ValidationError("list entries must be positive in '" + s + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ValidationError("empty list '" + s + "'");
    return out;
}

std::string edge_list_str(const EdgeSet& es) {
    std::string out;
    for (const auto& e : es.edges()) out += pair_str(e) + " ";
    if (!out.empty()) out.pop_back();
    return out;
}

json edges_json(const EdgeSet& es) {
    json out = json::array();
    for (const auto& [a, b] : es.edges()) out.push_back({a, b});
    return out;
}

json report_json(const ExponentReport& rep, int budget) {
    json j;
    j["k_p"] = format_rate(rep.k_p);
    j["mode"] = rep.mode == RateMode::exact ? "exact" : "approx";
    j["dominant_nonedge"] = {rep.dominant_nonedge.first, rep.dominant_nonedge.second};
    j["replacement"] = {rep.replacement.first, rep.replacement.second};
    j["dominant_error_tree"] = edges_json(rep.dominant_error_tree);
    j["evaluations"] = rep.evaluations;
    j["evaluation_bound"] = budget;
    json rates = json::array();
    for (const auto& pr : rep.pair_rates)
        rates.push_back({{"e", {pr.e.first, pr.e.second}},
                         {"eprime", {pr.eprime.first, pr.eprime.second}},
                         {"rate", format_rate(pr.rate)}});
    j["pair_rates"] = rates;
    json comin = json::array();
    for (const auto& [e, ep] : rep.co_minimal)
        comin.push_back({{"e", {e.first, e.second}}, {"eprime", {ep.first, ep.second}}});
    j["co_minimal"] = comin;
    return j;
}

void print_report_human(std::ostream& out, const ExponentReport& rep, int bound) {
    out << "error exponent K = " << format_rate(rep.k_p)
        << "  (mode " << (rep.mode == RateMode::exact ? "exact" : "approx") << ")\n";
    out << "dominant non-edge e* = " << pair_str(rep.dominant_nonedge)
        << ", replacement r(e*) = " << pair_str(rep.replacement) << "\n";
    out << "dominant error tree: " << edge_list_str(rep.dominant_error_tree) << "\n";
    out << "evaluations: " << rep.evaluations << " (bound " << bound << ")\n";
    out << "pair rates:\n";
    for (const auto& pr : rep.pair_rates)
        out << "  e=" << pair_str(pr.e) << " e'=" << pair_str(pr.eprime) << "  J = "
            << format_rate(pr.rate) << (pr.rate <= rep.k_p + kRateTieTol ? "  <-- min" : "") << "\n";
}

int run_learn(const std::string& samples_path, const std::string& out_path, int alphabet) {
    std::optional<int> k;
    if (alphabet > 0) k = alphabet;
    const SampleMatrix samples = read_sample_file(samples_path, k);
    const LearnResult res = learn(samples);
    write_model_file(out_path, ModelVariant(res.model));
    std::cout << "learned structure: " << edge_list_str(res.structure) << "\n";
    if (res.ties.any()) {
        std::cout << "weight ties:\n";
        for (const auto& g : res.ties.groups) {
            std::cout << " ";
            for (const auto& e : g) std::cout << " " << pair_str(e);
            std::cout << "\n";
        }
    } else {
        std::cout << "weight ties: none\n";
    }
    std::cout << "model written to " << out_path << "\n";
    return kExitOk;
}

int run_exponent(const std::string& model_path, const std::string& mode, const std::string& format,
                 const SolverConfig& cfg) {
    const ModelVariant mv = read_model_file(model_path);
    if (!std::holds_alternative<TreeModel>(mv))
        throw ValidationError("exponent needs a tree-payload model; use project for dense inputs");
    const TreeModel& model = std::get<TreeModel>(mv);

    // a mutual-information equality on some path makes the exponent zero;
    // detect it up front instead of handing degenerate pair joints to the solver
    const DenseJoint dense = model.to_dense();
    if (dense.strictly_positive()) {
        const auto cert = positivity_certificate(dense);
        if (!cert.positive) {
            const auto [ep, e] = *cert.witness;
            if (format == "json") {
                json j;
                j["k_p"] = format_rate(0.0);
                j["mode"] = mode;
                j["witness"] = {{"eprime", {ep.first, ep.second}}, {"e", {e.first, e.second}}};
                j["proper_forest"] = cert.proper_forest;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "error exponent K = 0\n";
                std::cout << "mutual-information equality witness: I" << pair_str(ep)
                          << " = I" << pair_str(e) << "\n";
                if (cert.proper_forest)
                    std::cout << "the distribution is a proper forest in disguise\n";
            }
            return kExitOk;
        }
    }

    const RateMode rm = mode == "approx" ? RateMode::approx : RateMode::exact;
    const ExponentReport rep = error_exponent(model, rm, cfg);
    const int bound = diameter(model.structure()) * (model.num_vars() - 1) * (model.num_vars() - 2) / 2;
    if (format == "json")
        std::cout << report_json(rep, bound).dump(2) << "\n";
    else
        print_report_human(std::cout, rep, bound);
    return kExitOk;
}

int run_crossover(const std::string& model_path, const std::string& edge, const std::string& nonedge,
                  const std::string& mode, const std::string& samples_path, const std::string& format,
                  const SolverConfig& cfg) {
    const NodePair e = parse_node_pair(edge);
    const NodePair ep = parse_node_pair(nonedge);
    const ModelVariant mv = read_model_file(model_path);
    const DenseJoint dense = model_as_dense(mv);
    const CrossoverProblem problem = make_crossover_problem(dense, e, ep);

    json j;
    j["edge"] = {e.first, e.second};
    j["nonedge"] = {ep.first, ep.second};
    j["mode"] = mode;
    j["shared_node"] = problem.pair.share_flag();

    double rate = 0.0;
    if (mode == "approx") {
        rate = approx_rate(problem, cfg.var_tol);
    } else if (mode == "exact") {
        const CrossoverOutcome out = exact_rate(problem, cfg);
        rate = out.rate;
        j["constraint_residual"] = out.constraint_residual;
        j["restarts"] = out.restarts_used;
        j["restart_spread"] = out.objective_summary.spread;
    } else {  // empirical
        SampleMatrix samples = read_sample_file(samples_path, dense.alphabet().size());
        if (samples.num_vars() != dense.num_vars())
            throw ValidationError("sample width does not match the model");
        const auto& vars = problem.pair.vars;
        const SampleMatrix restricted = samples.select_columns(vars);
        const CrossoverOutcome out =
            empirical_rate(restricted, problem.e_pos, problem.eprime_pos, cfg);
        rate = out.rate;
        j["n"] = samples.rows();
        j["constraint_residual"] = out.constraint_residual;
        j["restart_spread"] = out.objective_summary.spread;
    }
    j["rate"] = format_rate(rate);
    if (format == "json")
        std::cout << j.dump(2) << "\n";
    else
        std::cout << "J" << (mode == "approx" ? "~" : "") << "(" << pair_str(e) << ", " << pair_str(ep)
                  << ") = " << format_rate(rate) << "  [" << mode << "]\n";
    return kExitOk;
}

int run_simulate(const std::string& model_path, const std::string& n_list, std::size_t runs,
                 std::uint64_t seed, int workers, const std::string& kp_mode, double kp_override,
                 const SolverConfig& cfg) {
    const ModelVariant mv = read_model_file(model_path);
    if (!std::holds_alternative<TreeModel>(mv))
        throw ValidationError("simulate needs a tree-payload model");
    const TreeModel& model = std::get<TreeModel>(mv);

    double k_p = kp_override;
    if (k_p < 0.0) {
        const RateMode rm = kp_mode == "exact" ? RateMode::exact : RateMode::approx;
        k_p = error_exponent(model, rm, cfg).k_p;
    }

    CsvWriter csv(std::cout, {"n", "runs", "errors", "p_hat", "simulated_rate", "k_p", "log_bound",
                              "within_bound"});
    for (std::size_t n : parse_size_list(n_list)) {
        SimConfig sc{n, runs, seed, workers};
        const SimResult res = estimate_error_probability(model, sc);
        const double log_bound = finite_sample_bound(k_p, model.num_vars(), model.alphabet(), n);
        const bool within = std::log(std::max(res.p_hat, 1e-300)) <= log_bound || res.errors == 0;
        csv.row({std::to_string(n), std::to_string(runs), std::to_string(res.errors),
                 format_double(res.p_hat),
                 res.insufficient_runs ? "inf" : format_double(res.simulated_rate),
                 format_double(k_p), format_double(log_bound), within ? "1" : "0"});
        if (res.insufficient_runs)
            std::cerr << "n=" << n << ": no errors observed; increase runs for a finite rate\n";
    }
    return kExitOk;
}

int run_project(const std::string& model_path, bool with_exponent, const std::string& mode,
                const std::string& format, const SolverConfig& cfg) {
    const ModelVariant mv = read_model_file(model_path);
    const DenseJoint dense = model_as_dense(mv);
    const ProjectionSet ps = optimal_projections(dense);

    json j;
    j["pi_star"] = ps.pi_star;
    j["max_weight"] = ps.max_weight;
    json st = json::array();
    for (const auto& s : ps.structures) st.push_back(edges_json(s));
    j["structures"] = st;

    if (with_exponent) {
        const RateMode rm = mode == "approx" ? RateMode::approx : RateMode::exact;
        const GeneralizedExponentReport rep = generalized_exponent(dense, rm, cfg);
        j["generalized"] = report_json(rep.base, rep.base.evaluations);
        j["generalized"]["dominant_structure"] = edges_json(rep.dominant_structure);
        j["generalized"]["exclusions"] = rep.exclusions.size();
        json inf_list = json::array();
        for (const auto& [eq, ep] : rep.infinite_nonedges)
            inf_list.push_back({{"structure", edges_json(eq)}, {"eprime", {ep.first, ep.second}}});
        j["generalized"]["infinite_nonedges"] = inf_list;
    }

    if (format == "json") {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "reverse I-projection divergence Pi* = " << format_double(ps.pi_star) << "\n";
        std::cout << "optimal structures (" << ps.structures.size() << "):\n";
        for (const auto& s : ps.structures) std::cout << "  " << edge_list_str(s) << "\n";
        if (with_exponent) {
            std::cout << "generalized exponent K = " << j["generalized"]["k_p"].get<std::string>()
                      << " with " << j["generalized"]["exclusions"].get<std::size_t>()
                      << " excluded swaps\n";
        }
    }
    return kExitOk;
}

int run_experiment(const std::string& name, const std::string& gamma_list, double gamma,
                   const std::string& n_list, std::size_t runs, std::uint64_t seed, int workers,
                   bool full, const SolverConfig& cfg) {
    if (name == "star4-rates") {
        CsvWriter csv(std::cout, {"gamma", "exact", "approx"});
        for (double g : parse_double_list(gamma_list)) {
            const TreeModel model = star4(g);
            const DenseJoint dense = model.to_dense();
            const CrossoverProblem prob = make_crossover_problem(dense, {0, 1}, {2, 3});
            csv.row({format_double(g), format_double(exact_rate(prob, cfg).rate),
                     format_double(approx_rate(prob, cfg.var_tol))});
        }
        return kExitOk;
    }
    if (name == "star4-sim") {
        const TreeModel model = star4(gamma);
        const double exact_kp = error_exponent(model, RateMode::exact, cfg).k_p;
        const double approx_kp = error_exponent(model, RateMode::approx, cfg).k_p;
        CsvWriter csv(std::cout, {"n", "exact", "approx", "simulated", "errors", "runs"});
        for (std::size_t n : parse_size_list(n_list)) {
            SimConfig sc{n, runs, seed, workers};
            const SimResult res = estimate_error_probability(model, sc);
            csv.row({std::to_string(n), format_double(exact_kp), format_double(approx_kp),
                     res.insufficient_runs ? "inf" : format_double(res.simulated_rate),
                     std::to_string(res.errors), std::to_string(runs)});
        }
        return kExitOk;
    }
    if (name == "star4-empirical") {
        const TreeModel model = star4(gamma);
        const DenseJoint dense = model.to_dense();
        const CrossoverProblem prob = make_crossover_problem(dense, {0, 1}, {2, 3});
        const double exact_j = exact_rate(prob, cfg).rate;
        const double approx_j = approx_rate(prob, cfg.var_tol);
        std::vector<std::size_t> ns = parse_size_list(n_list);
        if (full) ns.push_back(8000000);
        SolverConfig emp_cfg = cfg;
        emp_cfg.smoothing = true;
        CsvWriter csv(std::cout, {"n", "exact", "approx", "empirical"});
        for (std::size_t n : ns) {
            const SampleMatrix samples = model.sample(n, mix_seed(seed, n));
            const std::vector<int> cols = {0, 1, 2, 3};
            const CrossoverOutcome out = empirical_rate(samples.select_columns(cols), {0, 1}, {2, 3},
                                                        emp_cfg);
            csv.row({std::to_string(n), format_double(exact_j), format_double(approx_j),
                     format_double(out.rate)});
        }
        return kExitOk;
    }
    throw ValidationError("unknown experiment '" + name +
                          "'; expected star4-rates, star4-sim or star4-empirical");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree-structure learning rates and error exponents"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    try {
        seed = default_seed();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    // learn
    auto* learn_cmd = app.add_subcommand("learn", "Chow-Liu estimation from a sample file");
    std::string samples_path, out_path;
    int alphabet = 0;
    learn_cmd->add_option("samples", samples_path, "sample file")->required();
    learn_cmd->add_option("--out", out_path, "output model file")->required();
    learn_cmd->add_option("--alphabet", alphabet, "alphabet size (0 = infer from data)");

    // exponent
    auto* exp_cmd = app.add_subcommand("exponent", "error exponent of a tree model");
    std::string exp_model, exp_mode = "exact", exp_format = "human";
    SolverFlags exp_flags;
    exp_cmd->add_option("model", exp_model, "model file (tree payload)")->required();
    exp_cmd->add_option("--mode", exp_mode, "exact|approx")->check(CLI::IsMember({"exact", "approx"}));
    exp_cmd->add_option("--format", exp_format, "human|json")->check(CLI::IsMember({"human", "json"}));
    exp_flags.attach(exp_cmd);

    // crossover
    auto* cr_cmd = app.add_subcommand("crossover", "crossover rate for one (edge, non-edge) pair");
    std::string cr_model, cr_edge, cr_nonedge, cr_mode = "exact", cr_samples, cr_format = "human";
    SolverFlags cr_flags;
    cr_cmd->add_option("model", cr_model, "model file")->required();
    cr_cmd->add_option("--edge", cr_edge, "edge i,j")->required();
    cr_cmd->add_option("--nonedge", cr_nonedge, "non-edge k,l")->required();
    cr_cmd->add_option("--mode", cr_mode, "exact|approx|empirical")
        ->check(CLI::IsMember({"exact", "approx", "empirical"}));
    cr_cmd->add_option("--samples", cr_samples, "sample file (empirical mode)");
    cr_cmd->add_option("--format", cr_format, "human|json")->check(CLI::IsMember({"human", "json"}));
    cr_flags.attach(cr_cmd);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo structure-error estimation");
    std::string sim_model, sim_n = "100", sim_kp_mode = "approx";
    std::size_t sim_runs = 100000;
    int sim_workers = 1;
    double sim_kp = -1.0;
    SolverFlags sim_flags;
    sim_cmd->add_option("model", sim_model, "model file (tree payload)")->required();
    sim_cmd->add_option("--n", sim_n, "samples per run; comma list for sweeps")->capture_default_str();
    sim_cmd->add_option("--runs", sim_runs, "Monte Carlo runs per n")->capture_default_str();
    sim_cmd->add_option("--seed", seed, "base seed");
    sim_cmd->add_option("--workers", sim_workers, "worker threads")->capture_default_str();
    sim_cmd->add_option("--kp-mode", sim_kp_mode, "exact|approx exponent for the bound column")
        ->check(CLI::IsMember({"exact", "approx"}));
    sim_cmd->add_option("--kp", sim_kp, "use this exponent for the bound column instead");
    sim_flags.attach(sim_cmd);

    // project
    auto* proj_cmd = app.add_subcommand("project", "reverse I-projection onto trees");
    std::string proj_model, proj_mode = "exact", proj_format = "human";
    bool proj_exp = false;
    SolverFlags proj_flags;
    proj_cmd->add_option("model", proj_model, "model file")->required();
    proj_cmd->add_flag("--exponent", proj_exp, "also compute the generalized exponent");
    proj_cmd->add_option("--mode", proj_mode, "exact|approx")->check(CLI::IsMember({"exact", "approx"}));
    proj_cmd->add_option("--format", proj_format, "human|json")->check(CLI::IsMember({"human", "json"}));
    proj_flags.attach(proj_cmd);

    // experiment
    auto* expt_cmd = app.add_subcommand("experiment", "canned star4 experiment CSVs");
    std::string expt_name, expt_gammas = "0.01,0.05,0.1,0.2", expt_ns = "1000,10000,100000";
    double expt_gamma = 0.2;
    std::size_t expt_runs = 100000;
    int expt_workers = 1;
    bool expt_full = false;
    SolverFlags expt_flags;
    expt_cmd->add_option("name", expt_name, "star4-rates|star4-sim|star4-empirical")->required();
    expt_cmd->add_option("--gamma-list", expt_gammas, "gamma sweep")->capture_default_str();
    expt_cmd->add_option("--gamma", expt_gamma, "fixed gamma")->capture_default_str();
    expt_cmd->add_option("--n-list", expt_ns, "n sweep")->capture_default_str();
    expt_cmd->add_option("--runs", expt_runs, "Monte Carlo runs")->capture_default_str();
    expt_cmd->add_option("--seed", seed, "base seed");
    expt_cmd->add_option("--workers", expt_workers, "worker threads")->capture_default_str();
    expt_cmd->add_flag("--full", expt_full, "include the large-n empirical row");
    expt_flags.attach(expt_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*learn_cmd) return run_learn(samples_path, out_path, alphabet);
        if (*exp_cmd) return run_exponent(exp_model, exp_mode, exp_format, exp_flags.cfg);
        if (*cr_cmd) {
            if (cr_mode == "empirical" && cr_samples.empty()) {
                std::cerr << "error: --samples is required in empirical mode\n";
                return kExitUsage;
            }
            return run_crossover(cr_model, cr_edge, cr_nonedge, cr_mode, cr_samples, cr_format,
                                 cr_flags.cfg);
        }
        if (*sim_cmd)
            return run_simulate(sim_model, sim_n, sim_runs, seed, sim_workers, sim_kp_mode, sim_kp,
                                sim_flags.cfg);
        if (*proj_cmd) return run_project(proj_model, proj_exp, proj_mode, proj_format, proj_flags.cfg);
        if (*expt_cmd)
            return run_experiment(expt_name, expt_gammas, expt_gamma, expt_ns, expt_runs, seed,
                                  expt_workers, expt_full, expt_flags.cfg);
    } catch (const SolverNonConvergence& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitUsage;
}
