// Command-line harness: solve, tight, sweep, bench-dynloc, gen-garnet.
//
// Exit codes: 0 success, 1 runtime or convergence failure (and, for tight,
// a failed verification), 2 unreadable or malformed MDP input.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nsmpi/nsmpi.hpp"

using namespace nsmpi;

namespace {

/// Accepts the default key = value format and, when the file starts with
/// '{', a flat or nested JSON object with the same option names.
class SniffingConfig : public CLI::ConfigBase {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        input >> std::ws;
        if (input.peek() != '{') return CLI::ConfigBase::from_config(input);
        nlohmann::json j;
        input >> j;
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static void flatten(const nlohmann::json& j, std::vector<std::string> parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto deeper = parents;
                deeper.push_back(key);
                flatten(value, deeper, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& element : value) item.inputs.push_back(scalar(element));
            else
                item.inputs.push_back(scalar(value));
            items.push_back(std::move(item));
        }
    }

    static std::string scalar(const nlohmann::json& value) {
        if (value.is_string()) return value.get<std::string>();
        return value.dump();
    }
};

FiniteMdp load_mdp_or_exit(const std::string& path) {
    try {
        return load_mdp(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(2);
    }
}

MParameter parse_m(const std::string& token) {
    if (token == "inf") return MParameter::infinite();
    std::size_t used = 0;
    const int m = std::stoi(token, &used);
    if (used != token.size() || m < 0)
        throw CLI::ValidationError("--m", "expected a non-negative integer or 'inf'");
    return MParameter::finite(m);
}

std::vector<int> parse_int_list(const std::string& csv, const char* flag) {
    std::vector<int> out;
    std::stringstream in(csv);
    std::string token;
    while (std::getline(in, token, ',')) {
        std::size_t used = 0;
        const int v = std::stoi(token, &used);
        if (used != token.size() || v < 1)
            throw CLI::ValidationError(flag, "expected a comma-separated list of positive integers");
        out.push_back(v);
    }
    if (out.empty()) throw CLI::ValidationError(flag, "list is empty");
    return out;
}

struct SweepCell {
    int ell;
    MParameter m;
    std::string m_token;
};

std::vector<SweepCell> parse_m_grid(const std::vector<int>& ells, const std::string& m_csv,
                                    int budget) {
    std::vector<SweepCell> cells;
    if (budget > 0) {
        // Fixed total work per iteration: m = budget / ell where it divides.
        for (int ell : ells)
            if (budget % ell == 0)
                cells.push_back({ell, MParameter::finite(budget / ell),
                                 std::to_string(budget / ell)});
        if (cells.empty())
            throw CLI::ValidationError("--budget", "no cycle length in the grid divides the budget");
        return cells;
    }
    std::vector<std::pair<MParameter, std::string>> ms;
    std::stringstream in(m_csv);
    std::string token;
    while (std::getline(in, token, ',')) ms.emplace_back(parse_m(token), token);
    if (ms.empty()) throw CLI::ValidationError("--m-grid", "list is empty");
    for (int ell : ells)
        for (const auto& [m, tok] : ms) cells.push_back({ell, m, tok});
    return cells;
}

std::ofstream open_or_exit(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot open " << path << " for writing\n";
        std::exit(1);
    }
    return out;
}

void write_value_csv(std::ostream& out, const std::vector<std::pair<int, double>>& residuals,
                     const std::vector<ValueFunction>& values) {
    out << "k,residual";
    for (std::size_t s = 0; s < values.front().size(); ++s) out << ",v" << s;
    out << "\r\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << residuals[i].first << ',' << csv_double(residuals[i].second);
        for (double x : values[i]) out << ',' << csv_double(x);
        out << "\r\n";
    }
}

int run_solve(const std::string& mdp_path, const std::string& method, int iterations,
              const std::string& m_token, int ell, double eval_tolerance, int pi_max_iters,
              const std::string& out_path, const std::string& trace_path) {
    if (!trace_path.empty() && method != "nsmpi")
        throw CLI::ValidationError("--trace", "trace output requires --method nsmpi");
    FiniteMdp mdp = load_mdp_or_exit(mdp_path);
    std::vector<std::pair<int, double>> residuals;
    std::vector<ValueFunction> values;

    if (method == "vi") {
        std::vector<ValueFunction> vs = reference_vi(mdp, ValueFunction(mdp.num_states(), 0.0),
                                                     iterations);
        for (int k = 1; k <= iterations; ++k) {
            residuals.emplace_back(k, max_norm_distance(vs[k], vs[k - 1]));
            values.push_back(vs[k]);
        }
    } else if (method == "pi") {
        const ValueFunction zeros(mdp.num_states(), 0.0);
        StationaryPolicy pi = greedy_policy(mdp, zeros);
        ValueFunction v = evaluate_stationary(mdp, pi, eval_tolerance);
        auto bellman_residual = [&](const ValueFunction& value) {
            ValueFunction t = apply_bellman_op(mdp, greedy_policy(mdp, value), value);
            return max_norm_distance(t, value);
        };
        residuals.emplace_back(0, bellman_residual(v));
        values.push_back(v);
        for (int t = 1; t <= pi_max_iters; ++t) {
            StationaryPolicy improved = greedy_policy(mdp, v);
            if (improved == pi) break;
            pi = std::move(improved);
            v = evaluate_stationary(mdp, pi, eval_tolerance);
            residuals.emplace_back(t, bellman_residual(v));
            values.push_back(v);
        }
    } else {
        NsmpiConfig config;
        config.m = parse_m(m_token);
        config.ell = ell;
        config.iterations = iterations;
        config.v0.assign(mdp.num_states(), 0.0);
        config.eval_tolerance = eval_tolerance;
        std::vector<IterationRecord> records = nsmpi_run(mdp, config);
        ValueFunction prev = config.v0;
        for (const IterationRecord& rec : records) {
            residuals.emplace_back(rec.k, max_norm_distance(rec.value, prev));
            values.push_back(rec.value);
            prev = rec.value;
        }
        if (!trace_path.empty()) {
            std::ofstream trace = open_or_exit(trace_path);
            trace << trace_to_json(config, records).dump(2) << "\n";
            std::cout << "wrote " << trace_path << "\n";
        }
    }

    if (out_path.empty()) {
        write_value_csv(std::cout, residuals, values);
    } else {
        std::ofstream out = open_or_exit(out_path);
        write_value_csv(out, residuals, values);
        std::cout << "wrote " << out_path << " (" << values.size() << " rows)\n";
    }
    std::cout << "method=" << method << " iterations=" << values.size()
              << " final_residual=" << csv_double(residuals.back().second) << "\n";
    return 0;
}

int run_tight(int ell, int m, double gamma, double epsilon, int iterations, int num_states,
              const std::string& out_path, const std::string& mdp_out) {
    TightInstanceSpec spec;
    spec.ell = ell;
    spec.m = m;
    spec.gamma = gamma;
    spec.epsilon = epsilon;
    spec.max_iterations = iterations;
    spec.num_states = num_states;

    if (!mdp_out.empty()) {
        save_mdp(build_tight_mdp(spec), mdp_out);
        std::cout << "wrote " << mdp_out << " (" << tight_resolved_num_states(spec)
                  << " states)\n";
    }

    VerificationReport report = verify_tight_trajectory(spec);
    if (!out_path.empty()) {
        std::ofstream out = open_or_exit(out_path);
        write_verification_csv(out, report);
    }
    const bool equality = report.equality_within(1e-9);
    std::cout << "tight: ell=" << ell << " m=" << m << " iterations=" << iterations
              << " max_value_dev=" << csv_double(report.max_value_dev)
              << (report.policies_match ? " policies=exact" : " policies=MISMATCH")
              << " max|loss-bound|=" << csv_double(report.max_equality_gap)
              << ((report.success() && equality) ? " PASS" : " FAIL") << "\n";
    return (report.success() && equality) ? 0 : 1;
}

int run_sweep(const FiniteMdp& mdp, const std::vector<SweepCell>& cells, int runs,
              int iterations, double epsilon, std::uint64_t seed, bool timing,
              const std::string& noise_mode, const std::string& out_path) {
    const int n = mdp.num_states();
    const ValueFunction zeros(n, 0.0);
    const ValueFunction v_star = reference_pi(mdp, greedy_policy(mdp, zeros)).value;
    const double gap = max_norm_distance(v_star, zeros);

    std::ofstream out = open_or_exit(out_path);
    out << "ell,m,run,k,loss_sup,loss_mean,bound,seconds\r\n";
    long rows = 0;
    for (const SweepCell& cell : cells) {
        const std::uint64_t m_code =
            cell.m.is_infinite() ? ~0ULL : static_cast<std::uint64_t>(cell.m.count());
        for (int r = 0; r < runs; ++r) {
            const std::uint64_t cell_seed =
                detail::mix_seed(detail::mix_seed(seed, static_cast<std::uint64_t>(cell.ell)),
                                 detail::mix_seed(m_code, static_cast<std::uint64_t>(r)));
            NsmpiConfig config;
            config.m = cell.m;
            config.ell = cell.ell;
            config.iterations = iterations;
            config.v0 = zeros;
            if (epsilon > 0.0) {
                const UniformErrorModel noise{epsilon, cell_seed};
                config.error_model = noise_mode == "persistent"
                                         ? make_persistent_error_model(noise)
                                         : make_error_model(noise);
            }

            const auto t0 = std::chrono::steady_clock::now();
            std::vector<IterationRecord> records = nsmpi_run(mdp, config, &v_star);
            const double elapsed =
                timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count()
                       : 0.0;

            BoundInputs inputs;
            inputs.gamma = mdp.discount();
            inputs.ell = cell.ell;
            inputs.epsilon = epsilon;
            inputs.initial_gap = gap;
            for (const IterationRecord& rec : records) {
                double mean = 0.0;
                for (int s = 0; s < n; ++s) mean += (v_star[s] - rec.periodic_value[s]) / n;
                inputs.k = rec.k;
                out << cell.ell << ',' << cell.m_token << ',' << r << ',' << rec.k << ','
                    << csv_double(rec.loss_sup) << ',' << csv_double(mean) << ','
                    << csv_double(theorem2_bound(inputs)) << ',' << csv_double(elapsed)
                    << "\r\n";
                ++rows;
            }
        }
    }
    std::cout << "wrote " << out_path << " (" << rows << " rows)\n";
    return 0;
}

int run_gen_garnet(int states, int actions, int branching, double sparsity, double gamma,
                   std::uint64_t seed, const std::string& out_path) {
    GarnetSpec spec;
    spec.num_states = states;
    spec.num_actions = actions;
    spec.branching = branching;
    spec.reward_sparsity = sparsity;
    spec.discount = gamma;
    spec.seed = seed;
    save_mdp(garnet_mdp(spec), out_path);
    std::cout << "wrote " << out_path << " (states=" << states << " actions=" << actions
              << " branching=" << branching << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-stationary modified policy iteration toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Options file (key = value lines, or a JSON object)");
    app.config_formatter(std::make_shared<SniffingConfig>());

    // solve ------------------------------------------------------------
    auto* solve = app.add_subcommand("solve", "Run VI, PI or NSMPI on an MDP file");
    std::string solve_mdp, solve_method, solve_m = "0", solve_out;
    int solve_iterations = 100, solve_ell = 1, solve_pi_max = 1000;
    double solve_tol = 1e-12;
    solve->add_option("--mdp", solve_mdp, "MDP JSON file")->required();
    solve->add_option("--method", solve_method, "vi, pi or nsmpi")
        ->required()
        ->check(CLI::IsMember({"vi", "pi", "nsmpi"}));
    solve->add_option("--iterations", solve_iterations, "Iteration count (vi, nsmpi)")
        ->check(CLI::PositiveNumber);
    solve->add_option("--m", solve_m, "Cycle applications per iteration (nsmpi): int or 'inf'");
    solve->add_option("--ell", solve_ell, "Cycle length (nsmpi)")->check(CLI::PositiveNumber);
    solve->add_option("--eval-tolerance", solve_tol, "Evaluation residual tolerance");
    solve->add_option("--pi-max-iters", solve_pi_max, "Improvement cap (pi)")
        ->check(CLI::PositiveNumber);
    solve->add_option("--out", solve_out, "CSV output path (stdout when omitted)");
    std::string solve_trace;
    solve->add_option("--trace", solve_trace,
                      "Also write the full run trace as JSON (nsmpi only)");

    // tight ------------------------------------------------------------
    auto* tight = app.add_subcommand("tight", "Verify the worst-case chain trajectory");
    int tight_ell = 1, tight_m = 0, tight_iterations = 8, tight_states = 0;
    double tight_gamma = 0.9, tight_epsilon = 0.1;
    std::string tight_out, tight_mdp_out;
    tight->add_option("--ell", tight_ell, "Cycle length")->check(CLI::PositiveNumber);
    tight->add_option("--m", tight_m, "Cycle applications per iteration (finite)")
        ->check(CLI::NonNegativeNumber);
    tight->add_option("--gamma", tight_gamma, "Discount")->check(CLI::Range(1e-9, 1.0 - 1e-9));
    tight->add_option("--epsilon", tight_epsilon, "Error level")->check(CLI::NonNegativeNumber);
    tight->add_option("--iterations", tight_iterations, "Improvement iterations")
        ->check(CLI::PositiveNumber);
    tight->add_option("--num-states", tight_states, "Chain length (0 = minimum)")
        ->check(CLI::NonNegativeNumber);
    tight->add_option("--out", tight_out, "Verification CSV path");
    tight->add_option("--write-mdp", tight_mdp_out, "Also write the chain as an MDP JSON file");

    // sweep ------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Grid of noisy runs over (ell, m) on an MDP file");
    std::string sweep_mdp, sweep_ells = "1,2,5,10", sweep_ms = "1,2,5,10,25,inf", sweep_out;
    int sweep_runs = 5, sweep_iterations = 50, sweep_budget = 0;
    double sweep_epsilon = 0.0;
    std::uint64_t sweep_seed = 0;
    bool sweep_timing = false;
    sweep->add_option("--mdp", sweep_mdp, "MDP JSON file")->required();
    sweep->add_option("--ell-grid", sweep_ells, "Cycle lengths, comma separated");
    sweep->add_option("--m-grid", sweep_ms, "m values, comma separated ('inf' allowed)");
    sweep->add_option("--budget", sweep_budget,
                      "Fixed-budget mode: use m = budget/ell, skipping non-divisors")
        ->check(CLI::NonNegativeNumber);
    sweep->add_option("--runs", sweep_runs, "Runs per cell")->check(CLI::PositiveNumber);
    sweep->add_option("--iterations", sweep_iterations, "Iterations per run")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--epsilon", sweep_epsilon, "Uniform error level")
        ->check(CLI::NonNegativeNumber);
    sweep->add_option("--seed", sweep_seed, "Base seed");
    std::string sweep_noise = "fresh";
    sweep->add_option("--noise", sweep_noise,
                      "fresh: new error draw each iteration; persistent: one draw per run")
        ->check(CLI::IsMember({"fresh", "persistent"}));
    sweep->add_flag("--timing", sweep_timing,
                    "Measure wall time per run (off by default so reruns are byte-identical)");
    sweep->add_option("--out", sweep_out, "CSV output path")->required();

    // bench-dynloc -------------------------------------------------------
    auto* bench = app.add_subcommand("bench-dynloc", "Sweep on the dynamic location problem");
    int bench_n = 8;
    double bench_gamma = 0.98, bench_epsilon = 4.0;
    std::string bench_ells = "1,2,5,10", bench_ms = "1,2,5,10,25,inf", bench_out;
    int bench_runs = 20, bench_iterations = 150, bench_budget = 0;
    std::uint64_t bench_seed = 0;
    bool bench_timing = false;
    bench->add_option("--n", bench_n, "Number of sites")->check(CLI::Range(2, 64));
    bench->add_option("--gamma", bench_gamma, "Discount")->check(CLI::Range(1e-9, 1.0 - 1e-9));
    bench->add_option("--epsilon", bench_epsilon, "Uniform error level")
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--ell-grid", bench_ells, "Cycle lengths, comma separated");
    bench->add_option("--m-grid", bench_ms, "m values, comma separated ('inf' allowed)");
    bench->add_option("--budget", bench_budget, "Fixed-budget mode: m = budget/ell")
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--runs", bench_runs, "Runs per cell")->check(CLI::PositiveNumber);
    bench->add_option("--iterations", bench_iterations, "Iterations per run")
        ->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "Base seed");
    std::string bench_noise = "persistent";
    bench->add_option("--noise", bench_noise,
                      "fresh: new error draw each iteration; persistent: one draw per run "
                      "(default persistent, the mode under which longer cycles win)")
        ->check(CLI::IsMember({"fresh", "persistent"}));
    bench->add_flag("--timing", bench_timing, "Measure wall time per run");
    bench->add_option("--out", bench_out, "CSV output path")->required();
    std::string bench_mdp_out;
    bench->add_option("--write-mdp", bench_mdp_out,
                      "Also write the benchmark MDP as a JSON file");

    // gen-garnet ---------------------------------------------------------
    auto* gen = app.add_subcommand("gen-garnet", "Write a random Garnet MDP as JSON");
    int gen_states = 10, gen_actions = 2, gen_branching = 3;
    double gen_sparsity = 0.0, gen_gamma = 0.95;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--states", gen_states, "Number of states")->check(CLI::PositiveNumber);
    gen->add_option("--actions", gen_actions, "Number of actions")->check(CLI::PositiveNumber);
    gen->add_option("--branching", gen_branching, "Distinct successors per row")
        ->check(CLI::PositiveNumber);
    gen->add_option("--sparsity", gen_sparsity, "Probability a reward is zeroed")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--gamma", gen_gamma, "Discount")->check(CLI::Range(1e-9, 1.0 - 1e-9));
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--out", gen_out, "Output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return run_solve(solve_mdp, solve_method, solve_iterations, solve_m, solve_ell,
                             solve_tol, solve_pi_max, solve_out, solve_trace);
        if (tight->parsed())
            return run_tight(tight_ell, tight_m, tight_gamma, tight_epsilon, tight_iterations,
                             tight_states, tight_out, tight_mdp_out);
        if (sweep->parsed()) {
            FiniteMdp mdp = load_mdp_or_exit(sweep_mdp);
            const auto cells = parse_m_grid(parse_int_list(sweep_ells, "--ell-grid"), sweep_ms,
                                            sweep_budget);
            return run_sweep(mdp, cells, sweep_runs, sweep_iterations, sweep_epsilon, sweep_seed,
                             sweep_timing, sweep_noise, sweep_out);
        }
        if (bench->parsed()) {
            DynamicLocationSpec dspec;
            dspec.n = bench_n;
            dspec.gamma = bench_gamma;
            FiniteMdp mdp = dynamic_location_mdp(dspec);
            if (!bench_mdp_out.empty()) {
                save_mdp(mdp, bench_mdp_out);
                std::cout << "wrote " << bench_mdp_out << " (" << mdp.num_states()
                          << " states)\n";
            }
            const auto cells = parse_m_grid(parse_int_list(bench_ells, "--ell-grid"), bench_ms,
                                            bench_budget);
            return run_sweep(mdp, cells, bench_runs, bench_iterations, bench_epsilon, bench_seed,
                             bench_timing, bench_noise, bench_out);
        }
        if (gen->parsed())
            return run_gen_garnet(gen_states, gen_actions, gen_branching, gen_sparsity, gen_gamma,
                                  gen_seed, gen_out);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
