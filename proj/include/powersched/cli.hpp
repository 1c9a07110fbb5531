#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "powersched/analysis.hpp"
#include "powersched/config.hpp"
#include "powersched/csv.hpp"
#include "powersched/errors.hpp"
#include "powersched/svg.hpp"

namespace powersched::cli {

namespace fs = std::filesystem;

// Exit codes: 0 ok, 1 internal/convergence failure, 2 bad config or usage,
// 3 infeasible problem, 4 unsupported dimension.
template <typename F>
int guard(F&& body) {
    try {
        return body();
    } catch (const ConfigError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    } catch (const InfeasibleError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 3;
    } catch (const DimensionError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 4;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
}

inline std::string scheduler_label(const SchedulerSpec& spec) {
    return scheduler_to_json(spec).at("kind").get<std::string>();
}

inline int cmd_validate(const fs::path& config_path) {
    const ExperimentSpec spec = load_config(config_path);
    spec.validate();
    if (const auto* c = std::get_if<ConstantPower>(&spec.sched)) {
        if (c->p < 0.0 || c->p > spec.ch.p_max)
            throw ConfigError("scheduler: constant power outside [0, p_max]");
    }
    const double rho = spectral_radius(spec.model.A);
    std::cout << "system: state_dim=" << spec.model.state_dim()
              << " input_dim=" << spec.model.input_dim()
              << " gamma=" << format_number(spec.model.gamma)
              << " spectral_radius=" << format_number(rho) << '\n';
    std::cout << "controllability heuristic: "
              << (spec.model.controllable_heuristic() ? "pass" : "FAIL (rank deficient)")
              << '\n';
    std::cout << "channel: alpha=" << format_number(spec.ch.alpha)
              << " sigma2=" << format_number(spec.ch.sigma2)
              << " p_max=" << format_number(spec.ch.p_max) << '\n';
    std::cout << "attack: " << attack_label(spec.dist) << " (mean "
              << format_number(attack_mean(spec.dist)) << ")\n";
    std::cout << "scheduler: " << scheduler_label(spec.sched) << '\n';
    const StabilityCheck chk = check_stability_assumption(spec.ch, spec.dist, rho);
    std::cout << "full-power outage check: E[q_m] = " << format_number(chk.lhs)
              << (chk.holds ? " < " : " >= ") << format_number(chk.rhs)
              << " = 1/rho(A)^2\n";
    if (!chk.holds)
        throw InfeasibleError(
            "full-power outage rate exceeds 1/rho(A)^2; no scheduler stabilizes this link");
    std::cout << "config OK\n";
    return 0;
}

inline CsvTable metrics_table(const AggregateReport& rep) {
    CsvTable t;
    t.header = "metric,mean,std,stderr,trials";
    for (const auto& [name, st] : rep.named())
        t.rows.push_back({name, format_number(st.mean), format_number(st.std_dev),
                          format_number(st.std_err), format_number(rep.trials)});
    return t;
}

inline CsvTable trace_table(const SimTrace& tr) {
    const int n = tr.x.empty() ? 0 : static_cast<int>(tr.x.front().size());
    const int m = tr.u.empty() ? 0 : static_cast<int>(tr.u.front().size());
    CsvTable t;
    t.header = "k";
    for (int i = 0; i < n; ++i) t.header += ",x" + std::to_string(i);
    for (int i = 0; i < n; ++i) t.header += ",xhat" + std::to_string(i);
    for (int i = 0; i < n; ++i) t.header += ",e" + std::to_string(i);
    for (int i = 0; i < m; ++i) t.header += ",u" + std::to_string(i);
    t.header += ",a,p,q,delta";
    const std::size_t T = tr.a.size();
    for (std::size_t k = 0; k <= T; ++k) {
        std::vector<std::string> row{format_number(static_cast<std::uint64_t>(k))};
        for (int i = 0; i < n; ++i) row.push_back(format_number(tr.x[k](i)));
        for (int i = 0; i < n; ++i) row.push_back(format_number(tr.xhat[k](i)));
        for (int i = 0; i < n; ++i) row.push_back(format_number(tr.e[k](i)));
        if (k < T) {
            for (int i = 0; i < m; ++i) row.push_back(format_number(tr.u[k](i)));
            row.push_back(format_number(tr.a[k]));
            row.push_back(format_number(tr.p[k]));
            row.push_back(format_number(tr.q[k]));
            row.push_back(format_number(static_cast<std::uint64_t>(tr.delta[k])));
        } else {
            // the horizon slot carries state only
            for (int i = 0; i < m + 4; ++i) row.emplace_back();
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline int cmd_simulate(const fs::path& config_path, std::optional<std::uint64_t> trials,
                        std::optional<std::uint64_t> seed, const fs::path& out_dir,
                        bool traces) {
    ExperimentSpec spec = load_config(config_path);
    if (trials) spec.trials = *trials;
    if (seed) spec.master_seed = *seed;
    if (traces) spec.record_traces = true;

    const AggregateReport rep = run_monte_carlo(spec);
    fs::create_directories(out_dir);
    std::vector<std::string> outputs{"metrics.csv"};
    write_csv(out_dir / "metrics.csv", metrics_table(rep));

    if (spec.record_traces) {
        const SimContext ctx = make_context(spec);
        const std::uint64_t n_traces = std::min<std::uint64_t>(spec.trials, 10);
        for (std::uint64_t i = 0; i < n_traces; ++i) {
            SimTrace tr;
            run_trial(ctx, i, &tr);
            const std::string name = "trace_" + std::to_string(i) + ".csv";
            write_csv(out_dir / name, trace_table(tr));
            outputs.push_back(name);
        }
    }
    write_manifest(out_dir, make_manifest(spec, outputs));

    std::cout << "trials: " << rep.trials << "  horizon: " << spec.horizon
              << "  scheduler: " << scheduler_label(spec.sched) << '\n';
    for (const auto& [name, st] : rep.named())
        std::cout << name << " = " << format_number(st.mean) << " (stderr "
                  << format_number(st.std_err) << ")\n";
    std::cout << "wrote " << (out_dir / "metrics.csv").string() << '\n';
    return 0;
}

inline int cmd_bounds(const fs::path& config_path) {
    const ExperimentSpec spec = load_config(config_path);
    spec.validate();
    const BoundReport b = upper_bound_total(spec.model, spec.ch, spec.dist, spec.lambda);
    const double at_pmax =
        theoretical_cost_constant(spec.ch.p_max, spec.model, spec.ch, spec.dist, spec.lambda);
    std::cout << "lambda = " << format_number(spec.lambda) << '\n';
    std::cout << "q_tilde = " << format_number(b.q_tilde) << '\n';
    std::cout << "p_tilde = " << format_number(b.p_tilde) << '\n';
    std::cout << "reduced_upper_bound = " << format_number(b.reduced_upper_bound) << '\n';
    std::cout << "upper_bound = " << format_number(b.upper_bound) << '\n';
    std::cout << "constant_pmax_cost = " << format_number(at_pmax) << '\n';
    return 0;
}

inline int cmd_sweep(const fs::path& config_path, const std::string& mode,
                     const fs::path& out_dir, bool svg) {
    const ExperimentSpec spec = load_config(config_path);
    spec.validate();
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;

    if (mode == "power") {
        std::vector<double> powers;
        for (int i = 0; i < 8; ++i) powers.push_back(0.4 + 0.2 * i);
        const auto rows = sweep_power_tradeoff(powers, spec);
        CsvTable t;
        t.header = "scheduler,param,avg_power,avg_power_stderr,mse,mse_stderr";
        for (const auto& r : rows)
            t.rows.push_back({r.scheduler, format_number(r.param),
                              format_number(r.avg_power), format_number(r.avg_power_stderr),
                              format_number(r.mse), format_number(r.mse_stderr)});
        write_csv(out_dir / "power_tradeoff.csv", t);
        outputs.push_back("power_tradeoff.csv");
        if (svg) {
            std::vector<SvgSeries> series;
            for (const auto& r : rows) {
                auto it = std::find_if(series.begin(), series.end(),
                                       [&](const SvgSeries& s) { return s.name == r.scheduler; });
                if (it == series.end()) {
                    series.push_back({r.scheduler, {}});
                    it = std::prev(series.end());
                }
                it->points.emplace_back(r.avg_power, r.mse);
            }
            write_svg_chart(out_dir / "power_tradeoff.svg", "estimation error vs power",
                            "average power", "mse", series);
            outputs.push_back("power_tradeoff.svg");
        }
    } else if (mode == "lambda") {
        const std::vector<double> lambdas{0.01, 0.1, 1.0};
        const auto rows = sweep_lambda_costs(lambdas, spec);
        CsvTable t;
        t.header = "lambda,scheduler,cost_mean,cost_stderr,theoretical";
        for (const auto& r : rows)
            t.rows.push_back({format_number(r.lambda), r.scheduler,
                              format_number(r.cost_mean), format_number(r.cost_stderr),
                              format_number(r.theoretical)});
        write_csv(out_dir / "lambda_costs.csv", t);
        outputs.push_back("lambda_costs.csv");
        if (svg) {
            std::vector<SvgSeries> series;
            for (const auto& r : rows) {
                auto it = std::find_if(series.begin(), series.end(),
                                       [&](const SvgSeries& s) { return s.name == r.scheduler; });
                if (it == series.end()) {
                    series.push_back({r.scheduler, {}});
                    it = std::prev(series.end());
                }
                it->points.emplace_back(r.lambda, r.cost_mean);
            }
            write_svg_chart(out_dir / "lambda_costs.svg", "discounted cost vs lambda",
                            "lambda", "cost", series, /*log_x=*/true);
            outputs.push_back("lambda_costs.svg");
        }
    } else if (mode == "dist") {
        // Two families of interference laws, matched in mean within each group.
        const std::vector<std::vector<AttackDistribution>> groups{
            {UniformAttack{0.0, 1.0}, PoissonAttack{0.5},
             TruncNormAttack{0.5, std::sqrt(1.0 / 12.0), 0.0, 1.0}},
            {UniformAttack{0.0, 2.0}, PoissonAttack{1.0},
             TruncNormAttack{1.0, std::sqrt(1.0 / 3.0), 0.0, 2.0}}};
        CsvTable t;
        t.header = "dist,mean_attack,cost_mean,cost_stderr,upper_bound";
        for (const auto& group : groups) {
            const DistComparison comp = compare_attack_distributions(group, spec);
            for (const auto& r : comp.rows)
                t.rows.push_back({r.dist, format_number(r.mean_attack),
                                  format_number(r.cost_mean), format_number(r.cost_stderr),
                                  format_number(r.upper_bound)});
            for (const auto& d : comp.pairs)
                std::cout << comp.rows[d.i].dist << " vs " << comp.rows[d.j].dist
                          << ": diff = " << format_number(d.diff) << " (stderr "
                          << format_number(d.combined_stderr) << ")\n";
        }
        write_csv(out_dir / "dist_compare.csv", t);
        outputs.push_back("dist_compare.csv");
        if (svg) {
            SvgSeries emp{"empirical", {}};
            SvgSeries bound{"upper_bound", {}};
            for (const auto& row : t.rows) {
                emp.points.emplace_back(std::stod(row[1]), std::stod(row[2]));
                bound.points.emplace_back(std::stod(row[1]), std::stod(row[4]));
            }
            write_svg_chart(out_dir / "dist_compare.svg", "cost across attack laws",
                            "mean attack power", "cost", {emp, bound});
            outputs.push_back("dist_compare.svg");
        }
    } else {
        throw ConfigError("sweep: mode must be power, lambda, or dist");
    }

    write_manifest(out_dir, make_manifest(spec, outputs));
    std::cout << "wrote " << (out_dir / outputs.front()).string() << '\n';
    return 0;
}

inline int cmd_dp(const fs::path& config_path, const std::string& horizon_mode,
                  int grid_points, const fs::path& out_dir) {
    const ExperimentSpec spec = load_config(config_path);
    spec.validate();

    GridSpec grid;
    double tol = 1e-6;
    if (const auto* f = std::get_if<GridDPFinite>(&spec.sched)) {
        grid = f->grid;
    } else if (const auto* i = std::get_if<GridDPInfinite>(&spec.sched)) {
        grid = i->grid;
        tol = i->tol;
    }
    if (grid_points > 0) grid.n_e = grid_points;
    if (grid.a_nodes.empty()) grid.a_nodes = attack_nodes(spec.dist, grid.n_a);

    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    if (horizon_mode == "finite") {
        const ValueTable table =
            finite_dp_solve(spec.model, spec.ch, grid, spec.horizon, spec.lambda);
        CsvTable t;
        t.header = "k,e,a,V,q_star,iota";
        const auto n_a = table.a_nodes.size();
        for (std::size_t k = 0; k < table.q_star.size(); ++k)
            for (std::size_t i = 0; i < table.e_grid.size(); ++i)
                for (std::size_t l = 0; l < n_a; ++l) {
                    const auto node = table.idx(i, l);
                    t.rows.push_back({format_number(static_cast<std::uint64_t>(k)),
                                      format_number(table.e_grid[i]),
                                      format_number(table.a_nodes[l].a),
                                      format_number(table.V[k][node]),
                                      format_number(table.q_star[k][node]),
                                      format_number(table.iota[k][node])});
                }
        write_csv(out_dir / "value_table.csv", t);
        outputs.push_back("value_table.csv");
        std::cout << "finite horizon T = " << spec.horizon << ", "
                  << table.e_grid.size() << " x " << n_a << " nodes\n";
    } else {
        const ValueTable table =
            infinite_dp_solve(spec.model, spec.ch, grid, tol, spec.lambda);
        CsvTable t;
        t.header = "e,a,V,q_star";
        const auto n_a = table.a_nodes.size();
        for (std::size_t i = 0; i < table.e_grid.size(); ++i)
            for (std::size_t l = 0; l < n_a; ++l) {
                const auto node = table.idx(i, l);
                t.rows.push_back({format_number(table.e_grid[i]),
                                  format_number(table.a_nodes[l].a),
                                  format_number(table.V[0][node]),
                                  format_number(table.q_star[0][node])});
            }
        write_csv(out_dir / "value_table.csv", t);
        outputs.push_back("value_table.csv");
        CsvTable conv;
        conv.header = "sweep,delta";
        for (std::size_t s = 0; s < table.sweep_deltas.size(); ++s)
            conv.rows.push_back({format_number(static_cast<std::uint64_t>(s + 1)),
                                 format_number(table.sweep_deltas[s])});
        write_csv(out_dir / "convergence.csv", conv);
        outputs.push_back("convergence.csv");
        std::cout << "value iteration: " << table.sweeps << " sweeps, final update "
                  << format_number(table.final_update) << ", Bellman residual "
                  << format_number(table.bellman_residual) << '\n';
    }
    write_manifest(out_dir, make_manifest(spec, outputs));
    std::cout << "wrote " << (out_dir / "value_table.csv").string() << '\n';
    return 0;
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"transmission power scheduling for feedback control over a jammed link"};
#ifdef POWERSCHED_VERSION
    app.set_version_flag("--version", POWERSCHED_VERSION);
#endif
    app.require_subcommand(1);

    std::string v_cfg;
    auto* v = app.add_subcommand("validate", "check a config and the stabilizability margin");
    v->add_option("config", v_cfg, "JSON config file")->required();

    std::string s_cfg, s_out = "out";
    std::optional<std::uint64_t> s_trials, s_seed;
    bool s_traces = false;
    auto* s = app.add_subcommand("simulate", "Monte Carlo run of the configured loop");
    s->add_option("config", s_cfg, "JSON config file")->required();
    s->add_option("--trials", s_trials, "override trial count");
    s->add_option("--seed", s_seed, "override master seed");
    s->add_option("--out", s_out, "output directory");
    s->add_flag("--traces", s_traces, "write per-slot traces for the first trials");

    std::string w_cfg, w_mode, w_out = "out";
    bool w_svg = false;
    auto* w = app.add_subcommand("sweep", "parameter sweeps comparing schedulers");
    w->add_option("config", w_cfg, "JSON config file")->required();
    w->add_option("--mode", w_mode, "sweep kind")
        ->required()
        ->check(CLI::IsMember({"power", "lambda", "dist"}));
    w->add_option("--out", w_out, "output directory");
    w->add_flag("--svg", w_svg, "also write charts");

    std::string b_cfg;
    auto* b = app.add_subcommand("bounds", "closed-form cost bounds for the config");
    b->add_option("config", b_cfg, "JSON config file")->required();

    std::string d_cfg, d_horizon = "infinite", d_out = "out";
    int d_grid = 0;
    auto* d = app.add_subcommand("dp", "solve the scalar grid dynamic program");
    d->add_option("config", d_cfg, "JSON config file")->required();
    d->add_option("--horizon", d_horizon, "finite or infinite")
        ->check(CLI::IsMember({"finite", "infinite"}));
    d->add_option("--grid-points", d_grid, "error-grid size override (odd, >= 33)");
    d->add_option("--out", d_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return guard([&]() -> int {
        if (v->parsed()) return cmd_validate(v_cfg);
        if (s->parsed()) return cmd_simulate(s_cfg, s_trials, s_seed, s_out, s_traces);
        if (w->parsed()) return cmd_sweep(w_cfg, w_mode, w_out, w_svg);
        if (b->parsed()) return cmd_bounds(b_cfg);
        if (d->parsed()) return cmd_dp(d_cfg, d_horizon, d_grid, d_out);
        return 2;  // unreachable: require_subcommand(1)
    });
}

}  // namespace powersched::cli
