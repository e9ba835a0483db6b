#pragma once

// Experiment plans: each experiment expands its config into independent grid cells, runs
// them on a worker pool, and gathers rows in cell order.

#include "reslab/bounds.hpp"
#include "reslab/fourier.hpp"
#include "reslab/harness/config.hpp"
#include "reslab/harness/record.hpp"
#include "reslab/harness/table.hpp"
#include "reslab/operators.hpp"
#include "reslab/readout.hpp"
#include "reslab/reservoir.hpp"
#include "reslab/solver.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <thread>

namespace reslab::harness {

using row = std::vector<std::string>;

struct grid_cell {
    std::string coords;
    std::function<std::vector<row>(std::uint64_t seed)> run;
};

struct experiment_plan {
    std::vector<std::string> columns;
    std::vector<grid_cell> cells;
    std::function<nlohmann::json(const table&)> summarize;
};

namespace detail {

inline std::vector<double> column_values(const table& t, const std::string& name, const std::string& filter_col = {},
                                         const std::string& filter_val = {})
{
    std::vector<double> out;
    const auto k = t.column(name);
    const auto s = t.column("status");
    for (const auto& r : t.rows) {
        if (r[s] != "ok") continue;
        if (!filter_col.empty() && r[t.column(filter_col)] != filter_val) continue;
        out.push_back(std::stod(r[k]));
    }
    return out;
}

inline experiment_plan plan_reconstruction(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"md", "point", "coordinate", "x", "estimate", "se", "within_4se"};
    const auto dist = symmetric_distribution::parse(cfg.text("dist"));
    const std::size_t points = cfg.integer("points"), samples = cfg.integer("samples");
    const double box = cfg.real("box");
    for (std::size_t md : cfg.int_list("md_grid")) {
        plan.cells.push_back({"md=" + std::to_string(md), [=](std::uint64_t seed) {
                                  splitmix64 rng{derive_seed(seed, 0)};
                                  std::vector<vector> xs(points, vector(static_cast<Eigen::Index>(md)));
                                  for (auto& x : xs)
                                      for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.symmetric_uniform(box);
                                  const auto res = monte_carlo_reconstruction(dist, xs, samples, derive_seed(seed, 1));
                                  std::vector<row> rows;
                                  for (std::size_t j = 0; j < res.size(); ++j)
                                      for (Eigen::Index k = 0; k < res[j].x.size(); ++k) {
                                          const double err = std::abs(res[j].estimate[k] - res[j].x[k]);
                                          rows.push_back({csv_int(md), csv_int(j), csv_int(static_cast<std::size_t>(k)),
                                                          csv_real(res[j].x[k]), csv_real(res[j].estimate[k]),
                                                          csv_real(res[j].se[k]), csv_bool(err <= 4.0 * res[j].se[k])});
                                      }
                                  return rows;
                              }});
    }
    plan.summarize = [](const table& t) {
        const auto ok = column_values(t, "md");  // count of ok rows
        std::size_t within = 0;
        const auto k = t.column("within_4se");
        for (const auto& r : t.rows)
            if (r[k] == "true") ++within;
        return nlohmann::json{{"coordinates", ok.size()}, {"within_4se", within}};
    };
    return plan;
}

inline experiment_plan plan_deviation(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"trial", "n", "d", "empirical_sup", "bound", "violated"};
    const std::size_t d = cfg.integer("d"), n = cfg.integer("n"), trials = cfg.integer("trials");
    const double r = cfg.real("r"), delta = cfg.real("delta"), B = cfg.real("B");
    std::size_t grid = cfg.integer("grid_points");
    if (grid == 0) grid = covering_points(n);
    const weight_function g = [B](const vector&) { return B; };
    auto ref = std::make_shared<deviation_reference>(
      make_deviation_reference(g, d, r, grid, 100 * n, cfg.cell_seed("reference")));
    for (std::size_t k = 0; k < trials; ++k)
        plan.cells.push_back({"trial=" + std::to_string(k), [=](std::uint64_t seed) {
                                  const auto tr = deviation_trial(*ref, B, n, delta, seed, g);
                                  return std::vector<row>{{csv_int(k), csv_int(n), csv_int(d), csv_real(tr.empirical_sup),
                                                           csv_real(tr.bound), csv_bool(tr.violated)}};
                              }});
    plan.summarize = [delta](const table& t) {
        std::size_t bad = 0;
        const auto k = t.column("violated");
        for (const auto& r : t.rows)
            if (r[k] == "true") ++bad;
        const double N = static_cast<double>(t.rows.size());
        return nlohmann::json{{"trials", t.rows.size()},
                              {"violations", bad},
                              {"violation_fraction", N > 0 ? bad / N : 0.0},
                              {"allowed_fraction", delta + 3.0 * std::sqrt(delta * (1.0 - delta) / std::max(1.0, N))}};
    };
    return plan;
}

inline experiment_plan plan_esn_approx(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"n", "m", "d", "seed", "lambda_ridge", "sup_error", "mean_abs_error", "total_bound", "tail"};
    const auto spec = parse_operator(cfg.text("operator"));
    const auto dist = symmetric_distribution::parse(cfg.text("dist"));
    const std::size_t m = cfg.integer("m"), seeds = cfg.integer("seeds");
    const double delta = cfg.real("delta"), B_m = cfg.real("B_m");
    pipeline_config base;
    base.dist = dist;
    base.m = m;
    base.target = cfg.boolean("truncate_target") ? truncate(spec, m) : spec;
    base.target_window = cfg.integer("target_window");
    base.train_steps = cfg.integer("train_steps");
    base.test_sequences = cfg.integer("test_sequences");
    base.test_length = cfg.integer("test_length");
    base.warmup = cfg.integer("warmup");
    base.ridge = cfg.real("ridge");
    const double tail = spec.tail(m);
    for (std::size_t n : cfg.int_list("n_grid"))
        for (std::size_t s = 0; s < seeds; ++s)
            plan.cells.push_back({"n=" + std::to_string(n) + ",seed=" + std::to_string(s), [=](std::uint64_t seed) {
                                      auto pc = base;
                                      pc.n = n;
                                      pc.ensemble_seed = derive_seed(seed, 0);
                                      pc.data_seed = derive_seed(seed, 1);
                                      const auto res = train_test_pipeline(pc);
                                      const auto eb = theorem_budget(B_m, tail, m, spec.d, n, delta);
                                      return std::vector<row>{{csv_int(n), csv_int(m), csv_int(spec.d), csv_int(s),
                                                               csv_real(res.fit.ridge_lambda),
                                                               csv_real(res.report.sup_error),
                                                               csv_real(res.report.mean_abs_error),
                                                               csv_real(eb.total_bound), csv_real(tail)}};
                                  }});
    const auto grid = cfg.int_list("n_grid");
    plan.summarize = [grid](const table& t) {
        nlohmann::json med = nlohmann::json::object();
        for (std::size_t n : grid) {
            const auto v = column_values(t, "sup_error", "n", csv_int(n));
            if (!v.empty()) med[std::to_string(n)] = harness::detail::median(v);
        }
        return nlohmann::json{{"median_sup_error", med}};
    };
    return plan;
}

inline experiment_plan plan_fixed_point(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"window", "residual", "iters", "converged", "max_window_proximity", "box_violations",
                    "recheck_residual"};
    const std::size_t n = cfg.integer("n"), m = cfg.integer("m"), d = cfg.integer("d");
    const std::size_t length = cfg.integer("length"), max_iters = cfg.integer("max_iters");
    const double tol = cfg.real("tol");
    auto res = std::make_shared<shift_reservoir>(
      sample_ensemble(symmetric_distribution::parse(cfg.text("dist")), n, m, d, cfg.cell_seed("ensemble")));
    for (std::size_t w = 0; w < cfg.integer("windows"); ++w)
        plan.cells.push_back({"window=" + std::to_string(w), [=](std::uint64_t seed) {
                                  const auto u = random_input(length, d, seed);
                                  const auto sol = fixed_point_solve(*res, u, tol, max_iters);
                                  const auto cert = make_certificate(sol, u, m, tol, 0);
                                  return std::vector<row>{{csv_int(w), csv_real(cert.residual), csv_int(cert.iters),
                                                           csv_bool(cert.converged), csv_real(cert.max_window_proximity),
                                                           csv_int(cert.box_violations),
                                                           csv_real(recheck_residual(*res, sol.state, u))}};
                              }});
    plan.summarize = [](const table& t) {
        std::size_t conv = 0;
        const auto k = t.column("converged");
        for (const auto& r : t.rows)
            if (r[k] == "true") ++conv;
        return nlohmann::json{{"windows", t.rows.size()}, {"converged", conv}};
    };
    return plan;
}

inline experiment_plan plan_weak_esp(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"pair", "t", "gap", "output_gap"};
    const std::size_t n = cfg.integer("n"), m = cfg.integer("m"), length = cfg.integer("length");
    pipeline_config pc;
    pc.dist = symmetric_distribution::parse(cfg.text("dist"));
    pc.n = n;
    pc.m = m;
    pc.target = truncate(parse_operator(cfg.text("operator")), m);
    pc.train_steps = cfg.integer("train_steps");
    pc.ridge = cfg.real("ridge");
    pc.ensemble_seed = cfg.cell_seed("ensemble");
    pc.data_seed = cfg.cell_seed("data");
    auto fitted = std::make_shared<pipeline_result>(train_test_pipeline(pc));
    auto res = std::make_shared<shift_reservoir>(fitted->ensemble);
    const std::size_t d = pc.target.d;
    for (std::size_t p = 0; p < cfg.integer("pairs"); ++p)
        plan.cells.push_back({"pair=" + std::to_string(p), [=](std::uint64_t seed) {
                                  splitmix64 rng{derive_seed(seed, 0)};
                                  state_vector a = res->zero_state(), b = res->zero_state();
                                  for (Eigen::Index i = 0; i < a.s.size(); ++i) {
                                      a.s[i] = rng.uniform01();
                                      b.s[i] = rng.uniform01();
                                  }
                                  const auto u = random_input(length, d, derive_seed(seed, 1));
                                  std::vector<row> rows;
                                  for (std::size_t t = 0; t < length; ++t) {
                                      const vector ut = u.step(t);
                                      a = res->state_update(a, ut);
                                      b = res->state_update(b, ut);
                                      rows.push_back({csv_int(p), csv_int(t + 1), csv_real(sup_norm(a.s - b.s)),
                                                      csv_real(std::abs(fitted->fit.predict(a.s) - fitted->fit.predict(b.s)))});
                                  }
                                  return rows;
                              }});
    const double sup_error = fitted->report.sup_error;
    plan.summarize = [sup_error, m](const table& t) {
        std::size_t kept = 0, within = 0;
        const auto tc = t.column("t"), gc = t.column("output_gap");
        for (const auto& r : t.rows) {
            if (r[t.column("status")] != "ok" || std::stoul(r[tc]) < 3 * m) continue;
            ++kept;
            if (std::stod(r[gc]) <= 2.0 * sup_error) ++within;
        }
        return nlohmann::json{{"model_sup_error", sup_error}, {"steps_checked", kept}, {"steps_within_2x", within}};
    };
    return plan;
}

inline experiment_plan plan_fourier_verify(const experiment_config& cfg)
{
    experiment_plan plan;
    plan.columns = {"point", "x", "estimate", "exact", "error", "se", "within_4se"};
    const auto profile = std::make_shared<fourier_profile>(parse_profile(cfg.text("profile")));
    if (profile->d != 1) throw config_error("fourier_verify: only d = 1 profiles are supported by the grid");
    auto rep = std::make_shared<relu_representation>(representation_from_profile(*profile));
    const std::size_t samples = cfg.integer("mc_samples");
    const auto grid = verification_grid(1, cfg.integer("grid_points"));
    for (std::size_t j = 0; j < grid.size(); ++j)
        plan.cells.push_back({"point=" + std::to_string(j), [=, x = grid[j]](std::uint64_t seed) {
                                  const auto r = verify_representation(*rep, profile->f_exact, {x}, samples, seed);
                                  const auto& p = r.points.front();
                                  return std::vector<row>{{csv_int(j), csv_real(x[0]), csv_real(p.estimate),
                                                           csv_real(p.exact), csv_real(p.error), csv_real(p.se),
                                                           csv_bool(p.error <= 4.0 * p.se)}};
                              }});
    const double sampled = rep->sampled_sup, bound = rep->sup_bound;
    plan.summarize = [sampled, bound](const table& t) {
        std::size_t within = 0;
        const auto k = t.column("within_4se");
        for (const auto& r : t.rows)
            if (r[k] == "true") ++within;
        return nlohmann::json{
          {"points", t.rows.size()}, {"within_4se", within}, {"sampled_sup_g", sampled}, {"sup_bound", bound}};
    };
    return plan;
}

inline table budget_rows(const std::vector<std::size_t>& ms, const std::vector<std::size_t>& ds,
                         const std::vector<double>& deltas, const std::vector<std::size_t>& ns, double B_m,
                         const std::function<double(std::size_t)>& tail)
{
    table t;
    t.columns = {"m", "d", "delta", "B_m", "n", "E1", "E2", "C", "c", "feasible", "tail", "total_bound"};
    for (auto m : ms)
        for (auto d : ds)
            for (auto delta : deltas)
                for (auto n : ns) {
                    const auto eb = theorem_budget(B_m, tail ? tail(m) : 0.0, m, d, n, delta);
                    t.rows.push_back({csv_int(m), csv_int(d), csv_real(delta), csv_real(B_m), csv_int(n), csv_real(eb.E1),
                                      csv_real(eb.E2), csv_real(eb.C_mdd), csv_real(eb.c_mdd), csv_bool(eb.feasible),
                                      csv_real(eb.tail_EF), csv_real(eb.total_bound)});
                }
    return t;
}

inline experiment_plan plan_budget_table(const experiment_config& cfg)
{
    experiment_plan plan;
    const std::string op = cfg.text("operator");
    std::function<double(std::size_t)> tail;
    if (!op.empty()) tail = parse_operator(op).tail;
    const double B_m = cfg.real("B_m");
    const auto ds = cfg.int_list("d_grid");
    const auto deltas = cfg.real_list("delta_grid");
    const auto ns = cfg.int_list("n_grid");
    plan.columns = budget_rows({}, {}, {}, {}, B_m, tail).columns;
    for (auto m : cfg.int_list("m_grid"))
        plan.cells.push_back({"m=" + std::to_string(m), [=](std::uint64_t) {
                                  return budget_rows({m}, ds, deltas, ns, B_m, tail).rows;
                              }});
    plan.summarize = [](const table&) { return nlohmann::json::object(); };
    return plan;
}

}  // namespace detail

inline experiment_plan make_plan(const experiment_config& cfg)
{
    const auto& e = cfg.experiment();
    if (e == "reconstruction") return detail::plan_reconstruction(cfg);
    if (e == "deviation") return detail::plan_deviation(cfg);
    if (e == "esn_approx") return detail::plan_esn_approx(cfg);
    if (e == "fixed_point") return detail::plan_fixed_point(cfg);
    if (e == "weak_esp") return detail::plan_weak_esp(cfg);
    if (e == "fourier_verify") return detail::plan_fourier_verify(cfg);
    if (e == "budget_table") return detail::plan_budget_table(cfg);
    throw config_error("unknown experiment '" + e + "'");
}

/// Run every cell on `threads` workers. A throwing cell yields one row whose status column
/// carries the reason; rows are gathered in cell order.
inline result_record run_plan(const experiment_config& cfg, const experiment_plan& plan, std::size_t threads)
{
    const std::size_t cells = plan.cells.size();
    std::vector<std::vector<row>> out(cells);
    std::vector<std::string> errors(cells);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < cells;) {
            try {
                out[k] = plan.cells[k].run(cfg.cell_seed(plan.cells[k].coords));
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, cells));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    result_record rec;
    rec.config_hash = cfg.hash_hex();
    rec.experiment = cfg.experiment();
    rec.created_at = utc_timestamp();
    rec.tool_version = std::string{tool_version};
    rec.config = cfg.canonical();
    rec.overrides = cfg.overrides();
    rec.rows.columns = plan.columns;
    rec.rows.columns.push_back("status");
    for (std::size_t k = 0; k < cells; ++k) {
        if (!errors[k].empty()) {
            row r(plan.columns.size(), "");
            r.push_back("error: " + errors[k]);
            rec.rows.rows.push_back(std::move(r));
            rec.failures.push_back({plan.cells[k].coords, errors[k]});
            continue;
        }
        for (auto& r : out[k]) {
            r.push_back("ok");
            rec.rows.rows.push_back(std::move(r));
        }
    }
    if (plan.summarize) {
        try {
            rec.summary = plan.summarize(rec.rows);
        } catch (const std::exception& e) {
            rec.summary = {{"error", e.what()}};
        }
    }
    return rec;
}

inline result_record run_experiment(const experiment_config& cfg)
{
    return run_plan(cfg, make_plan(cfg), cfg.integer("threads"));
}

/// Output directory: the config's output_dir, else $RESERVOIR_LAB_OUT (default
/// "reservoir-lab-out") joined with <experiment>-<config hash>.
inline std::string output_directory(const experiment_config& cfg)
{
    if (!cfg.text("output_dir").empty()) return cfg.text("output_dir");
    const char* root = std::getenv("RESERVOIR_LAB_OUT");
    return (std::filesystem::path(root && *root ? root : "reservoir-lab-out")
            / (cfg.experiment() + "-" + cfg.hash_hex()))
      .string();
}

}  // namespace reslab::harness
