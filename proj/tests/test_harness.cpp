#include "reslab/harness/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace reslab::harness;

namespace {

using pairs = std::vector<std::pair<std::string, std::string>>;

std::string error_of(const pairs& file, const pairs& over = {})
{
    try {
        experiment_config::from_pairs(file, over);
    } catch (const config_error& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("reslab_harness_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, MinimalEsnApproxGetsDefaults)
{
    const auto cfg = experiment_config::from_pairs({{"experiment", "esn_approx"}}, {});
    EXPECT_EQ(cfg.int_list("n_grid"), (std::vector<std::size_t>{400, 1600, 6400}));
    EXPECT_EQ(cfg.real("ridge"), 1e-8);
    EXPECT_EQ(cfg.integer("train_steps"), 5000u);
    EXPECT_EQ(cfg.text("operator"), "exp_filter:lambda=0.5");
}

TEST(Config, Errors)
{
    EXPECT_NE(error_of({{"experiment", "esn_approx"}, {"n_grid", "400,200"}}).find("n-grid not increasing"),
              std::string::npos);
    EXPECT_NE(error_of({{"experiment", "esn_approx"}, {"lamda", "0.5"}}).find("'lamda'"), std::string::npos);
    EXPECT_NE(error_of({{"experiment", "teleport"}}).find("unknown experiment"), std::string::npos);
    EXPECT_NE(error_of({{"n", "3"}}).find("'experiment'"), std::string::npos);
    EXPECT_NE(error_of({{"experiment", "deviation"}, {"n", "ten"}}).find("'n'"), std::string::npos);
    EXPECT_NE(error_of({{"experiment", "deviation"}, {"n", "2.5"}}).find("'n'"), std::string::npos);
    EXPECT_NE(error_of({{"experiment", "esn_approx"}, {"truncate_target", "maybe"}}).find("truncate_target"),
              std::string::npos);
    EXPECT_THROW(parse_config("/nonexistent/reslab.conf"), config_error);
    EXPECT_THROW(parse_config_text("experiment = deviation\nno equals sign\n"), config_error);
}

TEST(Config, FileTextWithComments)
{
    const auto kv = parse_config_text("# header\nexperiment = deviation  # kind\n\n n=200\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[1].first, "n");
    EXPECT_EQ(kv[1].second, "200");
}

TEST(Config, OverrideWinsAndIsRecorded)
{
    const auto cfg = experiment_config::from_pairs({{"experiment", "deviation"}, {"n", "1000"}}, {{"n", "500"}});
    EXPECT_EQ(cfg.integer("n"), 500u);
    EXPECT_NE(cfg.canonical().find("n=500\n"), std::string::npos);
    EXPECT_EQ(cfg.overrides(), std::vector<std::string>{"n"});
}

TEST(Config, CanonicalFormIsStable)
{
    const auto a = experiment_config::from_pairs({{"experiment", "deviation"}, {"delta", "0.10"}, {"n", "1e3"}}, {});
    const auto b = experiment_config::from_pairs({{"n", "1000"}, {"experiment", "deviation"}}, {});
    EXPECT_EQ(a.canonical(), b.canonical());
    EXPECT_EQ(a.hash_hex(), b.hash_hex());
    EXPECT_EQ(a.hash_hex().size(), 16u);
    const auto c = experiment_config::from_pairs({{"experiment", "deviation"}, {"threads", "4"}, {"output_dir", "/x"}}, {});
    EXPECT_EQ(a.hash(), c.hash());
    const auto d = experiment_config::from_pairs({{"experiment", "deviation"}, {"seed", "1"}}, {});
    EXPECT_NE(a.hash(), d.hash());
}

TEST(Run, BudgetTableIsPureAndDeterministic)
{
    const auto cfg = experiment_config::from_pairs({{"experiment", "budget_table"}, {"n_grid", "1000,1000000"}}, {});
    const auto a = run_experiment(cfg), b = run_experiment(cfg);
    EXPECT_EQ(a.rows.to_csv(), b.rows.to_csv());
    EXPECT_EQ(a.rows.rows.size(), 3u * 2u);
    EXPECT_TRUE(a.failures.empty());
    EXPECT_EQ(a.rows.columns.front(), "m");
}

TEST(Run, DeviationDeterministicAndGridIsolated)
{
    const pairs base{{"experiment", "deviation"}, {"n", "200"}};
    const auto five = run_experiment(experiment_config::from_pairs(base, {{"trials", "5"}}));
    const auto again = run_experiment(experiment_config::from_pairs(base, {{"trials", "5"}}));
    const auto three = run_experiment(experiment_config::from_pairs(base, {{"trials", "3"}}));
    EXPECT_EQ(five.rows.to_csv(), again.rows.to_csv());
    ASSERT_EQ(five.rows.rows.size(), 5u);
    ASSERT_EQ(three.rows.rows.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(three.rows.rows[k], five.rows.rows[k]);
    EXPECT_EQ(five.summary["trials"], 5);
}

TEST(Run, ThreadCountDoesNotChangeRows)
{
    const pairs base{{"experiment", "deviation"}, {"n", "100"}, {"trials", "6"}};
    const auto one = run_experiment(experiment_config::from_pairs(base, {{"threads", "1"}}));
    const auto three = run_experiment(experiment_config::from_pairs(base, {{"threads", "3"}}));
    EXPECT_EQ(one.rows.to_csv(), three.rows.to_csv());
    EXPECT_EQ(one.config_hash, three.config_hash);
}

TEST(Run, FailingCellLeavesErrorRow)
{
    const auto cfg = experiment_config::from_pairs({{"experiment", "budget_table"}}, {});
    experiment_plan plan;
    plan.columns = {"k", "value"};
    for (int k = 0; k < 3; ++k)
        plan.cells.push_back({"k=" + std::to_string(k), [k](std::uint64_t) -> std::vector<row> {
                                  if (k == 1) throw std::runtime_error("boom");
                                  return {{std::to_string(k), "1"}};
                              }});
    const auto rec = run_plan(cfg, plan, 2);
    ASSERT_EQ(rec.rows.rows.size(), 3u);
    ASSERT_EQ(rec.failures.size(), 1u);
    EXPECT_EQ(rec.failures[0].cell, "k=1");
    EXPECT_EQ(rec.rows.rows[1].back(), "error: boom");
    EXPECT_EQ(rec.rows.rows[2].back(), "ok");
}

TEST(Csv, SeventeenDigitsRoundTrip)
{
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::stod(csv_real(x)), x);
    EXPECT_EQ(csv_real(0.1), "0.10000000000000001");
    table t;
    t.columns = {"a", "b"};
    t.rows = {{"1", "x"}};
    EXPECT_EQ(t.to_csv(), "a,b\n1,x\n");
}

TEST(Record, WriteReadAndPlot)
{
    const auto dir = scratch_dir("plot");
    result_record r;
    r.config_hash = "0123456789abcdef";
    r.experiment = "esn_approx";
    r.rows.columns = {"n", "sup_error", "total_bound", "status"};
    r.rows.rows = {{"400", "0.4", "10", "ok"},  {"400", "0.2", "10", "ok"},  {"400", "0.3", "10", "ok"},
                   {"1600", "0.1", "5", "ok"},  {"1600", "", "", "error: x"}};
    const auto path = write_record(r, dir.string());
    const auto back = read_record(path);
    EXPECT_EQ(back.rows.rows, r.rows.rows);
    const auto plot = emit_plot_data(path, plot_kind::error_vs_n);
    std::ifstream in(plot);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    EXPECT_EQ(header, "# log_n log_sup_error log_total_bound");
    EXPECT_EQ(l1, csv_real(std::log(400.0)) + " " + csv_real(std::log(0.3)) + " " + csv_real(std::log(10.0)));
    EXPECT_EQ(l2, csv_real(std::log(1600.0)) + " " + csv_real(std::log(0.1)) + " " + csv_real(std::log(5.0)));
    std::filesystem::remove_all(dir);
}

TEST(Record, PlotNamesMissingColumns)
{
    result_record r;
    r.rows.columns = {"t", "status"};
    try {
        plot_table(r, plot_kind::gap_vs_t);
        FAIL() << "expected an exception";
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("gap"), std::string::npos);
    }
    EXPECT_THROW(parse_plot_kind("scatter"), std::invalid_argument);
}

TEST(Record, GapAndTrialTables)
{
    result_record r;
    r.rows.columns = {"pair", "t", "gap", "status"};
    r.rows.rows = {{"0", "1", "0.5", "ok"}, {"1", "1", "0.7", "ok"}, {"0", "2", "0.1", "ok"}};
    EXPECT_EQ(plot_table(r, plot_kind::gap_vs_t), "# t gap\n1 0.69999999999999996\n2 0.10000000000000001\n");
    r.rows.columns = {"trial", "empirical_sup", "bound", "status"};
    r.rows.rows = {{"0", "0.1", "0.27", "ok"}};
    EXPECT_EQ(plot_table(r, plot_kind::bound_vs_empirical), "# trial empirical_sup bound\n0 0.1 0.27\n");
}
