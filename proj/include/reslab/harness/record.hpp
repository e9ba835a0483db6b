#pragma once

// Result records (CSV payload plus a JSON summary) and plot-data emission.

#include "reslab/harness/table.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace reslab::harness {

inline constexpr std::string_view tool_version = "0.1.0";

struct cell_failure {
    std::string cell;
    std::string reason;
};

struct result_record {
    std::string config_hash;
    std::string experiment;
    table rows;
    std::string created_at;
    std::string tool_version;
    std::string config;  // canonical text
    std::vector<std::string> overrides;
    std::vector<cell_failure> failures;
    nlohmann::json summary = nlohmann::json::object();
};

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json to_json(const result_record& r)
{
    nlohmann::json fails = nlohmann::json::array();
    for (const auto& f : r.failures) fails.push_back({{"cell", f.cell}, {"reason", f.reason}});
    return {{"config_hash", r.config_hash}, {"experiment", r.experiment},  {"columns", r.rows.columns},
            {"rows", r.rows.rows},          {"created_at", r.created_at},  {"tool_version", r.tool_version},
            {"config", r.config},           {"overrides", r.overrides},    {"failures", fails},
            {"summary", r.summary}};
}

inline result_record record_from_json(const nlohmann::json& j)
{
    result_record r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.experiment = j.at("experiment").get<std::string>();
    r.rows.columns = j.at("columns").get<std::vector<std::string>>();
    r.rows.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
    r.created_at = j.value("created_at", "");
    r.tool_version = j.value("tool_version", "");
    r.config = j.value("config", "");
    r.overrides = j.value("overrides", std::vector<std::string>{});
    for (const auto& f : j.value("failures", nlohmann::json::array()))
        r.failures.push_back({f.at("cell").get<std::string>(), f.at("reason").get<std::string>()});
    r.summary = j.value("summary", nlohmann::json::object());
    return r;
}

/// Writes results.csv and record.json into `dir`; returns the record path.
inline std::string write_record(const result_record& r, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    write_text((std::filesystem::path(dir) / "results.csv").string(), r.rows.to_csv());
    const auto path = (std::filesystem::path(dir) / "record.json").string();
    write_text(path, to_json(r).dump(2) + "\n");
    return path;
}

inline result_record read_record(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open record '" + path + "'");
    return record_from_json(nlohmann::json::parse(in));
}

enum class plot_kind { error_vs_n, gap_vs_t, bound_vs_empirical };

inline plot_kind parse_plot_kind(const std::string& s)
{
    if (s == "error_vs_n") return plot_kind::error_vs_n;
    if (s == "gap_vs_t") return plot_kind::gap_vs_t;
    if (s == "bound_vs_empirical") return plot_kind::bound_vs_empirical;
    throw std::invalid_argument("unknown plot kind '" + s + "' (error_vs_n, gap_vs_t, bound_vs_empirical)");
}

inline std::string plot_kind_name(plot_kind k)
{
    switch (k) {
    case plot_kind::error_vs_n: return "error_vs_n";
    case plot_kind::gap_vs_t: return "gap_vs_t";
    case plot_kind::bound_vs_empirical: return "bound_vs_empirical";
    }
    return {};
}

namespace detail {

inline void require_columns(const table& t, const std::vector<std::string>& needed, plot_kind k)
{
    std::string missing;
    for (const auto& c : needed)
        if (!t.has_column(c)) missing += (missing.empty() ? "" : ", ") + c;
    if (!missing.empty())
        throw std::invalid_argument("plot " + plot_kind_name(k) + ": record lacks column(s) " + missing);
}

inline bool row_ok(const table& t, const std::vector<std::string>& row)
{
    return !t.has_column("status") || row[t.column("status")] == "ok";
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace detail

/// Whitespace-separated columns with a '#' header line:
///   error_vs_n          log n, log median sup_error, log total_bound (one line per n)
///   gap_vs_t            t, gap (max over pairs)
///   bound_vs_empirical  trial, empirical_sup, bound
inline std::string plot_table(const result_record& r, plot_kind k)
{
    const auto& t = r.rows;
    std::string out;
    auto num = [](const std::string& s) { return std::stod(s); };
    switch (k) {
    case plot_kind::error_vs_n: {
        detail::require_columns(t, {"n", "sup_error", "total_bound"}, k);
        std::map<double, std::pair<std::vector<double>, double>> by_n;
        for (const auto& row : t.rows) {
            if (!detail::row_ok(t, row)) continue;
            auto& e = by_n[num(row[t.column("n")])];
            e.first.push_back(num(row[t.column("sup_error")]));
            e.second = num(row[t.column("total_bound")]);
        }
        out = "# log_n log_sup_error log_total_bound\n";
        for (const auto& [n, e] : by_n)
            out += csv_real(std::log(n)) + " " + csv_real(std::log(detail::median(e.first))) + " "
                   + csv_real(std::log(e.second)) + "\n";
        break;
    }
    case plot_kind::gap_vs_t: {
        detail::require_columns(t, {"t", "gap"}, k);
        std::map<double, double> by_t;
        for (const auto& row : t.rows) {
            if (!detail::row_ok(t, row)) continue;
            auto& g = by_t[num(row[t.column("t")])];
            g = std::max(g, num(row[t.column("gap")]));
        }
        out = "# t gap\n";
        for (const auto& [tt, g] : by_t) out += csv_real(tt) + " " + csv_real(g) + "\n";
        break;
    }
    case plot_kind::bound_vs_empirical: {
        detail::require_columns(t, {"trial", "empirical_sup", "bound"}, k);
        out = "# trial empirical_sup bound\n";
        for (const auto& row : t.rows) {
            if (!detail::row_ok(t, row)) continue;
            out += row[t.column("trial")] + " " + row[t.column("empirical_sup")] + " " + row[t.column("bound")] + "\n";
        }
        break;
    }
    }
    return out;
}

/// Writes plot_<kind>.txt next to the record and returns its path.
inline std::string emit_plot_data(const std::string& record_path, plot_kind k)
{
    const auto rec = read_record(record_path);
    const auto path =
      (std::filesystem::path(record_path).parent_path() / ("plot_" + plot_kind_name(k) + ".txt")).string();
    write_text(path, plot_table(rec, k));
    return path;
}

}  // namespace reslab::harness
