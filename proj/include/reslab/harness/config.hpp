#pragma once

// Flat key = value experiment configs with a typed schema per experiment.
//
//     # comment
//     experiment = esn_approx
//     n_grid = 400, 1600, 6400
//
// Values are canonicalized on load (numbers reprinted, lists normalized), so equivalent
// spellings hash identically. Command-line overrides replace file values and are listed in
// the record.

#include "reslab/ensemble.hpp"
#include "reslab/rng.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace reslab::harness {

class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class value_type { integer, real, text, int_list, real_list, boolean };

struct param_def {
    std::string key;
    value_type type;
    std::optional<std::string> fallback;  // nullopt: required
    bool grid = false;  // enumerates cells; excluded from the per-cell seed digest
    bool increasing = false;
};

inline const std::vector<std::string>& experiment_kinds()
{
    static const std::vector<std::string> kinds{"reconstruction", "deviation",      "esn_approx", "fixed_point",
                                                "weak_esp",       "fourier_verify", "budget_table"};
    return kinds;
}

/// Keys accepted by every experiment. None of them changes results except `seed`.
inline std::vector<param_def> common_schema()
{
    return {{"experiment", value_type::text, std::nullopt},
            {"seed", value_type::integer, "0"},
            {"output_dir", value_type::text, ""},
            {"threads", value_type::integer, "1"}};
}

inline std::vector<param_def> experiment_schema(const std::string& kind)
{
    using vt = value_type;
    if (kind == "reconstruction")
        return {{"dist", vt::text, "uniform:r=0.5"},
                {"md_grid", vt::int_list, "1,2,4,6", true, true},
                {"points", vt::integer, "10"},
                {"samples", vt::integer, "10000000"},
                {"box", vt::real, "2"}};
    if (kind == "deviation")
        return {{"d", vt::integer, "1"},          {"n", vt::integer, "1000"},  {"r", vt::real, "1"},
                {"delta", vt::real, "0.1"},       {"B", vt::real, "1"},        {"trials", vt::integer, "500", true},
                {"grid_points", vt::integer, "0"}};
    if (kind == "esn_approx")
        return {{"operator", vt::text, "exp_filter:lambda=0.5"},
                {"dist", vt::text, "uniform:r=0.5"},
                {"n_grid", vt::int_list, "400,1600,6400", true, true},
                {"m", vt::integer, "4"},
                {"seeds", vt::integer, "5", true},
                {"ridge", vt::real, "1e-8"},
                {"train_steps", vt::integer, "5000"},
                {"test_sequences", vt::integer, "8"},
                {"test_length", vt::integer, "200"},
                {"warmup", vt::integer, "0"},
                {"truncate_target", vt::boolean, "true"},
                {"target_window", vt::integer, "0"},
                {"delta", vt::real, "0.05"},
                {"B_m", vt::real, "1"}};
    if (kind == "fixed_point")
        return {{"dist", vt::text, "uniform:r=0.5"},
                {"n", vt::integer, "4000"},
                {"m", vt::integer, "2"},
                {"d", vt::integer, "1"},
                {"windows", vt::integer, "20", true},
                {"length", vt::integer, "50"},
                {"tol", vt::real, "1e-10"},
                {"max_iters", vt::integer, "100"}};
    if (kind == "weak_esp")
        return {{"dist", vt::text, "uniform:r=0.5"},
                {"operator", vt::text, "exp_filter:lambda=0.5"},
                {"n", vt::integer, "4000"},
                {"m", vt::integer, "2"},
                {"pairs", vt::integer, "1", true},
                {"length", vt::integer, "200"},
                {"ridge", vt::real, "1e-8"},
                {"train_steps", vt::integer, "5000"}};
    if (kind == "fourier_verify")
        return {{"profile", vt::text, "bump:scale=1"},
                {"mc_samples", vt::integer, "1000000"},
                {"grid_points", vt::integer, "11", true}};
    if (kind == "budget_table")
        return {{"m_grid", vt::int_list, "1,2,4", true, true},
                {"d_grid", vt::int_list, "1", true, true},
                {"delta_grid", vt::real_list, "0.05", true, true},
                {"n_grid", vt::int_list, "1000,10000,100000,1000000", true, true},
                {"B_m", vt::real, "1"},
                {"operator", vt::text, ""}};
    throw config_error("unknown experiment '" + kind + "'");
}

namespace detail {

inline std::string canonical_integer(std::string_view v, const std::string& key)
{
    double x = 0;
    try {
        x = reslab::detail::parse_double(v, key);
    } catch (const std::invalid_argument&) {
        throw config_error("parameter '" + key + "' expects a nonnegative integer, got '" + std::string{v} + "'");
    }
    if (!(x >= 0) || x != std::floor(x) || x > 9.007199254740992e15)
        throw config_error("parameter '" + key + "' expects a nonnegative integer, got '" + std::string{v} + "'");
    return std::to_string(static_cast<unsigned long long>(x));
}

inline std::string canonical_real(std::string_view v, const std::string& key)
{
    double x = 0;
    try {
        x = reslab::detail::parse_double(v, key);
    } catch (const std::invalid_argument&) {
        throw config_error("parameter '" + key + "' expects a real number, got '" + std::string{v} + "'");
    }
    if (!std::isfinite(x)) throw config_error("parameter '" + key + "' must be finite");
    return reslab::detail::format_double(x);
}

inline std::string canonical_value(const param_def& def, std::string_view raw)
{
    const auto v = reslab::detail::trim(raw);
    auto list = [&](bool integer) {
        std::string out;
        double last = -HUGE_VAL;
        for (auto item : reslab::detail::split(v, ',')) {
            item = reslab::detail::trim(item);
            if (item.empty()) throw config_error("parameter '" + def.key + "' has an empty list entry");
            std::string c;
            try {
                c = integer ? canonical_integer(item, def.key) : canonical_real(item, def.key);
            } catch (const std::invalid_argument& e) {
                throw config_error(e.what());
            }
            const double x = reslab::detail::parse_double(c, def.key);
            if (def.increasing && !(x > last)) {
                std::string name = def.key;
                std::replace(name.begin(), name.end(), '_', '-');
                throw config_error(name + " not increasing");
            }
            last = x;
            out += (out.empty() ? "" : ",") + c;
        }
        return out;
    };
    switch (def.type) {
    case value_type::integer:
        try {
            return canonical_integer(v, def.key);
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
    case value_type::real: return canonical_real(v, def.key);
    case value_type::text: return std::string{v};
    case value_type::int_list: return list(true);
    case value_type::real_list: return list(false);
    case value_type::boolean:
        if (v == "true" || v == "1" || v == "yes") return "true";
        if (v == "false" || v == "0" || v == "no") return "false";
        throw config_error("parameter '" + def.key + "' expects true or false, got '" + std::string{v} + "'");
    }
    return std::string{v};
}

}  // namespace detail

class experiment_config {
public:
    const std::string& experiment() const { return experiment_; }
    const std::map<std::string, std::string>& values() const { return values_; }
    const std::vector<std::string>& overrides() const { return overrides_; }
    const std::vector<param_def>& schema() const { return schema_; }

    const std::string& text(const std::string& key) const
    {
        auto it = values_.find(key);
        if (it == values_.end()) throw config_error("no parameter '" + key + "' for experiment " + experiment_);
        return it->second;
    }
    std::size_t integer(const std::string& key) const { return std::stoull(text(key)); }
    double real(const std::string& key) const { return reslab::detail::parse_double(text(key), key); }
    bool boolean(const std::string& key) const { return text(key) == "true"; }
    std::vector<std::size_t> int_list(const std::string& key) const
    {
        std::vector<std::size_t> out;
        for (double x : reslab::detail::parse_list(text(key), ',', key)) out.push_back(static_cast<std::size_t>(x));
        return out;
    }
    std::vector<double> real_list(const std::string& key) const
    {
        return reslab::detail::parse_list(text(key), ',', key);
    }

    /// Sorted key=value lines of every result-affecting parameter.
    std::string canonical(bool include_grid = true) const
    {
        std::string out;
        for (const auto& [k, v] : values_) {
            if (k == "output_dir" || k == "threads") continue;
            if (!include_grid && is_grid(k)) continue;
            out += k + "=" + v + "\n";
        }
        return out;
    }

    std::uint64_t hash() const { return fnv1a64(canonical()); }

    std::string hash_hex() const
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

    /// Seed for one grid cell: digest of the non-grid config, the experiment and the cell
    /// coordinates, so adding or removing cells leaves every other cell unchanged.
    std::uint64_t cell_seed(const std::string& coords) const
    {
        return fnv1a64(canonical(false) + "|" + experiment_ + "|" + coords);
    }

    /// Build from raw key/value pairs (file first, then overrides).
    static experiment_config from_pairs(const std::vector<std::pair<std::string, std::string>>& file_pairs,
                                        const std::vector<std::pair<std::string, std::string>>& override_pairs)
    {
        std::map<std::string, std::string> raw;
        for (const auto& [k, v] : file_pairs) {
            if (raw.count(k)) throw config_error("duplicate key '" + k + "'");
            raw[k] = v;
        }
        experiment_config cfg;
        for (const auto& [k, v] : override_pairs) {
            raw[k] = v;
            cfg.overrides_.push_back(k);
        }
        auto kind = raw.find("experiment");
        if (kind == raw.end()) throw config_error("missing required parameter 'experiment'");
        cfg.experiment_ = std::string{reslab::detail::trim(kind->second)};
        cfg.schema_ = common_schema();
        for (auto& def : experiment_schema(cfg.experiment_)) cfg.schema_.push_back(def);
        for (const auto& [k, v] : raw) {
            auto def = std::find_if(cfg.schema_.begin(), cfg.schema_.end(), [&](const param_def& p) { return p.key == k; });
            if (def == cfg.schema_.end())
                throw config_error("unknown key '" + k + "' for experiment " + cfg.experiment_);
        }
        for (const auto& def : cfg.schema_) {
            auto it = raw.find(def.key);
            if (it == raw.end()) {
                if (!def.fallback) throw config_error("missing required parameter '" + def.key + "'");
                cfg.values_[def.key] = detail::canonical_value(def, *def.fallback);
            } else {
                cfg.values_[def.key] = detail::canonical_value(def, it->second);
            }
        }
        return cfg;
    }

private:
    bool is_grid(const std::string& key) const
    {
        for (const auto& d : schema_)
            if (d.key == key) return d.grid;
        return false;
    }

    std::string experiment_;
    std::map<std::string, std::string> values_;
    std::vector<std::string> overrides_;
    std::vector<param_def> schema_;
};

/// Split "key=value"; throws config_error when malformed.
inline std::pair<std::string, std::string> parse_assignment(std::string_view line, const std::string& where)
{
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw config_error(where + ": expected key = value");
    std::string key{reslab::detail::trim(line.substr(0, eq))};
    if (key.empty()) throw config_error(where + ": empty key");
    return {key, std::string{reslab::detail::trim(line.substr(eq + 1))}};
}

inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                          const std::string& source = "config")
{
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t lineno = 0;
    for (auto line : reslab::detail::split(text, '\n')) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = reslab::detail::trim(line);
        if (line.empty()) continue;
        out.push_back(parse_assignment(line, source + ":" + std::to_string(lineno)));
    }
    return out;
}

inline experiment_config parse_config(const std::string& path, const std::vector<std::string>& sets = {})
{
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) overrides.push_back(parse_assignment(s, "--set " + s));
    return experiment_config::from_pairs(parse_config_text(ss.str(), path), overrides);
}

}  // namespace reslab::harness
