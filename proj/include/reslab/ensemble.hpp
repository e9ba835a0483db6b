#pragma once

// Random internal weights (W, b) of the structured reservoir.
//
// Rows (w_i^T, b_i) are i.i.d. draws from mu^{md+1} for a symmetric, bounded-support
// distribution mu. W is stored row-major so that each w_i is contiguous.

#include "reslab/rng.hpp"
#include "reslab/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace reslab {

enum class distribution_kind { uniform, two_point, rademacher_mixture };

/// Symmetric probability distribution on R with bounded support.
class symmetric_distribution {
public:
    /// Uniform on [-r, r].
    static symmetric_distribution uniform(double half_width)
    {
        require(std::isfinite(half_width) && half_width > 0, "uniform: half-width must be positive and finite");
        return symmetric_distribution{distribution_kind::uniform, {half_width}, {1.0}};
    }

    /// Atoms at -c and +c with probability 1/2 each.
    static symmetric_distribution two_point(double c)
    {
        require(std::isfinite(c) && c > 0, "two_point: atom must be positive and finite");
        return symmetric_distribution{distribution_kind::two_point, {c}, {1.0}};
    }

    /// Random sign times an atom c_k chosen with probability p_k.
    static symmetric_distribution rademacher_mixture(std::vector<double> atoms, std::vector<double> probs)
    {
        require(!atoms.empty() && atoms.size() == probs.size(), "rademacher_mixture: atoms/probs size mismatch");
        double total = 0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            require(std::isfinite(atoms[k]) && atoms[k] > 0, "rademacher_mixture: atoms must be positive");
            require(std::isfinite(probs[k]) && probs[k] > 0, "rademacher_mixture: probabilities must be positive");
            total += probs[k];
        }
        require(std::abs(total - 1.0) < 1e-12, "rademacher_mixture: probabilities must sum to 1");
        return symmetric_distribution{distribution_kind::rademacher_mixture, std::move(atoms), std::move(probs)};
    }

    /// Parse "uniform:r=0.5", "two_point:c=1" or "rademacher_mixture:atoms=0.25/1,probs=0.5/0.5".
    static symmetric_distribution parse(std::string_view text);

    distribution_kind kind() const noexcept { return kind_; }
    const std::vector<double>& atoms() const noexcept { return atoms_; }
    const std::vector<double>& probabilities() const noexcept { return probs_; }

    /// Second moment M2 = E[x^2] (the variance, since the mean is zero).
    double second_moment() const noexcept
    {
        if (kind_ == distribution_kind::uniform) return atoms_[0] * atoms_[0] / 3.0;
        double m2 = 0;
        for (std::size_t k = 0; k < atoms_.size(); ++k) m2 += probs_[k] * atoms_[k] * atoms_[k];
        return m2;
    }

    double fourth_moment() const noexcept
    {
        if (kind_ == distribution_kind::uniform) return std::pow(atoms_[0], 4) / 5.0;
        double m4 = 0;
        for (std::size_t k = 0; k < atoms_.size(); ++k) m4 += probs_[k] * std::pow(atoms_[k], 4);
        return m4;
    }

    double support_radius() const noexcept { return *std::max_element(atoms_.begin(), atoms_.end()); }

    double sample(splitmix64& rng) const noexcept
    {
        switch (kind_) {
        case distribution_kind::uniform: return rng.symmetric_uniform(atoms_[0]);
        case distribution_kind::two_point: return (rng() >> 63) ? atoms_[0] : -atoms_[0];
        case distribution_kind::rademacher_mixture: {
            const double sign = (rng() >> 63) ? 1.0 : -1.0;
            const double u = rng.uniform01();
            double acc = 0;
            for (std::size_t k = 0; k + 1 < atoms_.size(); ++k) {
                acc += probs_[k];
                if (u < acc) return sign * atoms_[k];
            }
            return sign * atoms_.back();
        }
        }
        return 0.0;
    }

    std::string descriptor() const;

    friend bool operator==(const symmetric_distribution&, const symmetric_distribution&) = default;

private:
    symmetric_distribution(distribution_kind kind, std::vector<double> atoms, std::vector<double> probs)
      : kind_{kind}, atoms_{std::move(atoms)}, probs_{std::move(probs)}
    {}

    distribution_kind kind_;
    std::vector<double> atoms_;  // uniform: {r}; two_point: {c}
    std::vector<double> probs_;
};

namespace detail {

inline std::string format_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what)
{
    double out = 0;
    auto first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto res = std::from_chars(first, s.data() + s.size(), out);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("cannot parse '" + std::string{s} + "' as a real number for " + std::string{what});
    return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Parse "name:key=value,key=value" into name and an ordered parameter map.
inline std::pair<std::string, std::map<std::string, std::string>> parse_registry_id(std::string_view text)
{
    text = trim(text);
    auto colon = text.find(':');
    std::string name{trim(text.substr(0, colon))};
    std::map<std::string, std::string> params;
    if (colon != std::string_view::npos) {
        for (auto item : split(text.substr(colon + 1), ',')) {
            item = trim(item);
            if (item.empty()) continue;
            auto eq = item.find('=');
            if (eq == std::string_view::npos) {
                params.emplace(std::string{item}, "");
            } else {
                params.emplace(std::string{trim(item.substr(0, eq))}, std::string{trim(item.substr(eq + 1))});
            }
        }
    }
    return {std::move(name), std::move(params)};
}

inline std::vector<double> parse_list(std::string_view s, char sep, std::string_view what)
{
    std::vector<double> out;
    for (auto item : split(s, sep)) out.push_back(parse_double(trim(item), what));
    return out;
}

}  // namespace detail

inline symmetric_distribution symmetric_distribution::parse(std::string_view text)
{
    auto [name, params] = detail::parse_registry_id(text);
    auto get = [&, &params = params, &name = name](const std::string& key) -> std::string {
        auto it = params.find(key);
        if (it == params.end()) throw std::invalid_argument("distribution '" + name + "' requires parameter " + key);
        return it->second;
    };
    auto check_keys = [&, &params = params, &name = name](std::initializer_list<std::string_view> allowed) {
        for (auto& [k, v] : params)
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                throw std::invalid_argument("distribution '" + name + "': unknown parameter " + k);
    };
    if (name == "uniform") {
        check_keys({"r"});
        return uniform(detail::parse_double(get("r"), "uniform:r"));
    }
    if (name == "two_point") {
        check_keys({"c"});
        return two_point(detail::parse_double(get("c"), "two_point:c"));
    }
    if (name == "rademacher_mixture") {
        check_keys({"atoms", "probs"});
        return rademacher_mixture(detail::parse_list(get("atoms"), '/', "atoms"),
                                  detail::parse_list(get("probs"), '/', "probs"));
    }
    throw std::invalid_argument("unknown distribution '" + name + "'");
}

inline std::string symmetric_distribution::descriptor() const
{
    switch (kind_) {
    case distribution_kind::uniform: return "uniform:r=" + detail::format_double(atoms_[0]);
    case distribution_kind::two_point: return "two_point:c=" + detail::format_double(atoms_[0]);
    case distribution_kind::rademacher_mixture: {
        std::string a, p;
        for (std::size_t k = 0; k < atoms_.size(); ++k) {
            if (k) {
                a += '/';
                p += '/';
            }
            a += detail::format_double(atoms_[k]);
            p += detail::format_double(probs_[k]);
        }
        return "rademacher_mixture:atoms=" + a + ",probs=" + p;
    }
    }
    return {};
}

/// The sampled internal weights of one reservoir.
struct weight_ensemble {
    row_matrix W;  // n x (m*d), row i is w_i^T
    vector b;      // length n
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t d = 0;
    symmetric_distribution source = symmetric_distribution::uniform(0.5);
    std::uint64_t seed = 0;

    std::size_t input_dim() const noexcept { return m * d; }
};

namespace detail {

inline std::size_t checked_mul(std::size_t a, std::size_t b, const char* what)
{
    std::size_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error(std::string{what} + " overflows size_t");
    return out;
}

inline std::size_t checked_add(std::size_t a, std::size_t b, const char* what)
{
    std::size_t out = 0;
    if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error(std::string{what} + " overflows size_t");
    return out;
}

}  // namespace detail

/// Draw n i.i.d. rows (w_i^T, b_i) from dist^{md+1}. Row i consumes md + 1 consecutive
/// outputs of the stream: the md entries of w_i in order, then b_i.
inline weight_ensemble sample_ensemble(const symmetric_distribution& dist, std::size_t n, std::size_t m,
                                       std::size_t d, std::uint64_t seed)
{
    require(n >= 1 && m >= 1 && d >= 1, "sample_ensemble: n, m, d must be >= 1");
    const std::size_t md = detail::checked_mul(m, d, "m*d");
    const std::size_t total = detail::checked_mul(n, detail::checked_add(md, 1, "m*d+1"), "n*(m*d+1)");
    if (total > static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max()))
        throw std::overflow_error("n*(m*d+1) exceeds the addressable index range");

    weight_ensemble ens{row_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(md)),
                        vector(static_cast<Eigen::Index>(n)), n, m, d, dist, seed};
    splitmix64 rng{seed};
    for (Eigen::Index i = 0; i < ens.W.rows(); ++i) {
        for (Eigen::Index j = 0; j < ens.W.cols(); ++j) ens.W(i, j) = dist.sample(rng);
        ens.b[i] = dist.sample(rng);
    }
    return ens;
}

/// 2 / M2: the coefficient that turns E[w relu(w.x + b)] back into x.
inline double reconstruction_scale(const symmetric_distribution& dist)
{
    const double m2 = dist.second_moment();
    require(m2 > 0, "reconstruction_scale: second moment must be positive");
    return 2.0 / m2;
}

// Serialization: a version-tagged JSON document. Doubles are written in shortest
// round-trip form, so load(save(e)) reproduces every entry bit-exactly.

inline constexpr std::string_view ensemble_format = "reslab-ensemble";
inline constexpr int ensemble_format_version = 1;

inline nlohmann::json to_json(const weight_ensemble& ens)
{
    nlohmann::json j;
    j["format"] = ensemble_format;
    j["version"] = ensemble_format_version;
    j["rng"] = splitmix64::algorithm;
    j["n"] = ens.n;
    j["m"] = ens.m;
    j["d"] = ens.d;
    j["seed"] = ens.seed;
    j["distribution"] = {{"descriptor", ens.source.descriptor()},
                         {"second_moment", ens.source.second_moment()},
                         {"support_radius", ens.source.support_radius()}};
    j["W"] = std::vector<double>(ens.W.data(), ens.W.data() + ens.W.size());
    j["b"] = std::vector<double>(ens.b.data(), ens.b.data() + ens.b.size());
    return j;
}

inline weight_ensemble ensemble_from_json(const nlohmann::json& j)
{
    if (j.value("format", "") != ensemble_format) throw std::runtime_error("not a reslab ensemble document");
    if (j.value("version", 0) != ensemble_format_version)
        throw std::runtime_error("unsupported ensemble format version " + j.value("version", nlohmann::json{}).dump());
    if (j.value("rng", "") != splitmix64::algorithm)
        throw std::runtime_error("ensemble was generated by an unknown RNG '" + j.value("rng", "") + "'");

    weight_ensemble ens;
    ens.n = j.at("n").get<std::size_t>();
    ens.m = j.at("m").get<std::size_t>();
    ens.d = j.at("d").get<std::size_t>();
    ens.seed = j.at("seed").get<std::uint64_t>();
    ens.source = symmetric_distribution::parse(j.at("distribution").at("descriptor").get<std::string>());
    const auto w = j.at("W").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    const std::size_t md = detail::checked_mul(ens.m, ens.d, "m*d");
    if (w.size() != detail::checked_mul(ens.n, md, "n*m*d") || b.size() != ens.n)
        throw std::runtime_error("ensemble document: entry count does not match dims");
    const double radius = ens.source.support_radius();
    auto in_support = [radius](double x) { return std::isfinite(x) && std::abs(x) <= radius; };
    if (!std::all_of(w.begin(), w.end(), in_support) || !std::all_of(b.begin(), b.end(), in_support))
        throw std::runtime_error("ensemble document: entry outside the distribution support");
    ens.W = Eigen::Map<const row_matrix>(w.data(), static_cast<Eigen::Index>(ens.n), static_cast<Eigen::Index>(md));
    ens.b = Eigen::Map<const vector>(b.data(), static_cast<Eigen::Index>(ens.n));
    return ens;
}

inline void save_ensemble(const weight_ensemble& ens, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << to_json(ens).dump() << '\n';
}

inline weight_ensemble load_ensemble(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return ensemble_from_json(nlohmann::json::parse(in));
}

}  // namespace reslab
