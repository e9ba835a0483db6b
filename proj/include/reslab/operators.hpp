#pragma once

// Target causal time-invariant operators, given by their finite-window functionals
// F*_m : [-1,1]^{md} -> R together with the memory tail
//
//     E_F(m) = sup_u |F*(u) - F*_m(u_{-m+1:0})|.
//
// A window is flattened oldest first, (u_{-m+1}, ..., u_0); F*_m zero-pads the history
// before the window.

#include "reslab/ensemble.hpp"
#include "reslab/reservoir.hpp"
#include "reslab/rng.hpp"
#include "reslab/types.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace reslab {

struct operator_spec {
    std::string id;
    std::size_t d = 1;
    /// F*_m evaluated on a window of length m*d (m is implied by the length).
    std::function<double(const vector&)> functional;
    /// E_F(m); analytic where available, otherwise a certified upper bound.
    std::function<double(std::size_t)> tail;
    /// |F| <= bound.
    double bound = 1.0;
    /// Sup-norm Lipschitz constant of F*_m on [-1,1]^{md}, when known.
    std::function<double(std::size_t)> lipschitz;
    /// True when omega(delta) = L delta holds with equality (not just as an upper bound).
    bool lipschitz_exact = false;
    /// Memory length k for finite-memory operators.
    std::optional<std::size_t> memory;

    double operator()(const vector& window) const
    {
        require(window.size() > 0 && window.size() % static_cast<Eigen::Index>(d) == 0,
                "operator_spec: window length must be a positive multiple of d");
        return functional(window);
    }
    std::size_t window_m(const vector& window) const { return static_cast<std::size_t>(window.size()) / d; }
};

enum class filter_nonlinearity { linear, tanh_composed };

/// F(u)_t = sum_{k>=0} lambda^k u_{t-k} (d = 1), optionally composed with tanh.
inline operator_spec make_exp_filter(double lambda, filter_nonlinearity nl = filter_nonlinearity::linear)
{
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("exp_filter: lambda must lie in (0, 1)");
    operator_spec spec;
    spec.id = "exp_filter:lambda=" + detail::format_double(lambda)
              + (nl == filter_nonlinearity::tanh_composed ? ",nonlinearity=tanh" : "");
    spec.d = 1;
    spec.functional = [lambda, nl](const vector& x) {
        // Horner from the oldest entry: sum_j lambda^{m-1-j} x_j.
        double acc = 0;
        for (Eigen::Index j = 0; j < x.size(); ++j) acc = lambda * acc + x[j];
        return nl == filter_nonlinearity::linear ? acc : std::tanh(acc);
    };
    spec.tail = [lambda](std::size_t m) { return std::pow(lambda, static_cast<double>(m)) / (1.0 - lambda); };
    spec.bound = nl == filter_nonlinearity::linear ? 1.0 / (1.0 - lambda) : std::tanh(1.0 / (1.0 - lambda));
    spec.lipschitz = [lambda](std::size_t m) {
        return (1.0 - std::pow(lambda, static_cast<double>(m))) / (1.0 - lambda);
    };
    spec.lipschitz_exact = nl == filter_nonlinearity::linear;
    return spec;
}

/// Operator with memory k: F(u)_t = f(u_{t-k+1}, ..., u_t). For m < k the functional
/// zero-pads; `tail_below_k(m)` gives E_F(m) there (default: the trivial bound 2B).
inline operator_spec make_finite_memory(std::size_t k, std::function<double(const vector&)> f, std::size_t d,
                                        double bound, std::string id,
                                        std::function<double(std::size_t)> tail_below_k = {})
{
    require(k >= 1 && d >= 1, "finite_memory: k and d must be >= 1");
    require(static_cast<bool>(f), "finite_memory: functional is empty");
    operator_spec spec;
    spec.id = std::move(id);
    spec.d = d;
    spec.bound = bound;
    spec.memory = k;
    const auto kd = static_cast<Eigen::Index>(k * d);
    spec.functional = [f = std::move(f), kd](const vector& x) {
        if (x.size() == kd) return f(x);
        vector full = vector::Zero(kd);
        if (x.size() >= kd) {
            full = x.tail(kd);
        } else {
            full.tail(x.size()) = x;
        }
        return f(full);
    };
    if (!tail_below_k) tail_below_k = [bound](std::size_t) { return 2.0 * bound; };
    spec.tail = [k, below = std::move(tail_below_k)](std::size_t m) { return m >= k ? 0.0 : below(m); };
    return spec;
}

/// F(u)_t = prod_{j<k} u_{t-j} (d = 1). E_F(m) = 1 for m < k.
inline operator_spec make_product(std::size_t k)
{
    auto spec = make_finite_memory(
      k, [](const vector& x) { return x.prod(); }, 1, 1.0, "product:k=" + std::to_string(k),
      [](std::size_t) { return 1.0; });
    spec.lipschitz = [k](std::size_t) { return static_cast<double>(k); };
    return spec;
}

/// F(u)_t = u_t (d = 1).
inline operator_spec make_identity()
{
    auto spec = make_finite_memory(1, [](const vector& x) { return x[0]; }, 1, 1.0, "identity");
    spec.lipschitz = [](std::size_t) { return 1.0; };
    spec.lipschitz_exact = true;
    return spec;
}

/// The finite-memory operator u -> F*_m(u_{t-m+1:t}). Its own tail is zero from m on;
/// the original E_F(m) is the price of the truncation and must be accounted separately.
inline operator_spec truncate(const operator_spec& spec, std::size_t m)
{
    require(m >= 1, "truncate: m must be >= 1");
    const auto md = static_cast<Eigen::Index>(m * spec.d);
    auto f = [inner = spec.functional, md](const vector& x) { return inner(x.tail(md).eval()); };
    auto out = make_finite_memory(m, f, spec.d, spec.bound, spec.id + "|window=" + std::to_string(m),
                                  [tail = spec.tail, bound = spec.bound](std::size_t) { return 2.0 * bound; });
    if (spec.lipschitz) {
        out.lipschitz = [lip = spec.lipschitz, m](std::size_t mm) { return lip(std::min(mm, m)); };
        out.lipschitz_exact = spec.lipschitz_exact;
    }
    return out;
}

/// Registry: "exp_filter:lambda=0.5[,nonlinearity=tanh]", "product:k=2", "identity".
inline operator_spec parse_operator(std::string_view text)
{
    auto [name, params] = detail::parse_registry_id(text);
    auto take = [&params = params, &name = name](const std::string& key) -> std::optional<std::string> {
        auto it = params.find(key);
        if (it == params.end()) return std::nullopt;
        auto v = it->second;
        params.erase(it);
        return v;
    };
    auto finish = [&params = params, &name = name] {
        if (!params.empty())
            throw std::invalid_argument("operator '" + name + "': unknown parameter " + params.begin()->first);
    };
    if (name == "exp_filter") {
        auto lam = take("lambda");
        if (!lam) throw std::invalid_argument("operator 'exp_filter' requires lambda");
        auto nl = take("nonlinearity").value_or("linear");
        finish();
        if (nl != "linear" && nl != "tanh") throw std::invalid_argument("exp_filter: nonlinearity must be linear or tanh");
        return make_exp_filter(detail::parse_double(*lam, "exp_filter:lambda"),
                               nl == "tanh" ? filter_nonlinearity::tanh_composed : filter_nonlinearity::linear);
    }
    if (name == "product") {
        auto k = take("k");
        finish();
        const double kv = k ? detail::parse_double(*k, "product:k") : 2.0;
        if (kv < 1 || kv != std::floor(kv)) throw std::invalid_argument("product: k must be a positive integer");
        return make_product(static_cast<std::size_t>(kv));
    }
    if (name == "identity") {
        finish();
        return make_identity();
    }
    throw std::invalid_argument("unknown operator '" + name + "'");
}

/// m_F(eps) = min{m : E_F(m) <= eps}. Tails are non-increasing, so this brackets by
/// doubling and then bisects. Throws if the horizon would exceed `cap`.
inline std::size_t memory_horizon(const operator_spec& spec, double eps, std::size_t cap = 1u << 20)
{
    require(eps > 0, "memory_horizon: eps must be positive");
    if (spec.tail(1) <= eps) return 1;
    std::size_t lo = 1, hi = 2;  // tail(lo) > eps
    while (spec.tail(hi) > eps) {
        if (hi >= cap)
            throw std::runtime_error("memory_horizon: tail still above " + detail::format_double(eps) + " at cap m="
                                     + std::to_string(cap));
        lo = hi;
        hi = std::min(cap, hi * 2);
    }
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (spec.tail(mid) <= eps ? hi : lo) = mid;
    }
    return hi;
}

/// Geometric weighting sequence eta_k = lambda^k.
struct weighting_sequence {
    double lambda = 0.5;

    explicit weighting_sequence(double lam) : lambda{lam}
    {
        if (!(lam > 0.0 && lam < 1.0)) throw std::invalid_argument("weighting_sequence: lambda must lie in (0, 1)");
    }
    double operator()(std::size_t k) const { return std::pow(lambda, static_cast<double>(k)); }
};

struct weighted_distance_result {
    double value = 0;       // sup over the available window
    double tail_slack = 0;  // 2 eta(depth): worst case for the unobserved past
    double upper() const { return value + tail_slack; }
};

/// ||u - v||_eta with time 0 at the last step of each sequence.
inline weighted_distance_result weighted_distance(const input_sequence& u, const input_sequence& v,
                                                  const weighting_sequence& eta)
{
    require(u.dim() == v.dim(), "weighted_distance: incompatible d");
    require(u.length() == v.length(), "weighted_distance: sequences must cover the same window");
    const std::size_t depth = u.length();
    weighted_distance_result out;
    for (std::size_t k = 0; k < depth; ++k) {
        const std::size_t t = depth - 1 - k;
        double diff = 0;
        for (std::size_t j = 0; j < u.dim(); ++j) diff = std::max(diff, std::abs(u.at(t, j) - v.at(t, j)));
        out.value = std::max(out.value, eta(k) * diff);
    }
    out.tail_slack = 2.0 * eta(depth);
    return out;
}

/// omega_{F*}(delta; eta) for the linear exponential filter under a geometric weighting:
/// sum_k lambda^k min(2, delta / eta_k).
inline double exp_filter_weighted_modulus(double lambda, const weighting_sequence& eta, double delta)
{
    require(delta >= 0, "exp_filter_weighted_modulus: delta must be nonnegative");
    if (delta == 0.0) return 0.0;
    double total = 0;
    for (std::size_t k = 0;; ++k) {
        const double lk = std::pow(lambda, static_cast<double>(k));
        const double allowed = delta / eta(k);
        if (allowed >= 2.0) {
            // eta is decreasing, so every later term is saturated.
            return total + 2.0 * lk / (1.0 - lambda);
        }
        total += lk * allowed;
        if (lk == 0.0) return total;
    }
}

/// Modulus of continuity of F*_m.
struct modulus_estimate {
    enum class kind { analytic, analytic_upper, empirical_lower };

    kind source = kind::empirical_lower;
    double lipschitz = 0;         // analytic kinds
    std::vector<double> deltas;   // empirical ladder, increasing
    std::vector<double> omegas;   // monotone (running-max) estimates at `deltas`
    double diameter = 2.0;        // sup-norm diameter of [-1,1]^{md}

    double omega(double delta) const
    {
        if (source != kind::empirical_lower) return lipschitz * std::min(delta, diameter);
        double w = 0;
        for (std::size_t k = 0; k < deltas.size() && deltas[k] <= delta; ++k) w = omegas[k];
        return w;
    }

    /// sup{delta : omega(delta) <= eps}; +infinity when omega never exceeds eps.
    double omega_inverse(double eps) const
    {
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (source != kind::empirical_lower) {
            if (lipschitz <= 0 || eps >= lipschitz * diameter) return inf;
            return eps / lipschitz;
        }
        std::size_t k = 0;
        while (k < deltas.size() && omegas[k] <= eps) ++k;
        return k == deltas.size() ? inf : deltas[k];
    }

    bool is_lower_bound() const noexcept { return source == kind::empirical_lower; }
};

/// Analytic modulus when the spec carries a Lipschitz constant; otherwise an empirical
/// lower estimate from random pairs at a ladder of `grid` delta values in (0, 2].
inline modulus_estimate estimate_modulus(const operator_spec& spec, std::size_t m, std::size_t grid,
                                         std::uint64_t seed, std::size_t pairs_per_level = 512)
{
    require(m >= 1 && grid >= 1, "modulus_estimate: m and grid must be >= 1");
    modulus_estimate est;
    if (spec.lipschitz) {
        est.source = spec.lipschitz_exact ? modulus_estimate::kind::analytic : modulus_estimate::kind::analytic_upper;
        est.lipschitz = spec.lipschitz(m);
        return est;
    }
    const auto md = static_cast<Eigen::Index>(m * spec.d);
    splitmix64 rng{seed};
    vector x(md), y(md);
    double running = 0;
    for (std::size_t k = 1; k <= grid; ++k) {
        const double delta = 2.0 * static_cast<double>(k) / static_cast<double>(grid);
        double best = 0;
        for (std::size_t p = 0; p < pairs_per_level; ++p) {
            const bool corner = (p % 2) == 0;
            for (Eigen::Index j = 0; j < md; ++j) {
                x[j] = rng.symmetric_uniform(1.0);
                const double step = corner ? ((rng() >> 63) ? delta : -delta) : rng.symmetric_uniform(delta);
                y[j] = std::clamp(x[j] + step, -1.0, 1.0);
            }
            best = std::max(best, std::abs(spec(x) - spec(y)));
        }
        running = std::max(running, best);
        est.deltas.push_back(delta);
        est.omegas.push_back(running);
    }
    return est;
}

}  // namespace reslab
