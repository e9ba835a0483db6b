#pragma once

// ReLU integral representations f(x) = int int g(w, b) relu(w . x + b) dw db over
// [-1/2, 1/2]^{d+1}, built from the Fourier transform of f where
// f(x) = int fhat(w) exp(i w . x) dw.
//
// The constant and linear parts of f are carried by the b in [-1/2, 1/2] terms of h. They
// reproduce f(0) + grad f(0) . x exactly when fhat is real and even; the bundled profiles
// are all of that kind.

#include "reslab/ensemble.hpp"
#include "reslab/quadrature.hpp"
#include "reslab/rng.hpp"
#include "reslab/types.hpp"

#include <json.hpp>

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace reslab {

using complex = std::complex<double>;

struct fourier_profile {
    std::string id;
    std::size_t d = 1;
    std::function<complex(const vector&)> fhat;
    /// sup_r sup_{||w||_1 = 1/2} max(1, r^{2d+4}) |fhat(r w)| <= B.
    double B = 0;
    /// f(x) by quadrature of the Fourier integral, when available.
    std::function<double(const vector&)> f_exact;
};

inline double l1_norm(const vector& w) { return w.cwiseAbs().sum(); }

namespace detail {

/// int_{||w||_1 < R} fhat(w) cos(w . x) dw for radial-in-l1 real even fhat, d = 1 or 2.
inline double cosine_integral(const std::function<double(double)>& radial, std::size_t d, double R, const vector& x,
                              double tol = 1e-12)
{
    if (d == 1) {
        auto f = [&](double w) { return radial(std::abs(w)) * std::cos(w * x[0]); };
        return integrate_pieces(f, -R, R, {0.0}, tol).value;
    }
    auto outer = [&](double w1) {
        const double lim = R - std::abs(w1);
        if (lim <= 0) return 0.0;
        auto f = [&](double w2) { return radial(std::abs(w1) + std::abs(w2)) * std::cos(w1 * x[0] + w2 * x[1]); };
        return integrate_pieces(f, -lim, lim, {0.0}, tol).value;
    };
    return integrate_pieces(outer, -R, R, {0.0}, tol).value;
}

}  // namespace detail

/// fhat(w) = A (1 - (4 ||w||_1)^2)^2 on ||w||_1 < 1/4, zero outside. B = A.
inline fourier_profile bump_profile(double scale = 1.0, std::size_t d = 1)
{
    require(scale > 0 && (d == 1 || d == 2), "bump profile: scale must be positive and d in {1, 2}");
    auto radial = [scale](double r) {
        if (r >= 0.25) return 0.0;
        const double q = 1.0 - 16.0 * r * r;
        return scale * q * q;
    };
    fourier_profile p;
    p.id = "bump:scale=" + detail::format_double(scale) + (d == 1 ? "" : ",d=" + std::to_string(d));
    p.d = d;
    p.B = scale;
    p.fhat = [radial](const vector& w) { return complex{radial(l1_norm(w)), 0.0}; };
    p.f_exact = [radial, d](const vector& x) { return detail::cosine_integral(radial, d, 0.25, x); };
    return p;
}

/// fhat(w) = A min(1, (2 ||w||_1)^{-(2d+4)}): decays exactly at the admissible rate, so the
/// folded branch of g carries mass. d = 1 only (f_exact needs a 1-d tail integral).
inline fourier_profile powerlaw_profile(double scale = 1.0)
{
    require(scale > 0, "powerlaw profile: scale must be positive");
    const double p6 = 6.0;  // 2d + 4 with d = 1
    auto radial = [scale, p6](double r) { return r <= 0.5 ? scale : scale * std::pow(2.0 * r, -p6); };
    fourier_profile p;
    p.id = "powerlaw:edge,scale=" + detail::format_double(scale);
    p.d = 1;
    p.B = scale;
    p.fhat = [radial](const vector& w) { return complex{radial(l1_norm(w)), 0.0}; };
    p.f_exact = [radial](const vector& x) {
        auto core = [&](double w) { return radial(w) * std::cos(w * x[0]); };
        // Even integrand: twice the half line, split at multiples of pi/|x|. The neglected
        // tail beyond the cutoff is below 2 A / (320 cutoff^5) ~ 2e-14 A.
        constexpr double cutoff = 200.0;
        std::vector<double> br{0.5};
        if (x[0] != 0.0) {
            const double period = 3.141592653589793 / std::abs(x[0]);
            for (double t = period; t < cutoff; t += period) br.push_back(t);
        }
        const double v = 2.0 * integrate_pieces(core, 0.0, cutoff, br, 1e-13).value;
        return v;
    };
    return p;
}

/// Registry: "bump:scale=1[,d=2]", "powerlaw:edge[,scale=1]".
inline fourier_profile parse_profile(std::string_view text)
{
    auto [name, params] = detail::parse_registry_id(text);
    auto num = [&params = params](const std::string& key, double def) {
        auto it = params.find(key);
        if (it == params.end()) return def;
        const double v = detail::parse_double(it->second, key);
        params.erase(it);
        return v;
    };
    if (name == "bump") {
        const double scale = num("scale", 1.0);
        const double d = num("d", 1.0);
        if (!params.empty()) throw std::invalid_argument("profile 'bump': unknown parameter " + params.begin()->first);
        return bump_profile(scale, static_cast<std::size_t>(d));
    }
    if (name == "powerlaw") {
        params.erase("edge");
        const double scale = num("scale", 1.0);
        if (!params.empty())
            throw std::invalid_argument("profile 'powerlaw': unknown parameter " + params.begin()->first);
        return powerlaw_profile(scale);
    }
    throw std::invalid_argument("unknown Fourier profile '" + name + "'");
}

struct profile_check {
    double max_decay_ratio = 0;    // max over samples of max(1, r^{2d+4}) |fhat(r w)| / B
    double max_conjugate_gap = 0;  // max |fhat(-w) - conj(fhat(w))|
    bool ok = false;
};

/// Validate the decay bound on a radial grid and conjugate symmetry on random points.
inline profile_check validate_profile(const fourier_profile& p, std::size_t directions = 64, std::uint64_t seed = 7)
{
    profile_check out;
    splitmix64 rng{seed};
    const auto d = static_cast<Eigen::Index>(p.d);
    const double power = 2.0 * static_cast<double>(p.d) + 4.0;
    vector w(d);
    for (std::size_t k = 0; k < directions; ++k) {
        for (Eigen::Index j = 0; j < d; ++j) w[j] = rng.symmetric_uniform(1.0);
        if (l1_norm(w) == 0) continue;
        w *= 0.5 / l1_norm(w);
        for (int e = -60; e <= 60; ++e) {
            const double r = std::pow(10.0, e / 20.0);
            const double v = std::max(1.0, std::pow(r, power)) * std::abs(p.fhat((r * w).eval()));
            out.max_decay_ratio = std::max(out.max_decay_ratio, p.B > 0 ? v / p.B : (v > 0 ? HUGE_VAL : 0.0));
        }
        const vector z = rng.symmetric_uniform(2.0) * w;
        out.max_conjugate_gap = std::max(out.max_conjugate_gap, std::abs(p.fhat((-z).eval()) - std::conj(p.fhat(z))));
    }
    out.ok = out.max_decay_ratio <= 1.0 + 1e-9 && out.max_conjugate_gap <= 1e-12 * std::max(1.0, p.B);
    return out;
}

/// h(w, b) = 1_{[-||w||_1, 0]}(b) Re[-e^{-ib} fhat(w) - e^{ib} fhat(-w)]
///         + 1_{[0, 1/2]}(b) Re[(8 + i) fhat(w)] - 1_{[-1/2, 0]}(b) Re[(8 + i) fhat(-w)].
inline double h_kernel(const fourier_profile& p, const vector& w, double b)
{
    const double norm = l1_norm(w);
    const bool osc = b >= -norm && b <= 0.0;
    const bool upper = b >= 0.0 && b <= 0.5;
    const bool lower = b >= -0.5 && b <= 0.0;
    if (!osc && !upper && !lower) return 0.0;
    const complex fp = p.fhat(w);
    const complex fm = p.fhat((-w).eval());
    const complex e{std::cos(b), std::sin(b)};
    double h = 0;
    if (osc) h += (-std::conj(e) * fp - e * fm).real();
    if (upper) h += (complex{8.0, 1.0} * fp).real();
    if (lower) h -= (complex{8.0, 1.0} * fm).real();
    return h;
}

/// g(w, b) = 1_{||w||_1 <= 1/2} (h(w, b) + (2||w||_1)^{-(2d+4)} h(T(w), b / (4||w||_1^2))),
/// T(w) = w / (4 ||w||_1^2). The folded term is defined as 0 at w = 0.
inline double fold_change_of_variables(const fourier_profile& p, const vector& w, double b)
{
    const double norm = l1_norm(w);
    if (norm > 0.5) return 0.0;
    const double direct = h_kernel(p, w, b);
    if (norm == 0.0) return direct;
    const double s = 4.0 * norm * norm;
    const vector tw = w / s;
    const double tb = b / s;
    const double power = 2.0 * static_cast<double>(p.d) + 4.0;
    if (norm >= 1e-6) return direct + std::pow(2.0 * norm, -power) * h_kernel(p, tw, tb);

    // Near the origin the weight overflows while fhat(T(w)) underflows; combine them in
    // log space: weight * fhat(+-T(w)) is evaluated as one factor.
    const double log_weight = -power * std::log(2.0 * norm);
    auto weighted = [&](const complex& c) -> complex {
        if (c == complex{}) return {};
        return std::polar(std::exp(std::log(std::abs(c)) + log_weight), std::arg(c));
    };
    fourier_profile scaled = p;
    const complex fp = weighted(p.fhat(tw)), fm = weighted(p.fhat((-tw).eval()));
    scaled.fhat = [&](const vector& v) { return v.dot(tw) >= 0 ? fp : fm; };
    return direct + h_kernel(scaled, tw, tb);
}

struct relu_representation {
    std::function<double(const vector&, double)> g;
    double sup_bound = 0;    // 40 B
    double sampled_sup = 0;  // max |g| on the validation sample
    std::size_t d = 1;
    double B = 0;
};

/// Package g from a profile; |g| is checked against 40 B on `samples` random points.
inline relu_representation representation_from_profile(const fourier_profile& p, std::size_t samples = 100000,
                                                        std::uint64_t seed = 11)
{
    const auto chk = validate_profile(p);
    if (!chk.ok)
        throw std::invalid_argument("representation_from_profile: profile '" + p.id
                                    + "' violates its declared decay bound or conjugate symmetry");
    relu_representation rep;
    rep.d = p.d;
    rep.B = p.B;
    rep.sup_bound = 40.0 * p.B;
    rep.g = [p](const vector& w, double b) { return fold_change_of_variables(p, w, b); };
    splitmix64 rng{seed};
    vector w(static_cast<Eigen::Index>(p.d));
    for (std::size_t k = 0; k < samples; ++k) {
        for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.symmetric_uniform(0.5);
        rep.sampled_sup = std::max(rep.sampled_sup, std::abs(rep.g(w, rng.symmetric_uniform(0.5))));
    }
    if (rep.sampled_sup > rep.sup_bound * (1.0 + 1e-9))
        throw std::invalid_argument("representation_from_profile: sampled |g| exceeds 40 B; declared B too small");
    return rep;
}

struct verification_point {
    vector x;
    double estimate = 0;
    double exact = 0;
    double error = 0;
    double se = 0;
};

struct verification_report {
    std::vector<verification_point> points;
    double max_abs_error = 0;
    double max_se = 0;
    bool passed = false;        // error <= 4 SE at every grid point
    bool inconclusive = false;  // some SE exceeds 10% of max |f| on the grid
};

inline nlohmann::json to_json(const verification_report& r)
{
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points)
        pts.push_back({{"x", std::vector<double>(p.x.data(), p.x.data() + p.x.size())},
                       {"estimate", p.estimate},
                       {"exact", p.exact},
                       {"error", p.error},
                       {"se", p.se}});
    return {{"points", pts},
            {"max_abs_error", r.max_abs_error},
            {"max_se", r.max_se},
            {"passed", r.passed},
            {"inconclusive", r.inconclusive}};
}

/// Monte Carlo estimate of int g(w, b) relu(w . x + b) over the unit-volume box at each grid
/// point, with an independent sample stream per point.
inline verification_report verify_representation(const relu_representation& rep,
                                                 const std::function<double(const vector&)>& f_exact,
                                                 const std::vector<vector>& x_grid, std::size_t mc_samples,
                                                 std::uint64_t seed)
{
    require(mc_samples >= 10000, "verify_representation: mc_samples must be >= 1e4");
    verification_report out;
    const auto d = static_cast<Eigen::Index>(rep.d);
    vector w(d);
    double max_f = 0;
    for (std::size_t j = 0; j < x_grid.size(); ++j) {
        const vector& x = x_grid[j];
        require_length(x.size(), d, "verify_representation: grid point");
        splitmix64 rng{derive_seed(seed, j)};
        double sum = 0, sumsq = 0;
        for (std::size_t s = 0; s < mc_samples; ++s) {
            for (Eigen::Index k = 0; k < d; ++k) w[k] = rng.symmetric_uniform(0.5);
            const double b = rng.symmetric_uniform(0.5);
            const double v = rep.g(w, b) * relu(w.dot(x) + b);
            sum += v;
            sumsq += v * v;
        }
        const double N = static_cast<double>(mc_samples);
        verification_point pt;
        pt.x = x;
        pt.estimate = sum / N;
        pt.se = std::sqrt(std::max(0.0, sumsq / N - pt.estimate * pt.estimate) / (N - 1.0));
        pt.exact = f_exact(x);
        pt.error = std::abs(pt.estimate - pt.exact);
        max_f = std::max(max_f, std::abs(pt.exact));
        out.max_abs_error = std::max(out.max_abs_error, pt.error);
        out.max_se = std::max(out.max_se, pt.se);
        out.points.push_back(std::move(pt));
    }
    out.passed = true;
    for (const auto& pt : out.points) out.passed = out.passed && pt.error <= 4.0 * pt.se;
    out.inconclusive = out.max_se > 0.1 * max_f;
    return out;
}

/// Evenly spaced points of [-1, 1] (d = 1) or a tensor grid of them (d = 2).
inline std::vector<vector> verification_grid(std::size_t d, std::size_t points_per_axis = 11)
{
    require(d == 1 || d == 2, "verification_grid: d must be 1 or 2");
    std::vector<vector> out;
    for (std::size_t i = 0; i < points_per_axis; ++i) {
        const double a = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points_per_axis - 1);
        if (d == 1) {
            out.push_back(vector::Constant(1, a));
            continue;
        }
        for (std::size_t j = 0; j < points_per_axis; ++j) {
            vector x(2);
            x << a, -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(points_per_axis - 1);
            out.push_back(x);
        }
    }
    return out;
}

/// sup over the grid of |f(x) - (1/n) sum_i g(w_i, b_i) relu(w_i . x + b_i)| for n uniform
/// draws of (w_i, b_i): the readout a_i = g(w_i, b_i) / n on static features.
inline double theoretical_readout_error(const relu_representation& rep,
                                        const std::function<double(const vector&)>& f_exact,
                                        const std::vector<vector>& x_grid, std::size_t n, std::uint64_t seed)
{
    splitmix64 rng{seed};
    const auto d = static_cast<Eigen::Index>(rep.d);
    row_matrix W(static_cast<Eigen::Index>(n), d);
    vector b(static_cast<Eigen::Index>(n)), a(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) W(i, k) = rng.symmetric_uniform(0.5);
        b[i] = rng.symmetric_uniform(0.5);
        a[i] = rep.g(W.row(i).transpose(), b[i]) / static_cast<double>(n);
    }
    double sup = 0;
    for (const auto& x : x_grid) {
        vector z = W * x + b;
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = relu(z[i]);
        sup = std::max(sup, std::abs(a.dot(z) - f_exact(x)));
    }
    return sup;
}

}  // namespace reslab
