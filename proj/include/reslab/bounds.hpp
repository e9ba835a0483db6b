#pragma once

// Closed-form constants of the random-feature approximation bounds, and the empirical
// tests of the concentration events they certify.

#include "reslab/ensemble.hpp"
#include "reslab/operators.hpp"
#include "reslab/quadrature.hpp"
#include "reslab/rng.hpp"
#include "reslab/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

namespace reslab {

/// (2 / (n M2)) W^T relu(W x + b): the empirical estimate of x.
inline vector reconstruct(const weight_ensemble& ens, const vector& x)
{
    require_length(x.size(), static_cast<Eigen::Index>(ens.input_dim()), "reconstruct");
    vector z = ens.W * x + ens.b;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = relu(z[i]);
    return (reconstruction_scale(ens.source) / static_cast<double>(ens.n)) * (ens.W.transpose() * z);
}

struct identity_check_point {
    vector x;
    vector estimate;
    vector se;
    double max_z = 0;  // max over coordinates of |estimate - x| / se
};

/// Monte Carlo mean of (2/M2) w relu(w . x + b) at each x, one shared stream of `samples`
/// draws of (w, b) from dist^{md+1}.
inline std::vector<identity_check_point> monte_carlo_reconstruction(const symmetric_distribution& dist,
                                                                    const std::vector<vector>& xs,
                                                                    std::size_t samples, std::uint64_t seed)
{
    require(!xs.empty() && samples >= 2, "monte_carlo_reconstruction: need points and at least two samples");
    const Eigen::Index md = xs.front().size();
    const double scale = reconstruction_scale(dist);
    std::vector<vector> sum(xs.size(), vector::Zero(md)), sumsq(xs.size(), vector::Zero(md));
    splitmix64 rng{seed};
    vector w(md);
    for (std::size_t s = 0; s < samples; ++s) {
        for (Eigen::Index k = 0; k < md; ++k) w[k] = dist.sample(rng);
        const double b = dist.sample(rng);
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const double a = relu(w.dot(xs[j]) + b);
            if (a == 0.0) continue;
            const double f = scale * a;
            for (Eigen::Index k = 0; k < md; ++k) {
                const double v = f * w[k];
                sum[j][k] += v;
                sumsq[j][k] += v * v;
            }
        }
    }
    const double N = static_cast<double>(samples);
    std::vector<identity_check_point> out;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        identity_check_point p;
        p.x = xs[j];
        p.estimate = sum[j] / N;
        p.se = vector(md);
        for (Eigen::Index k = 0; k < md; ++k) {
            const double var = std::max(0.0, sumsq[j][k] / N - p.estimate[k] * p.estimate[k]) * N / (N - 1.0);
            p.se[k] = std::sqrt(var / N);
            p.max_z = std::max(p.max_z, std::abs(p.estimate[k] - p.x[k]) / p.se[k]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// sqrt(log(n + 1) / n), the rate shared by every bound below.
inline double bound_rate(double n) { return std::sqrt(std::log(n + 1.0) / n); }

/// B r d (2 sqrt(2 d log(n+1) / n) + sqrt(log(2/delta) / (2n))).
inline double lemma_bound(double B, double r, std::size_t d, std::size_t n, double delta)
{
    require(B >= 0 && r > 0 && d >= 1 && n >= 1, "lemma_bound: arguments must be positive");
    require(delta > 0 && delta < 1, "lemma_bound: delta must lie in (0, 1)");
    const double nd = static_cast<double>(n), dd = static_cast<double>(d);
    return B * r * dd
           * (2.0 * std::sqrt(2.0 * dd * std::log(nd + 1.0) / nd) + std::sqrt(std::log(2.0 / delta) / (2.0 * nd)));
}

/// c(m, delta, d) = 1152 m^2 (md+1)^2 (4 sqrt(md+1) + sqrt(log(4md/delta)))^2.
inline double constant_c(std::size_t m, double delta, std::size_t d)
{
    const double mm = static_cast<double>(m), D = static_cast<double>(m * d + 1);
    const double inner = 4.0 * std::sqrt(D) + std::sqrt(std::log(4.0 * mm * static_cast<double>(d) / delta));
    return 1152.0 * mm * mm * D * D * inner * inner;
}

/// C(m, delta, d) = sqrt(2) B_m (md+1)(3 m^2 d + 1)(4 sqrt(md+1) + sqrt(log(4md/delta))).
inline double constant_C(std::size_t m, double delta, std::size_t d, double B_m)
{
    const double mm = static_cast<double>(m), dd = static_cast<double>(d), D = static_cast<double>(m * d + 1);
    return std::sqrt(2.0) * B_m * D * (3.0 * mm * mm * dd + 1.0)
           * (4.0 * std::sqrt(D) + std::sqrt(std::log(4.0 * mm * dd / delta)));
}

/// n / log(n+1) >= c(m, delta, d).
inline bool budget_feasible(std::size_t m, std::size_t d, std::size_t n, double delta)
{
    const double nd = static_cast<double>(n);
    return nd / std::log(nd + 1.0) >= constant_c(m, delta, d);
}

struct bound_value {
    double value = 0;
    bool feasible = false;  // n / log(n+1) >= c(m, delta, d)
};

/// Reconstruction bound 12 sqrt(2)(md+1)(4 sqrt((md+1) log(n+1)/n) + sqrt(log(4md/delta)/n)).
inline bound_value e2_bound(std::size_t m, std::size_t d, std::size_t n, double delta)
{
    require(m >= 1 && d >= 1 && n >= 1, "e2_bound: m, d, n must be >= 1");
    require(delta > 0 && delta < 1, "e2_bound: delta must lie in (0, 1)");
    const double nd = static_cast<double>(n), D = static_cast<double>(m * d + 1);
    const double md = static_cast<double>(m * d);
    const double v = 12.0 * std::sqrt(2.0) * D
                     * (4.0 * std::sqrt(D * std::log(nd + 1.0) / nd) + std::sqrt(std::log(4.0 * md / delta) / nd));
    return {v, budget_feasible(m, d, n, delta)};
}

/// Readout bound sqrt(2) B_m (md+1)(4 sqrt((md+1) log(n+1)/n) + sqrt(log(4/delta)/n)).
inline double e1_bound(double B_m, std::size_t m, std::size_t d, std::size_t n, double delta)
{
    require(m >= 1 && d >= 1 && n >= 1, "e1_bound: m, d, n must be >= 1");
    require(delta > 0 && delta < 1, "e1_bound: delta must lie in (0, 1)");
    const double nd = static_cast<double>(n), D = static_cast<double>(m * d + 1);
    return std::sqrt(2.0) * B_m * D
           * (4.0 * std::sqrt(D * std::log(nd + 1.0) / nd) + std::sqrt(std::log(4.0 / delta) / nd));
}

struct error_budget {
    double B_m = 0;
    bool B_m_assumed = true;  // user-supplied rather than certified
    std::size_t m = 0, d = 0, n = 0;
    double delta = 0;
    double E1 = 0, E2 = 0;
    double C_mdd = 0, c_mdd = 0;
    bool feasible = false;
    double tail_EF = 0;
    double total_bound = 0;     // C sqrt(log(n+1)/n) + E_F(m)
    double composed_bound = 0;  // E1 + E2 B_m m^2 d / 4 + E_F(m)
};

inline error_budget theorem_budget(double B_m, double tail, std::size_t m, std::size_t d, std::size_t n, double delta,
                                   bool B_m_assumed = true)
{
    require(tail >= 0, "theorem_budget: tail must be nonnegative");
    error_budget eb;
    eb.B_m = B_m;
    eb.B_m_assumed = B_m_assumed;
    eb.m = m;
    eb.d = d;
    eb.n = n;
    eb.delta = delta;
    eb.E1 = e1_bound(B_m, m, d, n, delta);
    const auto e2 = e2_bound(m, d, n, delta);
    eb.E2 = e2.value;
    eb.feasible = e2.feasible;
    eb.C_mdd = constant_C(m, delta, d, B_m);
    eb.c_mdd = constant_c(m, delta, d);
    eb.tail_EF = tail;
    eb.total_bound = eb.C_mdd * bound_rate(static_cast<double>(n)) + tail;
    const double mm = static_cast<double>(m);
    eb.composed_bound = eb.E1 + eb.E2 * B_m * mm * mm * static_cast<double>(d) / 4.0 + tail;
    return eb;
}

inline error_budget theorem_budget(const operator_spec& spec, double B_m, std::size_t m, std::size_t n, double delta,
                                   bool B_m_assumed = true)
{
    return theorem_budget(B_m, spec.tail(m), m, spec.d, n, delta, B_m_assumed);
}

/// Uniform tensor grid over [-r, r]: `points` abscissae per axis (points >= 2).
inline std::vector<double> axis_grid(double r, std::size_t points)
{
    require(points >= 2, "axis_grid: need at least two points");
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
        g[k] = -r + 2.0 * r * static_cast<double>(k) / static_cast<double>(points - 1);
    return g;
}

/// Points per axis so that the grid spacing is at most r / sqrt(n).
inline std::size_t covering_points(std::size_t n)
{
    return static_cast<std::size_t>(std::ceil(2.0 * std::sqrt(static_cast<double>(n)))) + 1;
}

struct grid_sup_result {
    double raw_sup = 0;       // max over grid points of ||reconstruct(x) - x||_inf
    double slack = 0;         // Lipschitz slack for off-grid points
    double spacing = 0;
    std::size_t points_per_axis = 0;
    double certified() const { return raw_sup + slack; }
};

/// sup over a tensor grid on [-r, r]^{md} of ||reconstruct(x) - x||_inf.
///
/// Each grid line along the first coordinate is swept once: the active set of
/// relu(w_i . x + b_i) changes at n breakpoints, and between them every output coordinate
/// is affine in the sweep variable, so a line costs O(n log n + n md + points md).
inline grid_sup_result grid_sup_reconstruction_error(const weight_ensemble& ens, double r = 2.0,
                                                     std::size_t points = 0)
{
    const std::size_t md = ens.input_dim();
    const std::size_t n = ens.n;
    if (points == 0) points = covering_points(n);
    const auto grid = axis_grid(r, points);
    const double scale = reconstruction_scale(ens.source) / static_cast<double>(n);

    grid_sup_result out;
    out.points_per_axis = points;
    out.spacing = 2.0 * r / static_cast<double>(points - 1);
    const double eps = r / std::sqrt(static_cast<double>(n));
    out.slack = reconstruction_scale(ens.source) * ens.source.support_radius() * static_cast<double>(md + 1) * eps;

    struct event {
        double at;
        std::size_t i;
    };
    std::vector<double> offset(n);
    std::vector<event> events;
    events.reserve(n);
    std::vector<double> slope(md), icpt(md);
    std::vector<std::size_t> idx(md > 1 ? md - 1 : 0, 0);  // grid index of coordinates 2..md

    for (;;) {
        // c_i = b_i + sum_{k>=1} W_ik x_k on this line.
        for (std::size_t i = 0; i < n; ++i) {
            double c = ens.b[static_cast<Eigen::Index>(i)];
            for (std::size_t k = 1; k < md; ++k) c += ens.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * grid[idx[k - 1]];
            offset[i] = c;
        }
        const double t0 = grid.front();
        std::fill(slope.begin(), slope.end(), 0.0);
        std::fill(icpt.begin(), icpt.end(), 0.0);
        events.clear();
        auto toggle = [&](std::size_t i, double sign) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double a = ens.W(ii, 0);
            for (std::size_t k = 0; k < md; ++k) {
                const double wk = ens.W(ii, static_cast<Eigen::Index>(k));
                slope[k] += sign * wk * a;
                icpt[k] += sign * wk * offset[i];
            }
        };
        for (std::size_t i = 0; i < n; ++i) {
            const double a = ens.W(static_cast<Eigen::Index>(i), 0);
            const bool active = a * t0 + offset[i] > 0;
            if (active) toggle(i, +1.0);
            if (a != 0.0) {
                const double beta = -offset[i] / a;
                if (beta > t0 && beta < grid.back()) events.push_back({beta, i});
            }
        }
        std::sort(events.begin(), events.end(), [](const event& x, const event& y) { return x.at < y.at; });
        std::size_t next = 0;
        for (std::size_t g = 0; g < points; ++g) {
            const double t = grid[g];
            while (next < events.size() && events[next].at <= t) {
                const std::size_t i = events[next].i;
                // Positive slope: inactive -> active at the breakpoint; negative: the reverse.
                toggle(i, ens.W(static_cast<Eigen::Index>(i), 0) > 0 ? +1.0 : -1.0);
                ++next;
            }
            for (std::size_t k = 0; k < md; ++k) {
                const double xk = k == 0 ? t : grid[idx[k - 1]];
                const double est = scale * (slope[k] * t + icpt[k]);
                out.raw_sup = std::max(out.raw_sup, std::abs(est - xk));
            }
        }
        // Advance the mixed-radix counter over the remaining coordinates.
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == points) idx[k++] = 0;
        if (k == idx.size()) break;
    }
    return out;
}

/// Brute-force version of grid_sup_reconstruction_error (test oracle and small cases).
inline double grid_sup_reconstruction_error_direct(const weight_ensemble& ens, double r, std::size_t points)
{
    const std::size_t md = ens.input_dim();
    const auto grid = axis_grid(r, points);
    std::vector<std::size_t> idx(md, 0);
    vector x(static_cast<Eigen::Index>(md));
    double sup = 0;
    for (;;) {
        for (std::size_t k = 0; k < md; ++k) x[static_cast<Eigen::Index>(k)] = grid[idx[k]];
        sup = std::max(sup, sup_norm(reconstruct(ens, x) - x));
        std::size_t k = 0;
        while (k < md && ++idx[k] == points) idx[k++] = 0;
        if (k == md) break;
    }
    return sup;
}

// ---------------------------------------------------------------------------------------
// Deviation trials: (1/n) sum g(w_i) relu(w_i . x) against its integral over [-1/2,1/2]^d.

using weight_function = std::function<double(const vector&)>;

struct deviation_reference {
    std::size_t d = 1;
    double r = 1;
    std::size_t grid_points = 0;
    std::vector<vector> xs;
    std::vector<double> f;
    double integration_error = 0;  // max over grid points
};

struct deviation_trial_result {
    double empirical_sup = 0;  // raw grid sup plus Lipschitz slack
    double raw_sup = 0;
    double slack = 0;
    double bound = 0;
    bool violated = false;
    std::size_t n = 0, d = 0;
    double delta = 0;
    std::size_t grid_points = 0;
};

namespace detail {

inline std::vector<vector> tensor_grid(std::size_t d, double r, std::size_t points)
{
    const auto axis = axis_grid(r, points);
    std::vector<vector> xs;
    std::vector<std::size_t> idx(d, 0);
    for (;;) {
        vector x(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k) x[static_cast<Eigen::Index>(k)] = axis[idx[k]];
        xs.push_back(std::move(x));
        std::size_t k = 0;
        while (k < d && ++idx[k] == points) idx[k++] = 0;
        if (k == d) break;
    }
    return xs;
}

/// int_{[-1/2,1/2]^d} g(w) relu(w . x) dw for d = 1, 2 by nested adaptive quadrature.
inline quadrature_result integrate_relu_feature(const weight_function& g, const vector& x, double tol)
{
    if (x.size() == 1) {
        vector w(1);
        auto f = [&](double t) {
            w[0] = t;
            return g(w) * relu(t * x[0]);
        };
        return integrate_pieces(f, -0.5, 0.5, {0.0}, tol);
    }
    const double x1 = x[0], x2 = x[1];
    double inner_err = 0;
    auto outer = [&](double w1) {
        vector w(2);
        w[0] = w1;
        auto f = [&](double w2) {
            w[1] = w2;
            return g(w) * relu(w1 * x1 + w2 * x2);
        };
        std::vector<double> br;
        if (x2 != 0.0) br.push_back(-w1 * x1 / x2);
        auto q = integrate_pieces(f, -0.5, 0.5, br, tol);
        inner_err = std::max(inner_err, q.error);
        return q.value;
    };
    std::vector<double> br{0.0};
    if (x1 != 0.0) {
        br.push_back(x2 / (2.0 * x1));
        br.push_back(-x2 / (2.0 * x1));
    }
    auto q = integrate_pieces(outer, -0.5, 0.5, br, tol);
    q.error += inner_err;
    return q;
}

}  // namespace detail

/// Ground truth f on the covering grid of [-r, r]^d. Quadrature for d <= 2; for d >= 3 a
/// Monte Carlo reference with `reference_samples` draws whose error is 4 standard errors.
inline deviation_reference make_deviation_reference(const weight_function& g, std::size_t d, double r,
                                                    std::size_t grid_points, std::size_t reference_samples = 0,
                                                    std::uint64_t seed = 0, double tol = 1e-10)
{
    require(d >= 1 && r > 0 && grid_points >= 2, "deviation_reference: invalid arguments");
    deviation_reference ref;
    ref.d = d;
    ref.r = r;
    ref.grid_points = grid_points;
    ref.xs = detail::tensor_grid(d, r, grid_points);
    ref.f.resize(ref.xs.size());
    if (d <= 2) {
        for (std::size_t j = 0; j < ref.xs.size(); ++j) {
            const auto q = detail::integrate_relu_feature(g, ref.xs[j], tol);
            ref.f[j] = q.value;
            ref.integration_error = std::max(ref.integration_error, q.error);
        }
        return ref;
    }
    require(reference_samples >= 2, "deviation_reference: d >= 3 needs Monte Carlo reference samples");
    splitmix64 rng{seed};
    std::vector<double> sum(ref.xs.size(), 0.0), sumsq(ref.xs.size(), 0.0);
    vector w(static_cast<Eigen::Index>(d));
    for (std::size_t s = 0; s < reference_samples; ++s) {
        for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.symmetric_uniform(0.5);
        const double gw = g(w);
        for (std::size_t j = 0; j < ref.xs.size(); ++j) {
            const double v = gw * relu(w.dot(ref.xs[j]));
            sum[j] += v;
            sumsq[j] += v * v;
        }
    }
    const double N = static_cast<double>(reference_samples);
    for (std::size_t j = 0; j < ref.xs.size(); ++j) {
        const double mean = sum[j] / N;
        const double var = std::max(0.0, sumsq[j] / N - mean * mean) * N / (N - 1.0);
        ref.f[j] = mean;
        ref.integration_error = std::max(ref.integration_error, 4.0 * std::sqrt(var / N));
    }
    return ref;
}

/// One draw of n weights; compares the sup deviation on the reference grid with lemma_bound.
inline deviation_trial_result deviation_trial(const deviation_reference& ref, double B, std::size_t n, double delta,
                                              std::uint64_t seed, const weight_function& g)
{
    require(n >= 1, "deviation_trial: n must be >= 1");
    deviation_trial_result out;
    out.n = n;
    out.d = ref.d;
    out.delta = delta;
    out.grid_points = ref.grid_points;
    out.bound = lemma_bound(B, ref.r, ref.d, n, delta);
    if (ref.integration_error > 0.01 * out.bound)
        throw std::runtime_error("deviation_trial: reference integration error "
                                 + detail::format_double(ref.integration_error) + " exceeds 1% of the bound");
    splitmix64 rng{seed};
    const auto d = static_cast<Eigen::Index>(ref.d);
    row_matrix w(static_cast<Eigen::Index>(n), d);
    vector gw(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) w(i, k) = rng.symmetric_uniform(0.5);
        gw[i] = g(w.row(i).transpose());
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < ref.xs.size(); ++j) {
        vector z = w * ref.xs[j];
        double acc = 0;
        for (Eigen::Index i = 0; i < z.size(); ++i) acc += gw[i] * relu(z[i]);
        out.raw_sup = std::max(out.raw_sup, std::abs(ref.f[j] - acc * inv_n));
    }
    const double eps = ref.r / std::sqrt(static_cast<double>(n));
    out.slack = B * static_cast<double>(ref.d) * eps;
    out.empirical_sup = out.raw_sup + out.slack;
    out.violated = out.empirical_sup > out.bound;
    return out;
}

inline deviation_trial_result deviation_trial(double B, std::size_t d, std::size_t n, double r, double delta,
                                              std::size_t grid_points, std::uint64_t seed, const weight_function& g)
{
    if (grid_points == 0) grid_points = covering_points(n);
    const auto ref = make_deviation_reference(g, d, r, grid_points, 100 * n, derive_seed(seed, 0xfeed));
    return deviation_trial(ref, B, n, delta, seed, g);
}

}  // namespace reslab
