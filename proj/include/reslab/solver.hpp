#pragma once

// Self-consistent internal windows r_t of the structured reservoir:
//
//     r_t = psi(r)_t = (2 / (n M2)) P W^T relu(W r_{t-1} + b) + Q u_t,
//
// computed on a finite window by fixed-point iteration with a zero predecessor before the
// first step, and certified by the achieved residual.

#include "reslab/reservoir.hpp"
#include "reslab/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <vector>

namespace reslab {

struct psi_state {
    std::vector<vector> r;  // one length-md window per time step
    double box_radius = 1.5;

    std::size_t length() const noexcept { return r.size(); }
};

inline psi_state zero_psi_state(const shift_reservoir& res, std::size_t length)
{
    psi_state st;
    st.r.assign(length, vector::Zero(static_cast<Eigen::Index>(res.input_dim())));
    return st;
}

/// One application of psi to every step of the window.
inline psi_state psi_apply(const shift_reservoir& res, const psi_state& st, const input_sequence& u)
{
    require(st.length() == u.length(), "psi_apply: state and input windows are not aligned");
    require(u.length() == 0 || u.dim() == res.d(), "psi_apply: input dimension does not match reservoir d");
    const auto md = static_cast<Eigen::Index>(res.input_dim());
    psi_state out;
    out.box_radius = st.box_radius;
    out.r.reserve(st.length());
    const vector zero = vector::Zero(md);
    for (std::size_t t = 0; t < st.length(); ++t) {
        const vector& prev = t == 0 ? zero : st.r[t - 1];
        require_length(prev.size(), md, "psi_apply: window");
        // internal_window(s, u) = c/n P W^T s + Q u with s = relu(W prev + b).
        out.r.push_back(res.internal_window(res.features(prev), u.step(t)));
    }
    return out;
}

inline double psi_distance(const psi_state& a, const psi_state& b)
{
    double d = 0;
    for (std::size_t t = 0; t < a.length(); ++t) d = std::max(d, sup_norm(a.r[t] - b.r[t]));
    return d;
}

struct solve_result {
    psi_state state;
    double residual = std::numeric_limits<double>::infinity();  // ||psi(state) - state||_inf
    std::size_t iters = 0;                                       // psi applications that produced `state`
    bool converged = false;
    std::size_t box_violations = 0;  // iterate entries outside box_radius + box_slack
};

/// Iterate psi from r = 0 until ||psi(r) - r||_inf <= tol. max_iters = 0 means 50 m.
/// Non-convergence is reported through `converged`, returning the best iterate seen.
inline solve_result fixed_point_solve(const shift_reservoir& res, const input_sequence& u, double tol = 1e-10,
                                      std::size_t max_iters = 0, double box_radius = 1.5, double box_slack = 0.5)
{
    require(tol > 0, "fixed_point_solve: tol must be positive");
    if (max_iters == 0) max_iters = 50 * res.m();
    psi_state r = zero_psi_state(res, u.length());
    r.box_radius = box_radius;
    solve_result best;
    std::size_t violations = 0;
    for (std::size_t k = 0;; ++k) {
        psi_state next = psi_apply(res, r, u);
        for (const auto& v : next.r) {
            if (!all_finite(v)) throw std::domain_error("fixed_point_solve: non-finite iterate");
            for (Eigen::Index j = 0; j < v.size(); ++j)
                if (std::abs(v[j]) > box_radius + box_slack) ++violations;
        }
        const double residual = psi_distance(next, r);
        if (residual < best.residual) {
            best.state = r;
            best.residual = residual;
            best.iters = k;
        }
        if (residual <= tol) {
            best.converged = true;
            break;
        }
        if (k == max_iters) break;
        r = std::move(next);
    }
    best.box_violations = violations;
    return best;
}

/// Per step ||r_t - (u_{t-m+1}, ..., u_t)||_inf, zero-padded before the window.
inline std::vector<double> window_proximity(const psi_state& st, const input_sequence& u, std::size_t m)
{
    require(st.length() == u.length(), "window_proximity: state and input windows are not aligned");
    std::vector<double> out(st.length());
    for (std::size_t t = 0; t < st.length(); ++t) out[t] = sup_norm(st.r[t] - u.window(t, m));
    return out;
}

/// Residual of the state equation recomputed with explicit loops, independent of
/// psi_apply and the shift helpers.
inline double recheck_residual(const shift_reservoir& res, const psi_state& st, const input_sequence& u)
{
    const auto& W = res.ensemble().W;
    const auto& b = res.ensemble().b;
    const auto n = static_cast<Eigen::Index>(res.n());
    const auto md = static_cast<Eigen::Index>(res.input_dim());
    const auto d = static_cast<Eigen::Index>(res.d());
    const double c = res.c_over_n();
    double worst = 0;
    std::vector<double> s(static_cast<std::size_t>(n));
    for (std::size_t t = 0; t < st.length(); ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double z = b[i];
            if (t > 0)
                for (Eigen::Index j = 0; j < md; ++j) z += W(i, j) * st.r[t - 1][j];
            s[static_cast<std::size_t>(i)] = z > 0 ? z : 0;
        }
        for (Eigen::Index j = 0; j < md; ++j) {
            double expected;
            if (j < md - d) {
                expected = 0;
                for (Eigen::Index i = 0; i < n; ++i) expected += W(i, j + d) * s[static_cast<std::size_t>(i)];
                expected *= c;
            } else {
                expected = u.at(t, static_cast<std::size_t>(j - (md - d)));
            }
            worst = std::max(worst, std::abs(st.r[t][j] - expected));
        }
    }
    return worst;
}

/// max_{t>=1} ||relu(W r_t + b) - state_update(relu(W r_{t-1} + b), u_t)||_inf; a residual
/// of tol bounds this by tol ||W||_inf.
inline double state_consistency_gap(const shift_reservoir& res, const psi_state& st, const input_sequence& u)
{
    double worst = 0;
    for (std::size_t t = 1; t < st.length(); ++t) {
        const state_vector prev{res.features(st.r[t - 1]), static_cast<long>(t)};
        const auto next = res.state_update(prev, u.step(t));
        worst = std::max(worst, sup_norm(res.features(st.r[t]) - next.s));
    }
    return worst;
}

struct solver_certificate {
    double residual = 0;
    std::size_t iters = 0;
    bool converged = false;
    double max_window_proximity = 0;  // over steps t >= warmup
    std::size_t box_violations = 0;
    double tol = 0;
};

inline solver_certificate make_certificate(const solve_result& sol, const input_sequence& u, std::size_t m, double tol,
                                           std::size_t warmup)
{
    solver_certificate cert;
    cert.residual = sol.residual;
    cert.iters = sol.iters;
    cert.converged = sol.converged;
    cert.box_violations = sol.box_violations;
    cert.tol = tol;
    const auto prox = window_proximity(sol.state, u, m);
    for (std::size_t t = warmup; t < prox.size(); ++t) cert.max_window_proximity = std::max(cert.max_window_proximity, prox[t]);
    return cert;
}

inline nlohmann::json to_json(const solver_certificate& c)
{
    return {{"residual", c.residual},         {"iters", c.iters},   {"converged", c.converged},
            {"max_window_proximity", c.max_window_proximity}, {"box_violations", c.box_violations},
            {"tol", c.tol}};
}

}  // namespace reslab
