#pragma once

// Structured ReLU echo state network
//
//     s_t = relu(W ((2 / (n M2)) P W^T s_{t-1} + Q u_t) + b),   y_t = a . s_t
//
// P is the md x md block superdiagonal shift (block i <- block i+1, last block zero) and
// Q embeds u_t into the last block. Neither is ever materialized: block i of a length-md
// vector occupies indices [(i-1)d, id).

#include "reslab/ensemble.hpp"
#include "reslab/types.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace reslab {

/// Apply the block shift P in place into `out`: out[i] = r[i+1] for blocks 1..m-1, out[m] = 0.
inline void shift_apply(std::span<const double> r, std::span<double> out, std::size_t m, std::size_t d)
{
    const std::size_t md = m * d;
    require(r.size() == md && out.size() == md, "shift_apply: length must be m*d");
    std::copy(r.begin() + static_cast<std::ptrdiff_t>(d), r.end(), out.begin());
    std::fill(out.end() - static_cast<std::ptrdiff_t>(d), out.end(), 0.0);
}

inline vector shift_apply(const vector& r, std::size_t m, std::size_t d)
{
    require_length(r.size(), static_cast<Eigen::Index>(m * d), "shift_apply");
    vector out(r.size());
    shift_apply(std::span<const double>(r.data(), r.size()), std::span<double>(out.data(), out.size()), m, d);
    return out;
}

/// Apply Q: blocks 1..m-1 zero, block m equal to u.
inline vector embed_apply(const vector& u, std::size_t m)
{
    const auto d = static_cast<Eigen::Index>(u.size());
    require(m >= 1 && d >= 1, "embed_apply: m and d must be >= 1");
    vector out = vector::Zero(static_cast<Eigen::Index>(m) * d);
    out.tail(d) = u;
    return out;
}

enum class activation { relu };

struct state_vector {
    vector s;
    long t = 0;
};

/// Input sequence u_0, ..., u_{T-1}; each u_t in [-1, 1]^d.
class input_sequence {
public:
    input_sequence() = default;

    /// Rows are time steps. Throws if any entry is non-finite or outside [-1, 1].
    explicit input_sequence(row_matrix values, long origin = 0) : values_{std::move(values)}, origin_{origin}
    {
        for (Eigen::Index i = 0; i < values_.size(); ++i) {
            const double x = values_.data()[i];
            if (!std::isfinite(x) || std::abs(x) > 1.0)
                throw std::invalid_argument("input_sequence: entries must be finite and lie in [-1, 1]");
        }
    }

    static input_sequence scalar(const std::vector<double>& u, long origin = 0)
    {
        row_matrix v(static_cast<Eigen::Index>(u.size()), 1);
        for (std::size_t t = 0; t < u.size(); ++t) v(static_cast<Eigen::Index>(t), 0) = u[t];
        return input_sequence{std::move(v), origin};
    }

    std::size_t length() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    long origin() const noexcept { return origin_; }
    vector step(std::size_t t) const { return values_.row(static_cast<Eigen::Index>(t)).transpose(); }
    double at(std::size_t t, std::size_t k) const
    {
        return values_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
    }
    const row_matrix& values() const noexcept { return values_; }

    /// The flattened window (u_{t-m+1}, ..., u_t), oldest first, zero-padded before t = 0.
    vector window(std::size_t t, std::size_t m) const
    {
        const std::size_t d = dim();
        vector x = vector::Zero(static_cast<Eigen::Index>(m * d));
        for (std::size_t j = 0; j < m; ++j) {
            const long src = static_cast<long>(t) - static_cast<long>(m - 1 - j);
            if (src < 0) continue;
            for (std::size_t k = 0; k < d; ++k)
                x[static_cast<Eigen::Index>(j * d + k)] = at(static_cast<std::size_t>(src), k);
        }
        return x;
    }

private:
    row_matrix values_{0, 1};
    long origin_ = 0;
};

/// i.i.d. uniform inputs on [-1, 1]^d.
inline input_sequence random_input(std::size_t length, std::size_t d, std::uint64_t seed)
{
    splitmix64 rng{seed};
    row_matrix v(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.symmetric_uniform(1.0);
    return input_sequence{std::move(v)};
}

class shift_reservoir {
public:
    explicit shift_reservoir(weight_ensemble ens, activation act = activation::relu)
      : ens_{std::move(ens)}, act_{act},
        c_over_n_{reconstruction_scale(ens_.source) / static_cast<double>(ens_.n)}
    {}

    const weight_ensemble& ensemble() const noexcept { return ens_; }
    activation act() const noexcept { return act_; }
    double c_over_n() const noexcept { return c_over_n_; }
    std::size_t n() const noexcept { return ens_.n; }
    std::size_t m() const noexcept { return ens_.m; }
    std::size_t d() const noexcept { return ens_.d; }
    std::size_t input_dim() const noexcept { return ens_.input_dim(); }

    /// The internal window r_t = c/n P W^T s_{t-1} + Q u_t fed to the nonlinearity.
    vector internal_window(const vector& s_prev, const vector& u) const
    {
        const auto d = static_cast<Eigen::Index>(ens_.d);
        const auto md = static_cast<Eigen::Index>(input_dim());
        vector back = ens_.W.transpose() * s_prev;
        vector r(md);
        r.head(md - d) = c_over_n_ * back.tail(md - d);
        r.tail(d) = u;
        return r;
    }

    /// relu(W r + b).
    vector features(const vector& r) const
    {
        vector s = ens_.W * r + ens_.b;
        for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = relu(s[i]);
        return s;
    }

    state_vector state_update(const state_vector& prev, const vector& u) const
    {
        require_length(prev.s.size(), static_cast<Eigen::Index>(ens_.n), "state_update: state");
        require_length(u.size(), static_cast<Eigen::Index>(ens_.d), "state_update: input");
        if (!all_finite(prev.s) || !all_finite(u))
            throw std::domain_error("state_update: non-finite entries in state or input");
        return {features(internal_window(prev.s, u)), prev.t + 1};
    }

    state_vector zero_state() const { return {vector::Zero(static_cast<Eigen::Index>(ens_.n)), 0}; }

private:
    weight_ensemble ens_;
    activation act_;
    double c_over_n_;
};

/// Fold state_update over u, calling visit(t_index, state) after each step. Keeps only the
/// current state, so memory is O(n + md) regardless of the horizon.
template <class Visitor>
void for_each_state(const shift_reservoir& res, const input_sequence& u, state_vector s0, Visitor&& visit)
{
    require_length(s0.s.size(), static_cast<Eigen::Index>(res.n()), "run_trajectory: initial state");
    require(u.length() == 0 || u.dim() == res.d(), "run_trajectory: input dimension does not match reservoir d");
    state_vector s = std::move(s0);
    for (std::size_t t = 0; t < u.length(); ++t) {
        s = res.state_update(s, u.step(t));
        visit(t, std::as_const(s));
    }
}

/// States s_1 .. s_T.
inline std::vector<state_vector> run_trajectory(const shift_reservoir& res, const input_sequence& u,
                                                const state_vector& s0)
{
    std::vector<state_vector> out;
    out.reserve(u.length());
    for_each_state(res, u, s0, [&](std::size_t, const state_vector& s) { out.push_back(s); });
    return out;
}

/// Per-step sup-norm gap between two trajectories driven by the same input.
inline std::vector<double> dual_trajectory_gap(const shift_reservoir& res, const input_sequence& u,
                                               const state_vector& s0, const state_vector& s0_alt)
{
    require_length(s0.s.size(), static_cast<Eigen::Index>(res.n()), "dual_trajectory_gap: s0");
    require_length(s0_alt.s.size(), static_cast<Eigen::Index>(res.n()), "dual_trajectory_gap: s0_alt");
    std::vector<double> gaps;
    gaps.reserve(u.length());
    state_vector a = s0, b = s0_alt;
    for (std::size_t t = 0; t < u.length(); ++t) {
        const vector ut = u.step(t);
        a = res.state_update(a, ut);
        b = res.state_update(b, ut);
        gaps.push_back(sup_norm(a.s - b.s));
    }
    return gaps;
}

/// Max-row-sum norm ||W||_inf.
inline double max_row_sum(const row_matrix& W) { return W.rows() == 0 ? 0.0 : W.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace reslab
