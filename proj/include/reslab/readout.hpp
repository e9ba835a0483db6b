#pragma once

// Linear readouts y_t = a . s_t fitted by ridge regression on simulated trajectories, and
// the sup-norm operator error over a fixed family of test inputs.

#include "reslab/ensemble.hpp"
#include "reslab/operators.hpp"
#include "reslab/reservoir.hpp"
#include "reslab/types.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>

#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

namespace reslab {

struct readout {
    vector a;
    double ridge_lambda = 0;
    double fit_rms = 0;
    double condition_estimate = 0;  // max |D| / min |D| of the LDL^T factor

    double predict(const vector& s) const
    {
        require_length(s.size(), a.size(), "readout: state");
        return a.dot(s);
    }
};

namespace detail {

inline Eigen::LDLT<Eigen::MatrixXd> checked_ldlt(const Eigen::MatrixXd& G, double ridge, double& condition)
{
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const vector D = ldlt.vectorD().cwiseAbs();
    const double dmax = D.size() ? D.maxCoeff() : 0.0;
    const double dmin = D.size() ? D.minCoeff() : 0.0;
    const double floor = dmax * static_cast<double>(G.rows()) * std::numeric_limits<double>::epsilon();
    if (ldlt.info() != Eigen::Success || dmax == 0.0 || dmin <= floor) {
        if (ridge == 0.0)
            throw std::runtime_error("fit_readout: normal matrix is singular at ridge_lambda = 0; use a positive ridge");
        throw std::runtime_error("fit_readout: normal matrix is numerically singular; increase ridge_lambda");
    }
    condition = dmax / dmin;
    return ldlt;
}

}  // namespace detail

/// a = argmin ||S a - y||^2 + ridge ||a||^2 for the design S (one state per row).
/// Uses the n x n normal equations when n <= rows and the rows x rows dual system otherwise.
inline readout fit_readout(const Eigen::MatrixXd& S, const vector& y, double ridge_lambda)
{
    require(S.rows() >= 1, "fit_readout: need at least one state");
    require_length(y.size(), S.rows(), "fit_readout: targets");
    require(ridge_lambda >= 0 && std::isfinite(ridge_lambda), "fit_readout: ridge_lambda must be nonnegative");
    readout out;
    out.ridge_lambda = ridge_lambda;
    const Eigen::Index T = S.rows(), n = S.cols();
    if (n <= T) {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
        G.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
        G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
        G.diagonal().array() += ridge_lambda;
        const auto ldlt = detail::checked_ldlt(G, ridge_lambda, out.condition_estimate);
        out.a = ldlt.solve(S.transpose() * y);
    } else {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(T, T);
        K.selfadjointView<Eigen::Lower>().rankUpdate(S);
        K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
        K.diagonal().array() += ridge_lambda;
        const auto ldlt = detail::checked_ldlt(K, ridge_lambda, out.condition_estimate);
        out.a = S.transpose() * ldlt.solve(y);
    }
    if (!all_finite(out.a)) throw std::runtime_error("fit_readout: solution is not finite");
    out.fit_rms = std::sqrt((S * out.a - y).squaredNorm() / static_cast<double>(T));
    return out;
}

inline readout fit_readout(const std::vector<state_vector>& states, const std::vector<double>& targets,
                           double ridge_lambda)
{
    require(!states.empty(), "fit_readout: need at least one state");
    require(states.size() == targets.size(), "fit_readout: state and target counts differ");
    const auto n = states.front().s.size();
    Eigen::MatrixXd S(static_cast<Eigen::Index>(states.size()), n);
    for (std::size_t t = 0; t < states.size(); ++t) {
        require_length(states[t].s.size(), n, "fit_readout: state");
        S.row(static_cast<Eigen::Index>(t)) = states[t].s.transpose();
    }
    return fit_readout(S, Eigen::Map<const vector>(targets.data(), static_cast<Eigen::Index>(targets.size())),
                       ridge_lambda);
}

struct eval_report {
    double sup_error = 0;
    double mean_abs_error = 0;
    std::vector<double> per_sequence_max;
    std::size_t n_test_sequences = 0;
    std::size_t warmup_discarded = 0;
    std::size_t target_window = 0;       // m_big
    double target_truncation = 0;        // E_F(m_big)
};

inline nlohmann::json to_json(const eval_report& r)
{
    return {{"sup_error", r.sup_error},
            {"mean_abs_error", r.mean_abs_error},
            {"per_sequence_max", r.per_sequence_max},
            {"n_test_sequences", r.n_test_sequences},
            {"warmup_discarded", r.warmup_discarded},
            {"target_window", r.target_window},
            {"target_truncation", r.target_truncation}};
}

/// Window length used to stand in for F: the least m with E_F(m) <= eps, capped.
inline std::size_t target_window(const operator_spec& spec, double eps = 1e-6, std::size_t cap = 4096)
{
    return memory_horizon(spec, eps, cap);
}

/// Sup over kept steps of |a . s_t - F*_{m_big}(u_{t-m_big+1:t})|, trajectories from s0 = 0.
inline eval_report evaluate_operator_error(const shift_reservoir& res, const readout& ro, const operator_spec& spec,
                                           const std::vector<input_sequence>& test_inputs, std::size_t warmup,
                                           std::size_t m_big = 0)
{
    require(spec.d == res.d(), "evaluate_operator_error: operator and reservoir input dimensions differ");
    require_length(ro.a.size(), static_cast<Eigen::Index>(res.n()), "evaluate_operator_error: readout");
    if (m_big == 0) m_big = target_window(spec);
    eval_report rep;
    rep.n_test_sequences = test_inputs.size();
    rep.warmup_discarded = warmup;
    rep.target_window = m_big;
    rep.target_truncation = spec.tail(m_big);
    double total = 0;
    std::size_t count = 0;
    for (const auto& u : test_inputs) {
        require(u.dim() == res.d(), "evaluate_operator_error: test input dimension does not match reservoir d");
        double seq_max = 0;
        for_each_state(res, u, res.zero_state(), [&](std::size_t t, const state_vector& s) {
            if (t < warmup) return;
            const double err = std::abs(ro.a.dot(s.s) - spec(u.window(t, m_big)));
            seq_max = std::max(seq_max, err);
            total += err;
            ++count;
        });
        rep.per_sequence_max.push_back(seq_max);
        rep.sup_error = std::max(rep.sup_error, seq_max);
    }
    rep.mean_abs_error = count ? total / static_cast<double>(count) : 0.0;
    return rep;
}

/// Held-out test family: `random_count` i.i.d. uniform sequences followed by the constant
/// +1, constant -1 and alternating-sign sequences.
inline std::vector<input_sequence> make_test_family(std::size_t random_count, std::size_t length, std::size_t d,
                                                    std::uint64_t seed)
{
    std::vector<input_sequence> out;
    for (std::size_t k = 0; k < random_count; ++k) out.push_back(random_input(length, d, derive_seed(seed, k)));
    const auto L = static_cast<Eigen::Index>(length), D = static_cast<Eigen::Index>(d);
    out.emplace_back(row_matrix::Constant(L, D, 1.0));
    out.emplace_back(row_matrix::Constant(L, D, -1.0));
    row_matrix alt(L, D);
    for (Eigen::Index t = 0; t < L; ++t) alt.row(t).setConstant(t % 2 == 0 ? 1.0 : -1.0);
    out.emplace_back(std::move(alt));
    return out;
}

struct pipeline_config {
    symmetric_distribution dist = symmetric_distribution::uniform(0.5);
    std::size_t n = 400;
    std::size_t m = 1;
    operator_spec target;
    std::size_t target_window = 0;  // 0: least m with E_F(m) <= 1e-6
    std::size_t train_steps = 5000;
    std::size_t test_sequences = 8;
    std::size_t test_length = 200;
    std::size_t warmup = 0;  // 0: 3m
    double ridge = 1e-8;
    bool trace_normalized = true;  // effective ridge = ridge * tr(S^T S) / n
    std::uint64_t ensemble_seed = 0;
    std::uint64_t data_seed = 1;
};

struct pipeline_result {
    weight_ensemble ensemble;
    readout fit;
    eval_report report;
};

/// Sample the ensemble, fit on one training trajectory, evaluate on the test family.
inline pipeline_result train_test_pipeline(const pipeline_config& cfg)
{
    require(static_cast<bool>(cfg.target.functional), "train_test_pipeline: no target operator");
    const std::size_t d = cfg.target.d;
    const std::size_t warmup = cfg.warmup ? cfg.warmup : 3 * cfg.m;
    const std::size_t m_big = cfg.target_window ? cfg.target_window : target_window(cfg.target);
    require(cfg.train_steps > warmup, "train_test_pipeline: train_steps must exceed warmup");

    auto ens = sample_ensemble(cfg.dist, cfg.n, cfg.m, d, cfg.ensemble_seed);
    shift_reservoir res{ens};
    const auto train = random_input(cfg.train_steps, d, derive_seed(cfg.data_seed, 0));
    const auto kept = static_cast<Eigen::Index>(cfg.train_steps - warmup);
    Eigen::MatrixXd S(kept, static_cast<Eigen::Index>(cfg.n));
    vector y(kept);
    for_each_state(res, train, res.zero_state(), [&](std::size_t t, const state_vector& s) {
        if (t < warmup) return;
        const auto row = static_cast<Eigen::Index>(t - warmup);
        S.row(row) = s.s.transpose();
        y[row] = cfg.target(train.window(t, m_big));
    });
    double lambda = cfg.ridge;
    if (cfg.trace_normalized) lambda *= S.squaredNorm() / static_cast<double>(cfg.n);
    auto ro = fit_readout(S, y, lambda);
    const auto tests = make_test_family(cfg.test_sequences, cfg.test_length, d, derive_seed(cfg.data_seed, 1));
    auto rep = evaluate_operator_error(res, ro, cfg.target, tests, warmup, m_big);
    return {std::move(ens), std::move(ro), std::move(rep)};
}

}  // namespace reslab
