#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace reslab {

using vector = Eigen::VectorXd;
using row_matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw std::invalid_argument(what);
}

inline void require_length(Eigen::Index got, Eigen::Index expected, const char* what)
{
    if (got != expected)
        throw std::invalid_argument(std::string{what} + ": length " + std::to_string(got)
                                    + " does not match expected " + std::to_string(expected));
}

inline bool all_finite(const Eigen::Ref<const vector>& v) noexcept
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

inline double sup_norm(const Eigen::Ref<const vector>& v) noexcept
{
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace reslab
