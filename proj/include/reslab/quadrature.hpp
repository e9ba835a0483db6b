#pragma once

// Adaptive Gauss-Kronrod quadrature over a list of breakpoints, so integrands with kinks
// (ReLU) are only ever integrated over smooth pieces.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace reslab {

struct quadrature_result {
    double value = 0;
    double error = 0;  // estimated absolute error
};

/// Integrate f over [a, b], splitting at every breakpoint strictly inside (a, b).
template <class F>
quadrature_result integrate_pieces(F&& f, double a, double b, std::vector<double> breaks = {}, double tol = 1e-12,
                                   unsigned max_depth = 15)
{
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    quadrature_result out;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]);
        const double hi = std::min(b, breaks[i + 1]);
        if (!(hi > lo)) continue;
        double err = 0;
        out.value += gk::integrate(f, lo, hi, max_depth, tol, &err);
        out.error += err;
    }
    return out;
}

}  // namespace reslab
