#include "reslab/operators.hpp"

#include <gtest/gtest.h>

using namespace reslab;

namespace {

vector vec(std::initializer_list<double> xs)
{
    vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

std::size_t linear_scan_horizon(const operator_spec& spec, double eps)
{
    for (std::size_t m = 1;; ++m)
        if (spec.tail(m) <= eps) return m;
}

vector random_window(splitmix64& rng, std::size_t len)
{
    vector x(static_cast<Eigen::Index>(len));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.symmetric_uniform(1.0);
    return x;
}

}  // namespace

TEST(ExpFilter, TailValues)
{
    EXPECT_DOUBLE_EQ(make_exp_filter(0.5).tail(10), 1.953125e-3);
    EXPECT_DOUBLE_EQ(make_exp_filter(0.9).tail(1), 9.0);
    EXPECT_DOUBLE_EQ(make_exp_filter(0.9).bound, 10.0);
}

TEST(ExpFilter, ConstantInputGivesGeometricSum)
{
    for (double lambda : {0.2, 0.5, 0.9})
        for (std::size_t m : {1u, 4u, 11u}) {
            const auto f = make_exp_filter(lambda);
            EXPECT_NEAR(f(vector::Constant(static_cast<Eigen::Index>(m), 1.0)),
                        (1.0 - std::pow(lambda, double(m))) / (1.0 - lambda), 1e-14);
        }
}

TEST(ExpFilter, WeightsNewestInputMost)
{
    const auto f = make_exp_filter(0.5);
    EXPECT_DOUBLE_EQ(f(vec({0, 0, 1})), 1.0);
    EXPECT_DOUBLE_EQ(f(vec({1, 0, 0})), 0.25);
    const auto g = make_exp_filter(0.5, filter_nonlinearity::tanh_composed);
    EXPECT_DOUBLE_EQ(g(vec({1, 0, 0})), std::tanh(0.25));
}

TEST(ExpFilter, RejectsLambdaOutsideUnitInterval)
{
    EXPECT_THROW(make_exp_filter(0.0), std::invalid_argument);
    EXPECT_THROW(make_exp_filter(1.0), std::invalid_argument);
    EXPECT_THROW(make_exp_filter(-0.3), std::invalid_argument);
}

TEST(FiniteMemory, ProductExamples)
{
    const auto p2 = make_product(2);
    EXPECT_EQ(p2.tail(2), 0.0);
    EXPECT_EQ(p2.tail(5), 0.0);
    EXPECT_EQ(p2.tail(1), 1.0);
    EXPECT_DOUBLE_EQ(p2(vec({0.5, -0.4})), -0.2);
    EXPECT_DOUBLE_EQ(p2(vec({0.9})), 0.0);  // zero-padded
    const auto p3 = make_product(3);
    EXPECT_DOUBLE_EQ(p3(vec({0.5, -0.5, 0.25})), 0.5 * -0.5 * 0.25);
    EXPECT_DOUBLE_EQ(p3(vec({1.0, 0.5, -0.5, 0.25})), 0.5 * -0.5 * 0.25);
}

TEST(FiniteMemory, IdentityIsInstantaneous)
{
    const auto id = make_identity();
    EXPECT_DOUBLE_EQ(id(vec({0.3})), 0.3);
    EXPECT_DOUBLE_EQ(id(vec({0.9, -0.1, 0.3})), 0.3);
    EXPECT_EQ(id.tail(1), 0.0);
}

TEST(FiniteMemory, ZeroPaddingIdentityIsExact)
{
    splitmix64 rng{3};
    for (const auto& spec : {make_product(2), make_product(3), make_identity()})
        for (std::size_t m = 1; m <= 5; ++m)
            for (int k = 0; k < 50; ++k) {
                const vector x = random_window(rng, m);
                vector padded = vector::Zero(static_cast<Eigen::Index>(m + 1));
                padded.tail(static_cast<Eigen::Index>(m)) = x;
                EXPECT_EQ(spec(x), spec(padded));
            }
}

TEST(Operators, TailIsMonotone)
{
    for (const auto& spec : {make_exp_filter(0.5), make_exp_filter(0.9, filter_nonlinearity::tanh_composed),
                             make_product(3), make_identity(), truncate(make_exp_filter(0.5), 4)})
        for (std::size_t m = 1; m < 60; ++m) EXPECT_LE(spec.tail(m + 1), spec.tail(m)) << spec.id;
}

TEST(Operators, TailedZeroPaddingWithinTail)
{
    splitmix64 rng{4};
    for (const auto& spec : {make_exp_filter(0.5), make_exp_filter(0.7, filter_nonlinearity::tanh_composed)})
        for (std::size_t m = 1; m <= 8; ++m)
            for (int k = 0; k < 50; ++k) {
                const vector x = random_window(rng, m);
                const vector longer = random_window(rng, m + 6);
                vector y = longer;
                y.tail(static_cast<Eigen::Index>(m)) = x;
                EXPECT_LE(std::abs(spec(x) - spec(y)), spec.tail(m) + 1e-14);
            }
}

TEST(MemoryHorizon, Examples)
{
    EXPECT_EQ(memory_horizon(make_exp_filter(0.5), 0.01), 8u);
    EXPECT_EQ(memory_horizon(make_exp_filter(0.5), 1e-3), 11u);
    EXPECT_LE(memory_horizon(make_product(2), 1e-9), 2u);
    EXPECT_EQ(memory_horizon(make_product(2), 1.0), 1u);
    const auto f = make_exp_filter(0.5);
    EXPECT_EQ(memory_horizon(f, f.bound), 1u);
}

TEST(MemoryHorizon, MatchesLinearScan)
{
    for (double lambda : {0.1, 0.5, 0.9, 0.99})
        for (double eps : {1.0, 0.1, 1e-3, 1e-6, 1e-9}) {
            const auto f = make_exp_filter(lambda);
            EXPECT_EQ(memory_horizon(f, eps), linear_scan_horizon(f, eps)) << lambda << " " << eps;
        }
}

TEST(MemoryHorizon, CapIsEnforced)
{
    EXPECT_THROW(memory_horizon(make_exp_filter(0.999), 1e-12, 100), std::runtime_error);
}

TEST(WeightedDistance, Examples)
{
    const weighting_sequence eta{0.5};
    const auto u = input_sequence::scalar({0.1, 0.2, 0.3, 0.4, 0.5});
    const auto same = weighted_distance(u, u, eta);
    EXPECT_EQ(same.value, 0.0);
    EXPECT_DOUBLE_EQ(same.tail_slack, 2.0 * std::pow(0.5, 5));

    const auto v0 = input_sequence::scalar({0.1, 0.2, 0.3, 0.4, -0.5});
    EXPECT_DOUBLE_EQ(weighted_distance(u, v0, eta).value, 1.0);

    const auto v3 = input_sequence::scalar({0.1, -0.8, 0.3, 0.4, 0.5});
    EXPECT_DOUBLE_EQ(weighted_distance(u, v3, eta).value, 0.125);

    EXPECT_THROW(weighted_distance(u, random_input(5, 2, 1), eta), std::invalid_argument);
}

TEST(Modulus, AnalyticForLinearFilter)
{
    const auto f = make_exp_filter(0.5);
    const auto est = estimate_modulus(f, 6, 16, 1);
    EXPECT_FALSE(est.is_lower_bound());
    const double L = (1.0 - std::pow(0.5, 6)) / 0.5;
    for (double delta : {0.01, 0.3, 1.0, 2.0}) EXPECT_DOUBLE_EQ(est.omega(delta), L * delta);
    // Attained by shifting every coordinate by delta.
    const vector x = vector::Constant(6, -0.5);
    EXPECT_NEAR(f(vector(x.array() + 0.3)) - f(x), L * 0.3, 1e-14);
}

TEST(Modulus, ConstantFunctionalHasZeroModulusAndInfiniteInverse)
{
    auto c = make_finite_memory(2, [](const vector&) { return 0.25; }, 1, 0.25, "constant");
    const auto est = estimate_modulus(c, 2, 8, 3, 64);
    EXPECT_TRUE(est.is_lower_bound());
    for (double delta : {0.1, 1.0, 2.0}) EXPECT_EQ(est.omega(delta), 0.0);
    EXPECT_TRUE(std::isinf(est.omega_inverse(0.01)));
}

TEST(Modulus, ProductEmpiricalBelowAnalyticEnvelope)
{
    auto p = make_finite_memory(2, [](const vector& x) { return x.prod(); }, 1, 1.0, "product-no-lipschitz");
    const auto est = estimate_modulus(p, 2, 20, 9);
    for (std::size_t k = 0; k < est.deltas.size(); ++k) {
        const double delta = est.deltas[k];
        EXPECT_LE(est.omegas[k], 2 * delta + delta * delta + 1e-12);
        if (k) EXPECT_GE(est.omegas[k], est.omegas[k - 1]);
        EXPECT_GE(est.omega_inverse(est.omega(delta)), delta);
    }
}

TEST(Modulus, InverseRoundTripAnalytic)
{
    const auto est = estimate_modulus(make_exp_filter(0.3), 4, 8, 1);
    for (double delta : {0.05, 0.5, 1.5, 2.0}) EXPECT_GE(est.omega_inverse(est.omega(delta)), delta * (1 - 1e-15));
}

TEST(Modulus, TailDominatedByWeightedModulus)
{
    // E_F(m) <= omega_F(eta_m; eta) for the linear filter and eta_k = lambda^k.
    const double lambda = 0.5;
    const weighting_sequence eta{lambda};
    const auto f = make_exp_filter(lambda);
    for (std::size_t m = 1; m <= 12; ++m) EXPECT_LE(f.tail(m), exp_filter_weighted_modulus(lambda, eta, eta(m)) + 1e-15);
}

TEST(Modulus, WeightedModulusDirectSum)
{
    const double lambda = 0.6;
    const weighting_sequence eta{lambda};
    for (double delta : {0.0, 1e-3, 0.1, 1.0, 3.0}) {
        double direct = 0;
        for (int k = 0; k < 3000; ++k) direct += std::min(2.0 * std::pow(lambda, k), delta);
        EXPECT_NEAR(exp_filter_weighted_modulus(lambda, eta, delta), direct, 1e-12);
    }
}

TEST(Registry, ParsesIds)
{
    EXPECT_EQ(parse_operator("exp_filter:lambda=0.5").id, "exp_filter:lambda=0.5");
    EXPECT_EQ(parse_operator("exp_filter:lambda=0.25,nonlinearity=tanh").id, "exp_filter:lambda=0.25,nonlinearity=tanh");
    EXPECT_EQ(parse_operator("product:k=3").memory, std::optional<std::size_t>{3});
    EXPECT_EQ(parse_operator("identity").id, "identity");
    EXPECT_THROW(parse_operator("volterra:k=2"), std::invalid_argument);
    EXPECT_THROW(parse_operator("exp_filter:lambda=0.5,mu=1"), std::invalid_argument);
    EXPECT_THROW(parse_operator("exp_filter"), std::invalid_argument);
}

TEST(Truncate, FiniteMemoryWindow)
{
    const auto f = make_exp_filter(0.5);
    const auto t4 = truncate(f, 4);
    EXPECT_EQ(t4.tail(4), 0.0);
    EXPECT_EQ(memory_horizon(t4, 1e-6), 4u);
    const vector x = vec({0.9, -0.2, 0.4, 0.1, -0.7, 0.3});
    EXPECT_DOUBLE_EQ(t4(x), f(x.tail(4).eval()));
}
