#include "reslab/ensemble.hpp"
#include "reslab/rng.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace reslab;

TEST(SplitMix64, MatchesPublishedReferenceOutputs)
{
    // Reference outputs of SplitMix64 seeded with 1234567 (the constants used by the
    // xoshiro authors' test vectors).
    splitmix64 rng{1234567};
    EXPECT_EQ(rng(), 6457827717110365317ULL);
    EXPECT_EQ(rng(), 3203168211198807973ULL);
    EXPECT_EQ(rng(), 9817491932198370423ULL);
    EXPECT_EQ(rng(), 4593380528125082431ULL);
    EXPECT_EQ(rng(), 16408922859458223821ULL);
}

TEST(SplitMix64, SymmetricUniformIsExactlySymmetricLattice)
{
    // Lattice points k and 2^52 - 1 - k map to x and -x exactly.
    for (std::uint64_t k : {0ULL, 1ULL, 12345ULL, (1ULL << 51) + 7, (1ULL << 52) - 1}) {
        const double x = splitmix64::symmetric_unit(k);
        EXPECT_EQ(x, -splitmix64::symmetric_unit((1ULL << 52) - 1 - k));
        EXPECT_GT(x, -1.0);
        EXPECT_LT(x, 1.0);
    }
    splitmix64 rng{3};
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.symmetric_uniform(0.5);
        EXPECT_GT(x, -0.5);
        EXPECT_LT(x, 0.5);
    }
}

TEST(SplitMix64, DerivedSeedsDiffer)
{
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(9, 4), derive_seed(9, 4));
}

TEST(Fnv1a, KnownDigests)
{
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(SymmetricDistribution, SecondMomentsAndScale)
{
    EXPECT_DOUBLE_EQ(symmetric_distribution::uniform(0.5).second_moment(), 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(reconstruction_scale(symmetric_distribution::uniform(0.5)), 24.0);
    EXPECT_DOUBLE_EQ(reconstruction_scale(symmetric_distribution::two_point(1.0)), 2.0);
    EXPECT_DOUBLE_EQ(reconstruction_scale(symmetric_distribution::uniform(1.0)), 6.0);
    EXPECT_DOUBLE_EQ(symmetric_distribution::two_point(3.0).second_moment(), 9.0);
    const auto mix = symmetric_distribution::rademacher_mixture({0.25, 1.0}, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(mix.second_moment(), 0.5 * 0.0625 + 0.5);
    EXPECT_DOUBLE_EQ(mix.support_radius(), 1.0);
}

TEST(SymmetricDistribution, RejectsInvalidParameters)
{
    EXPECT_THROW(symmetric_distribution::uniform(0.0), std::invalid_argument);
    EXPECT_THROW(symmetric_distribution::uniform(INFINITY), std::invalid_argument);
    EXPECT_THROW(symmetric_distribution::two_point(-1.0), std::invalid_argument);
    EXPECT_THROW(symmetric_distribution::rademacher_mixture({1.0}, {0.5}), std::invalid_argument);
    EXPECT_THROW(symmetric_distribution::parse("gaussian:sigma=1"), std::invalid_argument);
    EXPECT_THROW(symmetric_distribution::parse("uniform:r=0.5,q=1"), std::invalid_argument);
}

TEST(SymmetricDistribution, ParseRoundTrip)
{
    for (const auto& d : {symmetric_distribution::uniform(0.5), symmetric_distribution::two_point(1.0),
                          symmetric_distribution::rademacher_mixture({0.25, 1.0}, {0.25, 0.75})}) {
        EXPECT_EQ(symmetric_distribution::parse(d.descriptor()), d);
    }
}

TEST(SymmetricDistribution, EmpiricalSymmetryAndMoments)
{
    // Standardized first and third moments vanish within 5/sqrt(N); M2 within 5 SE.
    constexpr std::size_t N = 1000000;
    for (const auto& dist : {symmetric_distribution::uniform(0.5), symmetric_distribution::two_point(1.0),
                             symmetric_distribution::rademacher_mixture({0.25, 1.0}, {0.5, 0.5})}) {
        splitmix64 rng{42};
        double s1 = 0, s2 = 0, s3 = 0;
        std::size_t positive = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double x = dist.sample(rng);
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
            positive += x > 0;
        }
        const double sd = std::sqrt(dist.second_moment());
        EXPECT_LT(std::abs(s1 / N) / sd, 5.0 / std::sqrt(double(N))) << dist.descriptor();
        EXPECT_LT(std::abs(s3 / N) / (sd * sd * sd), 5.0 * std::sqrt(15.0) / std::sqrt(double(N))) << dist.descriptor();
        const double se = std::sqrt((dist.fourth_moment() - dist.second_moment() * dist.second_moment()) / N);
        EXPECT_LE(std::abs(s2 / N - dist.second_moment()), 5.0 * std::max(se, 1e-15)) << dist.descriptor();
        // Two-sided binomial test on signs at level 1e-3 (|z| < 3.29).
        const double z = (double(positive) - 0.5 * N) / std::sqrt(0.25 * N);
        EXPECT_LT(std::abs(z), 3.29) << dist.descriptor();
    }
}

TEST(SampleEnsemble, ShapesAndSupport)
{
    const auto ens = sample_ensemble(symmetric_distribution::uniform(0.5), 3, 1, 1, 0);
    EXPECT_EQ(ens.W.rows(), 3);
    EXPECT_EQ(ens.W.cols(), 1);
    EXPECT_EQ(ens.b.size(), 3);
    EXPECT_LE(ens.W.cwiseAbs().maxCoeff(), 0.5);
    EXPECT_LE(ens.b.cwiseAbs().maxCoeff(), 0.5);

    const auto tp = sample_ensemble(symmetric_distribution::two_point(1.0), 50, 2, 3, 5);
    for (Eigen::Index i = 0; i < tp.W.size(); ++i) EXPECT_EQ(std::abs(tp.W.data()[i]), 1.0);
    for (Eigen::Index i = 0; i < tp.b.size(); ++i) EXPECT_EQ(std::abs(tp.b[i]), 1.0);
}

TEST(SampleEnsemble, EmpiricalVarianceOfUniformHalf)
{
    const auto ens = sample_ensemble(symmetric_distribution::uniform(0.5), 1000000, 1, 1, 0);
    const double mean = ens.W.mean();
    const double var = (ens.W.array() - mean).square().mean();
    EXPECT_NEAR(var, 1.0 / 12.0, 3e-4);
}

TEST(SampleEnsemble, SeedDeterminism)
{
    const auto dist = symmetric_distribution::uniform(0.5);
    const auto a = sample_ensemble(dist, 20, 3, 2, 77);
    const auto b = sample_ensemble(dist, 20, 3, 2, 77);
    const auto c = sample_ensemble(dist, 20, 3, 2, 78);
    EXPECT_EQ(a.W, b.W);
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_NE(a.W, c.W);
}

TEST(SampleEnsemble, RejectsBadDimsAndOverflow)
{
    const auto dist = symmetric_distribution::uniform(0.5);
    EXPECT_THROW(sample_ensemble(dist, 0, 1, 1, 0), std::invalid_argument);
    EXPECT_THROW(sample_ensemble(dist, 1, 0, 1, 0), std::invalid_argument);
    const std::size_t huge = std::numeric_limits<std::size_t>::max() / 2;
    EXPECT_THROW(sample_ensemble(dist, huge, 2, 2, 0), std::overflow_error);
}

TEST(SampleEnsemble, SerializationRoundTripIsBitExact)
{
    const auto ens = sample_ensemble(symmetric_distribution::rademacher_mixture({0.25, 1.0}, {0.5, 0.5}), 17, 2, 2, 9);
    const auto path = (std::filesystem::temp_directory_path() / "reslab_ensemble_roundtrip.json").string();
    save_ensemble(ens, path);
    const auto back = load_ensemble(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.W, ens.W);
    EXPECT_EQ(back.b, ens.b);
    EXPECT_EQ(back.seed, ens.seed);
    EXPECT_EQ(back.source, ens.source);
    EXPECT_EQ(to_json(back).dump(), to_json(ens).dump());
}

TEST(SampleEnsemble, LoadRejectsForeignDocuments)
{
    auto j = to_json(sample_ensemble(symmetric_distribution::uniform(0.5), 2, 1, 1, 0));
    auto bad_rng = j;
    bad_rng["rng"] = "mt19937";
    EXPECT_THROW(ensemble_from_json(bad_rng), std::runtime_error);
    auto bad_version = j;
    bad_version["version"] = 99;
    EXPECT_THROW(ensemble_from_json(bad_version), std::runtime_error);
    auto outside = j;
    outside["W"][0] = 0.75;
    EXPECT_THROW(ensemble_from_json(outside), std::runtime_error);
}
