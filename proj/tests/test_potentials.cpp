#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpcheck/potentials.hpp"

using namespace gpcheck;

namespace {

PotentialSpec canonical() { return PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.005, 0.5); }

// Cubes met by a closed ball, counted by clamping the centre into each candidate cube.
int cubes_met_direct(double b1, double b2, int sweep) {
    const double s = b1 / std::sqrt(3.0);
    const long reach = long(std::ceil(b2 / s)) + 2;
    int best = 0;
    for (int i = 0; i <= sweep; ++i)
        for (int j = 0; j <= sweep; ++j)
            for (int k = 0; k <= sweep; ++k) {
                const double c[3] = {s * i / sweep, s * j / sweep, s * k / sweep};
                int count = 0;
                for (long x = -reach; x <= reach; ++x)
                    for (long y = -reach; y <= reach; ++y)
                        for (long z = -reach; z <= reach; ++z) {
                            const long idx[3] = {x, y, z};
                            double d2 = 0.0;
                            for (int a = 0; a < 3; ++a) {
                                const double lo = double(idx[a]) * s, hi = lo + s;
                                const double q = std::clamp(c[a], lo, hi) - c[a];
                                d2 += q * q;
                            }
                            if (d2 <= b2 * b2) ++count;
                        }
                best = std::max(best, count);
            }
    return best;
}

} // namespace

TEST(RadialPotential, AlgebraIsPointwise) {
    const auto p = RadialPotential::piecewise_linear(std::vector<double>{0.0, 0.5, 1.0}, std::vector<double>{3.0, 1.0, 2.0});
    const auto q = RadialPotential::step(0.25, 1.5, 0.7);
    const auto d = p - 2.0 * q;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double r = u(rng);
        EXPECT_NEAR(d(r), p(r) - 2.0 * q(r), 1e-14) << "r = " << r;
    }
    EXPECT_DOUBLE_EQ(d.support_radius(), 1.5);
}

TEST(RadialPotential, RejectsOverlapAndBadSegments) {
    EXPECT_THROW(RadialPotential({{0.0, 1.0, 1.0, 1.0}, {0.5, 2.0, 1.0, 1.0}}), ParameterError);
    EXPECT_THROW(RadialPotential::step(1.0, 1.0, 2.0), ParameterError);
    EXPECT_THROW(RadialPotential::piecewise_constant(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 2.0}),
                 ParameterError);
}

TEST(PotentialSpec, RejectsInconsistentRadii) {
    EXPECT_THROW(PotentialSpec::square(1.5, 1.0, 2.0, 10.0, 0.1, 0.5), ParameterError);
    EXPECT_THROW(PotentialSpec::square(1.0, 1.0, 0.9, 10.0, 0.1, 0.5), ParameterError);
    EXPECT_THROW(PotentialSpec::square(1.0, 1.0, 2.0, 10.0, 0.1, 1.0), ParameterError);
}

TEST(ScaledPotential, PointwiseAndIntegralScaling) {
    const auto V = canonical().potential();
    const double N = 50.0, beta = 0.6;
    const auto VN = scaled_potential(V, N, beta);
    for (double r : {0.001, 0.01, 0.02, 0.024}) EXPECT_NEAR(VN(r), std::pow(N, -1.0 + 3.0 * beta) * V(std::pow(N, beta) * r), 1e-9);
    // int V_N d^3x = N^{-1} int V d^3x
    const double full = V.integral(0.0, V.support_radius(), 2);
    const double scaled = VN.integral(0.0, VN.support_radius(), 2);
    EXPECT_NEAR(scaled, full / N, 1e-12 * std::abs(full));
    EXPECT_THROW(scaled_potential(V, 0.5, 0.5), DomainError);
}

TEST(CoveringNumber, MatchesDirectCount) {
    for (auto [b1, b2] : {std::pair{1.0, 0.3}, {1.0, 1.0}, {1.0, 1.25}, {0.8, 1.5}}) {
        EXPECT_EQ(covering_number(b1, b2, 8), cubes_met_direct(b1, b2, 8)) << b1 << " " << b2;
    }
}

TEST(CoveringNumber, SmallBallMeetsEightCubesAtACorner) { EXPECT_EQ(covering_number(1.0, 1e-6), 8); }

TEST(CoveringNumber, MonotoneInRadius) {
    int prev = 0;
    for (double b2 = 0.2; b2 < 3.0; b2 += 0.2) {
        const int n = covering_number(1.0, b2, 8);
        EXPECT_GE(n, prev);
        prev = n;
    }
}

TEST(Validation, CanonicalSpecFrozenValues) {
    const auto rep = validate_assumption(canonical());
    EXPECT_EQ(rep.n1, 110);
    EXPECT_EQ(rep.n2, 1640);
    EXPECT_TRUE(rep.core_check);
    EXPECT_TRUE(rep.sign_structure_check);
    EXPECT_TRUE(rep.lambda_ratio_check);
    EXPECT_NEAR(rep.er_infimum, 53.8818667, 1e-6);
    EXPECT_TRUE(rep.overall);
    EXPECT_DOUBLE_EQ(rep.largest_passing_epsilon, 0.93);
}

TEST(Validation, DeepWellIsRejected) {
    const auto rep = validate_assumption(PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 100.0, 0.5));
    EXPECT_FALSE(rep.lambda_ratio_check);
    EXPECT_FALSE(rep.er_check);
    EXPECT_FALSE(rep.overall);
}

TEST(Validation, InfimumDecreasesWithWellDepth) {
    const auto base = canonical();
    double prev = er_infimum(base);
    for (double c : {2.0, 4.0, 8.0}) {
        const double v = er_infimum(base.with_well_scaled(c));
        EXPECT_LT(v, prev) << "scale " << c;
        prev = v;
    }
}

TEST(Validation, InfimumWithoutWellIsPositive) {
    EXPECT_GT(er_infimum(PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.0, 0.5)), 0.0);
}
