#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gpcheck/scattering.hpp"

using namespace gpcheck;

namespace {

PotentialSpec canonical() { return PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.005, 0.5); }

double barrier_closed_form(double r2, double height) {
    const double k = std::sqrt(height / 2.0);
    return r2 - std::tanh(k * r2) / k;
}

// Square well of depth w on [0, r2), no bound state: a = r2 - tan(q r2)/q.
double well_closed_form(double r2, double depth) {
    const double q = std::sqrt(depth / 2.0);
    return r2 - std::tan(q * r2) / q;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = double(x.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

class BarrierClosedForm : public ::testing::TestWithParam<std::pair<double, double>> {};

TEST_P(BarrierClosedForm, TailAndIntegralAgree) {
    const auto [r2, h] = GetParam();
    const auto sc = solve_zero_energy(RadialPotential::step(0.0, r2, h));
    const double exact = barrier_closed_form(r2, h);
    EXPECT_NEAR(sc.a, exact, 1e-8 * exact);
    EXPECT_NEAR(sc.a_integral, exact, 1e-8 * exact);
}

INSTANTIATE_TEST_SUITE_P(Heights, BarrierClosedForm,
                         ::testing::Values(std::pair{1.0, 0.5}, std::pair{1.0, 10.0}, std::pair{1.0, 100.0},
                                           std::pair{0.3, 1000.0}, std::pair{2.0, 40.0}));

TEST(Scattering, ShallowWellClosedForm) {
    const double r2 = 1.0, depth = 2.0; // q r2 = 1 < pi/2: no bound state
    const auto sc = solve_zero_energy(-1.0 * RadialPotential::step(0.0, r2, depth));
    const double exact = well_closed_form(r2, depth);
    EXPECT_LT(exact, 0.0);
    EXPECT_NEAR(sc.a, exact, 1e-8 * std::abs(exact));
}

TEST(Scattering, WeakPotentialApproachesFirstOrder) {
    const auto V = RadialPotential::piecewise_linear(std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{1e-4, 2e-4, 0.0});
    const double born = 0.5 * V.integral(0.0, 2.0, 2);
    EXPECT_NEAR(scattering_length(V), born, 1e-3 * born);
}

TEST(Scattering, CanonicalFrozenValue) { EXPECT_NEAR(scattering_length(canonical().potential()), 0.8585312231144222, 1e-9); }

TEST(Scattering, ProfileIsMonotoneWithConsistentSlope) {
    const auto V = canonical().potential();
    const auto sc = solve_zero_energy(V);
    const auto rep = monotonicity_check(sc, V);
    EXPECT_TRUE(rep.monotone);
    EXPECT_GT(rep.points_compared, 100u);
    EXPECT_LT(rep.max_relative_error, 1e-3);
}

TEST(Scattering, LengthIncreasesWithBarrier) {
    double prev = 0.0;
    for (double h : {1.0, 10.0, 100.0, 1000.0}) {
        const double a = scattering_length(RadialPotential::step(0.0, 1.0, h));
        EXPECT_GT(a, prev);
        EXPECT_LT(a, 1.0);
        prev = a;
    }
}

class ModifiedProblem : public ::testing::TestWithParam<double> {};

TEST_P(ModifiedProblem, RootAndMatchingConstant) {
    const double N = GetParam(), beta = 0.5;
    const auto spec = canonical();
    const auto ms = find_minimal_R(spec, N, beta);
    EXPECT_GT(ms.R_beta, ms.rho);
    EXPECT_LE(ms.K_beta, 1.0);
    EXPECT_GE(ms.K_beta, 1.0 - ms.a / std::pow(N, 1.0 - beta));
    EXPECT_LE(std::abs(ms.s_at_root), 1e-10 * ms.s_scale);
    EXPECT_TRUE(ms.refinement_clean);
    EXPECT_NEAR(ms.f(ms.R_beta), 1.0, 1e-12);
    EXPECT_LE(std::abs(gauss_derivative(ms, ms.R_beta)) * ms.R_beta, 1e-8);
    const auto w = w_integrals(ms);
    EXPECT_NEAR(w.NVf, w.NWf, 1e-8 * w.NVf);
    const auto g = g_norms(ms);
    EXPECT_GE(g.Linf, 0.0);
    EXPECT_LE(g.Linf, 1.0);
}

INSTANTIATE_TEST_SUITE_P(Sizes, ModifiedProblem, ::testing::Values(1e2, 1e3, 1e4, 1e5));

TEST(ModifiedProblem, NormSlopesFollowRadiusScaling) {
    const std::vector<double> Ns{1e2, 1e3, 1e4, 1e5};
    std::vector<double> L1, L32, L2, gapW;
    const auto spec = canonical();
    const double target = 8.0 * std::numbers::pi * scattering_length(spec.potential());
    for (double N : Ns) {
        const auto ms = find_minimal_R(spec, N, 0.5);
        const auto g = g_norms(ms);
        L1.push_back(g.L1);
        L32.push_back(g.L3half);
        L2.push_back(g.L2);
        gapW.push_back(std::abs(w_integrals(ms).NW - target));
    }
    EXPECT_NEAR(log_slope(Ns, L1), -2.0, 0.1);
    EXPECT_NEAR(log_slope(Ns, L32), -1.5, 0.1);
    EXPECT_NEAR(log_slope(Ns, L2), -1.25, 0.1);
    EXPECT_NEAR(log_slope(Ns, gapW), -0.5, 0.1);
}

TEST(ModifiedProblem, PointwiseBoundConstantsFinite) {
    const auto spec = canonical();
    for (double N : {1e2, 1e4}) {
        const auto b = pointwise_g_bound(find_minimal_R(spec, N, 0.5), spec);
        EXPECT_TRUE(std::isfinite(b.C_inner));
        EXPECT_TRUE(std::isfinite(b.C_outer));
        EXPECT_GT(b.a_core, 0.0);
    }
}

TEST(ModifiedProblem, RejectsBadExponent) { EXPECT_ANY_THROW(find_minimal_R(canonical(), 100.0, 1.5)); }
