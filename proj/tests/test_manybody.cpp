#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpcheck/manybody.hpp"

using namespace gpcheck;

namespace {

PotentialSpec canonical() { return PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.005, 0.5); }

// (phi x chi + chi x phi)/sqrt(2) for orthonormal phi, chi.
ManyBodyState symmetric_pair(const GPField& phi, const GPField& chi) {
    const std::size_t M = phi.grid.points();
    std::vector<cd> a(M * M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
            a[i * M + j] = (phi.values[i] * chi.values[j] + chi.values[i] * phi.values[j]) / std::sqrt(2.0);
    return ManyBodyState(phi.grid, 2, std::move(a), true);
}

cd inner(const std::vector<cd>& x, const std::vector<cd>& y) {
    cd s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
    return s;
}

} // namespace

TEST(ManyBody, CapabilityLimits) {
    EXPECT_THROW(check_manybody_capability(PeriodicGrid(3, 16, 10.0), 3), CapabilityError);
    EXPECT_THROW(check_manybody_capability(PeriodicGrid(3, 32, 10.0), 2), CapabilityError);
    EXPECT_THROW(check_manybody_capability(PeriodicGrid(2, 8, 10.0), 2), CapabilityError);
    EXPECT_NO_THROW(check_manybody_capability(PeriodicGrid(3, 16, 10.0), 2));
    EXPECT_NO_THROW(check_manybody_capability(PeriodicGrid(1, 16, 10.0), 4));
}

TEST(ManyBody, ProductStateIsCondensed) {
    const PeriodicGrid g(1, 16, 8.0);
    const auto phi = GPField::gaussian(g, 1.0);
    const auto s = ManyBodyState::product(phi, 3);
    EXPECT_NEAR(s.norm(), 1.0, 1e-13);
    const auto pk = pk_spectrum(s, phi);
    EXPECT_NEAR(pk[0], 1.0, 1e-13);
    for (std::size_t k = 1; k < pk.size(); ++k) EXPECT_NEAR(pk[k], 0.0, 1e-13);
    EXPECT_NEAR(trace_distance(s, phi), 0.0, 1e-10);
}

TEST(ManyBody, OneExcitationOracle) {
    const PeriodicGrid g(3, 4, 4.0);
    const int m0[] = {0, 0, 0}, m1[] = {1, 0, 0};
    const auto phi = GPField::plane_wave(g, m0), chi = GPField::plane_wave(g, m1);
    const auto s = symmetric_pair(phi, chi);
    EXPECT_NEAR(s.norm(), 1.0, 1e-13);
    EXPECT_LT(s.symmetry_deviation(), 1e-14);
    const auto pk = pk_spectrum(s, phi);
    EXPECT_NEAR(pk[0], 0.0, 1e-13);
    EXPECT_NEAR(pk[1], 1.0, 1e-13);
    EXPECT_NEAR(pk[2], 0.0, 1e-13);
    // gamma - |phi><phi| = (|chi><chi| - |phi><phi|)/2 has trace norm 1
    EXPECT_NEAR(trace_distance(s, phi), 1.0, 1e-10);
    EXPECT_NEAR(weighted_expectation(s, phi, CountingWeight::n_hat(2)), std::sqrt(0.5), 1e-13);
    EXPECT_NEAR(q1_expectation(s, phi), 0.5, 1e-13);
}

TEST(ManyBody, ReducedDensityHasUnitTrace) {
    std::mt19937_64 rng(5);
    const PeriodicGrid g(1, 10, 6.0);
    const auto s = ManyBodyState::random_symmetric(g, 3, rng);
    const auto rd = reduced_density(s);
    EXPECT_NEAR(rd.trace, 1.0, 1e-12);
    EXPECT_LT(rd.symmetry_deviation, 1e-12);
    EXPECT_TRUE(rd.kernel.isApprox(rd.kernel.adjoint(), 1e-12));
}

TEST(ManyBody, HamiltonianIsHermitian) {
    std::mt19937_64 rng(9);
    const PeriodicGrid g(1, 12, 6.0);
    const auto H = ManyBodyHamiltonian::from_spec(g, 3, canonical(), ExternalPotential::capped_harmonic(0.5, 2.0));
    const auto x = ManyBodyState::random_symmetric(g, 3, rng), y = ManyBodyState::random_symmetric(g, 3, rng);
    const auto Hx = apply_hamiltonian(x, H), Hy = apply_hamiltonian(y, H);
    const cd lhs = inner(x.amp, Hy.amp), rhs = inner(Hx.amp, y.amp);
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
}

TEST(ManyBody, EvolutionConservesNormAndEnergy) {
    std::mt19937_64 rng(2);
    const PeriodicGrid g(1, 12, 6.0);
    auto H = ManyBodyHamiltonian::from_spec(g, 3, canonical(), ExternalPotential::capped_harmonic(0.5, 2.0));
    auto s = ManyBodyState::random_symmetric(g, 3, rng);
    const double e0 = many_body_energy(s, H);
    evolve(s, H, 1e-3, 20);
    EXPECT_NEAR(s.norm(), 1.0, 1e-10);
    EXPECT_NEAR(many_body_energy(s, H), e0, 1e-8 * std::abs(e0));
    EXPECT_LT(s.symmetry_deviation(), 1e-10);
}

TEST(ManyBody, FreeProductStaysProduct) {
    const PeriodicGrid g(1, 16, 8.0);
    const int N = 3;
    auto H = ManyBodyHamiltonian(g, N, RadialPotential{}, ExternalPotential::zero());
    const double c[] = {0.5}, k[] = {1.0};
    GPField phi = GPField::gaussian(g, 0.8, c, k);
    auto s = ManyBodyState::product(phi, N);
    evolve(s, H, 2e-3, 10);
    GPSolver gp(g);
    for (int i = 0; i < 10; ++i) gp.step(phi, 0.0, ExternalPotential::zero(), 2e-3);
    EXPECT_LT(std::abs(trace_distance(s, phi)), 1e-9);
    const auto pk = pk_spectrum(s, phi);
    EXPECT_NEAR(pk[0], 1.0, 1e-10);
}

TEST(ManyBody, CountingWeightsAreConsistent) {
    std::mt19937_64 rng(4);
    const PeriodicGrid g(1, 8, 6.0);
    const auto phi = GPField::gaussian(g, 1.0);
    const auto s = ManyBodyState::random_symmetric(g, 4, rng);
    const auto pk = pk_spectrum(s, phi);
    double mean = 0.0, total = 0.0;
    for (std::size_t k = 0; k < pk.size(); ++k) {
        EXPECT_GE(pk[k], -1e-14);
        total += pk[k];
        mean += pk[k] * double(k) / 4.0;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(weighted_expectation(s, phi, CountingWeight::fraction(4)), mean, 1e-12);
    EXPECT_NEAR(weighted_expectation(s, phi, CountingWeight::constant(4)), 1.0, 1e-12);
    EXPECT_THROW(CountingWeight::special(4, 0.7), ParameterError);
}

TEST(ManyBody, EnergyDecompositionClosesOnProduct) {
    const PeriodicGrid g(3, 6, 8.0);
    const auto spec = canonical();
    const auto H = ManyBodyHamiltonian::from_spec(g, 2, spec, ExternalPotential::zero());
    const auto phi = GPField::gaussian(g, 1.0);
    const auto ms = find_minimal_R(spec, 2.0, 0.5);
    const auto d = energy_decomposition(ManyBodyState::product(phi, 2), phi, H, ms, spec.epsilon(), indicator_radius(2.0));
    EXPECT_LT(std::abs(d.residual), 1e-8 * d.scale);
    EXPECT_NEAR(d.many_body_energy, many_body_energy(ManyBodyState::product(phi, 2), H), 1e-10 * d.scale);
}

TEST(ManyBody, ConditionFourIsNonnegative) {
    std::mt19937_64 rng(8);
    const PeriodicGrid g(1, 16, 6.0);
    const auto phi = GPField::gaussian(g, 1.0);
    for (int i = 0; i < 5; ++i) {
        const auto s = ManyBodyState::random_symmetric(g, 3, rng);
        EXPECT_GE(gradient_condition_lhs(s, phi, indicator_radius(3.0)), 0.0);
    }
    // q_1 annihilates the product, leaving only the localised full-gradient term
    const auto prod = ManyBodyState::product(phi, 3);
    const ManyBodyOps ops(g, 3);
    const auto m = indicator_masks(g, 3, 0, indicator_radius(3.0));
    const double local = masked_gradient_norm2(ops, prod.amp, 0, &m.Bbar, prod.measure());
    EXPECT_NEAR(gradient_condition_lhs(prod, phi, ops, m), local, 1e-13 * local);
}
