#ifndef GPCHECK_MANYBODY_HPP
#define GPCHECK_MANYBODY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gpcheck/error.hpp"
#include "gpcheck/fft.hpp"
#include "gpcheck/gp.hpp"
#include "gpcheck/grid.hpp"
#include "gpcheck/krylov.hpp"
#include "gpcheck/potentials.hpp"
#include "gpcheck/scattering.hpp"

namespace gpcheck {

// 24^6 amplitudes: N = 2 on a 24^3 grid.
inline constexpr std::size_t max_amplitudes = 191102976;

inline std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

inline void check_manybody_capability(const PeriodicGrid& g, int N) {
    if (N < 1) throw ParameterError("many-body: need at least one particle");
    if (g.dim == 3 && (N > 2 || g.n > 24)) throw CapabilityError("many-body: d = 3 supports N <= 2 with at most 24^3 points");
    if (g.dim == 1 && g.n > 64) throw CapabilityError("many-body: d = 1 supports at most 64 points");
    if (g.dim == 2) throw CapabilityError("many-body: d must be 1 or 3");
    const double total = std::pow(double(g.points()), N);
    if (total > double(max_amplitudes)) throw CapabilityError("many-body: tensor exceeds the amplitude budget");
}

struct ManyBodyState {
    PeriodicGrid grid;
    int N = 1;
    std::vector<cd> amp;
    double time = 0.0;
    bool symmetric = false;

    ManyBodyState() = default;
    ManyBodyState(PeriodicGrid g, int particles, std::vector<cd> a, bool sym, double t = 0.0)
        : grid(g), N(particles), amp(std::move(a)), time(t), symmetric(sym) {
        check_manybody_capability(grid, N);
        if (amp.size() != ipow(grid.points(), N)) throw DimensionError("many-body: amplitude count does not match grid^N");
    }

    std::size_t one_body() const { return grid.points(); }
    double measure() const { return std::pow(grid.cell_volume(), N); }
    double norm() const {
        double s = 0.0;
        for (const auto& z : amp) s += std::norm(z);
        return std::sqrt(s * measure());
    }
    void normalize() {
        const double n = norm();
        if (n == 0.0) throw DomainError("many-body: cannot normalise the zero state");
        for (auto& z : amp) z /= n;
    }

    // One-body index of every particle in configuration `flat` (particle 0 slowest).
    void config(std::size_t flat, std::size_t* idx) const {
        const std::size_t M = one_body();
        for (int p = N - 1; p >= 0; --p) {
            idx[p] = flat % M;
            flat /= M;
        }
    }

    static ManyBodyState product(const GPField& phi, int N) {
        check_manybody_capability(phi.grid, N);
        const std::size_t M = phi.grid.points(), total = ipow(M, N);
        std::vector<cd> a(total);
        std::vector<std::size_t> idx(static_cast<std::size_t>(N));
        ManyBodyState s;
        s.grid = phi.grid;
        s.N = N;
        for (std::size_t f = 0; f < total; ++f) {
            s.config(f, idx.data());
            cd v = 1.0;
            for (int p = 0; p < N; ++p) v *= phi.values[idx[std::size_t(p)]];
            a[f] = v;
        }
        s.amp = std::move(a);
        s.symmetric = true;
        s.time = phi.time;
        return s;
    }

    // Apply the particle permutation `perm` (new particle p takes old particle perm[p]).
    std::vector<cd> permuted(const std::vector<int>& perm) const {
        const std::size_t M = one_body();
        std::vector<cd> out(amp.size());
        std::vector<std::size_t> idx(static_cast<std::size_t>(N));
        for (std::size_t f = 0; f < amp.size(); ++f) {
            config(f, idx.data());
            std::size_t g = 0;
            for (int p = 0; p < N; ++p) g = g * M + idx[std::size_t(perm[std::size_t(p)])];
            out[g] = amp[f];
        }
        return out;
    }

    void symmetrize() {
        std::vector<int> perm(static_cast<std::size_t>(N));
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<cd> acc(amp.size(), 0.0);
        int count = 0;
        do {
            const auto p = permuted(perm);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (auto& z : acc) z /= double(count);
        amp = std::move(acc);
        symmetric = true;
    }

    // max over transpositions (0 k) of |Psi - P Psi|_inf / |Psi|_inf
    double symmetry_deviation() const {
        double mx = 0.0, dev = 0.0;
        for (const auto& z : amp) mx = std::max(mx, std::abs(z));
        for (int k = 1; k < N; ++k) {
            std::vector<int> perm(static_cast<std::size_t>(N));
            std::iota(perm.begin(), perm.end(), 0);
            std::swap(perm[0], perm[std::size_t(k)]);
            const auto p = permuted(perm);
            for (std::size_t i = 0; i < amp.size(); ++i) dev = std::max(dev, std::abs(amp[i] - p[i]));
        }
        return mx > 0.0 ? dev / mx : 0.0;
    }

    static ManyBodyState random_symmetric(const PeriodicGrid& g, int N, std::mt19937_64& rng) {
        check_manybody_capability(g, N);
        std::normal_distribution<double> nd;
        std::vector<cd> a(ipow(g.points(), N));
        for (auto& z : a) z = cd(nd(rng), nd(rng));
        ManyBodyState s(g, N, std::move(a), false);
        s.symmetrize();
        s.normalize();
        return s;
    }
};

// FFT plans for the full tensor and for the axes of each particle.
class ManyBodyOps {
public:
    ManyBodyOps(const PeriodicGrid& g, int N) : grid_(g), N_(N) {
        check_manybody_capability(g, N);
        const std::vector<int> ext(std::size_t(N * g.dim), g.n);
        std::vector<int> all(ext.size());
        std::iota(all.begin(), all.end(), 0);
        full_ = std::make_unique<FftPlan>(ext, all, dummy_);
        for (int p = 0; p < N; ++p) {
            std::vector<int> ax;
            for (int a = 0; a < g.dim; ++a) ax.push_back(p * g.dim + a);
            particle_.push_back(std::make_unique<FftPlan>(ext, ax, dummy_));
        }
        k_.resize(std::size_t(g.n));
        for (int i = 0; i < g.n; ++i) k_[std::size_t(i)] = g.wavenumber(i);
    }

    const PeriodicGrid& grid() const { return grid_; }
    int particles() const { return N_; }
    const FftPlan& full() const { return *full_; }
    const FftPlan& particle(int p) const { return *particle_[std::size_t(p)]; }
    double wavenumber(int i) const { return k_[std::size_t(i)]; }

    // Digit of tensor axis `axis` (0 slowest) in a flat index.
    int axis_digit(std::size_t flat, int axis) const {
        const int rank = N_ * grid_.dim;
        for (int a = rank - 1; a > axis; --a) flat /= std::size_t(grid_.n);
        return int(flat % std::size_t(grid_.n));
    }

    // Calls visit(axis, component) for each spatial derivative of `x` along particle p.
    template <class Visit>
    void for_each_derivative(const std::vector<cd>& x, int p, Visit&& visit) const {
        std::vector<cd> hat = x;
        particle(p).forward(hat.data());
        const double inv = 1.0 / double(particle(p).transform_size());
        std::vector<cd> c(x.size());
        for (int a = 0; a < grid_.dim; ++a) {
            const int axis = p * grid_.dim + a;
            std::size_t stride = 1;
            for (int b = N_ * grid_.dim - 1; b > axis; --b) stride *= std::size_t(grid_.n);
            const std::size_t n = std::size_t(grid_.n);
            for (std::size_t i = 0; i < x.size(); ++i) c[i] = cd(0.0, k_[(i / stride) % n] * inv) * hat[i];
            particle(p).backward(c.data());
            visit(a, c);
        }
    }

private:
    PeriodicGrid grid_;
    int N_;
    std::complex<double> dummy_[2]{};
    std::unique_ptr<FftPlan> full_;
    std::vector<std::unique_ptr<FftPlan>> particle_;
    std::vector<double> k_;
};

// Pointwise samples of a radial function on minimum-image displacements.
inline std::vector<double> pair_table(const PeriodicGrid& g, const RadialPotential& v) {
    std::vector<double> t(g.points());
    for (std::size_t d = 0; d < t.size(); ++d) t[d] = v(g.displacement_length(d));
    return t;
}

// H = sum_j -Delta_j + sum_{i<j} V_N(x_i - x_j) + sum_j A_t(x_j) on the product grid,
// with V_N(x) = N^2 V(N x) and N the scaling parameter (defaults to the particle count).
class ManyBodyHamiltonian {
public:
    ManyBodyHamiltonian(const PeriodicGrid& g, int particles, RadialPotential pair, ExternalPotential A)
        : ops_(g, particles), pair_(std::move(pair)), A_(std::move(A)) {
        table_ = pair_table(g, pair_);
        const std::size_t total = ipow(g.points(), particles);
        kin_.resize(total);
        std::vector<double> k2(g.points());
        for (std::size_t i = 0; i < k2.size(); ++i) k2[i] = g.k2(i);
        std::vector<std::size_t> idx(static_cast<std::size_t>(particles));
        for (std::size_t f = 0; f < total; ++f) {
            config(f, idx.data());
            double s = 0.0;
            for (int p = 0; p < particles; ++p) s += k2[idx[std::size_t(p)]];
            kin_[f] = s;
        }
        set_time(0.0, true);
    }

    static ManyBodyHamiltonian from_spec(const PeriodicGrid& g, int particles, const PotentialSpec& spec,
                                         const ExternalPotential& A, double scale_N = 0.0) {
        const double Ns = scale_N > 0.0 ? scale_N : double(particles);
        return ManyBodyHamiltonian(g, particles, scaled_potential(spec.potential(), Ns, 1.0), A);
    }

    const PeriodicGrid& grid() const { return ops_.grid(); }
    int particles() const { return ops_.particles(); }
    const ManyBodyOps& ops() const { return ops_; }
    const std::vector<double>& pair_values() const { return table_; }
    const RadialPotential& pair_potential() const { return pair_; }
    const ExternalPotential& external() const { return A_; }

    // Rebuild the multiplicative part for time t (no-op for static A unless forced).
    void set_time(double t, bool force = false) {
        if (!force && A_.is_static()) return;
        const auto& g = grid();
        const int N = particles();
        const auto A = A_.sample(g, t);
        const std::size_t total = kin_.size();
        diag_.assign(total, 0.0);
        std::vector<std::size_t> idx(static_cast<std::size_t>(N));
        for (std::size_t f = 0; f < total; ++f) {
            config(f, idx.data());
            double s = 0.0;
            for (int p = 0; p < N; ++p) {
                s += A[idx[std::size_t(p)]];
                for (int q = p + 1; q < N; ++q) s += table_[g.displacement_index(idx[std::size_t(p)], idx[std::size_t(q)])];
            }
            diag_[f] = s;
        }
        time_ = t;
    }
    double time() const { return time_; }

    void apply(const cd* in, cd* out) const {
        const std::size_t n = kin_.size();
        std::copy(in, in + n, out);
        ops_.full().forward(out);
        const double inv = 1.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) out[i] *= kin_[i] * inv;
        ops_.full().backward(out);
        for (std::size_t i = 0; i < n; ++i) out[i] += diag_[i] * in[i];
    }

    double spectral_bound() const {
        double k = 0.0, d = 0.0;
        for (double x : kin_) k = std::max(k, x);
        for (double x : diag_) d = std::max(d, std::abs(x));
        return k + d;
    }

    void check(const ManyBodyState& s) const {
        require_same_grid(s.grid, grid());
        if (s.N != particles()) throw DimensionError("hamiltonian: particle count mismatch");
    }

    // <Psi, H Psi> with the product-grid measure.
    double expectation(const ManyBodyState& s) const {
        check(s);
        std::vector<cd> h(s.amp.size());
        apply(s.amp.data(), h.data());
        cd acc = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) acc += std::conj(s.amp[i]) * h[i];
        return acc.real() * s.measure();
    }

private:
    void config(std::size_t flat, std::size_t* idx) const {
        const std::size_t M = grid().points();
        for (int p = particles() - 1; p >= 0; --p) {
            idx[p] = flat % M;
            flat /= M;
        }
    }

    ManyBodyOps ops_;
    RadialPotential pair_;
    ExternalPotential A_;
    std::vector<double> table_, kin_, diag_;
    double time_ = 0.0;
};

inline ManyBodyState apply_hamiltonian(const ManyBodyState& s, const ManyBodyHamiltonian& H) {
    H.check(s);
    ManyBodyState out = s;
    H.apply(s.amp.data(), out.amp.data());
    out.symmetric = false;
    return out;
}

inline double many_body_energy(const ManyBodyState& s, const ManyBodyHamiltonian& H) {
    return H.expectation(s) / double(s.N);
}

struct EvolveStats {
    int max_order = 0;
    double max_error_estimate = 0.0;
};

// `steps` Lanczos steps of size dt; A is evaluated at each step midpoint.
inline EvolveStats evolve(ManyBodyState& s, ManyBodyHamiltonian& H, double dt, std::size_t steps,
                          const KrylovOptions& opt = {}) {
    H.check(s);
    EvolveStats st;
    const MatVec mv = [&H](const cd* in, cd* out) { H.apply(in, out); };
    for (std::size_t k = 0; k < steps; ++k) {
        H.set_time(s.time + 0.5 * dt);
        const auto ks = krylov_expm(mv, s.amp, dt, opt);
        st.max_order = std::max(st.max_order, ks.order);
        st.max_error_estimate = std::max(st.max_error_estimate, ks.error_estimate);
        s.time += dt;
    }
    return st;
}

// ---------------------------------------------------------------------------
// one-particle reduced density

struct ReducedDensity {
    Eigen::MatrixXcd kernel; // gamma(x_a, x_b) times the cell volume
    double trace = 0.0;
    double symmetry_deviation = 0.0; // |gamma_first - gamma_last|_max for symmetric states
};

inline constexpr std::size_t dense_density_limit = 1024;

namespace detail {

inline Eigen::MatrixXcd density_for_particle(const ManyBodyState& s, int j) {
    const std::size_t M = s.one_body();
    const std::size_t outer = ipow(M, j), inner = ipow(M, s.N - 1 - j);
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(Eigen::Index(M), Eigen::Index(M));
    using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (std::size_t o = 0; o < outer; ++o) {
        Eigen::Map<const RowMat> B(s.amp.data() + o * M * inner, Eigen::Index(M), Eigen::Index(inner));
        G.noalias() += B * B.adjoint();
    }
    return G * s.measure();
}

} // namespace detail

inline ReducedDensity reduced_density(const ManyBodyState& s, int particle = 0) {
    if (s.one_body() > dense_density_limit)
        throw CapabilityError("reduced density: one-body grid too large for a dense kernel");
    if (particle < 0 || particle >= s.N) throw DomainError("reduced density: particle index out of range");
    ReducedDensity r;
    r.kernel = detail::density_for_particle(s, particle);
    r.trace = r.kernel.trace().real();
    if (s.symmetric && s.N > 1) {
        const int other = particle == s.N - 1 ? 0 : s.N - 1;
        r.symmetry_deviation = (r.kernel - detail::density_for_particle(s, other)).cwiseAbs().maxCoeff();
    }
    return r;
}

inline Eigen::MatrixXcd projector_kernel(const GPField& phi) {
    Eigen::Map<const Eigen::VectorXcd> v(phi.values.data(), Eigen::Index(phi.values.size()));
    return phi.grid.cell_volume() * (v * v.adjoint());
}

inline double trace_distance(const Eigen::MatrixXcd& gamma, const GPField& phi) {
    if (gamma.rows() != Eigen::Index(phi.values.size())) throw DimensionError("trace distance: grid mismatch");
    Eigen::MatrixXcd D = gamma - projector_kernel(phi);
    D = 0.5 * (D + D.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const ReducedDensity& g, const GPField& phi) { return trace_distance(g.kernel, phi); }

// Tr|gamma - |phi><phi|| straight from the state. Above the dense limit the
// difference is applied matrix-free: it has at most one negative eigenvalue,
// so Tr|D| = Tr D - 2 min(lambda_min, 0) and Lanczos supplies lambda_min.
inline double trace_distance(const ManyBodyState& s, const GPField& phi) {
    require_same_grid(s.grid, phi.grid);
    const std::size_t M = s.one_body();
    if (M <= dense_density_limit) return trace_distance(detail::density_for_particle(s, 0), phi);
    const std::size_t R = s.amp.size() / M;
    using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> P(s.amp.data(), Eigen::Index(M), Eigen::Index(R));
    Eigen::Map<const Eigen::VectorXcd> f(phi.values.data(), Eigen::Index(M));
    const double mu = s.measure(), dv = phi.grid.cell_volume();
    Eigen::VectorXcd tmp(static_cast<Eigen::Index>(R));
    const MatVec op = [&](const cd* in, cd* out) {
        Eigen::Map<const Eigen::VectorXcd> x(in, Eigen::Index(M));
        Eigen::Map<Eigen::VectorXcd> y(out, Eigen::Index(M));
        tmp.noalias() = P.adjoint() * x;
        y.noalias() = mu * (P * tmp);
        y -= dv * f * f.dot(x);
    };
    const double n2 = s.norm(), p2 = phi.norm();
    const double tr = n2 * n2 - p2 * p2;
    const double lmin = lanczos_min_eigenvalue(op, phi.values);
    return tr - 2.0 * std::min(lmin, 0.0);
}

// ---------------------------------------------------------------------------
// counting projectors

enum class Projector { p, q };

// <phi|_j Psi : contraction of particle j against phi (with the cell volume).
inline std::vector<cd> contract(const std::vector<cd>& x, std::size_t M, int particles, int j, const GPField& phi) {
    const std::size_t outer = ipow(M, j), inner = ipow(M, particles - 1 - j);
    const double dv = phi.grid.cell_volume();
    std::vector<cd> out(outer * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < M; ++a) {
            const cd w = std::conj(phi.values[a]) * dv;
            const cd* src = x.data() + (o * M + a) * inner;
            cd* dst = out.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
        }
    return out;
}

inline ManyBodyState pq_project(const ManyBodyState& s, const GPField& phi, int j, Projector which) {
    require_same_grid(s.grid, phi.grid);
    if (j < 0 || j >= s.N) throw DomainError("projector: particle index out of range");
    const std::size_t M = s.one_body();
    const auto c = contract(s.amp, M, s.N, j, phi);
    const std::size_t outer = ipow(M, j), inner = ipow(M, s.N - 1 - j);
    ManyBodyState out = s;
    out.symmetric = false;
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < M; ++a)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t f = (o * M + a) * inner + i;
                const cd pv = phi.values[a] * c[o * inner + i];
                out.amp[f] = which == Projector::p ? pv : s.amp[f] - pv;
            }
    return out;
}

inline constexpr int max_counting_particles = 12;

// <Psi, P_k Psi> for k = 0..N. With g(X) = |<phi^{(x)X}| Psi|^2 for particle
// subsets X, inclusion-exclusion over q = 1 - p gives
//   <P_k> = sum_{|S|=k} sum_{U subset S} (-1)^{|U|} g(S^c u U).
inline std::vector<double> pk_spectrum(const ManyBodyState& s, const GPField& phi) {
    require_same_grid(s.grid, phi.grid);
    const int N = s.N;
    if (N > max_counting_particles) throw CapabilityError("pk spectrum: more than 12 particles");
    const std::size_t M = s.one_body();
    const unsigned full = (1u << N) - 1u;
    std::vector<double> g(full + 1, 0.0);
    // contracting the highest particle of X last keeps the positions of the others fixed
    std::vector<std::vector<cd>> cache(full + 1);
    for (unsigned X = 0; X <= full; ++X) {
        const std::vector<cd>* src = &s.amp;
        if (X != 0) {
            const int hi = 31 - __builtin_clz(X);
            const unsigned parent = X & ~(1u << hi);
            const int removed = __builtin_popcount(parent);
            cache[X] = contract(parent ? cache[parent] : s.amp, M, N - removed, hi - removed, phi);
            src = &cache[X];
        }
        double n2 = 0.0;
        for (const auto& z : *src) n2 += std::norm(z);
        g[X] = n2 * std::pow(s.grid.cell_volume(), N - __builtin_popcount(X));
    }
    std::vector<double> pk(std::size_t(N + 1), 0.0);
    for (unsigned S = 0; S <= full; ++S) {
        const unsigned comp = full & ~S;
        double v = 0.0;
        for (unsigned U = S;; U = (U - 1) & S) {
            v += (__builtin_popcount(U) % 2 ? -1.0 : 1.0) * g[comp | U];
            if (U == 0) break;
        }
        pk[std::size_t(__builtin_popcount(S))] += v;
    }
    return pk;
}

// <Psi, q_1 Psi>
inline double q1_expectation(const ManyBodyState& s, const GPField& phi) {
    const auto c = contract(s.amp, s.one_body(), s.N, 0, phi);
    double n2 = 0.0;
    for (const auto& z : c) n2 += std::norm(z);
    const double nn = s.norm();
    return nn * nn - n2 * std::pow(s.grid.cell_volume(), s.N - 1);
}

struct CountingWeight {
    std::vector<double> m; // m(0..N)
    double xi = 0.0;

    explicit CountingWeight(std::vector<double> w, double x = 0.0) : m(std::move(w)), xi(x) {
        for (double v : m)
            if (v < 0.0) throw ParameterError("counting weight: m(k) must be nonnegative");
    }
    static CountingWeight constant(int N, double c = 1.0) { return CountingWeight(std::vector<double>(std::size_t(N + 1), c)); }
    static CountingWeight fraction(int N) {
        std::vector<double> w(static_cast<std::size_t>(N + 1));
        for (int k = 0; k <= N; ++k) w[std::size_t(k)] = double(k) / N;
        return CountingWeight(std::move(w));
    }
    // n(k) = sqrt(k/N)
    static CountingWeight n_hat(int N) {
        std::vector<double> w(static_cast<std::size_t>(N + 1));
        for (int k = 0; k <= N; ++k) w[std::size_t(k)] = std::sqrt(double(k) / N);
        return CountingWeight(std::move(w));
    }
    // sqrt(k/N) for k >= N^{1-2 xi}, (N^{-1+xi} k + N^{-xi}) / 2 below.
    static CountingWeight special(int N, double xi) {
        if (!(xi > 0.0 && xi < 0.5)) throw ParameterError("counting weight: xi must lie in (0, 1/2)");
        std::vector<double> w(static_cast<std::size_t>(N + 1));
        const double threshold = std::pow(double(N), 1.0 - 2.0 * xi);
        for (int k = 0; k <= N; ++k)
            w[std::size_t(k)] = k >= threshold ? std::sqrt(double(k) / N)
                                               : 0.5 * (std::pow(double(N), -1.0 + xi) * k + std::pow(double(N), -xi));
        return CountingWeight(std::move(w), xi);
    }
};

inline double weighted_expectation(const ManyBodyState& s, const GPField& phi, const CountingWeight& w) {
    if (w.m.size() != std::size_t(s.N + 1)) throw DimensionError("counting weight: needs N+1 entries");
    const auto pk = pk_spectrum(s, phi);
    double v = 0.0;
    for (std::size_t k = 0; k < pk.size(); ++k) v += w.m[k] * pk[k];
    return v;
}

// ---------------------------------------------------------------------------
// configuration sets built from pair distances

inline double indicator_radius(double N, double exponent = 26.0 / 27.0) { return std::pow(N, -exponent); }

struct IndicatorMasks {
    std::vector<std::uint8_t> A, Abar, B, Bbar;
};

// Abar_j: some k != j within `radius` of x_j; Bbar_j: some pair k,l != j within
// `radius`. A_j, B_j are the complements. Open balls, minimum-image distances.
inline IndicatorMasks indicator_masks(const PeriodicGrid& g, int N, int j, double radius) {
    check_manybody_capability(g, N);
    if (j < 0 || j >= N) throw DomainError("indicator sets: particle index out of range");
    const std::size_t M = g.points(), total = ipow(M, N);
    std::vector<std::uint8_t> close(M);
    for (std::size_t d = 0; d < M; ++d) close[d] = g.displacement_length(d) < radius;
    IndicatorMasks m;
    m.A.resize(total);
    m.Abar.resize(total);
    m.B.resize(total);
    m.Bbar.resize(total);
    std::vector<std::size_t> idx(static_cast<std::size_t>(N));
    for (std::size_t f = 0; f < total; ++f) {
        std::size_t r = f;
        for (int p = N - 1; p >= 0; --p) {
            idx[std::size_t(p)] = r % M;
            r /= M;
        }
        bool abar = false, bbar = false;
        for (int k = 0; k < N; ++k)
            for (int l = k + 1; l < N; ++l) {
                if (!close[g.displacement_index(idx[std::size_t(k)], idx[std::size_t(l)])]) continue;
                if (k == j || l == j)
                    abar = true;
                else
                    bbar = true;
            }
        m.Abar[f] = abar;
        m.A[f] = !abar;
        m.Bbar[f] = bbar;
        m.B[f] = !bbar;
    }
    return m;
}

inline ManyBodyState apply_mask(const ManyBodyState& s, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != s.amp.size()) throw DimensionError("mask size does not match the state");
    ManyBodyState out = s;
    out.symmetric = false;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) out.amp[i] = 0.0;
    return out;
}

// sum over derivative components of |mask . d_{x_p} X|^2
inline double masked_gradient_norm2(const ManyBodyOps& ops, const std::vector<cd>& x, int p,
                                    const std::vector<std::uint8_t>* mask, double measure) {
    double s = 0.0;
    ops.for_each_derivative(x, p, [&](int, const std::vector<cd>& c) {
        for (std::size_t i = 0; i < c.size(); ++i)
            if (!mask || (*mask)[i]) s += std::norm(c[i]);
    });
    return s * measure;
}

// |1_{A_1} grad_1 q_1 Psi|^2 + |1_{Bbar_1} grad_1 Psi|^2
inline double gradient_condition_lhs(const ManyBodyState& s, const GPField& phi, const ManyBodyOps& ops, const IndicatorMasks& m) {
    require_same_grid(s.grid, phi.grid);
    const double mu = s.measure();
    const auto q = pq_project(s, phi, 0, Projector::q);
    double v = masked_gradient_norm2(ops, q.amp, 0, &m.A, mu);
    if (std::any_of(m.Bbar.begin(), m.Bbar.end(), [](std::uint8_t b) { return b != 0; }))
        v += masked_gradient_norm2(ops, s.amp, 0, &m.Bbar, mu);
    return v;
}

inline double gradient_condition_lhs(const ManyBodyState& s, const GPField& phi, double radius) {
    const ManyBodyOps ops(s.grid, s.N);
    return gradient_condition_lhs(s, phi, ops, indicator_masks(s.grid, s.N, 0, radius));
}

// ---------------------------------------------------------------------------
// energy difference split

struct EnergyTerm {
    std::string name;
    double value;
};

struct EnergyDecomposition {
    std::vector<EnergyTerm> terms;
    double many_body_energy = 0.0; // N^{-1} <Psi, H Psi>
    double gp_energy = 0.0;
    double sum = 0.0;
    double residual = 0.0;
    double scale = 0.0; // |E| + |E_GP| + 1

    double term(const std::string& n) const {
        for (const auto& t : terms)
            if (t.name == n) return t.value;
        throw ParameterError("energy decomposition: no term named " + n);
    }
};

// Splits E(Psi) - E_GP(phi) into localized pieces around particle 1:
//   eps_localized_gradient    eps (|1_A grad q Psi|^2 + |1_Bbar 1_Abar grad Psi|^2)
//   rest_localized_gradient   (1 - eps) (same)
//   mixed_gradient            2 Re <grad q Psi, 1_A grad p Psi>
//   b_localized_v_minus_w     |1_B 1_Abar grad Psi|^2 + 1/2 sum_j <1_B (V1 - W)(x1 - xj)>
//   w_pp                      (N-1)/2 <1_B pp W pp 1_B> - 4 pi a |phi|_4^4
//   w_cross                   (N-1) Re <1_B (1-pp) W pp 1_B>
//   w_qq                      (N-1)/2 <1_B (1-pp) W (1-pp) 1_B>
//   condensate_kinetic        |1_A grad p Psi|^2 - |grad phi|^2
//   external                  <A(x1)> - <phi, A phi>
//   bbar_localized_v          (N-1)/2 <1_Bbar V1(x1 - x2)>
// where pp = p_1 p_2, all gradients act on particle 1, and sets are those of particle 1.
inline EnergyDecomposition energy_decomposition(const ManyBodyState& s, const GPField& phi, const ManyBodyHamiltonian& H,
                                                const ModifiedScattering& ms, double eps, double radius) {
    H.check(s);
    require_same_grid(s.grid, phi.grid);
    const int N = s.N;
    if (N < 2 || N > 3) throw CapabilityError("energy decomposition: N must be 2 or 3");
    if (std::abs(ms.N - double(N)) > 1e-12 * double(N))
        throw ParameterError("energy decomposition: modified scattering built for a different N");
    const auto& g = s.grid;
    const std::size_t M = g.points(), total = s.amp.size();
    const double mu = s.measure(), dv = g.cell_volume();
    const auto masks = indicator_masks(g, N, 0, radius);
    const auto& ops = H.ops();

    // gradient pieces, accumulated component by component
    const auto q = pq_project(s, phi, 0, Projector::q);
    double A_q2 = 0.0, A_p2 = 0.0, mixed = 0.0, AbarBbar2 = 0.0, AbarB2 = 0.0;
    {
        std::vector<std::vector<cd>> dq;
        ops.for_each_derivative(q.amp, 0, [&](int, const std::vector<cd>& c) { dq.push_back(c); });
        int axis = 0;
        ops.for_each_derivative(s.amp, 0, [&](int, const std::vector<cd>& c) {
            const auto& cq = dq[std::size_t(axis++)];
            for (std::size_t i = 0; i < total; ++i) {
                const cd cp = c[i] - cq[i];
                if (masks.A[i]) {
                    A_q2 += std::norm(cq[i]);
                    A_p2 += std::norm(cp);
                    mixed += 2.0 * (std::conj(cq[i]) * cp).real();
                } else if (masks.Bbar[i]) {
                    AbarBbar2 += std::norm(c[i]);
                } else {
                    AbarB2 += std::norm(c[i]);
                }
            }
        });
    }
    A_q2 *= mu;
    A_p2 *= mu;
    mixed *= mu;
    AbarBbar2 *= mu;
    AbarB2 *= mu;

    const auto V1 = pair_table(g, ms.V1);
    const auto W = pair_table(g, ms.W);
    const auto Aext = H.external().sample(g, s.time);

    // multiplicative pieces
    double vw_B = 0.0, v_Bbar = 0.0, ext = 0.0;
    std::vector<std::size_t> idx(static_cast<std::size_t>(N));
    for (std::size_t f = 0; f < total; ++f) {
        s.config(f, idx.data());
        const double rho = std::norm(s.amp[f]);
        ext += Aext[idx[0]] * rho;
        if (masks.B[f]) {
            for (int j = 1; j < N; ++j) {
                const std::size_t d = g.displacement_index(idx[0], idx[std::size_t(j)]);
                vw_B += (V1[d] - W[d]) * rho;
            }
        } else {
            v_Bbar += V1[g.displacement_index(idx[0], idx[1])] * rho;
        }
    }
    vw_B *= mu;
    v_Bbar *= mu;
    ext *= mu;

    // W(x1 - x2) split by p1 p2 insertions on Y = 1_B Psi
    const ManyBodyState Y = apply_mask(s, masks.B);
    const ManyBodyState X = pq_project(pq_project(Y, phi, 0, Projector::p), phi, 1, Projector::p);
    double w_pp = 0.0, w_qq = 0.0;
    cd w_x = 0.0;
    for (std::size_t f = 0; f < total; ++f) {
        s.config(f, idx.data());
        const double w = W[g.displacement_index(idx[0], idx[1])];
        if (w == 0.0) continue;
        const cd r = Y.amp[f] - X.amp[f];
        w_pp += w * std::norm(X.amp[f]);
        w_qq += w * std::norm(r);
        w_x += w * std::conj(r) * X.amp[f];
    }
    w_pp *= mu;
    w_qq *= mu;
    const double w_cross = w_x.real() * mu;

    // GP side
    GPSolver gps(g);
    const double grad_phi2 = gps.kinetic_energy(phi);
    double phi4 = 0.0, phiA = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double r = std::norm(phi.values[i]);
        phi4 += r * r;
        phiA += Aext[i] * r;
    }
    phi4 *= dv;
    phiA *= dv;

    const double half_nm1 = 0.5 * double(N - 1);
    EnergyDecomposition out;
    out.terms = {
        {"eps_localized_gradient", eps * (A_q2 + AbarBbar2)},
        {"mixed_gradient", mixed},
        {"b_localized_v_minus_w", AbarB2 + 0.5 * vw_B},
        {"w_pp", half_nm1 * w_pp - 4.0 * std::numbers::pi * ms.a * phi4},
        {"w_cross", double(N - 1) * w_cross},
        {"w_qq", half_nm1 * w_qq},
        {"condensate_kinetic", A_p2 - grad_phi2},
        {"external", ext - phiA},
        {"rest_localized_gradient", (1.0 - eps) * (A_q2 + AbarBbar2)},
        {"bbar_localized_v", half_nm1 * v_Bbar},
    };
    out.many_body_energy = many_body_energy(s, H);
    out.gp_energy = grad_phi2 + phiA + 4.0 * std::numbers::pi * ms.a * phi4;
    for (const auto& t : out.terms) out.sum += t.value;
    out.residual = out.sum - (out.many_body_energy - out.gp_energy);
    out.scale = std::abs(out.many_body_energy) + std::abs(out.gp_energy) + 1.0;
    return out;
}

// Psi_0 = prod_{i<j} f(x_i - x_j) phi^{(x)N}, renormalised.
inline ManyBodyState correlated_product(const GPField& phi, int N, const ModifiedScattering& ms) {
    ManyBodyState s = ManyBodyState::product(phi, N);
    const auto& g = s.grid;
    std::vector<double> f(g.points());
    for (std::size_t d = 0; d < f.size(); ++d) f[d] = ms.f(g.displacement_length(d));
    std::vector<std::size_t> idx(static_cast<std::size_t>(N));
    for (std::size_t k = 0; k < s.amp.size(); ++k) {
        s.config(k, idx.data());
        double w = 1.0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) w *= f[g.displacement_index(idx[std::size_t(i)], idx[std::size_t(j)])];
        s.amp[k] *= w;
    }
    s.normalize();
    return s;
}

} // namespace gpcheck

#endif
