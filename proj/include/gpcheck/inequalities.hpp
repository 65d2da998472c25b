#ifndef GPCHECK_INEQUALITIES_HPP
#define GPCHECK_INEQUALITIES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpcheck/error.hpp"
#include "gpcheck/gp.hpp"
#include "gpcheck/grid.hpp"
#include "gpcheck/manybody.hpp"
#include "gpcheck/potentials.hpp"
#include "gpcheck/radial.hpp"
#include "gpcheck/scattering.hpp"

namespace gpcheck {

enum class FormMethod { radial_exact, randomized_form };

inline const char* to_string(FormMethod m) { return m == FormMethod::radial_exact ? "radial_exact" : "randomized_form"; }

struct FormCheckResult {
    double min_eigenvalue = 0.0;
    FormMethod method = FormMethod::radial_exact;
    std::size_t trial_count = 0;
    bool violated = false;
    double tolerance = 1e-8;
    double discretization_estimate = 0.0; // Richardson estimate plus round-off floor
    double extrapolated = 0.0;            // Richardson-extrapolated eigenvalue
    std::size_t nodes = 0;
};

struct RadialEigenOptions {
    double wall_factor = 50.0;           // wall radius over support radius
    std::size_t inner_intervals = 4096;  // across the support
    std::size_t outer_intervals = 8192;  // from the support to the wall
    double tolerance = 1e-8;
    double boundary_mass_limit = 1e-6;   // outer tenth of the box
};

namespace detail {

// Symmetrically scaled tridiagonal pencil M^{-1/2} K M^{-1/2} of a linear-element
// discretisation with lumped mass. Unknowns are the nodes after the first.
struct RadialPencil {
    std::vector<double> r, diag, off, mass;
    double scale = 0.0; // max row sum, for the round-off floor
};

// Form  c int |u'|^2 + int q u^2 - robin u(end)^2  over  int u^2, with u(r0) = 0 and
// either u(end) = 0 or a free end.
inline RadialPencil radial_pencil(const std::vector<double>& nodes, double stiffness, const RadialPotential& q,
                                  bool dirichlet_end, double robin) {
    const std::size_t n = nodes.size();
    if (n < 3) throw ParameterError("radial pencil: need at least three nodes");
    const std::size_t last = dirichlet_end ? n - 2 : n - 1;
    const std::size_t m = last;
    RadialPencil p;
    p.r.assign(nodes.begin() + 1, nodes.begin() + 1 + std::ptrdiff_t(m));
    std::vector<double> K(m, 0.0), E(m > 0 ? m - 1 : 0, 0.0);
    p.mass.assign(m, 0.0);
    for (std::size_t e = 0; e + 1 < n; ++e) {
        const double a = nodes[e], b = nodes[e + 1], h = b - a;
        const double q0 = q.integral(a, b, 0), q1 = q.integral(a, b, 1);
        const double rising = (q1 - a * q0) / h, falling = (b * q0 - q1) / h;
        // element couples unknowns e-1 (node e) and e (node e+1)
        if (e >= 1 && e - 1 < m) {
            K[e - 1] += stiffness / h + falling;
            p.mass[e - 1] += 0.5 * h;
        }
        if (e < m) {
            K[e] += stiffness / h + rising;
            p.mass[e] += 0.5 * h;
        }
        if (e >= 1 && e < m) E[e - 1] = -stiffness / h;
    }
    if (!dirichlet_end) K[m - 1] -= robin;
    p.diag.resize(m);
    p.off.resize(E.size());
    for (std::size_t i = 0; i < m; ++i) p.diag[i] = K[i] / p.mass[i];
    for (std::size_t i = 0; i + 1 < m; ++i) p.off[i] = E[i] / std::sqrt(p.mass[i] * p.mass[i + 1]);
    for (std::size_t i = 0; i < m; ++i) {
        double row = std::abs(p.diag[i]);
        if (i > 0) row += std::abs(p.off[i - 1]);
        if (i + 1 < m) row += std::abs(p.off[i]);
        p.scale = std::max(p.scale, row);
    }
    return p;
}

// Number of eigenvalues below x (Sturm sequence of the LDL^T pivots).
inline std::size_t count_below(const RadialPencil& p, double x) {
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    std::size_t c = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < p.diag.size(); ++i) {
        const double e2 = i > 0 ? p.off[i - 1] * p.off[i - 1] : 0.0;
        q = p.diag[i] - x - (i > 0 ? e2 / q : 0.0);
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++c;
    }
    return c;
}

inline double lowest_eigenvalue(const RadialPencil& p) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < p.diag.size(); ++i) {
        double rad = 0.0;
        if (i > 0) rad += std::abs(p.off[i - 1]);
        if (i + 1 < p.diag.size()) rad += std::abs(p.off[i]);
        lo = std::min(lo, p.diag[i] - rad);
        hi = std::max(hi, p.diag[i] + rad);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_below(p, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Eigenvector for eigenvalue lambda by inverse iteration, in the scaled variables
// (sum of squares = int u^2).
inline std::vector<double> eigenvector(const RadialPencil& p, double lambda) {
    const std::size_t m = p.diag.size();
    const double shift = lambda - 1e-9 * std::max(1.0, std::abs(lambda));
    std::vector<double> x(m, 1.0), c(m), d(m);
    for (int it = 0; it < 4; ++it) {
        // Thomas algorithm on (A - shift I) y = x
        double piv = p.diag[0] - shift;
        c[0] = m > 1 ? p.off[0] / piv : 0.0;
        d[0] = x[0] / piv;
        for (std::size_t i = 1; i < m; ++i) {
            piv = p.diag[i] - shift - p.off[i - 1] * c[i - 1];
            if (i + 1 < m) c[i] = p.off[i] / piv;
            d[i] = (x[i] - p.off[i - 1] * d[i - 1]) / piv;
        }
        x[m - 1] = d[m - 1];
        for (std::size_t i = m - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
        double nrm = 0.0;
        for (double v : x) nrm += v * v;
        nrm = std::sqrt(nrm);
        for (double& v : x) v /= nrm;
    }
    return x;
}

inline std::vector<double> bisect_intervals(const std::vector<double>& nodes) {
    std::vector<double> out{nodes.front()};
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        out.push_back(0.5 * (nodes[i] + nodes[i + 1]));
        out.push_back(nodes[i + 1]);
    }
    return out;
}

// Coarse and refined solves with a Richardson error estimate.
inline FormCheckResult radial_form_minimum(const std::vector<double>& coarse, double stiffness, const RadialPotential& q,
                                           bool dirichlet_end, double robin, double tolerance) {
    const auto fine = bisect_intervals(coarse);
    const auto pc = radial_pencil(coarse, stiffness, q, dirichlet_end, robin);
    const auto pf = radial_pencil(fine, stiffness, q, dirichlet_end, robin);
    const double lc = lowest_eigenvalue(pc), lf = lowest_eigenvalue(pf);
    FormCheckResult r;
    r.method = FormMethod::radial_exact;
    r.trial_count = 1;
    r.min_eigenvalue = lf;
    r.extrapolated = lf + (lf - lc) / 3.0;
    r.discretization_estimate = std::abs(lf - lc) / 3.0 + 64.0 * std::numeric_limits<double>::epsilon() * pf.scale;
    r.tolerance = tolerance;
    r.violated = lf < -(tolerance + r.discretization_estimate);
    r.nodes = fine.size();
    return r;
}

inline double max_wavenumber(const RadialPotential& q, double stiffness) {
    return std::sqrt(std::max(q.sup_abs(), 1e-300) / stiffness);
}

// Bound states of -2u'' + U u on the half-line, counted as zeros of the zero-energy
// solution on (0, inf): sign changes on the grid plus a zero of the affine tail.
inline int zero_energy_nodes(const RadialPotential& U) {
    const auto grid = default_scattering_grid(U);
    const auto sol = integrate_radial(0.5 * U, grid, 0.0, 1.0);
    int nodes = 0;
    for (std::size_t i = 2; i < sol.u.size(); ++i)
        if ((sol.u[i] > 0.0) != (sol.u[i - 1] > 0.0)) ++nodes;
    if (sol.u.back() * sol.du.back() < 0.0) ++nodes;
    return nodes;
}

} // namespace detail

// Lowest eigenvalue of -2 u'' + U u on [0, wall] with Dirichlet ends: the s-wave
// channel of the relative motion of two particles interacting through U.
inline FormCheckResult two_body_ground_energy(const RadialPotential& U, const RadialEigenOptions& opt = {}) {
    if (opt.wall_factor < 50.0) throw ParameterError("two-body energy: wall must sit at least 50 support radii out");
    if (opt.inner_intervals < 16 || opt.outer_intervals < 16) throw ParameterError("two-body energy: grid too coarse");
    const double support = U.support_radius() > 0.0 ? U.support_radius() : 1.0;
    const double wall = opt.wall_factor * support;
    double h_in = support / double(opt.inner_intervals);
    if (U.sup_abs() > 0.0) h_in = std::min(h_in, 0.05 / detail::max_wavenumber(U, 2.0));
    auto nodes = detail::knot_aligned_nodes(U.knots(), 0.0, support, h_in, opt.inner_intervals);
    const double h_out = (wall - support) / double(opt.outer_intervals);
    for (std::size_t i = 1; i <= opt.outer_intervals; ++i)
        nodes.push_back(i == opt.outer_intervals ? wall : support + h_out * double(i));

    auto r = detail::radial_form_minimum(nodes, 2.0, U, true, 0.0, opt.tolerance);
    const auto outer_mass = [&] {
        const auto fine = detail::bisect_intervals(nodes);
        const auto p = detail::radial_pencil(fine, 2.0, U, true, 0.0);
        const auto v = detail::eigenvector(p, r.min_eigenvalue);
        double outer = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (p.r[i] > 0.9 * wall) outer += v[i] * v[i];
        return outer;
    };
    if (r.min_eigenvalue < 0.0) {
        const double outer = outer_mass();
        if (outer > opt.boundary_mass_limit)
            throw DomainSizeError("two-body energy: bound state reaches the wall; enlarge the box", outer);
    } else if (U.min_value() < 0.0 && detail::zero_energy_nodes(U) > 0) {
        // the wall lifts a weakly bound state above zero
        throw DomainSizeError("two-body energy: bound state too shallow for the box; enlarge the box", outer_mass());
    }
    return r;
}

// Lowest eigenvalue of  int_0^radius (|u'|^2 + q u^2) - u(radius)^2 / radius  over int u^2,
// u(0) = 0 and a free end: the ball-localised kinetic energy of psi = u / r plus q.
inline FormCheckResult localized_form_check(const RadialPotential& q, double radius, std::span<const double> extra_knots = {},
                                            const RadialEigenOptions& opt = {}) {
    if (!(radius > 0.0)) throw DomainError("localised form: radius must be positive");
    const auto qr = q.restricted(0.0, radius);
    const double inner = std::min(qr.support_radius() > 0.0 ? qr.support_radius() : radius, radius);
    double h_in = inner / double(opt.inner_intervals);
    if (qr.sup_abs() > 0.0) h_in = std::min(h_in, 0.05 / detail::max_wavenumber(qr, 1.0));
    auto knots = qr.knots();
    auto nodes = detail::knot_aligned_nodes(knots, 0.0, inner, h_in, opt.inner_intervals);
    if (inner < radius) {
        knots.insert(knots.end(), extra_knots.begin(), extra_knots.end());
        const auto outer = detail::knot_aligned_nodes(knots, inner, radius, (radius - inner) / double(opt.outer_intervals),
                                                      opt.outer_intervals);
        nodes.insert(nodes.end(), outer.begin() + 1, outer.end());
    }
    return detail::radial_form_minimum(nodes, 1.0, qr, false, 1.0 / radius, opt.tolerance);
}

// Two-body reduction of the localised-kinetic bound: the radial form with
// q = (V1 - w_scale W) / 2 on the ball of radius R_beta.
inline FormCheckResult shell_form_check(const ModifiedScattering& ms, double w_scale = 1.0, const RadialEigenOptions& opt = {}) {
    const RadialPotential q = 0.5 * (ms.V1 - w_scale * ms.W);
    const double knots[] = {ms.rho};
    return localized_form_check(q, ms.R_beta, knots, opt);
}

inline FormCheckResult shell_form_check(const PotentialSpec& spec, double N, double beta1, double w_scale = 1.0,
                                         const RadialEigenOptions& opt = {}) {
    return shell_form_check(find_minimal_R(spec, N, beta1), w_scale, opt);
}

// ---------------------------------------------------------------------------
// Two-body and sampled three-body checks of the operator inequalities

struct EpsilonCheck {
    double epsilon;
    FormCheckResult result;
};

struct OperatorCheckOptions {
    std::vector<double> epsilons; // empty: 0.01, 0.02, ..., 0.99
    int grid_points = 32;
    double box = 0.0;             // 0: 6.4 R
    std::size_t random_trials = 1000;
    std::uint64_t seed = 1;
    double tolerance = 1e-8;
    RadialEigenOptions radial;
};

struct OperatorCheckReport {
    std::vector<EpsilonCheck> two_body;
    double largest_passing_epsilon = 0.0;
    bool two_body_pass = false;

    // Sampled three-body form in one dimension: a necessary-condition test.
    FormCheckResult sampled_form;
    double form_epsilon = 0.0;
    double shell_radius = 0.0; // pair radius defining the three-body sets
    double min_random = 0.0;
    double min_cluster = 0.0;
    std::size_t cluster_trials = 0;
    int grid_points = 0;
    double box = 0.0;

    bool pass() const { return two_body_pass && !sampled_form.violated; }
};

namespace detail {

// (1 - eps) sum_k |1_{Dbar_k} grad_k Psi|^2 + sum_{i != j} <1_{Dbar_j} V(x_i - x_j) / 2>
// for a normalised three-particle state; Dbar_j: the pair not containing j is closer than `shell`.
class ThreeBodyForm {
public:
    ThreeBodyForm(const PeriodicGrid& g, const RadialPotential& V, double eps, double shell)
        : ops_(g, 3), eps_(eps), table_(pair_table(g, V)) {
        for (int j = 0; j < 3; ++j) masks_.push_back(indicator_masks(g, 3, j, shell).Bbar);
    }

    double operator()(const ManyBodyState& s) const {
        const double mu = s.measure();
        double kin = 0.0;
        for (int k = 0; k < 3; ++k) kin += masked_gradient_norm2(ops_, s.amp, k, &masks_[std::size_t(k)], mu);
        const auto& g = s.grid;
        const std::size_t M = g.points();
        double pot = 0.0;
        for (std::size_t f = 0; f < s.amp.size(); ++f) {
            const double w = std::norm(s.amp[f]);
            if (w == 0.0) continue;
            const std::size_t x[3] = {f / (M * M), (f / M) % M, f % M};
            for (int j = 0; j < 3; ++j) {
                if (!masks_[std::size_t(j)][f]) continue;
                for (int i = 0; i < 3; ++i)
                    if (i != j) pot += 0.5 * w * table_[g.displacement_index(x[i], x[j])];
            }
        }
        return ((1.0 - eps_) * kin + pot * mu) / (s.norm() * s.norm());
    }

private:
    ManyBodyOps ops_;
    double eps_;
    std::vector<double> table_;
    std::vector<std::vector<std::uint8_t>> masks_;
};

// One-body profile: a normalised Gaussian, or a single grid point when sigma == 0.
inline std::vector<cd> bump(const PeriodicGrid& g, double center, double sigma) {
    if (sigma > 0.0) {
        const double c[] = {center};
        return GPField::gaussian(g, sigma, c).values;
    }
    std::vector<cd> v(g.points(), 0.0);
    const double h = g.spacing();
    const auto i = std::size_t(std::lround((center + 0.5 * g.L) / h)) % g.points();
    v[i] = 1.0 / std::sqrt(h);
    return v;
}

inline ManyBodyState symmetrised_product(const PeriodicGrid& g, const std::vector<cd>& a, const std::vector<cd>& b,
                                         const std::vector<cd>& c) {
    const std::size_t M = g.points();
    std::vector<cd> amp(M * M * M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
            for (std::size_t k = 0; k < M; ++k) amp[(i * M + j) * M + k] = a[i] * b[j] * c[k];
    ManyBodyState s(g, 3, std::move(amp), false);
    s.symmetrize();
    s.normalize();
    return s;
}

} // namespace detail

inline OperatorCheckReport verify_operator_inequalities(const PotentialSpec& spec, const OperatorCheckOptions& opt = {}) {
    OperatorCheckReport rep;
    std::vector<double> eps = opt.epsilons;
    if (eps.empty())
        for (int k = 1; k <= 99; ++k) eps.push_back(0.01 * k);
    std::sort(eps.begin(), eps.end());
    bool clean = true;
    for (double e : eps) {
        const RadialPotential U = spec.vplus() - (1.0 + e) * spec.vminus();
        auto r = two_body_ground_energy(U, opt.radial);
        if (r.violated) clean = false;
        if (clean) rep.largest_passing_epsilon = e;
        rep.two_body.push_back({e, r});
    }
    rep.two_body_pass = rep.largest_passing_epsilon > 0.0;

    // Sampled three-body form, rescaled units: pair sets of radius 2R.
    rep.form_epsilon = spec.epsilon();
    rep.shell_radius = 2.0 * spec.R();
    rep.grid_points = opt.grid_points;
    rep.box = opt.box > 0.0 ? opt.box : 6.4 * spec.R();
    const PeriodicGrid g(1, opt.grid_points, rep.box);
    const detail::ThreeBodyForm form(g, spec.potential(), rep.form_epsilon, rep.shell_radius);
    const double h = g.spacing();

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> pos(-rep.shell_radius, rep.shell_radius), width(h, spec.R());
    rep.min_random = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < opt.random_trials; ++t) {
        double v;
        if (t % 10 == 9) {
            v = form(ManyBodyState::random_symmetric(g, 3, rng));
        } else {
            const double c0 = pos(rng), c1 = pos(rng), c2 = pos(rng);
            const double s0 = width(rng), s1 = width(rng), s2 = width(rng);
            v = form(detail::symmetrised_product(g, detail::bump(g, c0, s0), detail::bump(g, c1, s1), detail::bump(g, c2, s2)));
        }
        rep.min_random = std::min(rep.min_random, v);
    }

    // Linear three-particle clusters with neighbours inside the attractive shell.
    rep.min_cluster = std::numeric_limits<double>::infinity();
    const double widths[] = {0.0, 0.5 * h, h};
    for (int k = 0; k <= 4; ++k) {
        const double sep = spec.r2() + (spec.R() - spec.r2()) * k / 5.0;
        for (double w : widths) {
            const auto s = detail::symmetrised_product(g, detail::bump(g, -sep, w), detail::bump(g, 0.0, w), detail::bump(g, sep, w));
            rep.min_cluster = std::min(rep.min_cluster, form(s));
            ++rep.cluster_trials;
        }
    }

    auto& f = rep.sampled_form;
    f.method = FormMethod::randomized_form;
    f.trial_count = opt.random_trials + rep.cluster_trials;
    f.min_eigenvalue = std::min(rep.min_random, rep.min_cluster);
    f.tolerance = opt.tolerance;
    f.discretization_estimate = 0.0;
    f.extrapolated = f.min_eigenvalue;
    f.nodes = g.points();
    f.violated = f.min_eigenvalue < -opt.tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Partition counting

struct Rational {
    std::int64_t num = 0, den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (d == 0) throw DomainError("rational: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const auto g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }
    double value() const { return double(num) / double(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
    friend Rational operator+(const Rational& a, const Rational& b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
};

inline constexpr int min_partition_particles = 4;
inline constexpr int max_partition_particles = 12;

inline const std::vector<std::string>& partition_ratio_names() {
    static const std::vector<std::string> names{"single_pi1", "pair_11", "pair_12", "pair_21", "pair_22"};
    return names;
}

struct PartitionStats {
    int N = 0;
    std::int64_t partitions = 0; // ordered pairs (pi1, pi2)
    std::map<std::string, Rational> ratios;
};

// Enumerates every split of {1..N} into pi1 of size floor(N/2) and its complement pi2;
// ratios are the fractions of splits with particle 1 (and 2) in the named halves.
inline PartitionStats partition_identities(int N) {
    if (N < min_partition_particles || N > max_partition_particles)
        throw CapabilityError("partition identities: N must lie in [4, 12]");
    const int k = N / 2;
    std::int64_t total = 0, single = 0, p11 = 0, p12 = 0, p21 = 0, p22 = 0;
    for (unsigned mask = 0; mask < (1u << N); ++mask) {
        if (std::popcount(mask) != k) continue;
        ++total;
        const bool a = mask & 1u, b = mask & 2u;
        single += a;
        p11 += a && b;
        p12 += a && !b;
        p21 += !a && b;
        p22 += !a && !b;
    }
    PartitionStats s;
    s.N = N;
    s.partitions = total;
    s.ratios["single_pi1"] = Rational(single, total);
    s.ratios["pair_11"] = Rational(p11, total);
    s.ratios["pair_12"] = Rational(p12, total);
    s.ratios["pair_21"] = Rational(p21, total);
    s.ratios["pair_22"] = Rational(p22, total);
    return s;
}

// Reference ratios: closed forms in N for odd N, the symmetric values 1/2 and 1/4 for even N.
inline std::map<std::string, Rational> partition_reference_ratios(int N) {
    if (N % 2 == 1)
        return {{"single_pi1", Rational(N - 1, 2 * N)},
                {"pair_11", Rational(N - 3, 4 * N)},
                {"pair_12", Rational(N + 1, 4 * N)},
                {"pair_21", Rational(N + 1, 4 * N)},
                {"pair_22", Rational(N + 1, 4 * N)}};
    return {{"single_pi1", Rational(1, 2)},
            {"pair_11", Rational(1, 4)},
            {"pair_12", Rational(1, 4)},
            {"pair_21", Rational(1, 4)},
            {"pair_22", Rational(1, 4)}};
}

// ---------------------------------------------------------------------------
// Cube-partition splitting of the localised operator (three particles, one dimension)

struct PartitionOperatorOptions {
    int points = 8;
    double box = 0.0;           // 0: 6.4 R
    std::vector<int> pi1{0};    // particles in the first group
    int n1 = 0;                 // 0: covering number of the spec
    double tolerance = 1e-12;
};

struct PartitionOperatorCheck {
    std::size_t dimension = 0;
    double max_abs_difference = 0.0;
    double operator_scale = 0.0;
    std::size_t dense_cube_configs = 0;  // configurations whose cube count reaches 2 n1
    std::size_t sparse_cube_configs = 0;
    int n1 = 0;
    double tolerance = 0.0;
    bool pass = false;
};

// Builds H_P and (1/2) H1 + sum_j H2_j as dense matrices and compares them entrywise.
// Cubes are half-open intervals of side r1; kinetic terms are D^T 1 D with forward differences.
inline PartitionOperatorCheck partition_operator_identity(const PotentialSpec& spec, const PartitionOperatorOptions& opt = {}) {
    constexpr int N = 3;
    const double L = opt.box > 0.0 ? opt.box : 6.4 * spec.R();
    const PeriodicGrid g(1, opt.points, L);
    const std::size_t M = g.points(), D = M * M * M;
    if (D > 4096) throw CapabilityError("partition operator: dense check limited to 16 points per particle");
    std::vector<bool> in1(N, false);
    for (int p : opt.pi1) {
        if (p < 0 || p >= N) throw DomainError("partition operator: particle index out of range");
        in1[std::size_t(p)] = true;
    }
    const int n1 = opt.n1 > 0 ? opt.n1 : covering_number(spec.r1(), spec.R());
    const double h = g.spacing(), R = spec.R(), Rt = 2.0 * R, side = spec.r1();
    const auto Uplus = pair_table(g, spec.vplus()), Uminus = pair_table(g, spec.vminus());

    auto wrap = [L](double x) { return x - L * std::floor(x / L); };
    auto dist = [&](double x, double y) {
        const double d = wrap(x - y);
        return std::min(d, L - d);
    };
    const int cubes = int(std::ceil(L / side - 1e-12));
    auto cube_of = [&](double x) { return std::min(cubes - 1, int(std::floor(wrap(x + 0.5 * L) / side + 1e-12))); };
    auto cube_distance = [&](double y, int c) {
        const double lo = -0.5 * L + side * c, hi = std::min(lo + side, 0.5 * L);
        const double t = wrap(y - lo);
        return t <= hi - lo ? 0.0 : std::min(t - (hi - lo), L - t);
    };

    Eigen::MatrixXd HP = Eigen::MatrixXd::Zero(Eigen::Index(D), Eigen::Index(D));
    Eigen::MatrixXd split = HP;
    PartitionOperatorCheck out;
    out.dimension = D;
    out.n1 = n1;
    out.tolerance = opt.tolerance;

    const std::size_t stride[N] = {M * M, M, 1};
    std::vector<std::array<std::uint8_t, N>> cbar(D);
    for (std::size_t f = 0; f < D; ++f) {
        const std::size_t x[N] = {f / (M * M), (f / M) % M, f % M};
        double pos[N];
        for (int p = 0; p < N; ++p) pos[p] = g.coordinate(int(x[p]));
        for (int j = 0; j < N; ++j) {
            bool close = false;
            for (int k = 0; k < N; ++k)
                for (int l = k + 1; l < N; ++l)
                    if (k != j && l != j && dist(pos[k], pos[l]) <= Rt + 1e-12) close = true;
            cbar[f][std::size_t(j)] = close;
        }
        // |G(C)| for the cube holding each pi1 particle, from the pi2 configuration
        auto G_of = [&](double y) {
            int c = 0;
            for (int i = 0; i < N; ++i)
                if (!in1[std::size_t(i)] && dist(pos[i], y) <= R + 1e-12) ++c;
            return c;
        };
        auto G_cube = [&](int cube) {
            std::vector<double> cand;
            for (int i = 0; i < int(M); ++i) cand.push_back(g.coordinate(i));
            for (int i = 0; i < N; ++i)
                if (!in1[std::size_t(i)]) {
                    cand.push_back(pos[i] + R);
                    cand.push_back(pos[i] - R);
                    cand.push_back(pos[i]);
                }
            const double lo = -0.5 * L + side * cube;
            cand.push_back(lo);
            cand.push_back(std::min(lo + side, 0.5 * L));
            int best = 0;
            for (double y : cand)
                if (cube_distance(y, cube) <= 2.0 * R + 1e-12) best = std::max(best, G_of(y));
            return best;
        };

        double hp = 0.0, h1 = 0.0, h2 = 0.0;
        for (int j = 0; j < N; ++j) {
            if (!cbar[f][std::size_t(j)]) continue;
            bool dense = false;
            if (in1[std::size_t(j)]) {
                dense = G_cube(cube_of(pos[j])) >= 2 * n1;
                ++(dense ? out.dense_cube_configs : out.sparse_cube_configs);
            }
            for (int i = 0; i < N; ++i) {
                if (i == j) continue;
                const std::size_t d = g.displacement_index(x[i], x[j]);
                const double up = Uplus[d], um = Uminus[d];
                const bool i1 = in1[std::size_t(i)], j1 = in1[std::size_t(j)];
                if (i1 == j1) {
                    hp += 0.5 * up;
                    h1 += up;
                } else if (j1) {
                    // i in pi2, j in pi1: U12 = 2 U+ - 4 U-, negative part magnitude 4 U-
                    hp += 0.5 * (2.0 * up - 4.0 * um);
                    h2 += 0.5 * 2.0 * up;
                    if (dense)
                        h1 -= 4.0 * um;
                    else
                        h2 -= 0.5 * 4.0 * um;
                } else {
                    hp += 0.5 * (2.0 * up - 4.0 * um);
                    h1 += 2.0 * up - 4.0 * um;
                }
            }
        }
        HP(Eigen::Index(f), Eigen::Index(f)) += hp;
        split(Eigen::Index(f), Eigen::Index(f)) += 0.5 * h1 + h2;
    }

    // -2 Delta_j 1_{Cbar_j} for j in pi1, as D_j^T diag(2 Cbar_j) D_j
    for (int j = 0; j < N; ++j) {
        if (!in1[std::size_t(j)]) continue;
        for (std::size_t f = 0; f < D; ++f) {
            if (!cbar[f][std::size_t(j)]) continue;
            const std::size_t xj = (f / stride[j]) % M;
            const std::size_t fp = f - xj * stride[j] + ((xj + 1) % M) * stride[j];
            const double c = 2.0 / (h * h);
            const Eigen::Index a = Eigen::Index(f), b = Eigen::Index(fp);
            for (Eigen::MatrixXd* H : {&HP, &split}) {
                (*H)(a, a) += c;
                (*H)(b, b) += c;
                (*H)(a, b) -= c;
                (*H)(b, a) -= c;
            }
        }
    }
    out.operator_scale = HP.cwiseAbs().maxCoeff();
    out.max_abs_difference = (HP - split).cwiseAbs().maxCoeff();
    out.pass = out.max_abs_difference <= opt.tolerance * std::max(1.0, out.operator_scale);
    return out;
}

// ---------------------------------------------------------------------------
// Pair counting under the cube partition

struct CoveringCheckOptions {
    std::size_t configurations = 10000;
    std::vector<int> sizes{2, 20, 200, 2000};
    int pair_count_limit = 500; // direct r1-pair counting only up to this many points
    std::uint64_t seed = 1;
};

struct CoveringCheckReport {
    int n1 = 0;
    std::size_t configurations = 0;
    double worst_slack = std::numeric_limits<double>::infinity(); // min (same-cube pairs - bound)
    double worst_ratio = std::numeric_limits<double>::infinity(); // min same-cube pairs / bound, bound > 0
    int max_cubes_met = 0;
    bool pairs_dominate = true; // pairs within r1 >= same-cube pairs whenever counted
    bool violated = false;
};

namespace detail {

struct PairCounts {
    std::int64_t same_cube = 0; // ordered pairs
    int cubes = 0;
};

inline PairCounts cube_pairs(const std::vector<std::array<double, 3>>& pts, double side, const std::array<double, 3>& offset) {
    std::vector<std::array<std::int64_t, 3>> keys(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a) keys[i][std::size_t(a)] = std::int64_t(std::floor((pts[i][std::size_t(a)] - offset[std::size_t(a)]) / side));
    std::sort(keys.begin(), keys.end());
    PairCounts c;
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        const auto run = std::int64_t(j - i);
        c.same_cube += run * (run - 1);
        ++c.cubes;
        i = j;
    }
    return c;
}

inline std::int64_t close_pairs(const std::vector<std::array<double, 3>>& pts, double r) {
    std::int64_t c = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double d2 = 0.0;
            for (int a = 0; a < 3; ++a) d2 += std::pow(pts[i][std::size_t(a)] - pts[j][std::size_t(a)], 2);
            if (d2 <= r * r) c += 2;
        }
    return c;
}

} // namespace detail

// Places m points in a ball of radius R and checks that the ordered same-cube pair
// count is at least m^2 / n1 - m (Jensen over at most n1 occupied cubes).
inline CoveringCheckReport covering_energy_bound_check(const PotentialSpec& spec, const CoveringCheckOptions& opt = {}) {
    using P3 = std::array<double, 3>;
    CoveringCheckReport rep;
    rep.n1 = covering_number(spec.r1(), spec.R());
    const double R = spec.R(), side = spec.r1() / std::sqrt(3.0);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), off(0.0, side);

    auto record = [&](const std::vector<P3>& pts, const P3& offset) {
        const auto c = detail::cube_pairs(pts, side, offset);
        const double m = double(pts.size());
        const double bound = m * m / rep.n1 - m;
        rep.max_cubes_met = std::max(rep.max_cubes_met, c.cubes);
        rep.worst_slack = std::min(rep.worst_slack, double(c.same_cube) - bound);
        if (bound > 0.0) rep.worst_ratio = std::min(rep.worst_ratio, double(c.same_cube) / bound);
        if (int(pts.size()) <= opt.pair_count_limit && detail::close_pairs(pts, spec.r1()) < c.same_cube)
            rep.pairs_dominate = false;
        ++rep.configurations;
    };

    for (std::size_t t = 0; t < opt.configurations; ++t) {
        const int m = opt.sizes[t % opt.sizes.size()];
        std::vector<P3> pts;
        while (int(pts.size()) < m) {
            const P3 p{R * u(rng), R * u(rng), R * u(rng)};
            if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= R * R) pts.push_back(p);
        }
        record(pts, {off(rng), off(rng), off(rng)});
    }

    // Coincident points, and equal occupation of every cube the ball meets.
    for (int m : opt.sizes) record(std::vector<P3>(std::size_t(m), P3{0.0, 0.0, 0.0}), {0.0, 0.0, 0.0});
    for (int copies : {1, 2, 5, 20}) {
        std::vector<P3> pts;
        const int span = int(std::ceil(R / side)) + 1;
        for (int i = -span; i <= span; ++i)
            for (int j = -span; j <= span; ++j)
                for (int k = -span; k <= span; ++k) {
                    // point of the cube closest to the centre, pulled slightly inside both
                    P3 p;
                    const int idx[3] = {i, j, k};
                    for (int a = 0; a < 3; ++a) {
                        const double lo = side * idx[a], hi = lo + side;
                        p[std::size_t(a)] = std::clamp(0.0, lo + 1e-9 * side, hi - 1e-9 * side);
                    }
                    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
                    if (n >= R) continue;
                    for (int c = 0; c < copies; ++c) pts.push_back(p);
                }
        record(pts, {0.0, 0.0, 0.0});
    }
    rep.violated = rep.worst_slack < 0.0 || !rep.pairs_dominate || rep.max_cubes_met > rep.n1;
    return rep;
}

// ---------------------------------------------------------------------------
// Radius-only scaling of the localised norm for a Gaussian product

struct ScalingPoint {
    double N, radius, ratio;
};

struct ScalingReport {
    std::vector<ScalingPoint> points;
    double slope = 0.0;
    double constant = 0.0;      // C fitted at the smallest N
    double target_slope = -7.0 / 54.0;
    bool bounded = false;       // ratio <= C N^target at every N
    bool pass() const { return bounded && slope <= target_slope; }
};

// P(|Z| < r) for Z with i.i.d. N(0, s^2) components in three dimensions.
inline double maxwell_cdf(double r, double s) {
    const double x = r / (std::sqrt(2.0) * s);
    if (x < 1.0) {
        // (4/sqrt(pi)) int_0^x t^2 e^{-t^2} dt, termwise
        double sum = 0.0, term = x * x * x, fact = 1.0;
        for (int n = 0; n < 60; ++n) {
            if (n > 0) {
                term *= -x * x;
                fact *= n;
            }
            const double add = term / (fact * (2 * n + 3));
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        }
        return 4.0 / std::sqrt(std::numbers::pi) * sum;
    }
    return std::erf(x) - 2.0 / std::sqrt(std::numbers::pi) * x * std::exp(-x * x);
}

// Omega = g(x1) g(x2) g(x3) with |g|^2 Gaussian of variance sigma^2 per component; the
// localised set is |x2 - x3| < N^{-26/27}. |grad_1 Omega|^2 = 3 / (4 sigma^2).
inline ScalingReport localized_norm_scaling(std::span<const double> N_sweep, double sigma = 1.0) {
    if (N_sweep.size() < 2) throw ParameterError("scaling: need at least two N values");
    ScalingReport rep;
    const double grad = std::sqrt(3.0 / (4.0 * sigma * sigma));
    for (double N : N_sweep) {
        const double r = indicator_radius(N);
        const double mass = maxwell_cdf(r, std::sqrt(2.0) * sigma);
        rep.points.push_back({N, r, std::sqrt(mass) / grad});
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(rep.points.size());
    for (const auto& p : rep.points) {
        const double x = std::log(p.N), y = std::log(p.ratio);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const auto& first = *std::min_element(rep.points.begin(), rep.points.end(), [](auto& a, auto& b) { return a.N < b.N; });
    rep.constant = first.ratio * std::pow(first.N, -rep.target_slope);
    rep.bounded = true;
    for (const auto& p : rep.points)
        if (p.ratio > rep.constant * std::pow(p.N, rep.target_slope) * (1.0 + 1e-12)) rep.bounded = false;
    return rep;
}

// ---------------------------------------------------------------------------
// Energy-controlled bounds on the interaction and gradient

struct RatioSample {
    double scale_N;
    std::size_t state;
    double energy;       // <Psi, H Psi>
    double potential2;   // |V_N(x_1 - x_last) Psi|^2
    double gradient2;    // |grad_1 Psi|^2
    double c_potential;  // potential2 / (energy + N)
    double c_gradient;   // N gradient2 / (energy + 1)
};

struct RatioReport {
    std::vector<RatioSample> samples;
    std::vector<double> scale_sweep;
    std::vector<double> c_potential; // fitted constant per sweep point
    std::vector<double> c_gradient;
    bool finite = true;
    bool stable_potential = false; // fitted constants within a factor 2 across the sweep
    bool stable_gradient = false;
};

inline RatioReport pair_ratio_diagnostics(std::span<const ManyBodyState> states, const PotentialSpec& spec,
                                            const ExternalPotential& A, std::span<const double> scale_sweep) {
    if (states.empty() || scale_sweep.empty()) throw ParameterError("ratio diagnostics: need states and a sweep");
    const auto& g = states.front().grid;
    const int N = states.front().N;
    if (N < 2) throw ParameterError("ratio diagnostics: need at least two particles");
    RatioReport rep;
    rep.scale_sweep.assign(scale_sweep.begin(), scale_sweep.end());
    const ManyBodyOps ops(g, N);
    for (double Ns : scale_sweep) {
        const auto H = ManyBodyHamiltonian::from_spec(g, N, spec, A, Ns);
        const auto& table = H.pair_values();
        const std::size_t M = g.points(), last_stride = 1, first_stride = ipow(M, N - 1);
        double cp = 0.0, cg = 0.0;
        for (std::size_t k = 0; k < states.size(); ++k) {
            const auto& s = states[k];
            H.check(s);
            const double mu = s.measure(), nrm = s.norm() * s.norm();
            double pot = 0.0;
            for (std::size_t f = 0; f < s.amp.size(); ++f) {
                const std::size_t x1 = (f / first_stride) % M, xl = (f / last_stride) % M;
                const double v = table[g.displacement_index(x1, xl)];
                pot += v * v * std::norm(s.amp[f]);
            }
            RatioSample r;
            r.scale_N = Ns;
            r.state = k;
            r.energy = H.expectation(s) / nrm;
            r.potential2 = pot * mu / nrm;
            r.gradient2 = masked_gradient_norm2(ops, s.amp, 0, nullptr, mu) / nrm;
            r.c_potential = r.potential2 / (r.energy + Ns);
            r.c_gradient = Ns * r.gradient2 / (r.energy + 1.0);
            if (!(r.energy + 1.0 > 0.0) || !std::isfinite(r.c_potential) || !std::isfinite(r.c_gradient)) rep.finite = false;
            cp = std::max(cp, r.c_potential);
            cg = std::max(cg, r.c_gradient);
            rep.samples.push_back(r);
        }
        rep.c_potential.push_back(cp);
        rep.c_gradient.push_back(cg);
    }
    auto stable = [](const std::vector<double>& c) {
        const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
        return *lo > 0.0 ? *hi / *lo <= 2.0 : *hi == 0.0;
    };
    rep.stable_potential = rep.finite && stable(rep.c_potential);
    rep.stable_gradient = rep.finite && stable(rep.c_gradient);
    return rep;
}

} // namespace gpcheck

#endif
