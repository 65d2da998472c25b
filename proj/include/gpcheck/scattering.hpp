#ifndef GPCHECK_SCATTERING_HPP
#define GPCHECK_SCATTERING_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gpcheck/error.hpp"
#include "gpcheck/potentials.hpp"
#include "gpcheck/radial.hpp"

namespace gpcheck {

// Zero-energy solution u = r f of  -u'' + V/2 u = 0,  normalised so that u = r - a
// beyond the support of V (or f(r_end) = 1 for the modified problem).
struct ScatteringSolution {
    RadialGrid grid;
    RadialSolution sol; // normalised samples and quadrature pieces
    double a = 0.0;          // tail intercept
    double a_integral = 0.0; // (1/4pi) int V/2 j d^3x
    double normalization = 1.0;

    const std::vector<double>& u() const { return sol.u; }
    // f = u / r, with f(0) = u'(0).
    double f_at_node(std::size_t i) const { return sol.r[i] > 0.0 ? sol.u[i] / sol.r[i] : sol.du[i]; }
    double f(double r) const {
        const auto [u, du] = sol.evaluate(r);
        return r > 0.0 ? u / r : du;
    }
};

// Step size resolving every feature of V: >= 64 steps across the narrowest
// knot interval and kappa h <= 0.005 for the largest local wavenumber of V/2.
inline double radial_step(const RadialPotential& V, double fallback_length = 1.0) {
    const auto k = V.knots();
    double gap = fallback_length;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) gap = std::min(gap, k[i + 1] - k[i]);
    const double kappa = std::sqrt(0.5 * V.sup_abs());
    double h = gap / 64.0;
    if (kappa > 0.0) h = std::min(h, 0.005 / kappa);
    return h;
}

inline RadialGrid default_scattering_grid(const RadialPotential& V, double r_max = 0.0) {
    const double support = V.support_radius();
    if (r_max <= 0.0) r_max = support > 0.0 ? 1.5 * support : 1.0;
    const double h = radial_step(V, support > 0.0 ? support : 1.0);
    return RadialGrid::uniform(0.0, r_max, std::size_t(std::ceil(r_max / h)));
}

inline ScatteringSolution solve_zero_energy(const RadialPotential& V, double r_max, const RadialGrid& grid) {
    const double support = V.support_radius();
    if (!(support < r_max)) throw DomainError("scattering: potential support must lie inside [0, r_max)");
    if (grid.front() != 0.0 || grid.back() < r_max) throw DomainError("scattering: grid must cover [0, r_max]");

    ScatteringSolution out;
    out.grid = grid;
    out.sol = integrate_radial(0.5 * V, grid, 0.0, 1.0);
    auto& s = out.sol;

    double umax = 0.0;
    for (double x : s.u) umax = std::max(umax, std::abs(x));
    if (umax == 0.0) throw IntegrationFailure("scattering: solution vanishes identically");
    const double slope = s.du.back();
    if (std::abs(slope) <= 1e-14 * umax)
        throw IntegrationFailure("scattering: vanishing tail slope (zero-energy resonance)");
    const double a = s.r.back() - s.u.back() / slope;

    double resid = 0.0;
    std::size_t tail_points = 0;
    for (std::size_t i = 0; i < s.r.size(); ++i) {
        if (s.r[i] < support) continue;
        ++tail_points;
        resid = std::max(resid, std::abs(s.u[i] - slope * (s.r[i] - a)));
    }
    if (tail_points < 2 || resid > 1e-9 * umax)
        throw IntegrationFailure("scattering: tail of the solution is not affine");

    out.normalization = slope;
    s.scale(1.0 / slope);
    out.a = a;
    const RadialPotential half = 0.5 * V;
    out.a_integral = s.integral(&half, [](double r, double u, double) { return u * r; });
    return out;
}

inline ScatteringSolution solve_zero_energy(const RadialPotential& V) {
    const auto grid = default_scattering_grid(V);
    return solve_zero_energy(V, grid.back(), grid);
}

inline double scattering_length(const RadialPotential& V) { return solve_zero_energy(V).a; }

struct MonotonicityReport {
    bool monotone = true;
    double max_relative_error = 0.0; // t' from finite differences vs a_r / r^2
    std::size_t points_compared = 0;
};

// t = f = u/r must be nondecreasing with t'(r) = a_r / r^2,
// a_r = int_0^r V/2 t r'^2 dr'.
inline MonotonicityReport monotonicity_check(const ScatteringSolution& sc, const RadialPotential& V) {
    const auto& s = sc.sol;
    const std::size_t n = s.r.size();
    MonotonicityReport rep;
    std::vector<double> t(n);
    double tmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = sc.f_at_node(i);
        tmax = std::max(tmax, std::abs(t[i]));
    }
    for (std::size_t i = 1; i < n; ++i)
        if (t[i] < t[i - 1] - 1e-12 * tmax) rep.monotone = false;

    const RadialPotential half = 0.5 * V;
    const auto ar = s.cumulative(&half, [](double r, double u, double) { return u * r; });
    const auto knots = V.knots();
    const auto straddles = [&](double lo, double hi) {
        for (double k : knots)
            if (k > lo && k < hi) return true;
        return false;
    };
    double scale = 0.0;
    for (std::size_t i = 1; i < n; ++i) scale = std::max(scale, std::abs(ar[i]) / (s.r[i] * s.r[i]));
    double err = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (straddles(s.r[i - 1], s.r[i + 1])) continue;
        const double fd = (t[i + 1] - t[i - 1]) / (s.r[i + 1] - s.r[i - 1]);
        err = std::max(err, std::abs(fd - ar[i] / (s.r[i] * s.r[i])));
        ++rep.points_compared;
    }
    rep.max_relative_error = scale > 0.0 ? err / scale : err;
    return rep;
}

// Solution of the modified problem: W is a shell of height a N^{3 beta - 1} on
// (N^-beta, R_beta], and f solves (-Delta + (V1 - W)/2) f = 0 with f(R_beta) = 1.
struct ModifiedScattering {
    double N = 0.0, beta1 = 0.0;
    double rho = 0.0; // N^-beta1
    double R_beta = 0.0;
    double K_beta = 1.0;
    double w_height = 0.0;
    double a = 0.0;
    RadialPotential V1, W;
    ScatteringSolution f_solution; // u = r f normalised to f(R_beta) = 1
    // root search bookkeeping
    double R_cap = 0.0;
    double scan_ratio = 1.05;
    bool refinement_clean = true;
    double s_at_root = 0.0;
    double s_scale = 0.0; // int |V1 - W| f, for relative statements

    double f(double r) const { return r >= R_beta ? 1.0 : f_solution.f(r); }
    double g(double r) const { return 1.0 - f(r); }
};

struct RootSearchOptions {
    double scan_ratio = 1.05;
    double refine_ratio = 1.005;
    double cap_factor = 10.0;
    std::size_t outer_intervals = 2048;
};

namespace detail {

// s(R_c) = 8 pi R_c (R_c u'(R_c) - u(R_c)) / u(R_c), from the solution of the
// problem with W extended to the cap; on [0, R_c] it coincides with the solution for W^{(R_c)}.
inline double s_of(const RadialSolution& sol, double Rc) {
    const auto [u, du] = sol.evaluate(Rc);
    return 8.0 * std::numbers::pi * Rc * (Rc * du - u) / u;
}

inline RadialGrid modified_grid(double inner, double h_inner, double rho, double outer, std::size_t outer_intervals,
                                double h_outer) {
    RadialGrid g = RadialGrid::uniform(0.0, inner, std::size_t(std::ceil(inner / h_inner)));
    if (rho > inner) g.append_uniform(rho, 256);
    if (outer > rho) g.append_uniform(outer, std::max(outer_intervals, std::size_t(std::ceil((outer - rho) / h_outer))));
    return g;
}

} // namespace detail

inline ModifiedScattering find_minimal_R(const PotentialSpec& spec, double N, double beta1,
                                         const RootSearchOptions& opt = {}) {
    if (!(N >= 1.0) || !(beta1 > 0.0 && beta1 < 1.0)) throw DomainError("modified scattering: need N >= 1, beta1 in (0,1)");
    const RadialPotential V = spec.potential();
    const double rho = std::pow(N, -beta1);
    const double support = V.support_radius();
    if (!(support / N < rho)) throw DomainError("modified scattering: R/N must be smaller than N^-beta1");

    ModifiedScattering ms;
    ms.N = N;
    ms.beta1 = beta1;
    ms.rho = rho;
    ms.scan_ratio = opt.scan_ratio;
    ms.a = V.empty() || V.sup_abs() == 0.0 ? 0.0 : scattering_length(V);
    ms.V1 = scaled_potential(V, N, 1.0);
    ms.w_height = ms.a * std::pow(N, 3.0 * beta1 - 1.0);

    const double h_inner = radial_step(V, support > 0.0 ? support : 1.0) / N;
    const double inner = support > 0.0 ? support / N : 0.0;
    const auto build = [&](double outer, const RadialPotential& W) {
        const double kw = std::sqrt(0.5 * W.sup_abs());
        const double h_outer = std::min(rho / 1024.0, kw > 0.0 ? 0.005 / kw : rho);
        const auto grid = inner > 0.0 ? detail::modified_grid(inner, h_inner, rho, outer, opt.outer_intervals, h_outer)
                                      : RadialGrid::uniform(0.0, outer, std::max<std::size_t>(opt.outer_intervals,
                                                                                             std::size_t(std::ceil(outer / h_outer))));
        return std::pair{grid, integrate_radial(0.5 * (ms.V1 - W), grid, 0.0, 1.0)};
    };

    double Rb = rho;
    if (ms.a != 0.0) {
        ms.R_cap = opt.cap_factor * rho * std::max(1.0, 100.0 * ms.a * std::pow(N, beta1 - 1.0));
        const auto Wcap = RadialPotential::step(rho, ms.R_cap, ms.w_height);
        const auto [grid, sol] = build(ms.R_cap, Wcap);
        const auto s = [&](double Rc) { return detail::s_of(sol, Rc); };

        double lo = rho, s_lo = s(lo);
        double hi = lo, s_hi = s_lo;
        bool found = false;
        while (hi < ms.R_cap) {
            lo = hi;
            s_lo = s_hi;
            hi = std::min(lo * opt.scan_ratio, ms.R_cap);
            s_hi = s(hi);
            if ((s_lo > 0.0) != (s_hi > 0.0)) {
                found = true;
                break;
            }
        }
        if (!found) throw RootNotFound("modified scattering: no sign change of s below R_cap", s(rho), s_hi);
        for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
            const double mid = 0.5 * (lo + hi), sm = s(mid);
            if ((sm > 0.0) == (s_lo > 0.0)) {
                lo = mid;
                s_lo = sm;
            } else {
                hi = mid;
            }
        }
        Rb = std::abs(s_lo) < std::abs(s(hi)) ? lo : hi;

        // confirm there is no earlier sign change on a finer scan
        const double s0 = s(rho);
        for (double x = rho * opt.refine_ratio; x < Rb * (1.0 - 1e-9); x *= opt.refine_ratio)
            if ((s(x) > 0.0) != (s0 > 0.0)) ms.refinement_clean = false;
    }
    ms.R_beta = Rb;
    ms.W = Rb > rho ? RadialPotential::step(rho, Rb, ms.w_height) : RadialPotential{};

    auto [grid, sol] = build(Rb, ms.W);
    const double uR = sol.u.back();
    if (!(uR > 0.0)) throw IntegrationFailure("modified scattering: f(R_beta) is not positive");
    sol.scale(Rb / uR);
    ms.f_solution.grid = grid;
    ms.f_solution.sol = std::move(sol);
    ms.f_solution.normalization = uR / Rb;
    const auto& fs = ms.f_solution.sol;
    ms.s_at_root = 8.0 * std::numbers::pi * Rb * (Rb * fs.du.back() - fs.u.back()) / fs.u.back();

    const RadialPotential diff = ms.V1 - ms.W;
    ms.s_scale = 4.0 * std::numbers::pi *
                 fs.integral(nullptr, [&](double r, double u, double) { return std::abs(diff(r)) * u * r; });

    const double j_edge = 1.0 - ms.a / (N * rho);
    ms.K_beta = j_edge / ms.f_solution.f(rho);
    return ms;
}

// int (V1 - W) f over B_{R_beta} by quadrature; vanishes at the constructed root.
inline double s_quadrature(const ModifiedScattering& ms) {
    const RadialPotential diff = ms.V1 - ms.W;
    return 4.0 * std::numbers::pi * ms.f_solution.sol.integral(&diff, [](double r, double u, double) { return u * r; });
}

// f'(r) from the Gauss identity  f'(r) = (1/(8 pi r^2)) int_{B_r} (V1 - W) f.
inline double gauss_derivative(const ModifiedScattering& ms, double r) {
    const RadialPotential diff = (ms.V1 - ms.W).restricted(0.0, r);
    const double inner = 4.0 * std::numbers::pi *
                         ms.f_solution.sol.integral(&diff, [](double x, double u, double) { return u * x; });
    return inner / (8.0 * std::numbers::pi * r * r);
}

struct GNorms {
    double L1, L3half, L2, Linf;
};

inline GNorms g_norms(const ModifiedScattering& ms) {
    const auto& s = ms.f_solution.sol;
    const auto g = [](double r, double u, double du) { return std::max(0.0, 1.0 - (r > 0.0 ? u / r : du)); };
    const double fourpi = 4.0 * std::numbers::pi;
    GNorms n{};
    n.L1 = fourpi * s.integral(nullptr, [&](double r, double u, double du) { return g(r, u, du) * r * r; });
    n.L3half = std::pow(fourpi * s.integral(nullptr, [&](double r, double u, double du) {
                            return std::pow(g(r, u, du), 1.5) * r * r;
                        }),
                        2.0 / 3.0);
    n.L2 = std::sqrt(fourpi * s.integral(nullptr, [&](double r, double u, double du) {
                         const double x = g(r, u, du);
                         return x * x * r * r;
                     }));
    n.Linf = 0.0;
    for (std::size_t i = 0; i < s.r.size(); ++i) n.Linf = std::max(n.Linf, g(s.r[i], s.u[i], s.du[i]));
    return n;
}

struct WIntegrals {
    double NVf, NWf, NW;
};

inline WIntegrals w_integrals(const ModifiedScattering& ms) {
    const auto& s = ms.f_solution.sol;
    const double fourpi = 4.0 * std::numbers::pi;
    const auto ur = [](double r, double u, double) { return u * r; };
    WIntegrals w{};
    w.NVf = ms.N * fourpi * s.integral(&ms.V1, ur);
    w.NWf = ms.N * fourpi * s.integral(&ms.W, ur);
    w.NW = ms.N * ms.w_height * fourpi / 3.0 * (std::pow(ms.R_beta, 3) - std::pow(ms.rho, 3));
    return w;
}

struct PointwiseGBound {
    double a_core = 0.0;  // scattering length of V/2 restricted to the core
    double C_inner = 0.0; // smallest C with g <= a_core/(N r) + C/N for N r <= R
    double C_outer = 0.0; // smallest C with g <= a/(N r) + C N^{-1+beta1} otherwise
};

inline PointwiseGBound pointwise_g_bound(const ModifiedScattering& ms, const PotentialSpec& spec) {
    PointwiseGBound b;
    b.a_core = scattering_length(spec.vplus());
    const auto& s = ms.f_solution.sol;
    const double N = ms.N;
    for (std::size_t i = 1; i < s.r.size(); ++i) {
        const double r = s.r[i];
        const double g = 1.0 - s.u[i] / r;
        if (N * r <= spec.R())
            b.C_inner = std::max(b.C_inner, N * (g - b.a_core / (N * r)));
        else
            b.C_outer = std::max(b.C_outer, std::pow(N, 1.0 - ms.beta1) * (g - ms.a / (N * r)));
    }
    return b;
}

} // namespace gpcheck

#endif
