#ifndef GPCHECK_POTENTIALS_HPP
#define GPCHECK_POTENTIALS_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gpcheck/error.hpp"
#include "gpcheck/radial.hpp"

namespace gpcheck {

// Radial interaction V = V+ - V-, a repulsive core inside r2 and an attractive
// shell on [r2, R). Both profiles are stored as nonnegative functions.
class PotentialSpec {
public:
    PotentialSpec() = default;
    PotentialSpec(double r1, double r2, double R, double lambda_plus, double lambda_minus, RadialPotential vplus,
                  RadialPotential vminus, double epsilon)
        : r1_(r1), r2_(r2), R_(R), lambda_plus_(lambda_plus), lambda_minus_(lambda_minus), vplus_(std::move(vplus)),
          vminus_(std::move(vminus)), epsilon_(epsilon) {
        if (!(r1 > 0.0 && r1 <= r2 && r2 < R)) throw ParameterError("potential: need 0 < r1 <= r2 < R");
        if (!(lambda_plus >= 0.0) || !(lambda_minus >= 0.0)) throw ParameterError("potential: lambda values must be >= 0");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("potential: epsilon must lie in (0, 1)");
        if (vplus_.min_value() < 0.0 || vminus_.min_value() < 0.0)
            throw ParameterError("potential: profiles must be nonnegative");
        for (const auto& s : vplus_.segments())
            if (s.b > r2) throw ParameterError("potential: repulsive profile extends beyond r2");
        for (const auto& s : vminus_.segments())
            if (s.a < r2 || s.b > R) throw ParameterError("potential: attractive profile must live on [r2, R]");
    }

    // Constant barrier on [0, r2) and constant well on [r2, R).
    static PotentialSpec square(double r1, double r2, double R, double barrier, double well, double epsilon) {
        RadialPotential vp = barrier > 0.0 ? RadialPotential::step(0.0, r2, barrier) : RadialPotential{};
        RadialPotential vm = well > 0.0 ? RadialPotential::step(r2, R, well) : RadialPotential{};
        return PotentialSpec(r1, r2, R, barrier, well, std::move(vp), std::move(vm), epsilon);
    }

    double r1() const { return r1_; }
    double r2() const { return r2_; }
    double R() const { return R_; }
    double lambda_plus() const { return lambda_plus_; }
    double lambda_minus() const { return lambda_minus_; }
    double epsilon() const { return epsilon_; }
    const RadialPotential& vplus() const { return vplus_; }
    const RadialPotential& vminus() const { return vminus_; }

    RadialPotential potential() const { return vplus_ - vminus_; }
    bool is_zero() const { return vplus_.sup_abs() == 0.0 && vminus_.sup_abs() == 0.0; }

    PotentialSpec with_epsilon(double e) const {
        return PotentialSpec(r1_, r2_, R_, lambda_plus_, lambda_minus_, vplus_, vminus_, e);
    }
    PotentialSpec with_well_scaled(double c) const {
        return PotentialSpec(r1_, r2_, R_, lambda_plus_, c * lambda_minus_, vplus_, c * vminus_, epsilon_);
    }

private:
    double r1_ = 1.0, r2_ = 1.0, R_ = 2.0;
    double lambda_plus_ = 0.0, lambda_minus_ = 0.0;
    RadialPotential vplus_, vminus_;
    double epsilon_ = 0.5;
};

// r -> N^{-1+3 beta} V(N^beta r). beta = 1 gives N^2 V(N r).
inline RadialPotential scaled_potential(const RadialPotential& v, double N, double beta) {
    if (!(N >= 1.0) || !(beta >= 0.0 && beta <= 1.0)) throw DomainError("scaled potential: need N >= 1 and beta in [0,1]");
    return v.scaled(std::pow(N, beta), std::pow(N, -1.0 + 3.0 * beta));
}
inline RadialPotential scaled_potential(const PotentialSpec& spec, double N, double beta) {
    return scaled_potential(spec.potential(), N, beta);
}

// Maximal number of lattice cubes of side b1/sqrt(3) meeting a closed ball of
// radius b2, maximised over ball centres on a uniform sweep of one lattice cell.
// Closed cubes and closed balls: tangent contacts count.
inline int covering_number(double b1, double b2, int sweep = 32) {
    if (!(b1 > 0.0) || !(b2 > 0.0)) throw DomainError("covering number: radii must be positive");
    if (sweep < 2) throw DomainError("covering number: sweep resolution must be >= 2");
    const double s = b1 / std::sqrt(3.0);
    const double b2sq = b2 * b2;
    const auto axis_gap = [s](long i, double x) {
        const double lo = double(i) * s, hi = double(i + 1) * s;
        return x < lo ? lo - x : (x > hi ? x - hi : 0.0);
    };
    const auto count_at = [&](double x, double y, double z) {
        const long ix0 = long(std::floor((x - b2) / s)) - 1, ix1 = long(std::floor((x + b2) / s)) + 1;
        const long iy0 = long(std::floor((y - b2) / s)) - 1, iy1 = long(std::floor((y + b2) / s)) + 1;
        long total = 0;
        for (long i = ix0; i <= ix1; ++i) {
            const double gx = axis_gap(i, x);
            if (gx * gx > b2sq) continue;
            for (long j = iy0; j <= iy1; ++j) {
                const double gy = axis_gap(j, y);
                const double rest = b2sq - gx * gx - gy * gy;
                if (rest < 0.0) continue;
                const double h = std::sqrt(rest);
                total += long(std::floor((z + h) / s)) - long(std::ceil((z - h) / s)) + 2;
            }
        }
        return total;
    };
    // Reflections and axis permutations of the cell leave the count unchanged,
    // so the sweep covers 0 <= x <= y <= z <= s/2.
    const int half = sweep / 2;
    long best = 0;
    for (int i = 0; i <= half; ++i)
        for (int j = i; j <= half; ++j)
            for (int k = j; k <= half; ++k) {
                const double x = s * i / sweep, y = s * j / sweep, z = s * k / sweep;
                best = std::max(best, count_at(x, y, z));
            }
    return int(best);
}

namespace detail {

// Exact two-node element of the form  int_0^h (u'^2 + k2 u^2)  for constant k2,
// minimised over functions with prescribed end values: returns (diag, offdiag).
inline std::pair<double, double> exact_element(double h, double k2) {
    const double z = k2 * h * h;
    if (std::abs(z) < 1e-4) {
        // series in z = k2 h^2
        const double diag = (1.0 + z / 3.0 - z * z / 45.0) / h;
        const double off = -(1.0 - z / 6.0 + 7.0 * z * z / 360.0) / h;
        return {diag, off};
    }
    if (k2 > 0.0) {
        const double k = std::sqrt(k2);
        return {k / std::tanh(k * h), -k / std::sinh(k * h)};
    }
    const double q = std::sqrt(-k2);
    return {q / std::tan(q * h), -q / std::sin(q * h)};
}

// Node set with every profile knot as a node and uniform spacing <= h_max between knots.
inline std::vector<double> knot_aligned_nodes(std::vector<double> knots, double lo, double hi, double h_max,
                                              std::size_t min_intervals) {
    knots.push_back(lo);
    knots.push_back(hi);
    std::sort(knots.begin(), knots.end());
    std::vector<double> k;
    for (double x : knots)
        if (x >= lo && x <= hi && (k.empty() || x > k.back())) k.push_back(x);
    h_max = std::min(h_max, (hi - lo) / double(min_intervals));
    std::vector<double> nodes{k.front()};
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        const auto n = std::size_t(std::ceil((k[i + 1] - k[i]) / h_max));
        for (std::size_t j = 1; j <= n; ++j) nodes.push_back(j == n ? k[i + 1] : k[i] + (k[i + 1] - k[i]) * double(j) / double(n));
    }
    return nodes;
}

} // namespace detail

struct ErInfimumResult {
    double value;      // -inf when the form is unbounded below
    std::size_t nodes; // radial nodes used
    double max_spacing;
};

// Infimum over radial phi with phi(R) = 1 of
//   int_{B_R} |grad phi|^2 + n1/(1-eps) (2V+ - 4V-) |phi|^2.
// With u = r phi this is 4 pi [ int_0^R u'^2 + c U u^2 dr - R ] with u(0)=0, u(R)=R.
// The one-dimensional form is discretised with exact elements on each cell
// (cell-averaged U), which is exact for piecewise-constant profiles, and the
// interior minimiser is obtained from the tridiagonal system.
inline ErInfimumResult er_infimum_detail(const PotentialSpec& spec, int n1, std::size_t min_intervals = 2048) {
    const double c = double(n1) / (1.0 - spec.epsilon());
    const RadialPotential U = 2.0 * spec.vplus() - 4.0 * spec.vminus();
    const double R = spec.R();
    const double kmax = std::sqrt(c * std::max(U.sup_abs(), 1e-300));
    double h_max = 0.05 / kmax;
    const std::size_t cap = std::size_t(1) << 20;
    h_max = std::max(h_max, R / double(cap));
    const auto x = detail::knot_aligned_nodes(U.knots(), 0.0, R, h_max, min_intervals);
    const std::size_t M = x.size() - 1; // unknowns u_1..u_{M-1}

    std::vector<double> diag(M + 1, 0.0), off(M, 0.0);
    double hmax_used = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double h = x[i + 1] - x[i];
        hmax_used = std::max(hmax_used, h);
        const auto [d, o] = detail::exact_element(h, c * U.average(x[i], x[i + 1]));
        diag[i] += d;
        diag[i + 1] += d;
        off[i] = o;
    }
    // LDL^T on the interior block; rhs = -off[M-1] * R at the last interior node.
    std::vector<double> piv(M, 0.0), rhs(M, 0.0);
    const double scale = 2.0 / hmax_used;
    for (std::size_t i = 1; i < M; ++i) {
        piv[i] = diag[i];
        if (i > 1) piv[i] -= off[i - 1] * off[i - 1] / piv[i - 1];
        if (std::abs(piv[i]) < 1e-13 * scale)
            throw NumericalDegeneracy("E_R form: singular tridiagonal system", hmax_used);
        if (piv[i] < 0.0) return {-std::numeric_limits<double>::infinity(), M + 1, hmax_used};
    }
    rhs[M - 1] = -off[M - 1] * R;
    for (std::size_t i = 2; i < M; ++i) rhs[i] -= off[i - 1] / piv[i - 1] * rhs[i - 1];
    std::vector<double> u(M + 1, 0.0);
    u[M] = R;
    for (std::size_t i = M - 1; i >= 1; --i) {
        u[i] = (rhs[i] - (i + 1 < M ? off[i] * u[i + 1] : 0.0)) / piv[i];
        if (i == 1) break;
    }
    // At the minimiser the interior equations hold, so Q = u_M (diag_M u_M + off_{M-1} u_{M-1}).
    const double Q = R * (diag[M] * R + off[M - 1] * u[M - 1]);
    return {4.0 * std::numbers::pi * (Q - R), M + 1, hmax_used};
}

inline double er_infimum(const PotentialSpec& spec) {
    return er_infimum_detail(spec, covering_number(spec.r1(), spec.R())).value;
}

struct ValidationReport {
    int n1 = 0, n2 = 0;
    bool core_check = false, sign_structure_check = false, lambda_ratio_check = false;
    double er_infimum = 0.0;
    bool er_check = false;
    bool overall = false;
    double largest_passing_epsilon = 0.0; // 0 when no grid value passes
    double tol_form = 1e-8;
    int covering_sweep = 32;
    std::size_t er_nodes = 0;
};

inline ValidationReport validate_assumption(const PotentialSpec& spec, double tol_form = 1e-8, int sweep = 32) {
    ValidationReport rep;
    rep.tol_form = tol_form;
    rep.covering_sweep = sweep;
    rep.n1 = covering_number(spec.r1(), spec.R(), sweep);
    rep.n2 = covering_number(spec.r1(), 3.0 * spec.R(), sweep);

    double core_min = std::numeric_limits<double>::infinity();
    double covered = 0.0;
    const RadialPotential core = spec.vplus().restricted(0.0, spec.r1());
    for (const auto& s : core.segments()) {
        core_min = std::min({core_min, s.va, s.vb});
        covered += s.b - s.a;
    }
    rep.core_check = covered >= spec.r1() * (1.0 - 1e-12) && core_min >= spec.lambda_plus() && spec.lambda_plus() > 0.0;

    const double vm_max = spec.vminus().max_value();
    rep.sign_structure_check = spec.vplus().min_value() >= 0.0 && spec.vminus().min_value() >= 0.0 &&
                               std::abs(vm_max - spec.lambda_minus()) <= 1e-12 * std::max(1.0, spec.lambda_minus());
    rep.lambda_ratio_check = spec.lambda_plus() > 8.0 * rep.n2 * spec.lambda_minus();

    const auto er = er_infimum_detail(spec, rep.n1);
    rep.er_infimum = er.value;
    rep.er_nodes = er.nodes;
    rep.er_check = er.value >= -tol_form;
    for (int k = 1; k <= 99; ++k) {
        const double e = k / 100.0;
        if (er_infimum_detail(spec.with_epsilon(e), rep.n1).value >= -tol_form) rep.largest_passing_epsilon = e;
    }
    rep.overall = rep.core_check && rep.sign_structure_check && rep.lambda_ratio_check && rep.er_check;
    return rep;
}

} // namespace gpcheck

#endif
