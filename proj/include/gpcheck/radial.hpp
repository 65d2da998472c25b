#ifndef GPCHECK_RADIAL_HPP
#define GPCHECK_RADIAL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gpcheck/error.hpp"

namespace gpcheck {

// One linear piece of a radial profile, active on [a, b).
struct Segment {
    double a, b;
    double va, vb;

    double at(double r) const { return va + (vb - va) * (r - a) / (b - a); }
};

// Compactly supported, piecewise-linear radial function. Piecewise-constant
// profiles are the special case va == vb. Zero outside the listed segments.
class RadialPotential {
public:
    RadialPotential() = default;

    explicit RadialPotential(std::vector<Segment> segs) : segs_(std::move(segs)) {
        std::sort(segs_.begin(), segs_.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
        for (std::size_t i = 0; i < segs_.size(); ++i) {
            const auto& s = segs_[i];
            if (!(s.a >= 0.0) || !(s.b > s.a) || !std::isfinite(s.va) || !std::isfinite(s.vb))
                throw ParameterError("radial profile: segment must satisfy 0 <= a < b with finite values");
            if (i > 0 && segs_[i - 1].b > s.a)
                throw ParameterError("radial profile: segments overlap");
        }
    }

    // values[i] on [knots[i], knots[i+1]).
    static RadialPotential piecewise_constant(std::span<const double> knots, std::span<const double> values) {
        if (knots.size() < 2 || values.size() + 1 != knots.size())
            throw ParameterError("piecewise-constant profile needs n+1 knots for n values");
        std::vector<Segment> s;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i)
            s.push_back({knots[i], knots[i + 1], values[i], values[i]});
        return RadialPotential(std::move(s));
    }

    // Linear interpolation between (knots[i], values[i]).
    static RadialPotential piecewise_linear(std::span<const double> knots, std::span<const double> values) {
        if (knots.size() < 2 || values.size() != knots.size())
            throw ParameterError("piecewise-linear profile needs one value per knot");
        std::vector<Segment> s;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i)
            s.push_back({knots[i], knots[i + 1], values[i], values[i + 1]});
        return RadialPotential(std::move(s));
    }

    static RadialPotential step(double a, double b, double v) { return RadialPotential({{a, b, v, v}}); }

    const std::vector<Segment>& segments() const { return segs_; }
    bool empty() const { return segs_.empty(); }

    // Right-continuous value.
    double operator()(double r) const {
        const Segment* s = find(r);
        return s ? s->at(r) : 0.0;
    }
    double right_limit(double r) const { return (*this)(r); }
    double left_limit(double r) const {
        for (const auto& s : segs_)
            if (r > s.a && r <= s.b) return s.at(r);
        return 0.0;
    }

    std::vector<double> knots() const {
        std::vector<double> k;
        for (const auto& s : segs_) {
            k.push_back(s.a);
            k.push_back(s.b);
        }
        std::sort(k.begin(), k.end());
        k.erase(std::unique(k.begin(), k.end()), k.end());
        return k;
    }

    // Smallest r beyond which the function vanishes.
    double support_radius() const {
        for (auto it = segs_.rbegin(); it != segs_.rend(); ++it)
            if (it->va != 0.0 || it->vb != 0.0) return it->b;
        return 0.0;
    }

    double max_value() const {
        double m = segs_.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
        for (const auto& s : segs_) m = std::max({m, s.va, s.vb});
        return m;
    }
    double min_value() const {
        double m = segs_.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        for (const auto& s : segs_) m = std::min({m, s.va, s.vb});
        return m;
    }
    double sup_abs() const { return std::max(std::abs(max_value()), std::abs(min_value())); }

    // Exact integral of v(r) r^power over [lo, hi].
    double integral(double lo, double hi, int power = 0) const {
        double total = 0.0;
        for (const auto& s : segs_) {
            const double x0 = std::max(lo, s.a), x1 = std::min(hi, s.b);
            if (x1 <= x0) continue;
            const double slope = (s.vb - s.va) / (s.b - s.a);
            const double c0 = s.va - slope * s.a;
            const auto prim = [&](double x) {
                return c0 * std::pow(x, power + 1) / (power + 1) + slope * std::pow(x, power + 2) / (power + 2);
            };
            total += prim(x1) - prim(x0);
        }
        return total;
    }
    double average(double lo, double hi) const { return integral(lo, hi) / (hi - lo); }

    // r -> height * v(r * length_scale); a profile on [a,b) moves to [a/length_scale, b/length_scale).
    RadialPotential scaled(double length_scale, double height) const {
        std::vector<Segment> s;
        for (const auto& x : segs_) s.push_back({x.a / length_scale, x.b / length_scale, height * x.va, height * x.vb});
        return RadialPotential(std::move(s));
    }

    RadialPotential restricted(double lo, double hi) const {
        std::vector<Segment> out;
        for (const auto& s : segs_) {
            const double x0 = std::max(lo, s.a), x1 = std::min(hi, s.b);
            if (x1 <= x0) continue;
            out.push_back({x0, x1, s.at(x0), s.at(x1)});
        }
        return RadialPotential(std::move(out));
    }

    friend RadialPotential operator*(double c, const RadialPotential& p) {
        std::vector<Segment> s = p.segs_;
        for (auto& x : s) {
            x.va *= c;
            x.vb *= c;
        }
        return RadialPotential(std::move(s));
    }
    friend RadialPotential operator+(const RadialPotential& p, const RadialPotential& q) { return combine(p, q, 1.0); }
    friend RadialPotential operator-(const RadialPotential& p, const RadialPotential& q) { return combine(p, q, -1.0); }

private:
    const Segment* find(double r) const {
        for (const auto& s : segs_)
            if (r >= s.a && r < s.b) return &s;
        return nullptr;
    }

    static RadialPotential combine(const RadialPotential& p, const RadialPotential& q, double sign) {
        std::vector<double> k = p.knots();
        const auto kq = q.knots();
        k.insert(k.end(), kq.begin(), kq.end());
        std::sort(k.begin(), k.end());
        k.erase(std::unique(k.begin(), k.end()), k.end());
        std::vector<Segment> out;
        for (std::size_t i = 0; i + 1 < k.size(); ++i) {
            const double a = k[i], b = k[i + 1];
            const bool covered = p.find(0.5 * (a + b)) || q.find(0.5 * (a + b));
            if (!covered) continue;
            out.push_back({a, b, p.right_limit(a) + sign * q.right_limit(a), p.left_limit(b) + sign * q.left_limit(b)});
        }
        return RadialPotential(std::move(out));
    }

    std::vector<Segment> segs_;
};

// Sorted radial nodes built from uniform pieces; the first node is the origin of integration.
class RadialGrid {
public:
    RadialGrid() = default;
    explicit RadialGrid(std::vector<double> nodes) : r_(std::move(nodes)) {
        if (r_.size() < 2) throw DomainError("radial grid needs at least two nodes");
        for (std::size_t i = 1; i < r_.size(); ++i)
            if (!(r_[i] > r_[i - 1])) throw DomainError("radial grid nodes must increase");
    }

    static RadialGrid uniform(double lo, double hi, std::size_t intervals) {
        RadialGrid g;
        g.r_.push_back(lo);
        g.append_uniform(hi, intervals);
        return g;
    }

    // Extend to `hi` with `intervals` equal steps.
    RadialGrid& append_uniform(double hi, std::size_t intervals) {
        if (r_.empty() || intervals == 0 || !(hi > r_.back()))
            throw DomainError("radial grid: append needs a larger endpoint and at least one interval");
        const double lo = r_.back();
        for (std::size_t i = 1; i <= intervals; ++i)
            r_.push_back(i == intervals ? hi : lo + (hi - lo) * double(i) / double(intervals));
        return *this;
    }

    std::size_t size() const { return r_.size(); }
    double operator[](std::size_t i) const { return r_[i]; }
    double front() const { return r_.front(); }
    double back() const { return r_.back(); }
    const std::vector<double>& nodes() const { return r_; }
    double max_spacing() const {
        double h = 0.0;
        for (std::size_t i = 1; i < r_.size(); ++i) h = std::max(h, r_[i] - r_[i - 1]);
        return h;
    }

private:
    std::vector<double> r_;
};

// Piece of the integration between consecutive breakpoints; values at start, middle, end.
struct Substep {
    double a, b;
    double u[3];
    double du[3];
};

// Solution of u'' = P(r) u on a grid, resolved at potential knots.
struct RadialSolution {
    RadialPotential P;
    std::vector<double> r, u, du;
    std::vector<Substep> pieces;
    std::vector<std::size_t> node_piece_end; // pieces[0..node_piece_end[i]) lie below r[i]

    void scale(double c) {
        for (auto& x : u) x *= c;
        for (auto& x : du) x *= c;
        for (auto& p : pieces)
            for (int k = 0; k < 3; ++k) {
                p.u[k] *= c;
                p.du[k] *= c;
            }
    }

    // (u, u') at an arbitrary radius inside the grid.
    std::pair<double, double> evaluate(double x) const;

    // Integral over [r0, r_i] of w(r) F(r, u, u') for each node i, by Simpson on the pieces.
    template <class F>
    std::vector<double> cumulative(const RadialPotential* w, F&& f) const {
        std::vector<double> out(r.size(), 0.0);
        double acc = 0.0;
        std::size_t p = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            for (; p < node_piece_end[i]; ++p) acc += piece_integral(pieces[p], w, f);
            out[i] = acc;
        }
        return out;
    }

    template <class F>
    double integral(const RadialPotential* w, F&& f) const {
        double acc = 0.0;
        for (const auto& pc : pieces) acc += piece_integral(pc, w, f);
        return acc;
    }

    template <class F>
    static double piece_integral(const Substep& pc, const RadialPotential* w, F& f) {
        const double m = 0.5 * (pc.a + pc.b);
        const double wa = w ? w->right_limit(pc.a) : 1.0;
        const double wm = w ? (*w)(m) : 1.0;
        const double wb = w ? w->left_limit(pc.b) : 1.0;
        return (pc.b - pc.a) / 6.0 *
               (wa * f(pc.a, pc.u[0], pc.du[0]) + 4.0 * wm * f(m, pc.u[1], pc.du[1]) + wb * f(pc.b, pc.u[2], pc.du[2]));
    }
};

namespace detail {

// Classical RK4 for (u, u')' = (u', P u) across [a, a+h] where P is linear with P(a)=pa, slope s.
inline void rk4(double a, double h, double pa, double slope, double& u, double& du) {
    const auto P = [&](double x) { return pa + slope * (x - a); };
    const double p0 = P(a), p1 = P(a + 0.5 * h), p2 = P(a + h);
    const double k1u = du, k1d = p0 * u;
    const double k2u = du + 0.5 * h * k1d, k2d = p1 * (u + 0.5 * h * k1u);
    const double k3u = du + 0.5 * h * k2d, k3d = p1 * (u + 0.5 * h * k2u);
    const double k4u = du + h * k3d, k4d = p2 * (u + h * k3u);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    du += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
}

inline double slope_on(const RadialPotential& P, double a, double b) {
    return (P.left_limit(b) - P.right_limit(a)) / (b - a);
}

} // namespace detail

inline std::pair<double, double> RadialSolution::evaluate(double x) const {
    if (x < r.front() || x > r.back()) throw DomainError("radial solution: evaluation point outside the grid");
    auto it = std::lower_bound(pieces.begin(), pieces.end(), x, [](const Substep& s, double v) { return s.b < v; });
    if (it == pieces.end()) --it;
    const Substep& pc = *it;
    double u0 = pc.u[0], d0 = pc.du[0];
    const double h = x - pc.a;
    if (h > 0.0) detail::rk4(pc.a, h, P.right_limit(pc.a), detail::slope_on(P, pc.a, pc.b), u0, d0);
    return {u0, d0};
}

// Integrate u'' = P(r) u from grid.front() with (u, u') = (u0, du0). Every grid
// interval is split at the knots of P and at `extra_breaks`, and each piece is
// advanced by two RK4 half steps so the midpoint is available for quadrature.
inline RadialSolution integrate_radial(const RadialPotential& P, const RadialGrid& grid, double u0, double du0,
                                       std::span<const double> extra_breaks = {}) {
    std::vector<double> breaks = P.knots();
    breaks.insert(breaks.end(), extra_breaks.begin(), extra_breaks.end());
    std::sort(breaks.begin(), breaks.end());

    RadialSolution sol;
    sol.P = P;
    sol.r = grid.nodes();
    sol.u.assign(grid.size(), 0.0);
    sol.du.assign(grid.size(), 0.0);
    sol.node_piece_end.assign(grid.size(), 0);
    sol.pieces.reserve(grid.size() + breaks.size());
    double u = u0, du = du0;
    sol.u[0] = u;
    sol.du[0] = du;
    constexpr double overflow_guard = 1e150;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        double a = grid[i];
        const double end = grid[i + 1];
        auto bk = std::upper_bound(breaks.begin(), breaks.end(), a);
        while (a < end) {
            double b = end;
            if (bk != breaks.end() && *bk < end) b = *bk++;
            const double pa = P.right_limit(a), s = detail::slope_on(P, a, b);
            const double h = b - a;
            Substep pc{a, b, {u, 0, 0}, {du, 0, 0}};
            detail::rk4(a, 0.5 * h, pa, s, u, du);
            pc.u[1] = u;
            pc.du[1] = du;
            detail::rk4(a + 0.5 * h, 0.5 * h, pa + s * 0.5 * h, s, u, du);
            pc.u[2] = u;
            pc.du[2] = du;
            sol.pieces.push_back(pc);
            a = b;
        }
        sol.u[i + 1] = u;
        sol.du[i + 1] = du;
        sol.node_piece_end[i + 1] = sol.pieces.size();
        if (!std::isfinite(u) || !std::isfinite(du)) throw IntegrationFailure("radial integration produced non-finite values");
        if (std::abs(u) > overflow_guard || std::abs(du) > overflow_guard) {
            sol.scale(1.0 / overflow_guard);
            u /= overflow_guard;
            du /= overflow_guard;
        }
    }
    return sol;
}

} // namespace gpcheck

#endif
