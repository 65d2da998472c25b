#ifndef GPCHECK_GP_HPP
#define GPCHECK_GP_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "gpcheck/error.hpp"
#include "gpcheck/fft.hpp"
#include "gpcheck/grid.hpp"

namespace gpcheck {

// Bounded one-body potential A_t(x).
class ExternalPotential {
public:
    using Fn = std::function<double(std::span<const double> x, double t)>;

    ExternalPotential() : fn_([](std::span<const double>, double) { return 0.0; }), sup_(0.0), dsup_(0.0), static_(true) {}
    ExternalPotential(Fn fn, double sup_bound, double time_derivative_bound, bool is_static)
        : fn_(std::move(fn)), sup_(sup_bound), dsup_(time_derivative_bound), static_(is_static) {
        if (!(sup_bound >= 0.0)) throw ParameterError("external potential: sup bound must be >= 0");
    }

    static ExternalPotential zero() { return {}; }
    static ExternalPotential constant(double c) {
        return {[c](std::span<const double>, double) { return c; }, std::abs(c), 0.0, true};
    }
    // omega2 |x|^2 capped at omega2 cap^2: harmonic near the origin, bounded on R^d.
    static ExternalPotential capped_harmonic(double omega2, double cap) {
        return {[omega2, cap](std::span<const double> x, double) {
                    double r2 = 0.0;
                    for (double c : x) r2 += c * c;
                    return omega2 * std::min(r2, cap * cap);
                },
                std::abs(omega2) * cap * cap, 0.0, true};
    }
    // (1 + amp sin(freq t)) * base(x)
    static ExternalPotential modulated(const ExternalPotential& base, double amp, double freq) {
        auto f = base.fn_;
        return {[f, amp, freq](std::span<const double> x, double t) { return (1.0 + amp * std::sin(freq * t)) * f(x, 0.0); },
                (1.0 + std::abs(amp)) * base.sup_, std::abs(amp * freq) * base.sup_, false};
    }

    double operator()(std::span<const double> x, double t) const { return fn_(x, t); }
    double sup_bound() const { return sup_; }
    double time_derivative_bound() const { return dsup_; }
    bool is_static() const { return static_; }

    // Values on the grid; every sample is checked against the sup bound.
    std::vector<double> sample(const PeriodicGrid& g, double t) const {
        std::vector<double> out(g.points());
        double x[3];
        int d[3];
        for (std::size_t i = 0; i < out.size(); ++i) {
            g.digits(i, d);
            for (int a = 0; a < g.dim; ++a) x[a] = g.coordinate(d[a]);
            out[i] = fn_(std::span<const double>(x, std::size_t(g.dim)), t);
            if (std::abs(out[i]) > sup_ * (1.0 + 1e-12) + 1e-300)
                throw DomainError("external potential: sample exceeds the declared sup bound");
        }
        return out;
    }

private:
    Fn fn_;
    double sup_, dsup_;
    bool static_;
};

struct GPField {
    PeriodicGrid grid;
    std::vector<cd> values;
    double time = 0.0;

    GPField() = default;
    GPField(PeriodicGrid g, std::vector<cd> v, double t = 0.0) : grid(g), values(std::move(v)), time(t) {
        if (values.size() != grid.points()) throw DimensionError("gp field: value count does not match grid");
    }

    double norm() const {
        double s = 0.0;
        for (const auto& z : values) s += std::norm(z);
        return std::sqrt(s * grid.cell_volume());
    }
    void normalize() {
        const double n = norm();
        if (n == 0.0) throw DomainError("gp field: cannot normalise the zero field");
        for (auto& z : values) z /= n;
    }

    // (2 pi sigma^2)^{-d/4} exp(-|x - x0|^2 / (4 sigma^2)) e^{i k.x}, normalised on the grid.
    static GPField gaussian(const PeriodicGrid& g, double sigma, std::span<const double> center = {},
                            std::span<const double> momentum = {}) {
        std::vector<cd> v(g.points());
        int d[3];
        for (std::size_t i = 0; i < v.size(); ++i) {
            g.digits(i, d);
            double r2 = 0.0, phase = 0.0;
            for (int a = 0; a < g.dim; ++a) {
                const double x = g.coordinate(d[a]);
                const double c = a < int(center.size()) ? center[a] : 0.0;
                r2 += (x - c) * (x - c);
                if (a < int(momentum.size())) phase += momentum[a] * x;
            }
            v[i] = std::exp(-r2 / (4.0 * sigma * sigma)) * std::polar(1.0, phase);
        }
        GPField f(g, std::move(v));
        f.normalize();
        return f;
    }
    static GPField plane_wave(const PeriodicGrid& g, std::span<const int> mode) {
        std::vector<cd> v(g.points());
        int d[3];
        for (std::size_t i = 0; i < v.size(); ++i) {
            g.digits(i, d);
            double phase = 0.0;
            for (int a = 0; a < g.dim; ++a) phase += 2.0 * std::numbers::pi / g.L * mode[a] * g.coordinate(d[a]);
            v[i] = std::polar(1.0, phase);
        }
        GPField f(g, std::move(v));
        f.normalize();
        return f;
    }
};

// Spectral machinery for one grid: plans and k^2 table.
class GPSolver {
public:
    explicit GPSolver(const PeriodicGrid& g) : grid_(g), scratch_(g.points()), k2_(g.points()) {
        plan_ = std::make_unique<FftPlan>(std::vector<int>(std::size_t(g.dim), g.n), all_axes(g.dim), scratch_.data());
        for (std::size_t i = 0; i < k2_.size(); ++i) k2_[i] = g.k2(i);
    }

    const PeriodicGrid& grid() const { return grid_; }

    // One Strang step: phase(dt/2), kinetic(dt), phase(dt/2) with A at the step midpoint
    // and the nonlinearity re-evaluated for the second half. Negative dt runs backwards.
    void step(GPField& f, double a, const ExternalPotential& pot, double dt) {
        require_same_grid(f.grid, grid_);
        if (dt == 0.0 || !std::isfinite(dt)) throw DomainError("gp step: dt must be finite and nonzero");
        const auto A = pot.sample(grid_, f.time + 0.5 * dt);
        const double g = 8.0 * std::numbers::pi * a;
        double peak = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) peak = std::max(peak, std::abs(A[i] + g * std::norm(f.values[i])));
        if (std::abs(dt) * peak > std::numbers::pi) throw StepTooLarge("gp step: dt times local potential exceeds pi");
        half_phase(f, A, g, dt);
        kinetic(f, dt);
        half_phase(f, A, g, dt);
        f.time += dt;
    }

    double energy(const GPField& f, double a, const ExternalPotential& pot) const {
        return kinetic_energy(f) + potential_energy(f, a, pot);
    }
    double kinetic_energy(const GPField& f) const {
        require_same_grid(f.grid, grid_);
        std::vector<cd> t = f.values;
        plan_->forward(t.data());
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += k2_[i] * std::norm(t[i]);
        return s * grid_.cell_volume() / double(t.size());
    }
    double potential_energy(const GPField& f, double a, const ExternalPotential& pot) const {
        const auto A = pot.sample(grid_, f.time);
        double s = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) {
            const double rho = std::norm(f.values[i]);
            s += (A[i] + 4.0 * std::numbers::pi * a * rho) * rho;
        }
        return s * grid_.cell_volume();
    }

    // Components of the spectral gradient.
    std::vector<std::vector<cd>> gradient(const GPField& f) const {
        std::vector<std::vector<cd>> out;
        std::vector<cd> hat = f.values;
        plan_->forward(hat.data());
        int d[3];
        for (int ax = 0; ax < grid_.dim; ++ax) {
            std::vector<cd> c(hat.size());
            for (std::size_t i = 0; i < hat.size(); ++i) {
                grid_.digits(i, d);
                c[i] = cd(0.0, grid_.wavenumber(d[ax])) * hat[i] / double(hat.size());
            }
            plan_->backward(c.data());
            out.push_back(std::move(c));
        }
        return out;
    }

    // ||grad phi||_{L^6} over the box.
    double gradient_l6_norm(const GPField& f) const {
        const auto g = gradient(f);
        double s = 0.0;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            double m = 0.0;
            for (const auto& c : g) m += std::norm(c[i]);
            s += m * m * m;
        }
        return std::pow(s * grid_.cell_volume(), 1.0 / 6.0);
    }

private:
    static std::vector<int> all_axes(int d) {
        std::vector<int> a(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) a[std::size_t(i)] = i;
        return a;
    }
    void half_phase(GPField& f, const std::vector<double>& A, double g, double dt) const {
        for (std::size_t i = 0; i < A.size(); ++i)
            f.values[i] *= std::polar(1.0, -0.5 * dt * (A[i] + g * std::norm(f.values[i])));
    }
    void kinetic(GPField& f, double dt) {
        plan_->forward(f.values.data());
        const double inv = 1.0 / double(f.values.size());
        for (std::size_t i = 0; i < k2_.size(); ++i) f.values[i] *= std::polar(inv, -dt * k2_[i]);
        plan_->backward(f.values.data());
    }

    PeriodicGrid grid_;
    std::vector<cd> scratch_;
    std::vector<double> k2_;
    std::unique_ptr<FftPlan> plan_;
};

inline GPField gp_step(const GPField& f, double a, const ExternalPotential& pot, double dt) {
    GPSolver s(f.grid);
    GPField out = f;
    s.step(out, a, pot, dt);
    return out;
}

inline double gp_energy(const GPField& f, double a, const ExternalPotential& pot) {
    return GPSolver(f.grid).energy(f, a, pot);
}

struct GPTrajectory {
    std::vector<GPField> snapshots;
    double max_norm_drift = 0.0;
    double max_energy_drift = 0.0; // only tracked for static potentials
    std::size_t steps = 0;
};

// Steps of size dt (the last one shortened to land on t_final); snapshots every
// `stride` steps plus the initial and final states.
inline GPTrajectory gp_evolve(const GPField& initial, double a, const ExternalPotential& pot, double t_final, double dt,
                              std::size_t stride = 0) {
    if (!(dt > 0.0)) throw DomainError("gp evolve: dt must be positive");
    if (t_final < initial.time) throw DomainError("gp evolve: t_final precedes the initial time");
    GPSolver solver(initial.grid);
    GPTrajectory tr;
    GPField f = initial;
    tr.snapshots.push_back(f);
    const double n0 = f.norm();
    const double e0 = pot.is_static() ? solver.energy(f, a, pot) : 0.0;
    const double span = t_final - initial.time;
    const auto steps = std::size_t(std::ceil(span / dt - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
        const double h = (k + 1 == steps) ? (t_final - f.time) : dt;
        if (h > 0.0) solver.step(f, a, pot, h);
        tr.max_norm_drift = std::max(tr.max_norm_drift, std::abs(f.norm() - n0));
        if (pot.is_static()) tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(solver.energy(f, a, pot) - e0));
        if (stride > 0 && (k + 1) % stride == 0 && k + 1 != steps) tr.snapshots.push_back(f);
    }
    tr.steps = steps;
    if (steps > 0) tr.snapshots.push_back(f);
    return tr;
}

} // namespace gpcheck

#endif
