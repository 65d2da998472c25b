#ifndef GPCHECK_GRID_HPP
#define GPCHECK_GRID_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "gpcheck/error.hpp"

namespace gpcheck {

using cd = std::complex<double>;

// Uniform periodic grid on [-L/2, L/2)^dim with n points per axis.
struct PeriodicGrid {
    int dim = 1;
    int n = 16;
    double L = 10.0;

    PeriodicGrid() = default;
    PeriodicGrid(int d, int points, double length) : dim(d), n(points), L(length) {
        if (d != 1 && d != 2 && d != 3) throw CapabilityError("grid: dimension must be 1, 2 or 3");
        if (points < 2 || points % 2 != 0) throw ParameterError("grid: points per axis must be even and >= 2");
        if (!(length > 0.0)) throw ParameterError("grid: box length must be positive");
    }

    std::size_t points() const {
        std::size_t m = 1;
        for (int i = 0; i < dim; ++i) m *= std::size_t(n);
        return m;
    }
    double spacing() const { return L / n; }
    double cell_volume() const { return std::pow(spacing(), dim); }
    double volume() const { return std::pow(L, dim); }
    double coordinate(int i) const { return -0.5 * L + i * spacing(); }
    // FFT ordering; the Nyquist index carries -pi n / L.
    double wavenumber(int i) const { return 2.0 * std::numbers::pi / L * (i < n / 2 ? i : i - n); }

    // Per-axis digits of a flat one-body index (axis 0 slowest).
    void digits(std::size_t flat, int* out) const {
        for (int a = dim - 1; a >= 0; --a) {
            out[a] = int(flat % std::size_t(n));
            flat /= std::size_t(n);
        }
    }
    double position(std::size_t flat, int axis) const {
        int d[3];
        digits(flat, d);
        return coordinate(d[axis]);
    }
    double radius2(std::size_t flat) const {
        int d[3];
        digits(flat, d);
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += coordinate(d[a]) * coordinate(d[a]);
        return s;
    }
    double k2(std::size_t flat) const {
        int d[3];
        digits(flat, d);
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += wavenumber(d[a]) * wavenumber(d[a]);
        return s;
    }
    // Minimum-image length of the displacement with per-axis digit offsets.
    double displacement_length(std::size_t disp) const {
        int d[3];
        digits(disp, d);
        double s = 0.0;
        for (int a = 0; a < dim; ++a) {
            const int k = d[a] < n / 2 ? d[a] : d[a] - n;
            s += (k * spacing()) * (k * spacing());
        }
        return std::sqrt(s);
    }
    // Flat index of (a - b) mod n per axis.
    std::size_t displacement_index(std::size_t a, std::size_t b) const {
        int da[3], db[3];
        digits(a, da);
        digits(b, db);
        std::size_t out = 0;
        for (int ax = 0; ax < dim; ++ax) out = out * std::size_t(n) + std::size_t((da[ax] - db[ax] + n) % n);
        return out;
    }

    bool operator==(const PeriodicGrid& o) const { return dim == o.dim && n == o.n && L == o.L; }
};

inline void require_same_grid(const PeriodicGrid& a, const PeriodicGrid& b) {
    if (!(a == b)) throw DimensionError("grids do not match");
}

} // namespace gpcheck

#endif
