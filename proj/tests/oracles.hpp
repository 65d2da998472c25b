#ifndef GPCHECK_TESTS_ORACLES_HPP
#define GPCHECK_TESTS_ORACLES_HPP

#include <cmath>

namespace oracles {

// Lowest bound state of -2u'' + U u for a barrier of height b on [0, r2) and a well
// of depth w on [r2, R), by matching closed-form pieces: scan E upwards for the first
// sign change of u'(R) + kappa u(R). b = 0 gives a plain well. Returns 0 when unbound.
inline double shooting_bound_state(double b, double w, double r2, double R) {
    auto mismatch = [&](double E) {
        double du = 1.0 / r2;
        if (b > 0.0) {
            const double k1 = std::sqrt((b - E) / 2.0);
            du = k1 / std::tanh(k1 * r2);
        } else {
            const double k1 = std::sqrt(-E / 2.0);
            du = k1 / std::tanh(k1 * r2);
        }
        const double q = std::sqrt((E + w) / 2.0), L = R - r2;
        const double c = std::cos(q * L), s = std::sin(q * L);
        const double uR = c + du / q * s, duR = -q * s + du * c;
        return duR + std::sqrt(-E / 2.0) * uR;
    };
    const double lo = -w * (1.0 - 1e-12), hi = -1e-12;
    const int scan = 200000;
    double prev = mismatch(lo), x0 = lo;
    for (int i = 1; i <= scan; ++i) {
        const double x = lo + (hi - lo) * i / scan, v = mismatch(x);
        if ((v > 0) != (prev > 0)) {
            double a = x0, c = x;
            for (int k = 0; k < 200; ++k) {
                const double m = 0.5 * (a + c);
                if ((mismatch(m) > 0) == (mismatch(a) > 0))
                    a = m;
                else
                    c = m;
            }
            return 0.5 * (a + c);
        }
        prev = v;
        x0 = x;
    }
    return 0.0;
}

} // namespace oracles

#endif
