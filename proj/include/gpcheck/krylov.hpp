#ifndef GPCHECK_KRYLOV_HPP
#define GPCHECK_KRYLOV_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "gpcheck/error.hpp"

namespace gpcheck {

using MatVec = std::function<void(const std::complex<double>* in, std::complex<double>* out)>;

struct KrylovOptions {
    int max_order = 40;
    double tol = 1e-12;                        // on the a-posteriori error relative to |v|
    std::size_t basis_memory_budget = 1u << 30; // bytes; above it the basis is regenerated instead of stored
};

struct KrylovStats {
    int order = 0;
    double error_estimate = 0.0;
    bool regenerated = false;
};

namespace detail {

inline double dot_re(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}
inline std::complex<double> dot(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b) {
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}
inline double norm(std::span<const std::complex<double>> a) { return std::sqrt(dot_re(a, a)); }

// exp(-i dt T) e1 for the symmetric tridiagonal T(alpha, beta).
inline Eigen::VectorXcd expm_tridiagonal_e1(const std::vector<double>& alpha, const std::vector<double>& beta, double dt) {
    const int m = int(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const auto& Q = es.eigenvectors();
    Eigen::VectorXcd c(m);
    for (int i = 0; i < m; ++i) {
        std::complex<double> s = 0.0;
        for (int k = 0; k < m; ++k) s += Q(i, k) * std::exp(std::complex<double>(0.0, -dt * es.eigenvalues()(k))) * Q(0, k);
        c(i) = s;
    }
    return c;
}

} // namespace detail

// v <- exp(-i dt H) v by Lanczos. With the basis stored, every new vector is
// fully reorthogonalised. When the basis would exceed the memory budget the
// plain three-term recurrence is run twice: once for the coefficients, once to
// rebuild the vectors and accumulate the result.
inline KrylovStats krylov_expm(const MatVec& H, std::span<std::complex<double>> v, double dt, const KrylovOptions& opt = {}) {
    using C = std::complex<double>;
    const std::size_t n = v.size();
    KrylovStats st;
    const double vnorm = detail::norm(v);
    if (vnorm == 0.0 || dt == 0.0) return st;
    const bool store = n * sizeof(C) * std::size_t(opt.max_order + 1) <= opt.basis_memory_budget;
    st.regenerated = !store;

    std::vector<double> alpha, beta;
    std::vector<std::vector<C>> basis;
    std::vector<C> prev, cur(n), w(n);
    for (std::size_t i = 0; i < n; ++i) cur[i] = v[i] / vnorm;
    if (store) basis.push_back(cur);

    Eigen::VectorXcd coef;
    bool done = false;
    for (int j = 0; j < opt.max_order && !done; ++j) {
        H(cur.data(), w.data());
        const double a = detail::dot_re(cur, w);
        alpha.push_back(a);
        for (std::size_t i = 0; i < n; ++i) w[i] -= a * cur[i];
        if (j > 0)
            for (std::size_t i = 0; i < n; ++i) w[i] -= beta.back() * prev[i];
        if (store)
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : basis) {
                    const C c = detail::dot(b, w);
                    for (std::size_t i = 0; i < n; ++i) w[i] -= c * b[i];
                }
        const double b = detail::norm(w);
        coef = detail::expm_tridiagonal_e1(alpha, beta, dt);
        st.order = j + 1;
        st.error_estimate = b * std::abs(coef(j));
        if (b <= 1e-14 * std::abs(a) + 1e-300 || st.error_estimate <= opt.tol) {
            done = true;
            break;
        }
        beta.push_back(b);
        prev.swap(cur);
        if (cur.size() != n) cur.resize(n);
        for (std::size_t i = 0; i < n; ++i) cur[i] = w[i] / b;
        if (store) basis.push_back(cur);
    }
    if (!done) throw KrylovError("krylov: error estimate above tolerance at the maximal order", st.error_estimate);

    const int m = st.order;
    if (store) {
        for (std::size_t i = 0; i < n; ++i) {
            C s = 0.0;
            for (int k = 0; k < m; ++k) s += coef(k) * basis[k][i];
            v[i] = vnorm * s;
        }
        return st;
    }
    // second pass: rebuild the same vectors
    std::vector<C> acc(n), p2, c2(n), w2(n);
    for (std::size_t i = 0; i < n; ++i) c2[i] = v[i] / vnorm;
    for (int k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) acc[i] += coef(k) * c2[i];
        if (k + 1 == m) break;
        H(c2.data(), w2.data());
        for (std::size_t i = 0; i < n; ++i) w2[i] -= alpha[k] * c2[i];
        if (k > 0)
            for (std::size_t i = 0; i < n; ++i) w2[i] -= beta[k - 1] * p2[i];
        p2.swap(c2);
        if (c2.size() != n) c2.resize(n);
        for (std::size_t i = 0; i < n; ++i) c2[i] = w2[i] / beta[k];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = vnorm * acc[i];
    return st;
}

// Smallest eigenvalue of a Hermitian operator by Lanczos with full reorthogonalisation.
inline double lanczos_min_eigenvalue(const MatVec& A, std::span<const std::complex<double>> start, double tol = 1e-13,
                                     int max_iter = 300) {
    using C = std::complex<double>;
    const std::size_t n = start.size();
    const double s0 = detail::norm(start);
    if (s0 == 0.0) throw DomainError("lanczos: zero start vector");
    std::vector<std::vector<C>> basis;
    std::vector<double> alpha, beta;
    std::vector<C> cur(n), w(n);
    for (std::size_t i = 0; i < n; ++i) cur[i] = start[i] / s0;
    basis.push_back(cur);
    double theta = 0.0;
    const int iters = int(std::min<std::size_t>(std::size_t(max_iter), n));
    for (int j = 0; j < iters; ++j) {
        A(cur.data(), w.data());
        const double a = detail::dot_re(cur, w);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const C c = detail::dot(b, w);
                for (std::size_t i = 0; i < n; ++i) w[i] -= c * b[i];
            }
        const double b = detail::norm(w);
        const int m = int(alpha.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        theta = es.eigenvalues()(0);
        const double resid = b * std::abs(es.eigenvectors()(m - 1, 0));
        double scale = 0.0;
        for (int i = 0; i < m; ++i) scale = std::max(scale, std::abs(es.eigenvalues()(i)));
        if (resid <= tol * std::max(scale, 1e-300) || b <= 1e-300) return theta;
        beta.push_back(b);
        for (std::size_t i = 0; i < n; ++i) cur[i] = w[i] / b;
        basis.push_back(cur);
    }
    return theta;
}

} // namespace gpcheck

#endif
