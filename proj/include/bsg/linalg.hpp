#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bsg {

/// Eigendecomposition of a small dense symmetric matrix.
/// `vectors` is row-major: vectors[i*n + j] = component i of eigenvector j.
struct SymEigen {
    std::vector<double> values;
    std::vector<double> vectors;
    std::size_t n = 0;
};

inline bool is_symmetric(const std::vector<double>& a, std::size_t n, double tol = 1e-12) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a[i * n + j] - a[j * n + i]) > tol) return false;
    return true;
}

/// Cyclic Jacobi iteration, run until the off-diagonal Frobenius norm drops
/// below 1e-12 relative to the matrix scale. Intended for the small matrices
/// that appear here (n <= 64), where no external solver is warranted.
inline SymEigen jacobi_eigen(std::vector<double> a, std::size_t n, int max_sweeps = 64) {
    if (a.size() != n * n) throw std::invalid_argument("jacobi_eigen: bad shape");
    SymEigen out;
    out.n = n;
    out.vectors.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + i] = 1.0;
    if (n == 0) return out;

    double scale = 0.0;
    for (double v : a) scale += v * v;
    scale = std::sqrt(scale);
    const double stop = 1e-12 * std::max(1.0, scale);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a[i * n + j] * a[i * n + j];
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps && off_norm() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i * n + p];
                    const double aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a[p * n + j];
                    const double aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = out.vectors[i * n + p];
                    const double viq = out.vectors[i * n + q];
                    out.vectors[i * n + p] = c * vip - s * viq;
                    out.vectors[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i * n + i];
    return out;
}

inline double min_eigenvalue(const std::vector<double>& a, std::size_t n) {
    const SymEigen e = jacobi_eigen(a, n);
    double m = e.values.empty() ? 0.0 : e.values[0];
    for (double v : e.values) m = std::min(m, v);
    return m;
}

/// Square root of a PSD matrix via eigendecomposition, negative eigenvalues
/// clamped to zero. Row-major result L with L*L^T = A.
inline std::vector<double> psd_sqrt(const std::vector<double>& a, std::size_t n) {
    const SymEigen e = jacobi_eigen(a, n);
    std::vector<double> l(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double lam = std::sqrt(std::max(0.0, e.values[j]));
        for (std::size_t i = 0; i < n; ++i) l[i * n + j] = e.vectors[i * n + j] * lam;
    }
    return l;
}

}  // namespace bsg
