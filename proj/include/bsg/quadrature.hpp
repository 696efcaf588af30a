#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bsg/linalg.hpp"

namespace bsg {

/// Nodes/weights such that E[g(Z)] ~= sum_i w_i g(x_i) for Z standard normal.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch on the probabilists' Hermite recurrence (diagonal 0,
/// off-diagonal sqrt(i)); weights are squared first eigenvector components.
inline GaussHermite compute_gauss_hermite(std::size_t order) {
    if (order == 0) throw std::invalid_argument("gauss_hermite: order must be positive");
    const std::size_t n = order;
    std::vector<double> j(n * n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double b = std::sqrt(static_cast<double>(i + 1));
        j[i * n + (i + 1)] = b;
        j[(i + 1) * n + i] = b;
    }
    const SymEigen e = jacobi_eigen(std::move(j), n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return e.values[a] < e.values[b];
    });
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        gh.nodes[r] = e.values[idx[r]];
        const double v0 = e.vectors[0 * n + idx[r]];
        gh.weights[r] = v0 * v0;
        total += gh.weights[r];
    }
    for (double& w : gh.weights) w /= total;
    return gh;
}

/// Cached accessor; quadrature rules are immutable once built.
inline const GaussHermite& gauss_hermite(std::size_t order) {
    static std::map<std::size_t, GaussHermite> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_gauss_hermite(order)).first;
    return it->second;
}

}  // namespace bsg
