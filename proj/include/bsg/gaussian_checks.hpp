#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "bsg/linalg.hpp"
#include "bsg/rng.hpp"

namespace bsg {

/// Monte-Carlo comparison of both Gaussian integration-by-parts identities
/// for a Gibbs measure built from the second field component. Differences
/// are accumulated per draw, so the reported stderr is of the paired gap.
struct GibpReport {
    double lhs_first = 0.0, rhs_first = 0.0, stderr_first = 0.0;
    double lhs_second = 0.0, rhs_second = 0.0, stderr_second = 0.0;
    std::size_t n_mc = 0;
    bool first_ok(double sigmas = 3.0) const {
        return std::abs(lhs_first - rhs_first) <= sigmas * stderr_first;
    }
    bool second_ok(double sigmas = 3.0) const {
        return std::abs(lhs_second - rhs_second) <= sigmas * stderr_second;
    }
};

/// covariance: 2S x 2S row-major over (x_1(sigma_1..S), x_2(sigma_1..S));
/// weights: base measure P on the S states.
inline GibpReport gibp_check(const std::vector<double>& covariance,
                             const std::vector<double>& weights, std::size_t n_mc,
                             std::mt19937_64& rng, double psd_tol = 1e-9) {
    const std::size_t s = weights.size();
    if (s == 0 || s > 8) throw std::invalid_argument("gibp_check: need 1..8 states");
    const std::size_t d = 2 * s;
    if (covariance.size() != d * d) throw std::invalid_argument("gibp_check: bad covariance shape");
    if (!is_symmetric(covariance, d, 1e-9))
        throw std::invalid_argument("gibp_check: covariance not symmetric");
    if (min_eigenvalue(covariance, d) < -psd_tol)
        throw std::invalid_argument("gibp_check: covariance not PSD");

    const std::vector<double> root = psd_sqrt(covariance, d);
    auto c11 = [&](std::size_t a, std::size_t b) { return covariance[a * d + b]; };
    auto c12 = [&](std::size_t a, std::size_t b) { return covariance[a * d + (s + b)]; };

    MeanVar diff1, diff2, lhs1_acc, lhs2_acc;
    std::vector<double> xi(d), g(d), w(s), v(s);
    for (std::size_t it = 0; it < n_mc; ++it) {
        for (double& x : xi) x = standard_normal(rng);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += root[i * d + j] * xi[j];
            g[i] = acc;
        }
        // Gibbs weights from x_2
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < s; ++a)
            m = std::max(m, g[s + a] + std::log(weights[a]));
        double z = 0.0;
        for (std::size_t a = 0; a < s; ++a) {
            w[a] = std::exp(g[s + a] + std::log(weights[a]) - m);
            z += w[a];
        }
        for (double& x : w) x /= z;

        // v(a) = <C12(a, .)> over the second replica
        for (std::size_t a = 0; a < s; ++a) {
            double acc = 0.0;
            for (std::size_t b = 0; b < s; ++b) acc += w[b] * c12(a, b);
            v[a] = acc;
        }
        double lhs1 = 0.0, rhs1 = 0.0, lhs2 = 0.0;
        double c11_avg = 0.0, term_sq = 0.0, term_triple = 0.0, c12_sq_pair = 0.0;
        for (std::size_t a = 0; a < s; ++a) {
            lhs1 += w[a] * g[a];
            rhs1 += w[a] * (c12(a, a) - v[a]);
            lhs2 += w[a] * g[a] * g[a];
            c11_avg += w[a] * c11(a, a);
            term_sq += w[a] * c12(a, a) * c12(a, a);
            term_triple += w[a] * (c12(a, a) - v[a]) * v[a];
            for (std::size_t b = 0; b < s; ++b) c12_sq_pair += w[a] * w[b] * c12(a, b) * c12(a, b);
        }
        // <(C12(s,s) - C12(s,s')) (C12(s,s) + C12(s,s') - 2 C12(s,s''))>
        const double rhs2 = c11_avg + (term_sq - c12_sq_pair) - 2.0 * term_triple;
        diff1.push(lhs1 - rhs1);
        diff2.push(lhs2 - rhs2);
        lhs1_acc.push(lhs1);
        lhs2_acc.push(lhs2);
    }
    GibpReport rep;
    rep.n_mc = n_mc;
    rep.lhs_first = lhs1_acc.mean();
    rep.rhs_first = lhs1_acc.mean() - diff1.mean();
    rep.stderr_first = diff1.stderr_of_mean();
    rep.lhs_second = lhs2_acc.mean();
    rep.rhs_second = lhs2_acc.mean() - diff2.mean();
    rep.stderr_second = diff2.stderr_of_mean();
    return rep;
}

/// One point of the perturbation field's index set: a configuration vector
/// and a leaf path in the truncated tree.
struct EmbedPoint {
    std::vector<double> sigma;
    std::vector<std::size_t> path;  // level 1..k vertex choices
};

struct EmbedReport {
    std::vector<double> gram;  // n x n, from the covariance formula
    double max_route_diff = 0.0;
    double min_eigenvalue = 0.0;
    bool routes_agree = false;  // within 1e-10
    bool psd = false;           // min eigenvalue >= -1e-9
};

/// Builds the explicit embedding g_alpha = sum of orthonormal vertex vectors
/// along the path, forms (lambda1 sigma.sigma' + lambda2 wedge)^p both from
/// the covariance formula and from the p-fold tensor inner product of the
/// embedded vectors, and certifies the Gram matrix PSD.
inline EmbedReport perturbation_covariance_embed(const std::vector<EmbedPoint>& points,
                                                 double lambda1, double lambda2, std::size_t p) {
    if (p == 0) throw std::invalid_argument("perturbation_covariance_embed: p must be >= 1");
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw std::invalid_argument("perturbation_covariance_embed: lambdas must be >= 0");
    if (points.empty() || points.size() > 64)
        throw std::invalid_argument("perturbation_covariance_embed: need 1..64 points");
    const std::size_t n = points.size();
    const std::size_t depth = points.front().path.size();
    const std::size_t spin_dim = points.front().sigma.size();
    for (const EmbedPoint& pt : points)
        if (pt.path.size() != depth || pt.sigma.size() != spin_dim)
            throw std::invalid_argument("perturbation_covariance_embed: ragged points");

    // orthonormal basis = one coordinate per distinct path prefix
    std::map<std::vector<std::size_t>, std::size_t> prefix_index;
    for (const EmbedPoint& pt : points) {
        std::vector<std::size_t> prefix;
        for (std::size_t l = 0; l < depth; ++l) {
            prefix.push_back(pt.path[l]);
            prefix_index.emplace(prefix, prefix_index.size());
        }
    }
    const std::size_t tree_dim = prefix_index.size();
    const std::size_t dim = spin_dim + tree_dim;
    std::vector<double> embedded(n * dim, 0.0);
    const double sl1 = std::sqrt(lambda1), sl2 = std::sqrt(lambda2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < spin_dim; ++j)
            embedded[i * dim + j] = sl1 * points[i].sigma[j];
        std::vector<std::size_t> prefix;
        for (std::size_t l = 0; l < depth; ++l) {
            prefix.push_back(points[i].path[l]);
            embedded[i * dim + spin_dim + prefix_index.at(prefix)] = sl2;
        }
    }

    EmbedReport rep;
    rep.gram.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double dot_sigma = 0.0;
            for (std::size_t c = 0; c < spin_dim; ++c)
                dot_sigma += points[i].sigma[c] * points[j].sigma[c];
            std::size_t wedge = 0;
            while (wedge < depth && points[i].path[wedge] == points[j].path[wedge]) ++wedge;
            const double base = lambda1 * dot_sigma + lambda2 * static_cast<double>(wedge);
            double formula = 1.0;
            for (std::size_t e = 0; e < p; ++e) formula *= base;
            rep.gram[i * n + j] = formula;

            double dot_embed = 0.0;
            for (std::size_t c = 0; c < dim; ++c)
                dot_embed += embedded[i * dim + c] * embedded[j * dim + c];
            double tensor = 1.0;
            for (std::size_t e = 0; e < p; ++e) tensor *= dot_embed;
            rep.max_route_diff = std::max(rep.max_route_diff, std::abs(formula - tensor));
        }
    }
    rep.routes_agree = rep.max_route_diff <= 1e-10;
    rep.min_eigenvalue = bsg::min_eigenvalue(rep.gram, n);
    rep.psd = rep.min_eigenvalue >= -1e-9;
    return rep;
}

}  // namespace bsg
