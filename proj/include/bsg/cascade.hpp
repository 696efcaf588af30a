#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bsg/measures.hpp"
#include "bsg/quadrature.hpp"
#include "bsg/rng.hpp"

namespace bsg {

/// The (zeta, q) ladder parametrizing an ultrametric external-field
/// structure: depth k, weights 0 < zeta_1 <= ... <= zeta_k < 1 (zeta_0 = 0
/// and zeta_{k+1} = 1 implicit), and per species a nondecreasing ladder
/// q_{a,0} <= ... <= q_{a,k} of nonnegative overlap values.
struct CascadeSpec {
    std::vector<double> zetas;                 // size k
    std::array<std::vector<double>, 2> q;      // each size k+1

    std::size_t depth() const { return zetas.size(); }

    void validate() const {
        const std::size_t k = zetas.size();
        for (std::size_t l = 0; l < k; ++l) {
            if (!(zetas[l] > 0.0) || !(zetas[l] < 1.0))
                throw std::invalid_argument("CascadeSpec: zeta outside (0,1)");
            if (l > 0 && zetas[l] < zetas[l - 1])
                throw std::invalid_argument("CascadeSpec: zetas must be nondecreasing");
        }
        for (int a = 0; a < 2; ++a) {
            if (q[a].size() != k + 1)
                throw std::invalid_argument("CascadeSpec: q ladder must have depth+1 entries");
            if (q[a][0] < 0.0) throw std::invalid_argument("CascadeSpec: negative q");
            for (std::size_t l = 0; l + 1 <= k && l + 1 < q[a].size(); ++l)
                if (q[a][l + 1] < q[a][l])
                    throw std::invalid_argument("CascadeSpec: q ladder must be nondecreasing");
        }
    }

    /// Weight of ladder level l, i.e. zeta_{l+1} - zeta_l.
    double level_weight(std::size_t l) const {
        const double up = l < zetas.size() ? zetas[l] : 1.0;
        const double lo = l == 0 ? 0.0 : zetas[l - 1];
        return up - lo;
    }

    /// The induced measure of one species: sum_l (zeta_{l+1}-zeta_l) d_{q_{a,l}}.
    DiscreteMeasure measure(int species) const {
        std::vector<Atom> atoms;
        double top = 1.0;
        for (double v : q[species]) top = std::max(top, v);
        for (std::size_t l = 0; l <= depth(); ++l) {
            const double w = level_weight(l);
            if (w > 0.0) atoms.push_back({q[species][l], w});
        }
        return DiscreteMeasure(std::move(atoms), top);
    }
    MeasurePair measures() const { return {measure(0), measure(1)}; }

    /// Common ladder reproducing a given measure pair: the zetas are the
    /// merged interior cumulative weights, each q entry the corresponding
    /// quantile. Exact inverse of measures().
    static CascadeSpec from_measures(const MeasurePair& mu) {
        std::vector<double> cuts;
        for (const DiscreteMeasure* m : {&mu.first, &mu.second})
            for (const double c : m->cumulative())
                if (c > 0.0 && c < 1.0) cuts.push_back(c);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        CascadeSpec spec;
        spec.zetas = cuts;
        const std::size_t k = cuts.size();
        for (int a = 0; a < 2; ++a) {
            const DiscreteMeasure& m = a == 0 ? mu.first : mu.second;
            spec.q[a].resize(k + 1);
            for (std::size_t l = 0; l <= k; ++l) {
                const double lo = l == 0 ? 0.0 : cuts[l - 1];
                const double hi = l == k ? 1.0 : cuts[l];
                spec.q[a][l] = m.inverse_cdf(0.5 * (lo + hi));
            }
        }
        spec.validate();
        return spec;
    }

    /// Drops interior levels of zero weight (equal consecutive zetas). The
    /// induced measures, and hence everything downstream, are unchanged.
    CascadeSpec reduced() const {
        validate();
        CascadeSpec out;
        for (std::size_t l = 0; l <= depth(); ++l) {
            if (level_weight(l) == 0.0) continue;
            if (!out.q[0].empty()) out.zetas.push_back(zetas[l - 1]);
            out.q[0].push_back(q[0][l]);
            out.q[1].push_back(q[1][l]);
        }
        out.validate();
        return out;
    }
};

/// Depth of the deepest common ancestor of two equal-depth leaf paths.
inline std::size_t alpha_wedge(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("alpha_wedge: depth mismatch");
    std::size_t l = 0;
    while (l < a.size() && a[l] == b[l]) ++l;
    return l;
}

/// Sampled Poisson-Dirichlet cascade truncated to branching M per vertex.
/// Leaves are indexed base-M, most significant digit = level-1 child. Leaf
/// weights are products of raw point-process atoms along the path (root
/// excluded), normalized globally once.
struct TruncatedCascade {
    std::size_t depth = 0;      // k
    std::size_t branching = 1;  // M (irrelevant when depth == 0)
    std::vector<double> leaf_weights;

    std::size_t leaf_count() const { return leaf_weights.size(); }
    std::size_t vertices_at(std::size_t level) const {
        std::size_t c = 1;
        for (std::size_t l = 0; l < level; ++l) c *= branching;
        return c;
    }
    std::size_t vertex_offset(std::size_t level) const {
        std::size_t off = 0;
        for (std::size_t l = 0; l < level; ++l) off += vertices_at(l);
        return off;
    }
    std::size_t vertex_count() const { return vertex_offset(depth) + vertices_at(depth); }
    /// Global vertex index of the level-l ancestor of a leaf.
    std::size_t path_vertex(std::size_t leaf, std::size_t level) const {
        std::size_t v = leaf;
        for (std::size_t l = level; l < depth; ++l) v /= branching;
        return vertex_offset(level) + v;
    }
    std::size_t wedge(std::size_t leaf_a, std::size_t leaf_b) const {
        std::size_t l = depth;
        while (l > 0 && leaf_a != leaf_b) {
            leaf_a /= branching;
            leaf_b /= branching;
            --l;
        }
        return l;
    }
    /// Draws a leaf index from the weights via the cumulative table.
    std::size_t sample_leaf(const std::vector<double>& cumulative, std::mt19937_64& rng) const {
        const double u = uniform_01(rng);
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        return it == cumulative.end() ? leaf_count() - 1
                                      : static_cast<std::size_t>(it - cumulative.begin());
    }
    std::vector<double> cumulative_weights() const {
        std::vector<double> c(leaf_weights.size());
        double s = 0.0;
        for (std::size_t i = 0; i < leaf_weights.size(); ++i) {
            s += leaf_weights[i];
            c[i] = s;
        }
        return c;
    }
};

/// Largest-first atoms of the level-l point process: u_i = Gamma_i^{-1/zeta}
/// with Gamma_i partial sums of unit exponentials. Returned in log scale.
inline std::vector<double> log_ppp_atoms(double zeta, std::size_t count, std::mt19937_64& rng) {
    std::vector<double> out(count);
    double gamma = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        gamma += standard_exponential(rng);
        out[i] = -std::log(gamma) / zeta;
    }
    return out;
}

inline TruncatedCascade sample_cascade(const CascadeSpec& spec, std::size_t branching,
                                       std::mt19937_64& rng) {
    spec.validate();
    if (branching == 0) throw std::invalid_argument("sample_cascade: M must be >= 1");
    TruncatedCascade tc;
    tc.depth = spec.depth();
    tc.branching = branching;
    if (tc.depth == 0) {
        tc.leaf_weights = {1.0};
        return tc;
    }
    // log-weights per vertex of the current level, built level by level
    std::vector<double> log_w = {0.0};
    for (std::size_t l = 1; l <= tc.depth; ++l) {
        std::vector<double> next;
        next.reserve(log_w.size() * branching);
        for (const double parent : log_w) {
            const std::vector<double> dec = log_ppp_atoms(spec.zetas[l - 1], branching, rng);
            for (const double d : dec) next.push_back(parent + d);
        }
        log_w = std::move(next);
    }
    const double m = *std::max_element(log_w.begin(), log_w.end());
    double total = 0.0;
    for (double& v : log_w) {
        v = std::exp(v - m);
        total += v;
    }
    tc.leaf_weights.resize(log_w.size());
    for (std::size_t i = 0; i < log_w.size(); ++i) tc.leaf_weights[i] = log_w[i] / total;
    return tc;
}

struct OverlapLawEstimate {
    std::vector<double> probability;  // per level 0..k
    std::vector<double> stderr_;      // across cascades
    std::size_t n_cascades = 0;
    std::size_t pairs_per_cascade = 0;
};

/// Samples replica pairs from independently drawn cascades and histograms the
/// tree overlap. The per-level expectations estimate zeta_{l+1} - zeta_l.
inline OverlapLawEstimate cascade_overlap_law(const CascadeSpec& spec, std::size_t branching,
                                              std::size_t n_cascades, std::mt19937_64& rng,
                                              std::size_t pairs_per_cascade = 1) {
    spec.validate();
    if (n_cascades == 0 || pairs_per_cascade == 0)
        throw std::invalid_argument("cascade_overlap_law: need at least one draw");
    const std::size_t k = spec.depth();
    std::vector<MeanVar> acc(k + 1);
    std::vector<double> hist(k + 1);
    for (std::size_t c = 0; c < n_cascades; ++c) {
        const TruncatedCascade tc = sample_cascade(spec, branching, rng);
        const std::vector<double> cum = tc.cumulative_weights();
        std::fill(hist.begin(), hist.end(), 0.0);
        for (std::size_t p = 0; p < pairs_per_cascade; ++p) {
            const std::size_t a = tc.sample_leaf(cum, rng);
            const std::size_t b = tc.sample_leaf(cum, rng);
            hist[tc.wedge(a, b)] += 1.0;
        }
        for (std::size_t l = 0; l <= k; ++l)
            acc[l].push(hist[l] / static_cast<double>(pairs_per_cascade));
    }
    OverlapLawEstimate out;
    out.n_cascades = n_cascades;
    out.pairs_per_cascade = pairs_per_cascade;
    for (std::size_t l = 0; l <= k; ++l) {
        out.probability.push_back(acc[l].mean());
        out.stderr_.push_back(acc[l].stderr_of_mean());
    }
    return out;
}

/// Rao-Blackwellized variant: instead of drawing replica pairs, each cascade
/// contributes its exact pair-overlap distribution (block sums of squared
/// subtree masses), the conditional expectation of the histogram over the
/// replica draws. Same estimand, strictly less noise.
inline OverlapLawEstimate cascade_overlap_law_exact(const CascadeSpec& spec,
                                                    std::size_t branching,
                                                    std::size_t n_cascades,
                                                    std::mt19937_64& rng) {
    spec.validate();
    if (n_cascades == 0) throw std::invalid_argument("cascade_overlap_law_exact: no draws");
    const std::size_t k = spec.depth();
    std::vector<MeanVar> acc(k + 1);
    for (std::size_t c = 0; c < n_cascades; ++c) {
        const TruncatedCascade tc = sample_cascade(spec, branching, rng);
        const std::size_t leaves = tc.leaf_count();
        // g[l] = P(wedge >= l) = sum of squared level-l subtree masses
        std::vector<double> g(k + 1, 0.0);
        double same = 0.0;
        for (double w : tc.leaf_weights) same += w * w;
        g[k] = same;
        std::size_t block = 1;
        for (std::size_t l = k; l-- > 0;) {
            block *= tc.branching;
            double acc_level = 0.0;
            for (std::size_t start = 0; start < leaves; start += block) {
                double bs = 0.0;
                for (std::size_t i = start; i < start + block; ++i) bs += tc.leaf_weights[i];
                acc_level += bs * bs;
            }
            g[l] = acc_level;
        }
        for (std::size_t l = 0; l <= k; ++l)
            acc[l].push(g[l] - (l + 1 <= k ? g[l + 1] : 0.0));
    }
    OverlapLawEstimate out;
    out.n_cascades = n_cascades;
    out.pairs_per_cascade = 0;
    for (std::size_t l = 0; l <= k; ++l) {
        out.probability.push_back(acc[l].mean());
        out.stderr_.push_back(acc[l].stderr_of_mean());
    }
    return out;
}

/// Per-level expectation rule for the cascade integration recursion: either
/// Gauss-Hermite quadrature on a scalar Gaussian or Monte Carlo draws of a
/// Gaussian vector.
struct LevelIntegrator {
    enum class Kind { GaussHermite, MonteCarlo };
    Kind kind = Kind::GaussHermite;
    std::size_t order_or_samples = 40;
    std::size_t dim = 1;  // Monte Carlo vector dimension

    static LevelIntegrator gauss_hermite_rule(std::size_t order = 40) {
        return {Kind::GaussHermite, order, 1};
    }
    static LevelIntegrator monte_carlo_rule(std::size_t samples, std::size_t dim) {
        return {Kind::MonteCarlo, samples, dim};
    }
};

namespace detail {

template <class Terminal>
double recursive_integrate_level(const Terminal& terminal, const CascadeSpec& spec,
                                 const std::vector<LevelIntegrator>& levels, std::size_t level,
                                 std::vector<std::vector<double>>& omega, std::mt19937_64& rng) {
    const LevelIntegrator& li = levels[level];
    const std::size_t k = spec.depth();
    const bool leaf_level = level == k;
    // evaluates X_level for the current omega prefix extended by one draw
    auto eval_child = [&]() -> double {
        if (leaf_level) return terminal(omega);
        return recursive_integrate_level(terminal, spec, levels, level + 1, omega, rng);
    };
    auto combine = [&](const std::vector<double>& values,
                       const std::vector<double>& weights) -> double {
        if (level == 0) {  // plain expectation at the root
            double s = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
            return s;
        }
        const double zeta = spec.zetas[level - 1];
        double m = -std::numeric_limits<double>::infinity();
        for (double v : values) m = std::max(m, zeta * v);
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            s += weights[i] * std::exp(zeta * values[i] - m);
        return (m + std::log(s)) / zeta;
    };
    std::vector<double> values;
    std::vector<double> weights;
    if (li.kind == LevelIntegrator::Kind::GaussHermite) {
        const GaussHermite& gh = gauss_hermite(li.order_or_samples);
        values.reserve(gh.nodes.size());
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            omega[level] = {gh.nodes[i]};
            values.push_back(eval_child());
        }
        weights = gh.weights;
    } else {
        const std::size_t m = li.order_or_samples;
        values.reserve(m);
        weights.assign(m, 1.0 / static_cast<double>(m));
        for (std::size_t i = 0; i < m; ++i) {
            omega[level].resize(li.dim);
            for (std::size_t d = 0; d < li.dim; ++d) omega[level][d] = standard_normal(rng);
            values.push_back(eval_child());
        }
    }
    return combine(values, weights);
}

}  // namespace detail

/// Computes E_{omega_0}[X_0] where X_{l-1} = zeta_l^{-1} log E exp(zeta_l X_l)
/// downward from the terminal X_k(omega_0..omega_k). Levels integrate by
/// Gauss-Hermite (scalar) or Monte Carlo (vector) per the config. Depth 0
/// reduces to the plain expectation of the terminal.
template <class Terminal>
double recursive_integrate(const Terminal& terminal, const CascadeSpec& spec,
                           const std::vector<LevelIntegrator>& levels, std::mt19937_64& rng) {
    spec.validate();
    if (levels.size() != spec.depth() + 1)
        throw std::invalid_argument("recursive_integrate: need one integrator per level 0..k");
    for (std::size_t l = 1; l <= spec.depth(); ++l)
        if (!(spec.zetas[l - 1] > 0.0))
            throw std::invalid_argument("recursive_integrate: zeta must be positive");
    std::vector<std::vector<double>> omega(spec.depth() + 1);
    return detail::recursive_integrate_level(terminal, spec, levels, 0, omega, rng);
}

}  // namespace bsg
