#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "bsg/hj.hpp"
#include "bsg/measures.hpp"
#include "bsg/rng.hpp"

namespace bsg {

/// xi*(s) = sup_{r >= 0} (r s - xi(r)) for a power series with nonnegative
/// coefficients; zero below xi'(0), otherwise solved by bisection on xi'.
inline double convex_conjugate(const HamiltonianSpec& xi_spec, double s) {
    if (xi_spec.kind != HamiltonianSpec::Kind::SingleType)
        throw std::invalid_argument("convex_conjugate: need a single-type xi");
    xi_spec.validate();
    if (s <= xi_spec.xi_prime(0.0)) return 0.0;
    double hi = 1.0;
    while (xi_spec.xi_prime(hi) < s) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("convex_conjugate: slope never reaches s");
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (xi_spec.xi_prime(mid) < s ? lo : hi) = mid;
    }
    const double r = 0.5 * (lo + hi);
    return r * s - xi_spec.xi(r);
}

struct QuantileOptimizerConfig {
    std::size_t restarts = 16;
    std::size_t max_passes = 60;
    std::size_t scan_points = 48;
    std::size_t refine_iters = 40;
    double tolerance = 1e-10;
};

namespace detail {

/// Coordinate-ascent over sorted quantile vectors inside [lo, hi], keeping
/// sortedness by restricting each coordinate to its neighbor bracket.
/// Nonconcave landscapes get multi-start coverage.
template <class Objective>
double ascend_sorted(std::vector<double>& v, double lo, double hi, const Objective& obj,
                     const QuantileOptimizerConfig& cfg) {
    double best = obj(v);
    for (std::size_t pass = 0; pass < cfg.max_passes; ++pass) {
        double improved = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double left = k == 0 ? lo : v[k - 1];
            const double right = k + 1 == v.size() ? hi : v[k + 1];
            double bx = v[k], bv = best;
            for (std::size_t s = 0; s <= cfg.scan_points; ++s) {
                const double x =
                    left + (right - left) * static_cast<double>(s) /
                               static_cast<double>(cfg.scan_points);
                v[k] = x;
                const double val = obj(v);
                if (val > bv) {
                    bv = val;
                    bx = x;
                }
            }
            // golden-section refinement around the best scan cell
            double a = std::max(left, bx - (right - left) / static_cast<double>(cfg.scan_points));
            double b = std::min(right, bx + (right - left) / static_cast<double>(cfg.scan_points));
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
            v[k] = x1;
            double f1 = obj(v);
            v[k] = x2;
            double f2 = obj(v);
            for (std::size_t it = 0; it < cfg.refine_iters; ++it) {
                if (f1 < f2) {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    v[k] = x2;
                    f2 = obj(v);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    v[k] = x1;
                    f1 = obj(v);
                }
            }
            const double xr = f1 > f2 ? x1 : x2;
            v[k] = xr;
            const double vr = obj(v);
            if (vr >= bv) {
                bv = vr;
            } else {
                v[k] = bx;
                bv = obj(v);
            }
            improved += bv - best;
            best = bv;
        }
        if (improved < cfg.tolerance) break;
    }
    return best;
}

}  // namespace detail

struct HopfLaxResult {
    double value = 0.0;
    std::vector<double> optimizer;  // sorted quantile vector of the maximizing measure
};

/// Variational evaluation sup_nu [ psi1(nu) - t E xi*((X_nu - X_mu)/t) ] over
/// equal-weight quantile vectors of dimension k_opt; the transport penalty is
/// integrated exactly against mu's quantile steps.
inline HopfLaxResult hopf_lax_single_type(const HamiltonianSpec& xi_spec,
                                          const std::function<double(const DiscreteMeasure&)>& psi1,
                                          double t, const DiscreteMeasure& mu, std::size_t k_opt,
                                          std::uint64_t seed = 1,
                                          QuantileOptimizerConfig cfg = {},
                                          double search_top = 0.0) {
    if (!(t > 0.0)) throw std::invalid_argument("hopf_lax_single_type: t must be positive");
    if (k_opt == 0) throw std::invalid_argument("hopf_lax_single_type: k_opt must be >= 1");
    xi_spec.validate();
    const double mu_top = mu.atoms().back().location;
    // psi1 is 1-Lipschitz in W1, so optimizers stay within slope-1 transport reach
    double slope_reach = 1.0;
    while (xi_spec.xi_prime(slope_reach) < 1.0 && slope_reach < 1e6) slope_reach *= 2.0;
    const double top = search_top > 0.0 ? search_top : mu_top + t * slope_reach + 0.5;

    const double wcell = 1.0 / static_cast<double>(k_opt);
    auto objective = [&](const std::vector<double>& v) {
        std::vector<Atom> atoms;
        for (double x : v) atoms.push_back({x, wcell});
        const DiscreteMeasure nu(std::move(atoms), std::max(1.0, top));
        double penalty = 0.0;
        for (const auto& seg : detail::merged_quantile_partition(nu, mu))
            penalty += seg.length * convex_conjugate(xi_spec, (seg.left - seg.right) / t);
        return psi1(nu) - t * penalty;
    };

    HopfLaxResult best;
    best.value = -std::numeric_limits<double>::infinity();
    std::mt19937_64 rng = substream_rng(seed, 0);
    for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
        std::vector<double> v(k_opt);
        if (restart == 0) {
            // warm start at mu's own quantile vector
            for (std::size_t k = 0; k < k_opt; ++k)
                v[k] = mu.inverse_cdf((static_cast<double>(k) + 0.5) * wcell);
        } else {
            for (double& x : v) x = top * uniform_01(rng);
            std::sort(v.begin(), v.end());
        }
        const double val = detail::ascend_sorted(v, 0.0, top, objective, cfg);
        if (val > best.value) {
            best.value = val;
            best.optimizer = v;
        }
    }
    return best;
}

struct SaddleResult {
    double value = 0.0;
    std::vector<double> optimizer_first;
    std::vector<double> optimizer_second;
};

/// The transplanted saddle formula: sup over pairs nu in P([0, 2t])^2 of
/// psi(nu) - (1/t) E[X_{nu_1} X_{nu_2}], with both measures discretized as
/// sorted equal-weight quantile vectors. Reported as an experiment; no exact
/// target exists for it.
inline SaddleResult pierro_saddle_value(const std::function<double(const MeasurePair&)>& psi,
                                        double t, std::size_t k_opt, std::uint64_t seed = 1,
                                        QuantileOptimizerConfig cfg = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("pierro_saddle_value: t must be positive");
    if (k_opt == 0) throw std::invalid_argument("pierro_saddle_value: k_opt must be >= 1");
    const double top = 2.0 * t;
    const double wcell = 1.0 / static_cast<double>(k_opt);
    auto make_measure = [&](const std::vector<double>& v) {
        std::vector<Atom> atoms;
        for (double x : v) atoms.push_back({x, wcell});
        return DiscreteMeasure(std::move(atoms), std::max(1.0, top));
    };
    auto objective_pair = [&](const std::vector<double>& v1, const std::vector<double>& v2) {
        double cross = 0.0;
        for (std::size_t k = 0; k < k_opt; ++k) cross += v1[k] * v2[k];
        cross *= wcell;
        return psi({make_measure(v1), make_measure(v2)}) - cross / t;
    };

    SaddleResult best;
    best.value = -std::numeric_limits<double>::infinity();
    std::mt19937_64 rng = substream_rng(seed, 0);
    for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
        std::vector<double> v1(k_opt, 0.0), v2(k_opt, 0.0);
        if (restart > 0) {
            for (double& x : v1) x = top * uniform_01(rng);
            for (double& x : v2) x = top * uniform_01(rng);
            std::sort(v1.begin(), v1.end());
            std::sort(v2.begin(), v2.end());
        }
        double val = objective_pair(v1, v2);
        for (std::size_t pass = 0; pass < cfg.max_passes; ++pass) {
            auto obj1 = [&](const std::vector<double>& v) { return objective_pair(v, v2); };
            val = detail::ascend_sorted(v1, 0.0, top, obj1, cfg);
            auto obj2 = [&](const std::vector<double>& v) { return objective_pair(v1, v); };
            const double val2 = detail::ascend_sorted(v2, 0.0, top, obj2, cfg);
            if (val2 - val < cfg.tolerance && pass > 0) {
                val = val2;
                break;
            }
            val = val2;
        }
        if (val > best.value) {
            best.value = val;
            best.optimizer_first = v1;
            best.optimizer_second = v2;
        }
    }
    return best;
}

}  // namespace bsg
