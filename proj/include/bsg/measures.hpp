#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bsg/cone.hpp"
#include "bsg/rng.hpp"

namespace bsg {

struct Atom {
    double location;
    double weight;
};

/// Finitely supported probability measure with atoms sorted strictly
/// increasing. Coinciding locations (within 1e-12) are merged at
/// construction so quantile functions are canonical. Locations must lie in
/// [min_location, max_location]; the default support is [0, 1].
class DiscreteMeasure {
  public:
    explicit DiscreteMeasure(std::vector<Atom> atoms, double max_location = 1.0,
                             double min_location = 0.0)
        : min_loc_(min_location), max_loc_(max_location) {
        if (atoms.empty()) throw std::invalid_argument("DiscreteMeasure: no atoms");
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.location < b.location; });
        for (const Atom& a : atoms) {
            if (!(a.weight > 0.0)) throw std::invalid_argument("DiscreteMeasure: weight <= 0");
            if (a.location < min_loc_ - 1e-12 || a.location > max_loc_ + 1e-12)
                throw std::invalid_argument("DiscreteMeasure: location outside support bound");
            if (!atoms_.empty() && a.location - atoms_.back().location <= 1e-12)
                atoms_.back().weight += a.weight;
            else
                atoms_.push_back(a);
        }
        double total = 0.0;
        for (const Atom& a : atoms_) total += a.weight;
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(total));
        cumulative_.reserve(atoms_.size());
        double c = 0.0;
        for (const Atom& a : atoms_) {
            c += a.weight;
            cumulative_.push_back(c);
        }
        cumulative_.back() = std::max(cumulative_.back(), 1.0);
    }

    static DiscreteMeasure dirac(double x, double max_location = 1.0, double min_location = 0.0) {
        return DiscreteMeasure({{x, 1.0}}, max_location, min_location);
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    double min_location_bound() const { return min_loc_; }
    double max_location_bound() const { return max_loc_; }
    /// Cumulative weights, one entry per atom; last entry is 1.
    const std::vector<double>& cumulative() const { return cumulative_; }

    /// inf{s >= 0 : measure([0,s]) >= r}. At r = 0 every s qualifies, so the
    /// value is 0 for measures on the nonnegative half-line (and the lowest
    /// atom otherwise). Monotone in r, attains its value from the left at
    /// each step.
    double inverse_cdf(double r) const {
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("inverse_cdf: r outside [0,1]");
        if (r == 0.0) return min_loc_ >= 0.0 ? 0.0 : atoms_.front().location;
        const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), r);
        const std::size_t i = it == cumulative_.end()
                                  ? atoms_.size() - 1
                                  : static_cast<std::size_t>(it - cumulative_.begin());
        return atoms_[i].location;
    }

    double mean() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.location * a.weight;
        return s;
    }
    double second_moment() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.location * a.location * a.weight;
        return s;
    }

    bool operator==(const DiscreteMeasure& o) const {
        if (atoms_.size() != o.atoms_.size()) return false;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            if (atoms_[i].location != o.atoms_[i].location ||
                atoms_[i].weight != o.atoms_[i].weight)
                return false;
        return true;
    }

  private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double min_loc_;
    double max_loc_;
};

struct MeasurePair {
    DiscreteMeasure first;
    DiscreteMeasure second;
};

/// Equal-weight list of planar sample points (one weight each).
struct JointSample {
    std::vector<std::pair<double, double>> pairs;
};

inline double inverse_cdf(const DiscreteMeasure& nu, double r) { return nu.inverse_cdf(r); }

/// (F1^{-1}(u), F2^{-1}(u)); pushing Lebesgue[0,1] through this map realizes
/// the coupled law of the pair.
inline std::pair<double, double> quantile_coupling(const MeasurePair& mu, double u) {
    return {mu.first.inverse_cdf(u), mu.second.inverse_cdf(u)};
}

namespace detail {

/// Merged step partition of two quantile functions: breakpoints in (0,1] with
/// the pair of quantile values on each piece.
struct QuantileSegment {
    double length;
    double left;   // quantile of the first measure on the piece
    double right;  // quantile of the second measure on the piece
};

inline std::vector<QuantileSegment> merged_quantile_partition(const DiscreteMeasure& mu,
                                                              const DiscreteMeasure& nu) {
    std::vector<QuantileSegment> segs;
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    const auto& ci = mu.cumulative();
    const auto& cj = nu.cumulative();
    while (i < ci.size() && j < cj.size()) {
        const double next = std::min(ci[i], cj[j]);
        if (next > prev)
            segs.push_back({next - prev, mu.atoms()[i].location, nu.atoms()[j].location});
        if (ci[i] == next) ++i;
        if (j < cj.size() && cj[j] == next) ++j;
        prev = next;
        if (prev >= 1.0) break;
    }
    return segs;
}

}  // namespace detail

/// Wasserstein distance of order p in one dimension, computed exactly by
/// merging the two quantile-step partitions.
inline double wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int p) {
    if (p != 1 && p != 2) throw std::invalid_argument("wasserstein_p: p must be 1 or 2");
    double s = 0.0;
    for (const auto& seg : detail::merged_quantile_partition(mu, nu)) {
        const double d = std::abs(seg.left - seg.right);
        s += seg.length * (p == 1 ? d : d * d);
    }
    return p == 1 ? s : std::sqrt(s);
}

/// Coordinate k of the image in the ordered cone: K * integral of the pair
/// quantile over ((k-1)/K, k/K), exact since the integrand is a step function.
inline ConePoint discretize_to_cone(const MeasurePair& mu, std::size_t levels) {
    if (levels == 0) throw std::invalid_argument("discretize_to_cone: K must be positive");
    ConePoint x(levels, 2);
    const double k = static_cast<double>(levels);
    const DiscreteMeasure* ms[2] = {&mu.first, &mu.second};
    for (int a = 0; a < 2; ++a) {
        const auto& atoms = ms[a]->atoms();
        const auto& cum = ms[a]->cumulative();
        for (std::size_t cell = 0; cell < levels; ++cell) {
            const double lo = static_cast<double>(cell) / k;
            const double hi = static_cast<double>(cell + 1) / k;
            double integral = 0.0;
            double prev = 0.0;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                const double a0 = std::max(prev, lo);
                const double a1 = std::min(cum[i], hi);
                if (a1 > a0) integral += (a1 - a0) * atoms[i].location;
                prev = cum[i];
                if (prev >= hi) break;
            }
            x(cell, static_cast<std::size_t>(a)) = k * integral;
        }
    }
    return x;
}

/// Each species becomes the equal-weight measure on its column of x, with
/// coincident atoms merged.
inline MeasurePair cone_to_measure_pair(const ConePoint& x) {
    if (x.dim() != 2) throw std::invalid_argument("cone_to_measure_pair: need two species");
    if (!contains_bar_uk(x, 0.0))
        throw std::invalid_argument("cone_to_measure_pair: ordering violated");
    const double w = 1.0 / static_cast<double>(x.levels());
    double top = 1.0;
    for (std::size_t k = 0; k < x.levels(); ++k)
        top = std::max({top, x(k, 0), x(k, 1)});
    auto build = [&](std::size_t d) {
        std::vector<Atom> atoms;
        for (std::size_t k = 0; k < x.levels(); ++k) atoms.push_back({x(k, d), w});
        return DiscreteMeasure(std::move(atoms), top);
    };
    return {build(0), build(1)};
}

/// n draws of (F_X^{-1}(U), F_Y^{-1}(U)) with a shared uniform per draw.
inline JointSample monotone_coupling_law(const DiscreteMeasure& law_x,
                                         const DiscreteMeasure& law_y, std::size_t n,
                                         std::mt19937_64& rng) {
    if (n == 0) throw std::invalid_argument("monotone_coupling_law: n must be >= 1");
    JointSample s;
    s.pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform_01(rng);
        s.pairs.emplace_back(law_x.inverse_cdf(u), law_y.inverse_cdf(u));
    }
    return s;
}

struct MonotoneCouplingReport {
    bool monotone = false;
    bool dominance_ok = false;     // condition (1): no opposite strict dominance
    bool cdf_identity_ok = false;  // condition (2): joint cdf = min of marginals
    double max_cdf_gap = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> violating_pair;
};

/// Checks both characterizations of a monotone coupling on an empirical
/// sample: (1) no pair of points strictly dominates in opposite coordinates,
/// and (2) the empirical joint cdf equals the min of the marginal cdfs within
/// tol at every atom pair of the two marginals.
inline MonotoneCouplingReport monotone_coupling_check(const JointSample& s, double tol) {
    if (s.pairs.empty()) throw std::invalid_argument("monotone_coupling_check: empty sample");
    MonotoneCouplingReport rep;
    const std::size_t n = s.pairs.size();

    // condition (1): sort by x; the running max of y over strictly smaller x
    // must not exceed the min y at the current x value
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s.pairs[a].first < s.pairs[b].first;
    });
    rep.dominance_ok = true;
    std::size_t group_start = 0;
    double run_max_y = -std::numeric_limits<double>::infinity();
    std::size_t run_max_idx = 0;
    while (group_start < n && rep.dominance_ok) {
        std::size_t group_end = group_start;
        const double gx = s.pairs[order[group_start]].first;
        while (group_end < n && s.pairs[order[group_end]].first == gx) ++group_end;
        for (std::size_t i = group_start; i < group_end; ++i) {
            const double y = s.pairs[order[i]].second;
            if (y < run_max_y) {
                rep.dominance_ok = false;
                rep.violating_pair = {run_max_idx, order[i]};
                break;
            }
        }
        for (std::size_t i = group_start; i < group_end; ++i) {
            const double y = s.pairs[order[i]].second;
            if (y > run_max_y) {
                run_max_y = y;
                run_max_idx = order[i];
            }
        }
        group_start = group_end;
    }

    // condition (2), evaluated at atom pairs of the empirical marginals
    std::vector<double> xs, ys;
    xs.reserve(n);
    ys.reserve(n);
    for (const auto& p : s.pairs) {
        xs.push_back(p.first);
        ys.push_back(p.second);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<double> joint(xs.size() * ys.size(), 0.0);
    for (const auto& p : s.pairs) {
        const std::size_t ix = static_cast<std::size_t>(
            std::lower_bound(xs.begin(), xs.end(), p.first) - xs.begin());
        const std::size_t iy = static_cast<std::size_t>(
            std::lower_bound(ys.begin(), ys.end(), p.second) - ys.begin());
        joint[ix * ys.size() + iy] += 1.0;
    }
    // 2-d cumulative counts
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 1; j < ys.size(); ++j) joint[i * ys.size() + j] += joint[i * ys.size() + j - 1];
    for (std::size_t i = 1; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) joint[i * ys.size() + j] += joint[(i - 1) * ys.size() + j];
    const double inv_n = 1.0 / static_cast<double>(n);
    rep.max_cdf_gap = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fx = joint[i * ys.size() + (ys.size() - 1)] * inv_n;
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const double fy = joint[(xs.size() - 1) * ys.size() + j] * inv_n;
            const double fxy = joint[i * ys.size() + j] * inv_n;
            rep.max_cdf_gap = std::max(rep.max_cdf_gap, std::abs(fxy - std::min(fx, fy)));
        }
    }
    rep.cdf_identity_ok = rep.max_cdf_gap <= tol;
    rep.monotone = rep.dominance_ok && rep.cdf_identity_ok;
    return rep;
}

}  // namespace bsg
