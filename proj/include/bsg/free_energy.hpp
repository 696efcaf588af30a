#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bsg/cascade.hpp"
#include "bsg/measures.hpp"
#include "bsg/parallel.hpp"
#include "bsg/quadrature.hpp"
#include "bsg/rng.hpp"

namespace bsg {

inline DiscreteMeasure uniform_pm1() {
    return DiscreteMeasure({{-1.0, 0.5}, {1.0, 0.5}}, 1.0, -1.0);
}
/// Two-point measure on {-1, 1} with P[+1] = p.
inline DiscreteMeasure two_point_pm1(double p) {
    return DiscreteMeasure({{-1.0, 1.0 - p}, {1.0, p}}, 1.0, -1.0);
}

/// Finite-size model: N spins per species, single-site laws pi_a supported in
/// [-1, 1], interaction time t, and the external-field ladder.
struct ModelSpec {
    std::size_t n_spins;
    DiscreteMeasure pi1;
    DiscreteMeasure pi2;
    double t;
    CascadeSpec cascade;

    void validate() const {
        if (n_spins == 0) throw std::invalid_argument("ModelSpec: N must be positive");
        if (t < 0.0) throw std::invalid_argument("ModelSpec: t must be nonnegative");
        for (const DiscreteMeasure* pi : {&pi1, &pi2})
            for (const Atom& a : pi->atoms())
                if (a.location < -1.0 - 1e-12 || a.location > 1.0 + 1e-12)
                    throw std::invalid_argument("ModelSpec: pi support outside [-1,1]");
        cascade.validate();
    }
};

inline ModelSpec model_with_t(ModelSpec m, double t) {
    m.t = t;
    return m;
}
inline ModelSpec model_with_q(ModelSpec m, int species, std::size_t level, double value) {
    m.cascade.q[species].at(level) = value;
    return m;
}

/// One draw of all the randomness: couplings J, the truncated cascade, and
/// the per-vertex Gaussian field vector (2N entries per vertex, species 1
/// first). The field coefficients sqrt(2 dq) are applied at evaluation time,
/// so one sample serves perturbed ladders as well (common random numbers).
struct DisorderSample {
    std::size_t n_spins = 0;
    std::vector<double> couplings;  // N*N row-major
    TruncatedCascade cascade;
    std::vector<double> fields;  // [(vertex*2 + species)*N + i]

    double field(std::size_t vertex, int species, std::size_t i) const {
        return fields[(vertex * 2 + static_cast<std::size_t>(species)) * n_spins + i];
    }
};

inline DisorderSample sample_disorder(const ModelSpec& model, std::size_t branching,
                                      std::mt19937_64& rng) {
    model.validate();
    DisorderSample d;
    d.n_spins = model.n_spins;
    d.couplings.resize(model.n_spins * model.n_spins);
    for (double& j : d.couplings) j = standard_normal(rng);
    d.cascade = sample_cascade(model.cascade, branching, rng);
    d.fields.resize(d.cascade.vertex_count() * 2 * model.n_spins);
    for (double& z : d.fields) z = standard_normal(rng);
    return d;
}

/// N^{-1/2} sum_ij J_ij sigma_{1,i} sigma_{2,j}; sigma holds species 1 then 2.
inline double interaction_energy(std::span<const double> sigma, std::span<const double> j,
                                 std::size_t n) {
    if (sigma.size() != 2 * n || j.size() != n * n)
        throw std::invalid_argument("interaction_energy: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t l = 0; l < n; ++l) row += j[i * n + l] * sigma[n + l];
        s += sigma[i] * row;
    }
    return s / std::sqrt(static_cast<double>(n));
}

/// sqrt(2t) interaction - t |sigma_1|^2 |sigma_2|^2 / N.
inline double compensated_energy(std::span<const double> sigma, double t,
                                 std::span<const double> j, std::size_t n) {
    if (t < 0.0) throw std::invalid_argument("compensated_energy: t must be nonnegative");
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        n1 += sigma[i] * sigma[i];
        n2 += sigma[n + i] * sigma[n + i];
    }
    return std::sqrt(2.0 * t) * interaction_energy(sigma, j, n) -
           t * n1 * n2 / static_cast<double>(n);
}

/// sum_a [ sum_l sqrt(2 q_{a,l} - 2 q_{a,l-1}) z_{path(l),a}.sigma_a
///         - q_{a,k} |sigma_a|^2 ].
inline double external_field_energy(std::span<const double> sigma, std::size_t leaf,
                                    const CascadeSpec& spec, const DisorderSample& dis) {
    const std::size_t n = dis.n_spins;
    if (sigma.size() != 2 * n) throw std::invalid_argument("external_field_energy: bad sigma");
    const std::size_t k = spec.depth();
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
        double acc = 0.0;
        for (std::size_t l = 0; l <= k; ++l) {
            const double prev = l == 0 ? 0.0 : spec.q[a][l - 1];
            const double inc = 2.0 * spec.q[a][l] - 2.0 * prev;
            if (inc < -1e-12)
                throw std::invalid_argument("external_field_energy: negative variance increment");
            if (inc <= 0.0) continue;
            const double coef = std::sqrt(inc);
            const std::size_t v = dis.cascade.path_vertex(leaf, l);
            double dotp = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                dotp += dis.field(v, a, i) * sigma[static_cast<std::size_t>(a) * n + i];
            acc += coef * dotp;
        }
        double ns = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = sigma[static_cast<std::size_t>(a) * n + i];
            ns += s * s;
        }
        total += acc - spec.q[a][k] * ns;
    }
    return total;
}

/// Exhaustive enumeration of one species' product-measure support.
struct SpinEnumeration {
    std::size_t n_spins = 0;
    std::vector<double> values;    // count x N, row-major
    std::vector<double> log_prob;  // per config
    std::vector<double> norm_sq;   // |sigma|^2 per config
    std::size_t count() const { return log_prob.size(); }
    const double* config(std::size_t c) const { return values.data() + c * n_spins; }
};

inline SpinEnumeration enumerate_spins(const DiscreteMeasure& pi, std::size_t n) {
    SpinEnumeration e;
    e.n_spins = n;
    const std::size_t s = pi.size();
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (count > (std::size_t{1} << 40) / s)
            throw std::runtime_error("enumerate_spins: support too large");
        count *= s;
    }
    e.values.resize(count * n);
    e.log_prob.resize(count);
    e.norm_sq.resize(count);
    std::vector<std::size_t> digit(n, 0);
    for (std::size_t c = 0; c < count; ++c) {
        double lp = 0.0, ns = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Atom& a = pi.atoms()[digit[i]];
            e.values[c * n + i] = a.location;
            lp += std::log(a.weight);
            ns += a.location * a.location;
        }
        e.log_prob[c] = lp;
        e.norm_sq[c] = ns;
        std::size_t i = 0;
        while (i < n && ++digit[i] == s) digit[i++] = 0;
    }
    return e;
}

/// Exact Gibbs state of one disorder draw: enumerated spins x truncated
/// cascade. Exposes the free energy, per-leaf masses, and the conditional
/// moment reductions needed for replica statistics.
class GibbsEngine {
  public:
    GibbsEngine(const ModelSpec& model, const DisorderSample& dis,
                std::size_t budget = std::size_t{1} << 24)
        : model_(model), dis_(dis) {
        model.validate();
        const std::size_t n = model.n_spins;
        if (dis.n_spins != n) throw std::invalid_argument("GibbsEngine: disorder size mismatch");
        const std::size_t leaves = dis.cascade.leaf_count();
        double config_pairs = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            config_pairs *= static_cast<double>(model.pi1.size()) *
                            static_cast<double>(model.pi2.size());
        if (config_pairs * static_cast<double>(std::max<std::size_t>(leaves, 1)) >
            static_cast<double>(budget))
            throw std::runtime_error("GibbsEngine: enumeration budget exceeded");
        spins_[0] = enumerate_spins(model.pi1, n);
        spins_[1] = enumerate_spins(model.pi2, n);

        const std::size_t k = model.cascade.depth();
        if (dis.cascade.depth != k) throw std::invalid_argument("GibbsEngine: cascade depth mismatch");
        if (k + 1 > 16) throw std::invalid_argument("GibbsEngine: ladder too deep");
        for (int a = 0; a < 2; ++a) {
            coef_[a].resize(k + 1);
            for (std::size_t l = 0; l <= k; ++l) {
                const double prev = l == 0 ? 0.0 : model.cascade.q[a][l - 1];
                const double inc = 2.0 * model.cascade.q[a][l] - 2.0 * prev;
                if (inc < 0.0)
                    throw std::invalid_argument("GibbsEngine: q ladder not nondecreasing");
                coef_[a][l] = std::sqrt(std::max(0.0, inc));
            }
        }

        build_pair_energies();
        build_field_dots();
        build_leaf_partitions();
    }

    const ModelSpec& model() const { return model_; }
    const DisorderSample& disorder() const { return dis_; }
    const SpinEnumeration& spins(int a) const { return spins_[static_cast<std::size_t>(a)]; }
    std::size_t leaf_count() const { return dis_.cascade.leaf_count(); }

    /// -(1/N) log Z for this disorder draw.
    double free_energy() const { return free_energy_; }

    /// Gibbs probability of each leaf; sums to 1.
    const std::vector<double>& leaf_mass() const { return leaf_mass_; }

    /// Per-species field shift of a config at a leaf, in log scale:
    /// w_a(c) = log pi(c) + sum_l coef_{a,l} d_a(c, path vertex) - q_{a,k}|sigma|^2.
    void leaf_log_weights(std::size_t leaf, std::vector<double>& w1,
                          std::vector<double>& w2) const {
        fill_leaf_weights(leaf, w1, 0);
        fill_leaf_weights(leaf, w2, 1);
    }

    /// Joint config distribution given a leaf, row-major (c1 * count2 + c2).
    std::vector<double> config_distribution(std::size_t leaf) const {
        const std::size_t n1 = spins_[0].count(), n2 = spins_[1].count();
        std::vector<double> w1, w2, g(n1 * n2);
        leaf_log_weights(leaf, w1, w2);
        const double m1 = *std::max_element(w1.begin(), w1.end());
        const double m2 = *std::max_element(w2.begin(), w2.end());
        double s = 0.0;
        for (std::size_t c1 = 0; c1 < n1; ++c1) {
            const double e1 = std::exp(w1[c1] - m1);
            for (std::size_t c2 = 0; c2 < n2; ++c2) {
                const double v = exp_pair_[c1 * n2 + c2] * e1 * std::exp(w2[c2] - m2);
                g[c1 * n2 + c2] = v;
                s += v;
            }
        }
        for (double& v : g) v /= s;
        return g;
    }

    double pair_energy(std::size_t c1, std::size_t c2) const {
        return pair_energy_[c1 * spins_[1].count() + c2];
    }

    /// exp(pair energy - max pair energy), one row per species-1 config.
    const double* exp_pair_row(std::size_t c1) const {
        return exp_pair_.data() + c1 * spins_[1].count();
    }

  private:
    void build_pair_energies() {
        const std::size_t n = model_.n_spins;
        const std::size_t n1 = spins_[0].count(), n2 = spins_[1].count();
        pair_energy_.resize(n1 * n2);
        const double ct = std::sqrt(2.0 * model_.t / static_cast<double>(n));
        const double tn = model_.t / static_cast<double>(n);
        std::vector<double> jrow(n);
        max_pair_energy_ = -std::numeric_limits<double>::infinity();
        std::vector<double> u(n);
        for (std::size_t c1 = 0; c1 < n1; ++c1) {
            const double* s1 = spins_[0].config(c1);
            for (std::size_t l = 0; l < n; ++l) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += s1[i] * dis_.couplings[i * n + l];
                u[l] = acc;
            }
            for (std::size_t c2 = 0; c2 < n2; ++c2) {
                const double* s2 = spins_[1].config(c2);
                double inter = 0.0;
                for (std::size_t l = 0; l < n; ++l) inter += u[l] * s2[l];
                const double e = ct * inter - tn * spins_[0].norm_sq[c1] * spins_[1].norm_sq[c2];
                pair_energy_[c1 * n2 + c2] = e;
                max_pair_energy_ = std::max(max_pair_energy_, e);
            }
        }
        exp_pair_.resize(n1 * n2);
        for (std::size_t i = 0; i < exp_pair_.size(); ++i)
            exp_pair_[i] = std::exp(pair_energy_[i] - max_pair_energy_);
    }

    void build_field_dots() {
        const std::size_t n = model_.n_spins;
        const std::size_t vcount = dis_.cascade.vertex_count();
        for (int a = 0; a < 2; ++a) {
            const SpinEnumeration& sp = spins_[static_cast<std::size_t>(a)];
            auto& dots = field_dots_[static_cast<std::size_t>(a)];
            dots.resize(sp.count() * vcount);
            for (std::size_t c = 0; c < sp.count(); ++c) {
                const double* s = sp.config(c);
                for (std::size_t v = 0; v < vcount; ++v) {
                    double acc = 0.0;
                    const double* z = dis_.fields.data() +
                                      (v * 2 + static_cast<std::size_t>(a)) * n;
                    for (std::size_t i = 0; i < n; ++i) acc += z[i] * s[i];
                    dots[c * vcount + v] = acc;
                }
            }
        }
    }

    void fill_leaf_weights(std::size_t leaf, std::vector<double>& w, int a) const {
        const SpinEnumeration& sp = spins_[static_cast<std::size_t>(a)];
        const std::size_t k = model_.cascade.depth();
        const std::size_t vcount = dis_.cascade.vertex_count();
        const double qk = model_.cascade.q[a][k];
        w.resize(sp.count());
        std::array<std::size_t, 16> path;
        for (std::size_t l = 0; l <= k; ++l) path[l] = dis_.cascade.path_vertex(leaf, l);
        const auto& dots = field_dots_[static_cast<std::size_t>(a)];
        for (std::size_t c = 0; c < sp.count(); ++c) {
            double acc = sp.log_prob[c] - qk * sp.norm_sq[c];
            const double* dc = dots.data() + c * vcount;
            for (std::size_t l = 0; l <= k; ++l)
                acc += coef_[static_cast<std::size_t>(a)][l] * dc[path[l]];
            w[c] = acc;
        }
    }

    void build_leaf_partitions() {
        const std::size_t leaves = dis_.cascade.leaf_count();
        const std::size_t n1 = spins_[0].count(), n2 = spins_[1].count();
        leaf_log_partition_.resize(leaves);
        std::vector<double> w1, w2, e1(n1), e2(n2);
        const bool decoupled = model_.t == 0.0;
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            leaf_log_weights(leaf, w1, w2);
            const double m1 = *std::max_element(w1.begin(), w1.end());
            const double m2 = *std::max_element(w2.begin(), w2.end());
            double s = 0.0;
            if (decoupled) {
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t c = 0; c < n1; ++c) s1 += std::exp(w1[c] - m1);
                for (std::size_t c = 0; c < n2; ++c) s2 += std::exp(w2[c] - m2);
                s = s1 * s2;
            } else {
                for (std::size_t c = 0; c < n1; ++c) e1[c] = std::exp(w1[c] - m1);
                for (std::size_t c = 0; c < n2; ++c) e2[c] = std::exp(w2[c] - m2);
                for (std::size_t c1 = 0; c1 < n1; ++c1) {
                    const double* row = exp_pair_.data() + c1 * n2;
                    double acc = 0.0;
                    for (std::size_t c2 = 0; c2 < n2; ++c2) acc += row[c2] * e2[c2];
                    s += e1[c1] * acc;
                }
            }
            leaf_log_partition_[leaf] =
                (decoupled ? 0.0 : max_pair_energy_) + m1 + m2 + std::log(s);
        }
        // log Z = logsumexp(log v_alpha + L_alpha)
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t leaf = 0; leaf < leaves; ++leaf)
            m = std::max(m, std::log(dis_.cascade.leaf_weights[leaf]) + leaf_log_partition_[leaf]);
        double s = 0.0;
        for (std::size_t leaf = 0; leaf < leaves; ++leaf)
            s += std::exp(std::log(dis_.cascade.leaf_weights[leaf]) + leaf_log_partition_[leaf] - m);
        const double log_z = m + std::log(s);
        free_energy_ = -log_z / static_cast<double>(model_.n_spins);
        leaf_mass_.resize(leaves);
        for (std::size_t leaf = 0; leaf < leaves; ++leaf)
            leaf_mass_[leaf] = std::exp(std::log(dis_.cascade.leaf_weights[leaf]) +
                                        leaf_log_partition_[leaf] - log_z);
    }

    ModelSpec model_;
    DisorderSample dis_;
    std::array<SpinEnumeration, 2> spins_;
    std::array<std::vector<double>, 2> coef_;
    std::array<std::vector<double>, 2> field_dots_;  // count x vertex_count
    std::vector<double> pair_energy_;
    std::vector<double> exp_pair_;
    double max_pair_energy_ = 0.0;
    std::vector<double> leaf_log_partition_;
    std::vector<double> leaf_mass_;
    double free_energy_ = 0.0;
};

/// -(1/N) log of the cascade-and-spin partition sum for one disorder draw.
inline double free_energy_sample(const ModelSpec& model, const DisorderSample& dis,
                                 std::size_t budget = std::size_t{1} << 24) {
    return GibbsEngine(model, dis, budget).free_energy();
}

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

/// Mean and standard error of the sample free energy over i.i.d. disorder.
inline Estimate quenched_free_energy(const ModelSpec& model, std::size_t n_disorder,
                                     std::size_t branching, std::uint64_t seed,
                                     unsigned threads = 1,
                                     std::size_t budget = std::size_t{1} << 24) {
    std::vector<double> vals(n_disorder);
    parallel_for(n_disorder, threads, [&](std::size_t i) {
        std::mt19937_64 rng = substream_rng(seed, i);
        const DisorderSample d = sample_disorder(model, branching, rng);
        vals[i] = free_energy_sample(model, d, budget);
    });
    MeanVar mv;
    for (double v : vals) mv.push(v);
    return {mv.mean(), mv.stderr_of_mean(), n_disorder};
}

struct DerivativeTarget {
    enum class Kind { Time, Ladder };
    Kind kind = Kind::Time;
    int species = 0;
    std::size_t level = 0;
    static DerivativeTarget time() { return {Kind::Time, 0, 0}; }
    static DerivativeTarget ladder(int a, std::size_t l) { return {Kind::Ladder, a, l}; }
};

/// Centered finite-difference derivative of the quenched free energy with
/// common random numbers: one disorder draw serves both sides of the
/// difference quotient.
inline Estimate quenched_fd_derivative(const ModelSpec& model, DerivativeTarget target,
                                       double delta, std::size_t n_disorder,
                                       std::size_t branching, std::uint64_t seed,
                                       unsigned threads = 1,
                                       std::size_t budget = std::size_t{1} << 24) {
    if (!(delta > 0.0)) throw std::invalid_argument("quenched_fd_derivative: delta must be > 0");
    ModelSpec up = model, dn = model;
    if (target.kind == DerivativeTarget::Kind::Time) {
        up.t += 0.5 * delta;
        dn.t -= 0.5 * delta;
        if (dn.t < 0.0) throw std::invalid_argument("quenched_fd_derivative: t - delta/2 < 0");
    } else {
        const double q0 = model.cascade.q[target.species].at(target.level);
        up = model_with_q(model, target.species, target.level, q0 + 0.5 * delta);
        dn = model_with_q(model, target.species, target.level, q0 - 0.5 * delta);
        up.cascade.validate();
        dn.cascade.validate();
    }
    std::vector<double> vals(n_disorder);
    parallel_for(n_disorder, threads, [&](std::size_t i) {
        std::mt19937_64 rng = substream_rng(seed, i);
        const DisorderSample d = sample_disorder(model, branching, rng);
        vals[i] = (free_energy_sample(up, d, budget) - free_energy_sample(dn, d, budget)) / delta;
    });
    MeanVar mv;
    for (double v : vals) mv.push(v);
    return {mv.mean(), mv.stderr_of_mean(), n_disorder};
}

/// Conditional free energy given J, computed by the downward cascade
/// recursion with Monte Carlo vector integration per level, then averaged
/// over J draws. Cross-checks the direct cascade-sampling route.
inline Estimate quenched_free_energy_recursive(const ModelSpec& model, std::size_t n_couplings,
                                               std::size_t mc_per_level, std::uint64_t seed,
                                               std::size_t budget = std::size_t{1} << 24) {
    model.validate();
    const std::size_t n = model.n_spins;
    const std::size_t k = model.cascade.depth();
    const SpinEnumeration sp1 = enumerate_spins(model.pi1, n);
    const SpinEnumeration sp2 = enumerate_spins(model.pi2, n);
    if (sp1.count() * sp2.count() > budget)
        throw std::runtime_error("quenched_free_energy_recursive: enumeration budget exceeded");
    std::array<std::vector<double>, 2> coef;
    for (int a = 0; a < 2; ++a) {
        coef[a].resize(k + 1);
        for (std::size_t l = 0; l <= k; ++l) {
            const double prev = l == 0 ? 0.0 : model.cascade.q[a][l - 1];
            coef[a][l] = std::sqrt(std::max(0.0, 2.0 * model.cascade.q[a][l] - 2.0 * prev));
        }
    }
    std::vector<LevelIntegrator> levels(k + 1, LevelIntegrator::monte_carlo_rule(mc_per_level, 2 * n));
    MeanVar mv;
    for (std::size_t jdraw = 0; jdraw < n_couplings; ++jdraw) {
        std::mt19937_64 rng = substream_rng(seed, jdraw);
        std::vector<double> couplings(n * n);
        for (double& v : couplings) v = standard_normal(rng);
        const double ct = std::sqrt(2.0 * model.t / static_cast<double>(n));
        const double tn = model.t / static_cast<double>(n);
        // terminal X_k(y_0..y_k) = log sum_sigma P(sigma) exp(H^t + fields)
        auto terminal = [&](const std::vector<std::vector<double>>& y) -> double {
            double best = -std::numeric_limits<double>::infinity();
            std::vector<double> w1(sp1.count()), w2(sp2.count());
            for (int a = 0; a < 2; ++a) {
                const SpinEnumeration& sp = a == 0 ? sp1 : sp2;
                std::vector<double>& w = a == 0 ? w1 : w2;
                for (std::size_t c = 0; c < sp.count(); ++c) {
                    double acc = sp.log_prob[c] - model.cascade.q[a][k] * sp.norm_sq[c];
                    for (std::size_t l = 0; l <= k; ++l) {
                        if (coef[a][l] == 0.0) continue;
                        double dotp = 0.0;
                        const double* s = sp.config(c);
                        for (std::size_t i = 0; i < n; ++i)
                            dotp += y[l][static_cast<std::size_t>(a) * n + i] * s[i];
                        acc += coef[a][l] * dotp;
                    }
                    w[c] = acc;
                }
            }
            std::vector<double> inter(sp1.count() * sp2.count());
            std::vector<double> u(n);
            for (std::size_t c1 = 0; c1 < sp1.count(); ++c1) {
                const double* s1 = sp1.config(c1);
                for (std::size_t l = 0; l < n; ++l) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += s1[i] * couplings[i * n + l];
                    u[l] = acc;
                }
                for (std::size_t c2 = 0; c2 < sp2.count(); ++c2) {
                    const double* s2 = sp2.config(c2);
                    double dot12 = 0.0;
                    for (std::size_t l = 0; l < n; ++l) dot12 += u[l] * s2[l];
                    const double e = ct * dot12 - tn * sp1.norm_sq[c1] * sp2.norm_sq[c2] +
                                     w1[c1] + w2[c2];
                    inter[c1 * sp2.count() + c2] = e;
                    best = std::max(best, e);
                }
            }
            double s = 0.0;
            for (double e : inter) s += std::exp(e - best);
            return best + std::log(s);
        };
        const double x_minus1 = recursive_integrate(terminal, model.cascade, levels, rng);
        mv.push(-x_minus1 / static_cast<double>(n));
    }
    return {mv.mean(), mv.stderr_of_mean(), n_couplings};
}

namespace detail {

/// Scalar cascade chain for one species at N = 1, t = 0: nested Gauss-Hermite
/// evaluation of the recursion applied to
/// X_k(phi) = log sum_sigma pi(sigma) exp(sigma phi - x_k sigma^2).
inline double psi_species_chain(const std::vector<double>& locations,
                                const std::vector<double>& zetas, const DiscreteMeasure& pi,
                                std::size_t gh_order) {
    const std::size_t k = zetas.size();
    const GaussHermite& gh = gauss_hermite(gh_order);
    std::vector<double> coef(k + 1);
    for (std::size_t l = 0; l <= k; ++l) {
        const double prev = l == 0 ? 0.0 : locations[l - 1];
        coef[l] = std::sqrt(std::max(0.0, 2.0 * locations[l] - 2.0 * prev));
    }
    const double xk = locations[k];
    auto terminal = [&](double phi) {
        double best = -std::numeric_limits<double>::infinity();
        for (const Atom& a : pi.atoms())
            best = std::max(best, a.location * phi - xk * a.location * a.location);
        double s = 0.0;
        for (const Atom& a : pi.atoms())
            s += a.weight * std::exp(a.location * phi - xk * a.location * a.location - best);
        return best + std::log(s);
    };
    // x_level(l, phi): X_l as a function of the accumulated field
    std::function<double(std::size_t, double)> x_level = [&](std::size_t l, double phi) -> double {
        if (l == k) return terminal(phi);
        const double zeta = zetas[l];
        if (coef[l + 1] == 0.0) return x_level(l + 1, phi);
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> vals(gh.nodes.size());
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            vals[i] = x_level(l + 1, phi + coef[l + 1] * gh.nodes[i]);
            best = std::max(best, zeta * vals[i]);
        }
        double s = 0.0;
        for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            s += gh.weights[i] * std::exp(zeta * vals[i] - best);
        return (best + std::log(s)) / zeta;
    };
    double mean = 0.0;
    if (coef[0] == 0.0) {
        mean = x_level(0, 0.0);
    } else {
        for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            mean += gh.weights[i] * x_level(0, coef[0] * gh.nodes[i]);
    }
    return -mean;
}

}  // namespace detail

/// psi contribution of one species: the N = 1, t = 0 quenched free energy of
/// the ladder induced by mu_a, evaluated deterministically by nested
/// Gauss-Hermite quadrature.
inline double psi_species(const DiscreteMeasure& mu_a, const DiscreteMeasure& pi_a,
                          std::size_t gh_order = 40) {
    if (gh_order < 10)
        std::cerr << "psi_species: quadrature order " << gh_order << " is low\n";
    std::vector<double> locations;
    std::vector<double> zetas;
    const auto& cum = mu_a.cumulative();
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        locations.push_back(mu_a.atoms()[i].location);
        if (cum[i] > 0.0 && cum[i] < 1.0) zetas.push_back(cum[i]);
    }
    return detail::psi_species_chain(locations, zetas, pi_a, gh_order);
}

/// Initial condition: the species decouple at t = 0, so psi splits as a sum.
inline double initial_condition_psi(const MeasurePair& mu, const DiscreteMeasure& pi1,
                                    const DiscreteMeasure& pi2, std::size_t gh_order = 40) {
    return psi_species(mu.first, pi1, gh_order) + psi_species(mu.second, pi2, gh_order);
}

struct ChiProfile {
    double chi;
    double d1;  // first derivative in h
    double d2;  // second derivative in h
};

/// One-species tilt profile for a two-point measure on {-1, 1} with
/// P[+1] = p: chi(h), d_h chi = E<s>^2, and
/// d_h^2 chi = 2 E[(<s^2> - <s>^2)(<s^2> - 3<s>^2)], all by quadrature.
inline ChiProfile chi_profile(const DiscreteMeasure& pi, double h, std::size_t gh_order = 40) {
    if (pi.size() != 2 || std::abs(pi.atoms()[0].location + 1.0) > 1e-12 ||
        std::abs(pi.atoms()[1].location - 1.0) > 1e-12)
        throw std::invalid_argument("chi_profile: need a two-point measure on {-1, 1}");
    if (h < 0.0) throw std::invalid_argument("chi_profile: h must be nonnegative");
    const double p = pi.atoms()[1].weight;
    const double q = pi.atoms()[0].weight;
    const double half_log_ratio = 0.5 * std::log(p / q);
    const GaussHermite& gh = gauss_hermite(gh_order);
    const double scale = std::sqrt(2.0 * h);
    ChiProfile out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        const double x = scale * gh.nodes[i];
        const double m0 = std::abs(x);
        const double log_pf = m0 + std::log(p * std::exp(x - m0) + q * std::exp(-x - m0));
        const double mag = std::tanh(x + half_log_ratio);
        const double msq = 1.0;  // spins are +-1
        out.chi += gh.weights[i] * (h - log_pf);
        out.d1 += gh.weights[i] * mag * mag;
        out.d2 += gh.weights[i] * 2.0 * (msq - mag * mag) * (msq - 3.0 * mag * mag);
    }
    return out;
}

enum class StatsDetail { Masses, Full };

/// Raw per-disorder replica moments. All overlaps are N-normalized:
/// R_a = sigma_a . sigma_a' / N, R_0 = wedge / k.
struct OverlapStats {
    std::size_t depth = 0;
    std::size_t n_spins = 0;
    StatsDetail detail = StatsDetail::Full;
    // per-sample rows: [cross, mass_0..k, ov1_0..k, ov2_0..k, ovsq1_0..k, ovsq2_0..k]
    std::vector<std::vector<double>> rows;
    std::vector<std::array<double, 3>> joint_samples;  // (R1, R2, R0) replica draws

    std::size_t row_dim() const { return 1 + 5 * (depth + 1); }
    static std::size_t idx_cross() { return 0; }
    std::size_t idx_mass(std::size_t l) const { return 1 + l; }
    std::size_t idx_ov(int a, std::size_t l) const {
        return 1 + (depth + 1) * (1 + static_cast<std::size_t>(a)) + l;
    }
    std::size_t idx_ovsq(int a, std::size_t l) const {
        return 1 + (depth + 1) * (3 + static_cast<std::size_t>(a)) + l;
    }

    std::vector<double> column_means() const {
        std::vector<double> m(row_dim(), 0.0);
        for (const auto& r : rows)
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += r[i];
        for (double& v : m) v /= static_cast<double>(rows.size());
        return m;
    }

    Estimate column_estimate(std::size_t idx) const {
        MeanVar mv;
        for (const auto& r : rows) mv.push(r[idx]);
        return {mv.mean(), mv.stderr_of_mean(), rows.size()};
    }

    /// Jackknife estimate/stderr of a smooth functional of the column means.
    template <class Fn>
    Estimate jackknife(Fn&& fn) const {
        const std::size_t n = rows.size();
        std::vector<double> tot(row_dim(), 0.0);
        for (const auto& r : rows)
            for (std::size_t i = 0; i < tot.size(); ++i) tot[i] += r[i];
        std::vector<double> means(tot);
        for (double& v : means) v /= static_cast<double>(n);
        const double full = fn(means);
        if (n < 2) return {full, 0.0, n};
        std::vector<double> loo(row_dim());
        double ssq = 0.0, mean_loo = 0.0;
        std::vector<double> vals(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < loo.size(); ++i)
                loo[i] = (tot[i] - rows[j][i]) / static_cast<double>(n - 1);
            vals[j] = fn(loo);
            mean_loo += vals[j];
        }
        mean_loo /= static_cast<double>(n);
        for (double v : vals) ssq += (v - mean_loo) * (v - mean_loo);
        const double se =
            std::sqrt(ssq * static_cast<double>(n - 1) / static_cast<double>(n));
        return {full, se, n};
    }
};

struct OverlapStatsParams {
    std::size_t n_disorder = 400;
    std::size_t n_replica_pairs = 4;
    std::size_t branching = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    StatsDetail detail = StatsDetail::Full;
    std::size_t budget = std::size_t{1} << 24;
};

namespace detail {

/// Per-level pair sums over the wedge classes: given per-leaf vectors scaled
/// by leaf mass, computes sum over pairs with wedge == l of the product,
/// summed over the vector components.
class WedgePairAccumulator {
  public:
    WedgePairAccumulator(const TruncatedCascade& tc) : tc_(&tc) {}

    /// values: component-major [comp * leaves + leaf].
    std::vector<double> pair_sums(const std::vector<double>& values, std::size_t components) const {
        const std::size_t k = tc_->depth;
        const std::size_t leaves = tc_->leaf_count();
        std::vector<double> g(k + 1, 0.0);  // g[l] = sum over pairs with wedge >= l
        for (std::size_t comp = 0; comp < components; ++comp) {
            const double* x = values.data() + comp * leaves;
            // level k: same leaf
            double s = 0.0;
            for (std::size_t i = 0; i < leaves; ++i) s += x[i] * x[i];
            g[k] += s;
            // intermediate levels: contiguous blocks of size M^{k-l}
            std::size_t block = 1;
            for (std::size_t l = k; l-- > 0;) {
                block *= tc_->branching;
                double acc = 0.0;
                for (std::size_t start = 0; start < leaves; start += block) {
                    double bs = 0.0;
                    for (std::size_t i = start; i < start + block; ++i) bs += x[i];
                    acc += bs * bs;
                }
                g[l] += acc;
            }
        }
        std::vector<double> t(k + 1);
        for (std::size_t l = 0; l <= k; ++l) t[l] = g[l] - (l + 1 <= k ? g[l + 1] : 0.0);
        return t;
    }

  private:
    const TruncatedCascade* tc_;
};

}  // namespace detail

/// Exact replica moments within each disorder sample (masses, restricted
/// overlaps, squares, and the cross moment), plus sampled replica triples
/// for the joint histogram, averaged over disorder.
inline OverlapStats gibbs_overlap_stats(const ModelSpec& model, const OverlapStatsParams& params) {
    model.validate();
    const std::size_t k = model.cascade.depth();
    const std::size_t n = model.n_spins;
    OverlapStats stats;
    stats.depth = k;
    stats.n_spins = n;
    stats.detail = params.detail;
    stats.rows.assign(params.n_disorder, {});
    std::vector<std::vector<std::array<double, 3>>> joint(params.n_disorder);

    parallel_for(params.n_disorder, params.threads, [&](std::size_t sample) {
        std::mt19937_64 rng = substream_rng(params.seed, sample);
        const DisorderSample dis = sample_disorder(model, params.branching, rng);
        const GibbsEngine engine(model, dis, params.budget);
        const std::size_t leaves = engine.leaf_count();
        const std::size_t n1 = engine.spins(0).count(), n2 = engine.spins(1).count();
        std::vector<double> row(stats.row_dim(), 0.0);
        const detail::WedgePairAccumulator wedge(dis.cascade);

        // leaf masses
        const std::vector<double>& mass = engine.leaf_mass();
        {
            const std::vector<double> t = wedge.pair_sums(mass, 1);
            for (std::size_t l = 0; l <= k; ++l) row[stats.idx_mass(l)] = t[l];
        }

        if (params.detail == StatsDetail::Full) {
            // per-leaf conditional moments scaled by leaf mass
            std::vector<double> s_first(2 * n * leaves, 0.0);   // [a*n + i][leaf]
            std::vector<double> a_second(2 * n * n * leaves, 0.0);
            std::vector<double> cross_tot(n * n, 0.0);
            std::vector<double> w1, w2, e1(n1), e2(n2), marg1(n1), marg2(n2), wmat(n1 * n);
            for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
                if (mass[leaf] <= 0.0) continue;
                engine.leaf_log_weights(leaf, w1, w2);
                const double m1 = *std::max_element(w1.begin(), w1.end());
                const double m2 = *std::max_element(w2.begin(), w2.end());
                for (std::size_t c = 0; c < n1; ++c) e1[c] = std::exp(w1[c] - m1);
                for (std::size_t c = 0; c < n2; ++c) e2[c] = std::exp(w2[c] - m2);
                double z = 0.0;
                std::fill(marg2.begin(), marg2.end(), 0.0);
                std::fill(wmat.begin(), wmat.end(), 0.0);
                for (std::size_t c1 = 0; c1 < n1; ++c1) {
                    const double* row_e = engine.exp_pair_row(c1);
                    double acc = 0.0;
                    for (std::size_t c2 = 0; c2 < n2; ++c2) {
                        const double v = row_e[c2] * e2[c2];
                        acc += v;
                        marg2[c2] += e1[c1] * v;
                        if (v != 0.0) {
                            const double* s2 = engine.spins(1).config(c2);
                            for (std::size_t jdx = 0; jdx < n; ++jdx)
                                wmat[c1 * n + jdx] += v * s2[jdx];
                        }
                    }
                    marg1[c1] = e1[c1] * acc;
                    z += marg1[c1];
                }
                const double inv_z = 1.0 / z;
                for (std::size_t c = 0; c < n1; ++c) marg1[c] *= inv_z;
                for (std::size_t c = 0; c < n2; ++c) marg2[c] *= inv_z;
                // first moments and same-species second moments
                for (int a = 0; a < 2; ++a) {
                    const SpinEnumeration& sp = engine.spins(a);
                    const std::vector<double>& marg = a == 0 ? marg1 : marg2;
                    for (std::size_t c = 0; c < sp.count(); ++c) {
                        const double g = marg[c] * mass[leaf];
                        if (g == 0.0) continue;
                        const double* s = sp.config(c);
                        for (std::size_t i = 0; i < n; ++i) {
                            s_first[(static_cast<std::size_t>(a) * n + i) * leaves + leaf] +=
                                g * s[i];
                            for (std::size_t jdx = 0; jdx < n; ++jdx)
                                a_second[((static_cast<std::size_t>(a) * n + i) * n + jdx) *
                                             leaves + leaf] += g * s[i] * s[jdx];
                        }
                    }
                }
                // cross moments <sigma_{1,i} sigma_{2,j}>
                const double scale = inv_z * mass[leaf];
                for (std::size_t c1 = 0; c1 < n1; ++c1) {
                    if (e1[c1] == 0.0) continue;
                    const double* s1 = engine.spins(0).config(c1);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double wi = scale * e1[c1] * s1[i];
                        if (wi == 0.0) continue;
                        for (std::size_t jdx = 0; jdx < n; ++jdx)
                            cross_tot[i * n + jdx] += wi * wmat[c1 * n + jdx];
                    }
                }
            }
            const double nn = static_cast<double>(n);
            for (int a = 0; a < 2; ++a) {
                std::vector<double> species_view(n * leaves);
                std::copy(s_first.begin() + static_cast<std::ptrdiff_t>(
                                                 static_cast<std::size_t>(a) * n * leaves),
                          s_first.begin() + static_cast<std::ptrdiff_t>(
                                                 (static_cast<std::size_t>(a) + 1) * n * leaves),
                          species_view.begin());
                const std::vector<double> t = wedge.pair_sums(species_view, n);
                for (std::size_t l = 0; l <= k; ++l) row[stats.idx_ov(a, l)] = t[l] / nn;
                std::vector<double> sq_view(n * n * leaves);
                std::copy(a_second.begin() + static_cast<std::ptrdiff_t>(
                                                 static_cast<std::size_t>(a) * n * n * leaves),
                          a_second.begin() + static_cast<std::ptrdiff_t>(
                                                 (static_cast<std::size_t>(a) + 1) * n * n * leaves),
                          sq_view.begin());
                const std::vector<double> tsq = wedge.pair_sums(sq_view, n * n);
                for (std::size_t l = 0; l <= k; ++l)
                    row[stats.idx_ovsq(a, l)] = tsq[l] / (nn * nn);
            }
            double cross = 0.0;
            for (double v : cross_tot) cross += v * v;
            row[OverlapStats::idx_cross()] = cross / (nn * nn);
        }

        // sampled replica pairs for the joint histogram
        std::vector<double> cum(leaves);
        double acc = 0.0;
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            acc += mass[leaf];
            cum[leaf] = acc;
        }
        auto draw_leaf = [&]() {
            const double u = uniform_01(rng);
            const auto it = std::lower_bound(cum.begin(), cum.end(), u);
            return it == cum.end() ? leaves - 1 : static_cast<std::size_t>(it - cum.begin());
        };
        auto draw_config = [&](std::size_t leaf) {
            const std::vector<double> g = engine.config_distribution(leaf);
            const double u = uniform_01(rng);
            double c = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                c += g[i];
                if (u <= c) return i;
            }
            return g.size() - 1;
        };
        auto& js = joint[sample];
        for (std::size_t rp = 0; rp < params.n_replica_pairs; ++rp) {
            const std::size_t la = draw_leaf();
            const std::size_t lb = draw_leaf();
            const std::size_t ca = draw_config(la);
            const std::size_t cb = draw_config(lb);
            const std::size_t c1a = ca / n2, c2a = ca % n2;
            const std::size_t c1b = cb / n2, c2b = cb % n2;
            double r1 = 0.0, r2 = 0.0;
            const double* s1a = engine.spins(0).config(c1a);
            const double* s1b = engine.spins(0).config(c1b);
            const double* s2a = engine.spins(1).config(c2a);
            const double* s2b = engine.spins(1).config(c2b);
            for (std::size_t i = 0; i < n; ++i) {
                r1 += s1a[i] * s1b[i];
                r2 += s2a[i] * s2b[i];
            }
            const double r0 =
                k == 0 ? 1.0
                       : static_cast<double>(dis.cascade.wedge(la, lb)) / static_cast<double>(k);
            js.push_back({r1 / static_cast<double>(n), r2 / static_cast<double>(n), r0});
        }
        stats.rows[sample] = std::move(row);
    });

    for (auto& js : joint)
        stats.joint_samples.insert(stats.joint_samples.end(), js.begin(), js.end());
    return stats;
}

struct ResidualEstimate {
    double residual = 0.0;
    double residual_stderr = 0.0;
    double bound = 0.0;
    double bound_stderr = 0.0;
    std::vector<std::size_t> excluded_levels;
    bool holds = false;
};

/// Residual of the approximate equation reconstructed from overlap moments,
/// against the conditional-variance bound. Levels whose conditioning mass is
/// numerically empty are excluded and reported.
inline ResidualEstimate hj_residual_estimate(const OverlapStats& stats) {
    if (stats.detail != StatsDetail::Full)
        throw std::invalid_argument("hj_residual_estimate: needs full stats");
    const std::size_t k = stats.depth;
    const std::vector<double> means = stats.column_means();
    ResidualEstimate out;
    std::vector<bool> include(k + 1, true);
    for (std::size_t l = 0; l <= k; ++l) {
        if (means[stats.idx_mass(l)] < 1e-12) {
            include[l] = false;
            out.excluded_levels.push_back(l);
        }
    }
    auto residual_fn = [&](const std::vector<double>& m) {
        double s = 0.0;
        for (std::size_t l = 0; l <= k; ++l) {
            if (!include[l]) continue;
            s += m[stats.idx_ov(0, l)] * m[stats.idx_ov(1, l)] / m[stats.idx_mass(l)];
        }
        return std::abs(m[OverlapStats::idx_cross()] - s);
    };
    auto bound_fn = [&](const std::vector<double>& m) {
        double s = 0.0;
        for (int a = 0; a < 2; ++a)
            for (std::size_t l = 0; l <= k; ++l) {
                if (!include[l]) continue;
                s += m[stats.idx_ovsq(a, l)] -
                     m[stats.idx_ov(a, l)] * m[stats.idx_ov(a, l)] / m[stats.idx_mass(l)];
            }
        return s;
    };
    const Estimate r = stats.jackknife(residual_fn);
    const Estimate b = stats.jackknife(bound_fn);
    out.residual = r.value;
    out.residual_stderr = r.stderr_;
    out.bound = b.value;
    out.bound_stderr = b.stderr_;
    out.holds = out.residual <= out.bound + 3.0 * (out.residual_stderr + out.bound_stderr);
    return out;
}

/// E<(R_a - E<R_a | R_0>)^2> per species; diagnostic companion of the bound.
inline std::array<Estimate, 2> conditional_variance_estimate(const OverlapStats& stats) {
    if (stats.detail != StatsDetail::Full)
        throw std::invalid_argument("conditional_variance_estimate: needs full stats");
    const std::size_t k = stats.depth;
    const std::vector<double> means = stats.column_means();
    std::array<Estimate, 2> out;
    for (int a = 0; a < 2; ++a) {
        auto fn = [&, a](const std::vector<double>& m) {
            double s = 0.0;
            for (std::size_t l = 0; l <= k; ++l) {
                if (m[stats.idx_mass(l)] < 1e-12) continue;
                s += m[stats.idx_ovsq(a, l)] -
                     m[stats.idx_ov(a, l)] * m[stats.idx_ov(a, l)] / m[stats.idx_mass(l)];
            }
            return s;
        };
        out[static_cast<std::size_t>(a)] = stats.jackknife(fn);
    }
    return out;
}

}  // namespace bsg
