#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bsg/cone.hpp"
#include "bsg/measures.hpp"
#include "bsg/rng.hpp"

namespace bsg {

/// Nonlinearity of the level equation: the two-species coupling
/// H(p) = K sum_l p_{1,l} p_{2,l}, or a single-species power series
/// H(p) = (1/K) sum_k xi(K p_k) with nonnegative coefficients.
struct HamiltonianSpec {
    enum class Kind { Bipartite, SingleType };
    Kind kind = Kind::Bipartite;
    std::vector<double> xi_coefficients;  // xi(r) = sum_{j>=1} c_j r^j, c[0] is the r^1 term

    static HamiltonianSpec bipartite() { return {Kind::Bipartite, {}}; }
    static HamiltonianSpec single_type(std::vector<double> coeffs) {
        HamiltonianSpec h{Kind::SingleType, std::move(coeffs)};
        h.validate();
        return h;
    }
    void validate() const {
        if (kind == Kind::SingleType) {
            if (xi_coefficients.empty())
                throw std::invalid_argument("HamiltonianSpec: xi needs coefficients");
            for (double c : xi_coefficients)
                if (c < 0.0) throw std::invalid_argument("HamiltonianSpec: xi coefficient < 0");
        }
    }
    std::size_t species() const { return kind == Kind::Bipartite ? 2 : 1; }

    double xi(double r) const {
        double s = 0.0;
        for (std::size_t j = xi_coefficients.size(); j-- > 0;) s = r * (s + xi_coefficients[j]);
        return s;
    }
    double xi_prime(double r) const {
        double s = 0.0;
        for (std::size_t j = xi_coefficients.size(); j-- > 0;)
            s = s * r + static_cast<double>(j + 1) * xi_coefficients[j];
        return s;
    }
};

struct GridSpec {
    std::size_t levels = 1;     // K; grid dimension is species * K
    double q_max = 2.0;         // box extent per axis
    std::size_t n_per_axis = 65;
    double dt = 0.0;            // 0: largest step allowed by the CFL bound
    double t_final = 1.0;
    double theta_margin = 0.1;
    std::optional<double> theta_override;  // fixed dissipation (comparison runs)

    double h() const { return q_max / static_cast<double>(n_per_axis - 1); }
    void validate() const {
        if (levels == 0 || levels > 2)
            throw std::invalid_argument("GridSpec: only K in {1,2} supported");
        if (n_per_axis < 3) throw std::invalid_argument("GridSpec: need at least 3 points");
        if (!(q_max > 0.0)) throw std::invalid_argument("GridSpec: q_max must be positive");
        if (dt < 0.0 || !(t_final >= 0.0)) throw std::invalid_argument("GridSpec: bad times");
    }
};

/// Values on the full tensor grid; only indices with each species' level
/// block sorted are authoritative, and lookups canonicalize by sorting, which
/// realizes the symmetric extension f(x) = f(sort(x)).
class SolutionField {
  public:
    SolutionField(std::size_t levels, std::size_t species, std::size_t n_per_axis, double q_max)
        : levels_(levels),
          species_(species),
          n_(n_per_axis),
          q_max_(q_max),
          values_(power(n_per_axis, levels * species), 0.0) {}

    std::size_t levels() const { return levels_; }
    std::size_t species() const { return species_; }
    std::size_t axes() const { return levels_ * species_; }
    std::size_t n_per_axis() const { return n_; }
    double q_max() const { return q_max_; }
    double h() const { return q_max_ / static_cast<double>(n_ - 1); }
    double time = 0.0;
    double lipschitz_seminorm = 0.0;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    /// axis m = level * species + a.
    std::size_t flat(std::span<const std::size_t> idx) const {
        std::size_t f = 0;
        for (std::size_t m = 0; m < axes(); ++m) f = f * n_ + idx[m];
        return f;
    }

    bool is_canonical(std::span<const std::size_t> idx) const {
        for (std::size_t a = 0; a < species_; ++a)
            for (std::size_t k = 0; k + 1 < levels_; ++k)
                if (idx[(k + 1) * species_ + a] < idx[k * species_ + a]) return false;
        return true;
    }

    void canonicalize(std::span<std::size_t> idx) const {
        for (std::size_t a = 0; a < species_; ++a)
            for (std::size_t k = 0; k + 1 < levels_; ++k)
                for (std::size_t k2 = k + 1; k2-- > 0;) {
                    std::size_t& lo = idx[k2 * species_ + a];
                    std::size_t& hi = idx[(k2 + 1) * species_ + a];
                    if (hi < lo) std::swap(lo, hi);
                }
    }

    double at(std::span<const std::size_t> idx) const { return values_[flat(idx)]; }

    double value_canonical(std::vector<std::size_t> idx) const {
        canonicalize(idx);
        return values_[flat(idx)];
    }

    /// Multilinear interpolation at a cone point (levels x species). Throws
    /// when a coordinate leaves the box.
    double interpolate(const ConePoint& x) const {
        if (x.levels() != levels_ || x.dim() != species_)
            throw std::invalid_argument("SolutionField: shape mismatch");
        const double step = h();
        std::vector<std::size_t> base(axes());
        std::vector<double> frac(axes());
        for (std::size_t m = 0; m < axes(); ++m) {
            const double c = x(m / species_, m % species_);
            if (c < -1e-9 || c > q_max_ + 1e-9)
                throw std::runtime_error("SolutionField: point outside box");
            const double u = std::clamp(c, 0.0, q_max_) / step;
            std::size_t i0 = static_cast<std::size_t>(std::floor(u));
            if (i0 >= n_ - 1) i0 = n_ - 2;
            base[m] = i0;
            frac[m] = u - static_cast<double>(i0);
        }
        double acc = 0.0;
        std::vector<std::size_t> corner(axes());
        for (std::size_t mask = 0; mask < (std::size_t{1} << axes()); ++mask) {
            double w = 1.0;
            for (std::size_t m = 0; m < axes(); ++m) {
                const bool hi = (mask >> m) & 1u;
                corner[m] = base[m] + (hi ? 1 : 0);
                w *= hi ? frac[m] : 1.0 - frac[m];
            }
            if (w != 0.0) acc += w * value_canonical(corner);
        }
        return acc;
    }

  private:
    static std::size_t power(std::size_t b, std::size_t e) {
        std::size_t r = 1;
        for (std::size_t i = 0; i < e; ++i) r *= b;
        return r;
    }
    std::size_t levels_;
    std::size_t species_;
    std::size_t n_;
    double q_max_;
    std::vector<double> values_;
};

/// Initial data, given either directly on grid coordinates (level-major
/// layout) or through the equal-weight empirical measures of a grid point.
struct InitialCondition {
    std::function<double(std::span<const double>)> raw_fn;
    std::function<double(const MeasurePair&)> pair_fn;
    std::function<double(const DiscreteMeasure&)> single_fn;

    static InitialCondition from_raw(std::function<double(std::span<const double>)> f) {
        InitialCondition ic;
        ic.raw_fn = std::move(f);
        return ic;
    }
    static InitialCondition from_pair(std::function<double(const MeasurePair&)> f) {
        InitialCondition ic;
        ic.pair_fn = std::move(f);
        return ic;
    }
    static InitialCondition from_single(std::function<double(const DiscreteMeasure&)> f) {
        InitialCondition ic;
        ic.single_fn = std::move(f);
        return ic;
    }
    /// sum over axes of p . x, the classical solution seed of the oracles.
    static InitialCondition affine(const DualVector& p) {
        const DualVector coeff = p;
        return from_raw([coeff](std::span<const double> c) {
            double s = 0.0;
            for (std::size_t m = 0; m < c.size(); ++m)
                s += coeff(m / coeff.dim(), m % coeff.dim()) * c[m];
            return s;
        });
    }
};

/// Explicit monotone Lax-Friedrichs marching for
///   d_t f - H(grad f) = 0 on the ordered sector, Neumann boundary,
/// with reflection ghosts at the axis facets (mirror across 0), swap
/// reflection at the diagonal facets (index sort), and one-sided ghosts with
/// initially-frozen inflow slopes at the artificial outer boundary. Finite
/// propagation speed keeps the inner region clean of the outer-boundary
/// layer for t below q_max over twice the gradient speed.
class HJSolver {
  public:
    HJSolver(HamiltonianSpec ham, GridSpec grid, InitialCondition init)
        : ham_(std::move(ham)),
          grid_(grid),
          field_(grid.levels, ham_.species(), grid.n_per_axis, grid.q_max) {
        ham_.validate();
        grid_.validate();
        const std::size_t axes = field_.axes();
        if (axes > 4) throw std::invalid_argument("HJSolver: dimension too large");
        init_values(init);
        freeze_boundary_slopes();
        axis_lipschitz_.assign(axes, 0.0);
        refresh_lipschitz();
        initial_lipschitz_ = field_.lipschitz_seminorm;
    }

    const SolutionField& field() const { return field_; }
    const GridSpec& grid() const { return grid_; }
    double time() const { return field_.time; }
    double initial_lipschitz() const { return initial_lipschitz_; }

    void advance_to(double t_target) {
        if (t_target < field_.time - 1e-15)
            throw std::invalid_argument("HJSolver: cannot advance backwards");
        while (field_.time < t_target - 1e-15) {
            const double theta_max = *std::max_element(theta_.begin(), theta_.end());
            const double cfl = grid_.h() / (2.0 * static_cast<double>(field_.axes()) * theta_max);
            double dt = grid_.dt > 0.0 ? grid_.dt : cfl;
            if (dt > cfl * (1.0 + 1e-12))
                throw std::runtime_error("HJSolver: CFL bound violated");
            dt = std::min(dt, t_target - field_.time);
            step(dt);
        }
    }

    double value_at(const ConePoint& x) const { return field_.interpolate(x); }
    double value_at_measure(const MeasurePair& mu) const {
        return field_.interpolate(discretize_to_cone(mu, grid_.levels));
    }
    double value_at_measure(const DiscreteMeasure& mu) const {
        if (ham_.kind != HamiltonianSpec::Kind::SingleType)
            throw std::invalid_argument("HJSolver: single-measure evaluation needs single type");
        ConePoint x(grid_.levels, 1);
        const MeasurePair pair{mu, mu};
        const ConePoint both = discretize_to_cone(pair, grid_.levels);
        for (std::size_t k = 0; k < grid_.levels; ++k) x(k, 0) = both(k, 0);
        return field_.interpolate(x);
    }

  private:
    void init_values(const InitialCondition& init) {
        const std::size_t axes = field_.axes();
        const std::size_t n = grid_.n_per_axis;
        const double h = grid_.h();
        std::vector<std::size_t> idx(axes, 0);
        std::vector<double> coords(axes);
        const std::size_t species = ham_.species();
        for (;;) {
            if (field_.is_canonical(idx)) {
                for (std::size_t m = 0; m < axes; ++m)
                    coords[m] = h * static_cast<double>(idx[m]);
                double v = 0.0;
                if (init.raw_fn) {
                    v = init.raw_fn(coords);
                } else if (species == 2) {
                    if (!init.pair_fn) throw std::invalid_argument("HJSolver: missing initial data");
                    ConePoint x(grid_.levels, 2);
                    for (std::size_t m = 0; m < axes; ++m) x(m / 2, m % 2) = coords[m];
                    v = init.pair_fn(cone_to_measure_pair(x));
                } else {
                    if (!init.single_fn)
                        throw std::invalid_argument("HJSolver: missing initial data");
                    std::vector<Atom> atoms;
                    const double w = 1.0 / static_cast<double>(grid_.levels);
                    for (std::size_t k = 0; k < grid_.levels; ++k) atoms.push_back({coords[k], w});
                    double top = std::max(1.0, grid_.q_max);
                    v = init.single_fn(DiscreteMeasure(std::move(atoms), top));
                }
                field_.values()[field_.flat(idx)] = v;
            }
            std::size_t m = axes;
            bool done = true;
            while (m-- > 0) {
                if (++idx[m] < n) {
                    done = false;
                    break;
                }
                idx[m] = 0;
            }
            if (done) return;
        }
    }

    /// Per-axis max one-sided difference quotient over the sector.
    void refresh_lipschitz() {
        const std::size_t axes = field_.axes();
        const std::size_t n = grid_.n_per_axis;
        const double h = grid_.h();
        std::vector<double> amax(axes, 0.0);
        std::vector<std::size_t> idx(axes, 0), nb(axes);
        for (;;) {
            if (field_.is_canonical(idx)) {
                const double fc = field_.at(idx);
                for (std::size_t m = 0; m < axes; ++m) {
                    if (idx[m] + 1 >= n) continue;
                    nb.assign(idx.begin(), idx.end());
                    ++nb[m];
                    field_.canonicalize(nb);
                    amax[m] = std::max(amax[m], std::abs(field_.at(nb) - fc) / h);
                }
            }
            std::size_t m = axes;
            bool done = true;
            while (m-- > 0) {
                if (++idx[m] < n) {
                    done = false;
                    break;
                }
                idx[m] = 0;
            }
            if (done) break;
        }
        for (std::size_t m = 0; m < axes; ++m)
            axis_lipschitz_[m] = std::max(axis_lipschitz_[m], amax[m]);
        field_.lipschitz_seminorm =
            *std::max_element(axis_lipschitz_.begin(), axis_lipschitz_.end());
        update_theta();
    }

    void update_theta() {
        const std::size_t axes = field_.axes();
        theta_.assign(axes, 0.0);
        if (grid_.theta_override) {
            std::fill(theta_.begin(), theta_.end(), *grid_.theta_override);
            return;
        }
        const double kd = static_cast<double>(grid_.levels);
        for (std::size_t m = 0; m < axes; ++m) {
            if (ham_.kind == HamiltonianSpec::Kind::Bipartite) {
                const std::size_t conj = (m / 2) * 2 + (1 - m % 2);
                theta_[m] = kd * axis_lipschitz_[conj] + grid_.theta_margin;
            } else {
                theta_[m] = ham_.xi_prime(kd * axis_lipschitz_[m]) + grid_.theta_margin;
            }
        }
    }

    double hamiltonian(std::span<const double> p) const {
        const double kd = static_cast<double>(grid_.levels);
        if (ham_.kind == HamiltonianSpec::Kind::Bipartite) {
            double s = 0.0;
            for (std::size_t k = 0; k < grid_.levels; ++k) s += p[2 * k] * p[2 * k + 1];
            return kd * s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < grid_.levels; ++k) s += ham_.xi(kd * p[k]);
        return s / kd;
    }

    double neighbor_value(std::span<const std::size_t> idx, std::size_t m, int dir,
                          std::vector<std::size_t>& scratch) const {
        scratch.assign(idx.begin(), idx.end());
        if (dir > 0) {
            if (idx[m] + 1 >= grid_.n_per_axis) {
                // one-sided ghost at the artificial outer boundary, with the
                // inflow slope frozen from the initial data. A ghost built
                // from the current field feeds the cell back into itself
                // with weight above one and amplifies any seed error.
                return field_.at(idx) + grid_.h() * frozen_slope_[slope_index(idx, m)];
            }
            ++scratch[m];
        } else {
            if (idx[m] == 0) {
                scratch[m] = 1;  // mirror across the axis facet
            } else {
                --scratch[m];
            }
        }
        field_.canonicalize(scratch);
        return field_.at(scratch);
    }

    /// flat index into the per-axis boundary slope table: the m-th coordinate
    /// is pinned at the top, the rest enumerate the slice
    std::size_t slope_index(std::span<const std::size_t> idx, std::size_t m) const {
        std::size_t f = 0;
        for (std::size_t j = 0; j < field_.axes(); ++j) {
            if (j == m) continue;
            f = f * grid_.n_per_axis + idx[j];
        }
        return m * slope_slice_ + f;
    }

    void freeze_boundary_slopes() {
        const std::size_t axes = field_.axes();
        const std::size_t n = grid_.n_per_axis;
        slope_slice_ = 1;
        for (std::size_t j = 0; j + 1 < axes; ++j) slope_slice_ *= n;
        frozen_slope_.assign(axes * slope_slice_, 0.0);
        std::vector<std::size_t> idx(axes, 0), inner(axes);
        for (std::size_t m = 0; m < axes; ++m) {
            idx.assign(axes, 0);
            idx[m] = n - 1;
            for (;;) {
                inner.assign(idx.begin(), idx.end());
                --inner[m];
                field_.canonicalize(inner);
                std::vector<std::size_t> edge(idx);
                field_.canonicalize(edge);
                frozen_slope_[slope_index(idx, m)] =
                    (field_.at(edge) - field_.at(inner)) / grid_.h();
                std::size_t j = axes;
                bool done = true;
                while (j-- > 0) {
                    if (j == m) continue;
                    if (++idx[j] < n) {
                        done = false;
                        break;
                    }
                    idx[j] = 0;
                }
                if (done) break;
            }
        }
    }

    void step(double dt) {
        const std::size_t axes = field_.axes();
        const std::size_t n = grid_.n_per_axis;
        const double h = grid_.h();
        std::vector<double> next(field_.values().size());
        std::vector<std::size_t> idx(axes, 0), scratch(axes);
        std::vector<double> pbar(axes), pjump(axes);
        for (;;) {
            if (field_.is_canonical(idx)) {
                const double fc = field_.at(idx);
                for (std::size_t m = 0; m < axes; ++m) {
                    const double fp = neighbor_value(idx, m, +1, scratch);
                    const double fm = neighbor_value(idx, m, -1, scratch);
                    pbar[m] = (fp - fm) / (2.0 * h);
                    pjump[m] = (fp + fm - 2.0 * fc) / h;  // p_plus - p_minus
                }
                double diss = 0.0;
                for (std::size_t m = 0; m < axes; ++m) diss += 0.5 * theta_[m] * pjump[m];
                next[field_.flat(idx)] = fc + dt * (hamiltonian(pbar) + diss);
            }
            std::size_t m = axes;
            bool done = true;
            while (m-- > 0) {
                if (++idx[m] < n) {
                    done = false;
                    break;
                }
                idx[m] = 0;
            }
            if (done) break;
        }
        field_.values() = std::move(next);
        field_.time += dt;
        refresh_lipschitz();
    }

    HamiltonianSpec ham_;
    GridSpec grid_;
    SolutionField field_;
    std::vector<double> axis_lipschitz_;
    std::vector<double> theta_;
    std::vector<double> frozen_slope_;
    std::size_t slope_slice_ = 0;
    double initial_lipschitz_ = 0.0;
};

/// One-shot drive of the marching scheme to the grid's final time.
inline SolutionField solve_hj(const HamiltonianSpec& ham, const InitialCondition& init,
                              const GridSpec& grid) {
    HJSolver solver(ham, grid, init);
    solver.advance_to(grid.t_final);
    return solver.field();
}

/// Discrete Lipschitz seminorm restricted to grid points with every index
/// below index_limit; with index_limit = n this is the full-grid seminorm.
/// The restriction isolates the region the artificial outer boundary cannot
/// have polluted yet (finite propagation speed).
inline double lipschitz_seminorm_on(const SolutionField& f, std::size_t index_limit) {
    const std::size_t axes = f.axes();
    const std::size_t n = std::min(index_limit, f.n_per_axis());
    double worst = 0.0;
    std::vector<std::size_t> idx(axes, 0), nb(axes);
    for (;;) {
        if (f.is_canonical(idx)) {
            for (std::size_t m = 0; m < axes; ++m) {
                if (idx[m] + 1 >= n) continue;
                nb.assign(idx.begin(), idx.end());
                ++nb[m];
                f.canonicalize(nb);
                worst = std::max(worst, std::abs(f.at(nb) - f.at(idx)) / f.h());
            }
        }
        std::size_t m = axes;
        bool done = true;
        while (m-- > 0) {
            if (++idx[m] < n) {
                done = false;
                break;
            }
            idx[m] = 0;
        }
        if (done) break;
    }
    return worst;
}

/// Reference solve of d_t f - H(grad f) = eps Lap f with reflecting
/// boundaries on the K = 1 box; pinned to the vanishing-viscosity intuition
/// behind the weak solution, and used only as a cross check.
inline SolutionField solve_viscous_reference(const HamiltonianSpec& ham,
                                             const InitialCondition& init, const GridSpec& grid,
                                             double eps) {
    ham.validate();
    grid.validate();
    if (grid.levels != 1)
        throw std::invalid_argument("solve_viscous_reference: K = 1 only");
    if (!(eps > 0.0)) throw std::invalid_argument("solve_viscous_reference: eps must be > 0");
    HJSolver seed(ham, grid, init);  // reuse grid/init plumbing for the layout
    SolutionField f = seed.field();
    const std::size_t axes = f.axes();
    const std::size_t n = grid.n_per_axis;
    const double h = grid.h();

    // gradient bound for the convective stability part
    double lip = f.lipschitz_seminorm;
    const double kd = 1.0;
    double theta = 0.0;
    if (ham.kind == HamiltonianSpec::Kind::Bipartite)
        theta = kd * lip + grid.theta_margin;
    else
        theta = ham.xi_prime(kd * lip) + grid.theta_margin;
    const double dt_diff = h * h / (4.0 * eps * static_cast<double>(axes));
    const double dt_conv = h / (2.0 * static_cast<double>(axes) * theta);
    double dt = grid.dt > 0.0 ? grid.dt : 0.9 * std::min(dt_diff, dt_conv);
    if (dt > dt_diff)
        throw std::invalid_argument("solve_viscous_reference: diffusive stability violated");

    std::vector<double> next(f.values().size());
    std::vector<std::size_t> idx(axes, 0), scratch(axes);
    std::vector<double> grad(axes);
    double time = 0.0;
    while (time < grid.t_final - 1e-15) {
        const double step_dt = std::min(dt, grid.t_final - time);
        idx.assign(axes, 0);
        for (;;) {
            const double fc = f.at(idx);
            double lap = 0.0;
            for (std::size_t m = 0; m < axes; ++m) {
                auto mirrored = [&](int dir) {
                    scratch.assign(idx.begin(), idx.end());
                    if (dir > 0) {
                        if (idx[m] + 1 >= n) scratch[m] = n - 2;  // reflect at the top
                        else ++scratch[m];
                    } else {
                        if (idx[m] == 0) scratch[m] = 1;
                        else --scratch[m];
                    }
                    return f.at(scratch);
                };
                const double fp = mirrored(+1);
                const double fm = mirrored(-1);
                grad[m] = (fp - fm) / (2.0 * h);
                lap += (fp + fm - 2.0 * fc) / (h * h);
            }
            double hval = 0.0;
            if (ham.kind == HamiltonianSpec::Kind::Bipartite)
                hval = grad[0] * grad[1];
            else
                hval = ham.xi(grad[0]);
            next[f.flat(idx)] = fc + step_dt * (hval + eps * lap);
            std::size_t m = axes;
            bool done = true;
            while (m-- > 0) {
                if (++idx[m] < n) {
                    done = false;
                    break;
                }
                idx[m] = 0;
            }
            if (done) break;
        }
        f.values() = next;
        time += step_dt;
    }
    f.time = time;
    return f;
}

/// f^(K)(t, x^(K)(mu)) by multilinear interpolation.
inline double evaluate_at_measure(const SolutionField& field, const MeasurePair& mu) {
    return field.interpolate(discretize_to_cone(mu, field.levels()));
}

struct LiftComparison {
    double max_abs_diff = 0.0;
    double mean_abs_diff = 0.0;
    std::size_t n_samples = 0;
};

/// Compares the K = 1 solution lifted by per-species coordinate averaging
/// against the K = 2 solution on random sector points.
inline LiftComparison lift_and_compare(const SolutionField& f1, const SolutionField& f2,
                                       std::size_t n_samples, std::mt19937_64& rng,
                                       double box_fraction = 0.5) {
    if (f1.levels() != 1 || f2.levels() != 2 || f1.species() != f2.species())
        throw std::invalid_argument("lift_and_compare: need K = 1 and K = 2 fields");
    LiftComparison out;
    out.n_samples = n_samples;
    const double top = box_fraction * std::min(f1.q_max(), f2.q_max());
    double total = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        ConePoint x(2, f2.species());
        ConePoint mean(1, f2.species());
        for (std::size_t a = 0; a < f2.species(); ++a) {
            double u = top * uniform_01(rng);
            double v = top * uniform_01(rng);
            if (v < u) std::swap(u, v);
            x(0, a) = u;
            x(1, a) = v;
            mean(0, a) = 0.5 * (u + v);
        }
        const double d = std::abs(f1.interpolate(mean) - f2.interpolate(x));
        out.max_abs_diff = std::max(out.max_abs_diff, d);
        total += d;
    }
    out.mean_abs_diff = n_samples ? total / static_cast<double>(n_samples) : 0.0;
    return out;
}

}  // namespace bsg
