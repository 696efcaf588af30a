#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bsg/linalg.hpp"

namespace bsg {

namespace detail {

/// Shared storage for K levels of D-dimensional vector coordinates,
/// row-major: entry(k, d) = data[k*dim + d].
class LevelArray {
  public:
    LevelArray(std::size_t levels, std::size_t dim)
        : levels_(levels), dim_(dim), data_(levels * dim, 0.0) {
        if (levels == 0 || dim == 0) throw std::invalid_argument("LevelArray: empty shape");
    }
    LevelArray(std::size_t levels, std::size_t dim, std::vector<double> data)
        : levels_(levels), dim_(dim), data_(std::move(data)) {
        if (levels == 0 || dim == 0 || data_.size() != levels * dim)
            throw std::invalid_argument("LevelArray: bad shape");
    }
    std::size_t levels() const { return levels_; }
    std::size_t dim() const { return dim_; }
    double operator()(std::size_t k, std::size_t d) const { return data_[k * dim_ + d]; }
    double& operator()(std::size_t k, std::size_t d) { return data_[k * dim_ + d]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double euclidean_level_norm(std::size_t k) const {
        double s = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) s += (*this)(k, d) * (*this)(k, d);
        return std::sqrt(s);
    }

  private:
    std::size_t levels_;
    std::size_t dim_;
    std::vector<double> data_;
};

}  // namespace detail

/// Element of the closed ordered cone: nonnegative entries, nondecreasing in
/// the level index per vector coordinate.
class ConePoint : public detail::LevelArray {
  public:
    using LevelArray::LevelArray;
    static ConePoint from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty() || rows.front().empty())
            throw std::invalid_argument("ConePoint: empty rows");
        ConePoint x(rows.size(), rows.front().size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != rows.front().size())
                throw std::invalid_argument("ConePoint: ragged rows");
            for (std::size_t d = 0; d < rows[k].size(); ++d) x(k, d) = rows[k][d];
        }
        return x;
    }
};

/// Unconstrained dual-side vector with the same K x D shape.
class DualVector : public detail::LevelArray {
  public:
    using LevelArray::LevelArray;
    static DualVector from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty() || rows.front().empty())
            throw std::invalid_argument("DualVector: empty rows");
        DualVector x(rows.size(), rows.front().size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != rows.front().size())
                throw std::invalid_argument("DualVector: ragged rows");
            for (std::size_t d = 0; d < rows[k].size(); ++d) x(k, d) = rows[k][d];
        }
        return x;
    }
};

/// K symmetric D x D matrices, for the matrix-cone variant of membership and
/// duality tests. mats is row-major per level: entry(k, i, j).
class SymmetricMatrixPoint {
  public:
    SymmetricMatrixPoint(std::size_t levels, std::size_t dim)
        : levels_(levels), dim_(dim), mats_(levels * dim * dim, 0.0) {
        if (levels == 0 || dim == 0) throw std::invalid_argument("SymmetricMatrixPoint: empty");
    }
    std::size_t levels() const { return levels_; }
    std::size_t dim() const { return dim_; }
    double operator()(std::size_t k, std::size_t i, std::size_t j) const {
        return mats_[(k * dim_ + i) * dim_ + j];
    }
    double& operator()(std::size_t k, std::size_t i, std::size_t j) {
        return mats_[(k * dim_ + i) * dim_ + j];
    }
    void validate_symmetry(double tol = 1e-12) const {
        for (std::size_t k = 0; k < levels_; ++k)
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = i + 1; j < dim_; ++j)
                    if (std::abs((*this)(k, i, j) - (*this)(k, j, i)) > tol)
                        throw std::invalid_argument("SymmetricMatrixPoint: not symmetric");
    }
    std::vector<double> level(std::size_t k) const {
        return std::vector<double>(mats_.begin() + static_cast<std::ptrdiff_t>(k * dim_ * dim_),
                                   mats_.begin() +
                                       static_cast<std::ptrdiff_t>((k + 1) * dim_ * dim_));
    }

  private:
    std::size_t levels_;
    std::size_t dim_;
    std::vector<double> mats_;
};

inline double dot(const detail::LevelArray& x, const detail::LevelArray& y) {
    if (x.levels() != y.levels() || x.dim() != y.dim())
        throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data().size(); ++i) s += x.data()[i] * y.data()[i];
    return s;
}

/// Membership in the closed cone: entrywise nonnegativity and per-coordinate
/// level ordering, both up to tol.
inline bool contains_bar_uk(const ConePoint& x, double tol) {
    for (std::size_t d = 0; d < x.dim(); ++d) {
        if (x(0, d) < -tol) return false;
        for (std::size_t k = 0; k + 1 < x.levels(); ++k)
            if (x(k + 1, d) - x(k, d) < -tol) return false;
    }
    return true;
}

/// Matrix variant: x_1 and all successive differences PSD up to tol.
inline bool contains_bar_uk(const SymmetricMatrixPoint& x, double tol) {
    x.validate_symmetry();
    const std::size_t d = x.dim();
    if (min_eigenvalue(x.level(0), d) < -tol) return false;
    for (std::size_t k = 0; k + 1 < x.levels(); ++k) {
        std::vector<double> diff = x.level(k + 1);
        const std::vector<double> prev = x.level(k);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= prev[i];
        if (min_eigenvalue(diff, d) < -tol) return false;
    }
    return true;
}

/// Dual-cone membership: every tail sum over levels k..K lies in the closed
/// positive cone, up to tol.
inline bool contains_dual_cone(const DualVector& v, double tol) {
    std::vector<double> tail(v.dim(), 0.0);
    for (std::size_t k = v.levels(); k-- > 0;) {
        for (std::size_t d = 0; d < v.dim(); ++d) {
            tail[d] += v(k, d);
            if (tail[d] < -tol) return false;
        }
    }
    return true;
}

inline bool contains_dual_cone(const SymmetricMatrixPoint& v, double tol) {
    v.validate_symmetry();
    const std::size_t d = v.dim();
    std::vector<double> tail(d * d, 0.0);
    for (std::size_t k = v.levels(); k-- > 0;) {
        const std::vector<double> lvl = v.level(k);
        for (std::size_t i = 0; i < tail.size(); ++i) tail[i] += lvl[i];
        if (min_eigenvalue(tail, d) < -tol) return false;
    }
    return true;
}

/// Unit generators of the normal cone at x: -e_{d,1} for each active axis
/// facet and 2^{-1/2}(e_{d,k} - e_{d,k+1}) for each active diagonal facet.
/// Empty iff x is interior. Throws if x is not in the closed cone.
inline std::vector<DualVector> normal_cone_generators(const ConePoint& x, double tol) {
    if (!contains_bar_uk(x, tol)) throw std::invalid_argument("normal_cone_generators: x outside cone");
    std::vector<DualVector> gens;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t d = 0; d < x.dim(); ++d) {
        if (x(0, d) <= tol) {
            DualVector g(x.levels(), x.dim());
            g(0, d) = -1.0;
            gens.push_back(std::move(g));
        }
        for (std::size_t k = 0; k + 1 < x.levels(); ++k) {
            if (x(k + 1, d) - x(k, d) <= tol) {
                DualVector g(x.levels(), x.dim());
                g(k, d) = inv_sqrt2;
                g(k + 1, d) = -inv_sqrt2;
                gens.push_back(std::move(g));
            }
        }
    }
    return gens;
}

/// max_g g.p over the normal-cone generators at a boundary point. The sup
/// over the full normal cone is <= 0 iff this value is <= 0.
inline double boundary_pairing(const ConePoint& x, const DualVector& p, double tol) {
    if (x.levels() != p.levels() || x.dim() != p.dim())
        throw std::invalid_argument("boundary_pairing: shape mismatch");
    const std::vector<DualVector> gens = normal_cone_generators(x, tol);
    if (gens.empty()) throw std::invalid_argument("boundary_pairing: interior point");
    double best = -std::numeric_limits<double>::infinity();
    for (const DualVector& g : gens) best = std::max(best, dot(g, p));
    return best;
}

namespace detail {

inline double scaled_norm_impl(const LevelArray& x, double rho, bool dual) {
    if (!(rho >= 1.0)) throw std::invalid_argument("scaled_norm: rho must be >= 1");
    const double k = static_cast<double>(x.levels());
    const bool inf_rho = std::isinf(rho);
    if (!dual) {
        if (inf_rho) {
            double m = 0.0;
            for (std::size_t l = 0; l < x.levels(); ++l)
                m = std::max(m, x.euclidean_level_norm(l));
            return m;
        }
        double s = 0.0;
        for (std::size_t l = 0; l < x.levels(); ++l)
            s += std::pow(x.euclidean_level_norm(l), rho);
        return std::pow(s / k, 1.0 / rho);
    }
    // dual norm: conjugate exponent tau, levels rescaled by K
    if (inf_rho) {  // tau = 1
        double s = 0.0;
        for (std::size_t l = 0; l < x.levels(); ++l) s += x.euclidean_level_norm(l);
        return s;
    }
    if (rho == 1.0) {  // tau = inf
        double m = 0.0;
        for (std::size_t l = 0; l < x.levels(); ++l)
            m = std::max(m, k * x.euclidean_level_norm(l));
        return m;
    }
    const double tau = rho / (rho - 1.0);
    double s = 0.0;
    for (std::size_t l = 0; l < x.levels(); ++l)
        s += std::pow(k * x.euclidean_level_norm(l), tau);
    return std::pow(s / k, 1.0 / tau);
}

}  // namespace detail

/// (1/K sum |x_k|^rho)^(1/rho), or its dual with conjugate exponent and the
/// K-rescaling that matches Wasserstein distances on equal-weight measures.
inline double scaled_norm(const DualVector& x, double rho, bool dual) {
    return detail::scaled_norm_impl(x, rho, dual);
}
inline double scaled_norm(const ConePoint& x, double rho, bool dual) {
    return detail::scaled_norm_impl(x, rho, dual);
}

/// Grid test for tiltedness: samples f on the tensor grid over [lo, hi]^(K*D)
/// restricted to the ordered sector, and checks that every complete
/// forward-difference gradient lies in the closed cone up to tol*(1 + 1/h).
/// f is called with a flat coordinate span laid out level-major (level 0 all
/// coordinates, then level 1, ...).
template <class F>
bool tilted_check(F&& f, std::size_t levels, std::size_t dim, double lo, double hi,
                  std::size_t n_per_axis, double tol) {
    if (n_per_axis < 2 || !(hi > lo)) throw std::invalid_argument("tilted_check: degenerate grid");
    const std::size_t axes = levels * dim;
    const double h = (hi - lo) / static_cast<double>(n_per_axis - 1);
    const double slack = tol * (1.0 + 1.0 / h);

    std::vector<std::size_t> idx(axes, 0);
    std::vector<double> coords(axes, 0.0);
    std::vector<double> shifted(axes, 0.0);

    auto in_sector = [&](const std::vector<std::size_t>& ix) {
        for (std::size_t d = 0; d < dim; ++d)
            for (std::size_t k = 0; k + 1 < levels; ++k)
                if (ix[(k + 1) * dim + d] < ix[k * dim + d]) return false;
        return true;
    };

    for (;;) {
        if (in_sector(idx)) {
            bool all_forward_ok = true;
            for (std::size_t a = 0; a < axes && all_forward_ok; ++a)
                if (idx[a] + 1 >= n_per_axis) all_forward_ok = false;
            if (all_forward_ok) {
                // every forward neighbor must stay in the sector
                for (std::size_t a = 0; a < axes && all_forward_ok; ++a) {
                    ++idx[a];
                    if (!in_sector(idx)) all_forward_ok = false;
                    --idx[a];
                }
            }
            if (all_forward_ok) {
                for (std::size_t a = 0; a < axes; ++a)
                    coords[a] = lo + h * static_cast<double>(idx[a]);
                const double f0 = f(std::span<const double>(coords));
                ConePoint grad(levels, dim);
                for (std::size_t a = 0; a < axes; ++a) {
                    shifted = coords;
                    shifted[a] += h;
                    grad(a / dim, a % dim) = (f(std::span<const double>(shifted)) - f0) / h;
                }
                if (!contains_bar_uk(grad, slack)) return false;
            }
        }
        std::size_t a = 0;
        for (; a < axes; ++a) {
            if (++idx[a] < n_per_axis) break;
            idx[a] = 0;
        }
        if (a == axes) break;
    }
    return true;
}

}  // namespace bsg
