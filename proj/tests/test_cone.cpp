#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bsg/cone.hpp"
#include "bsg/rng.hpp"

using namespace bsg;

namespace {

ConePoint random_cone_point(std::mt19937_64& rng, std::size_t levels, std::size_t dim) {
    ConePoint x(levels, dim);
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<double> v(levels);
        for (double& t : v) t = uniform_01(rng);
        std::sort(v.begin(), v.end());
        for (std::size_t k = 0; k < levels; ++k) x(k, d) = v[k];
    }
    return x;
}

DualVector random_dual_member(std::mt19937_64& rng, std::size_t levels, std::size_t dim) {
    DualVector v(levels, dim);
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<double> tails(levels);
        for (double& t : tails) t = uniform_01(rng);
        for (std::size_t k = 0; k < levels; ++k)
            v(k, d) = tails[k] - (k + 1 < levels ? tails[k + 1] : 0.0);
    }
    return v;
}

}  // namespace

TEST_CASE("ordered-cone membership") {
    REQUIRE(contains_bar_uk(ConePoint::from_rows({{1.0}, {3.0}}), 0.0));
    REQUIRE_FALSE(contains_bar_uk(ConePoint::from_rows({{3.0}, {1.0}}), 1e-9));
    REQUIRE_FALSE(contains_bar_uk(ConePoint::from_rows({{-0.5}, {1.0}}), 1e-9));

    SymmetricMatrixPoint m(2, 2);
    m(0, 0, 0) = 1.0;
    m(0, 1, 1) = 1.0;
    m(1, 0, 0) = 2.0;
    m(1, 1, 1) = 2.0;
    REQUIRE(contains_bar_uk(m, 1e-9));  // x1 = I, x2 = 2I
    m(1, 0, 0) = 0.5;                   // difference no longer PSD
    REQUIRE_FALSE(contains_bar_uk(m, 1e-9));
}

TEST_CASE("dual-cone membership via tail sums") {
    REQUIRE(contains_dual_cone(DualVector::from_rows({{-1.0}, {2.0}}), 0.0));
    REQUIRE_FALSE(contains_dual_cone(DualVector::from_rows({{1.0}, {-0.5}}), 1e-9));

    SymmetricMatrixPoint m(2, 2);
    m(0, 0, 0) = -1.0;
    m(0, 1, 1) = -1.0;
    m(1, 0, 0) = 2.0;
    m(1, 1, 1) = 2.0;
    REQUIRE(contains_dual_cone(m, 1e-9));
    m(1, 1, 1) = 0.5;
    REQUIRE_FALSE(contains_dual_cone(m, 1e-9));  // tail sum at k=1 has a negative eigenvalue

    // bidual: every dual member pairs nonnegatively with every cone member
    std::mt19937_64 rng = substream_rng(201, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t levels = 1 + rng() % 3;
        const DualVector v = random_dual_member(rng, levels, 2);
        REQUIRE(contains_dual_cone(v, 1e-12));
        const ConePoint x = random_cone_point(rng, levels, 2);
        double pairing = 0.0;
        for (std::size_t k = 0; k < levels; ++k)
            for (std::size_t d = 0; d < 2; ++d) pairing += v(k, d) * x(k, d);
        REQUIRE(pairing >= -1e-10);
    }
}

TEST_CASE("normal cone generators at the facets") {
    const double tol = 1e-9;
    REQUIRE(normal_cone_generators(ConePoint::from_rows({{1.0}, {3.0}}), tol).empty());

    const auto axis = normal_cone_generators(ConePoint::from_rows({{0.0}, {3.0}}), tol);
    REQUIRE(axis.size() == 1);
    REQUIRE(axis[0](0, 0) == -1.0);
    REQUIRE(axis[0](1, 0) == 0.0);

    const auto diag = normal_cone_generators(ConePoint::from_rows({{2.0}, {2.0}}), tol);
    REQUIRE(diag.size() == 1);
    REQUIRE(diag[0](0, 0) == Catch::Approx(1.0 / std::sqrt(2.0)));
    REQUIRE(diag[0](1, 0) == Catch::Approx(-1.0 / std::sqrt(2.0)));

    REQUIRE_THROWS_AS(normal_cone_generators(ConePoint::from_rows({{3.0}, {1.0}}), tol),
                      std::invalid_argument);

    // generators annihilate the point and sit inside the negated dual cone
    std::mt19937_64 rng = substream_rng(202, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t levels = 2 + rng() % 2;
        ConePoint x = random_cone_point(rng, levels, 2);
        x(0, rng() % 2) = 0.0;
        const std::size_t d = rng() % 2;
        x(1, d) = x(0, d);
        for (const DualVector& g : normal_cone_generators(x, tol)) {
            double dotv = 0.0;
            DualVector neg(levels, 2);
            for (std::size_t k = 0; k < levels; ++k)
                for (std::size_t dd = 0; dd < 2; ++dd) {
                    dotv += g(k, dd) * x(k, dd);
                    neg(k, dd) = -g(k, dd);
                }
            REQUIRE(dotv == 0.0);
            REQUIRE(contains_dual_cone(neg, 1e-12));
        }
    }
}

TEST_CASE("boundary pairing reduces the normal-cone supremum to generators") {
    const double tol = 1e-9;
    REQUIRE(boundary_pairing(ConePoint::from_rows({{0.0}, {3.0}}),
                             DualVector::from_rows({{5.0}, {1.0}}), tol) == Catch::Approx(-5.0));
    REQUIRE(boundary_pairing(ConePoint::from_rows({{2.0}, {2.0}}),
                             DualVector::from_rows({{1.0}, {4.0}}), tol) ==
            Catch::Approx(-3.0 / std::sqrt(2.0)));
    REQUIRE_THROWS_AS(boundary_pairing(ConePoint::from_rows({{1.0}, {3.0}}),
                                       DualVector::from_rows({{1.0}, {1.0}}), tol),
                      std::invalid_argument);

    // for p in the cone, the pairing with any outer normal is <= 0
    std::mt19937_64 rng = substream_rng(203, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t levels = 2 + rng() % 2;
        ConePoint x = random_cone_point(rng, levels, 2);
        x(0, 0) = 0.0;
        if (trial % 2) x(1, 1) = x(0, 1);
        const ConePoint p = random_cone_point(rng, levels, 2);
        DualVector pd(levels, 2);
        for (std::size_t k = 0; k < levels; ++k)
            for (std::size_t d = 0; d < 2; ++d) pd(k, d) = p(k, d);
        REQUIRE(boundary_pairing(x, pd, tol) <= 1e-12);
    }
}

TEST_CASE("scaled norms and the Hoelder pairing") {
    const DualVector x = DualVector::from_rows({{1.0}, {3.0}});
    REQUIRE(scaled_norm(x, 2.0, false) == Catch::Approx(std::sqrt(5.0)));
    REQUIRE(scaled_norm(x, 2.0, true) == Catch::Approx(std::sqrt(20.0)));
    REQUIRE_THROWS_AS(scaled_norm(x, 0.5, false), std::invalid_argument);

    std::mt19937_64 rng = substream_rng(204, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t levels = 1 + rng() % 4;
        DualVector a(levels, 2), b(levels, 2);
        for (std::size_t k = 0; k < levels; ++k)
            for (std::size_t d = 0; d < 2; ++d) {
                a(k, d) = standard_normal(rng);
                b(k, d) = standard_normal(rng);
            }
        const double pairing = std::abs(dot(a, b));
        for (double rho : {1.0, 1.5, 2.0, 3.0}) {
            REQUIRE(pairing <=
                    scaled_norm(a, rho, false) * scaled_norm(b, rho, true) + 1e-12);
        }
        // rho = infinity pairs with tau = 1
        const double inf = std::numeric_limits<double>::infinity();
        REQUIRE(pairing <= scaled_norm(a, inf, false) * scaled_norm(b, inf, true) + 1e-12);
    }
}

TEST_CASE("tilted field detection on grids") {
    auto linear_up = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += 0.7 * v;
        return s;
    };
    REQUIRE(tilted_check(linear_up, 2, 2, 0.0, 1.0, 5, 1e-9));

    auto decreasing = [](std::span<const double> x) { return -x[0]; };
    REQUIRE_FALSE(tilted_check(decreasing, 2, 2, 0.0, 1.0, 5, 1e-9));

    // gradient ordering violation: level-1 slope above level-2 slope
    auto disordered = [](std::span<const double> x) { return 2.0 * x[0] + 0.5 * x[1]; };
    REQUIRE_FALSE(tilted_check(disordered, 2, 1, 0.0, 1.0, 5, 1e-9));
    REQUIRE_THROWS_AS(tilted_check(linear_up, 2, 2, 0.0, 1.0, 1, 1e-9), std::invalid_argument);
}
