#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "bsg/measures.hpp"
#include "bsg/rng.hpp"

using namespace bsg;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t max_atoms, double top = 1.0) {
    const std::size_t count = 1 + rng() % max_atoms;
    std::vector<Atom> atoms;
    double s = 0.0;
    std::vector<double> w(count);
    for (double& x : w) {
        x = 0.05 + uniform_01(rng);
        s += x;
    }
    std::vector<double> locs(count);
    for (double& x : locs) x = top * uniform_01(rng);
    std::sort(locs.begin(), locs.end());
    for (std::size_t i = 0; i < count; ++i) atoms.push_back({locs[i], w[i] / s});
    return DiscreteMeasure(std::move(atoms), top);
}

}  // namespace

TEST_CASE("construction merges coincident atoms and validates weights") {
    const DiscreteMeasure m({{0.5, 0.25}, {0.5, 0.25}, {0.2, 0.5}});
    REQUIRE(m.size() == 2);
    REQUIRE(m.atoms()[0].location == 0.2);
    REQUIRE(m.atoms()[1].weight == Catch::Approx(0.5));
    REQUIRE_THROWS_AS(DiscreteMeasure({{0.1, 0.5}}), std::invalid_argument);
    REQUIRE_THROWS_AS(DiscreteMeasure({{0.1, 0.5}, {0.2, 0.5}, {0.3, 0.1}}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(DiscreteMeasure({{1.5, 1.0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(DiscreteMeasure({{-0.1, 1.0}}), std::invalid_argument);
}

TEST_CASE("inverse cdf step values") {
    const double q = 0.37;
    REQUIRE(DiscreteMeasure::dirac(q).inverse_cdf(0.7) == q);
    const DiscreteMeasure half({{0.0, 0.5}, {1.0, 0.5}});
    REQUIRE(half.inverse_cdf(0.5) == 0.0);
    REQUIRE(half.inverse_cdf(0.75) == 1.0);
    REQUIRE(half.inverse_cdf(0.0) == 0.0);  // every s >= 0 carries mass >= 0
    REQUIRE(DiscreteMeasure::dirac(q).inverse_cdf(0.0) == 0.0);
    REQUIRE_THROWS_AS(half.inverse_cdf(-0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(half.inverse_cdf(1.1), std::invalid_argument);
}

TEST_CASE("inverse cdf is a monotone step function attaining values from the left") {
    std::mt19937_64 rng = substream_rng(101, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const DiscreteMeasure m = random_measure(rng, 6);
        double prev = -1.0;
        for (int i = 0; i <= 64; ++i) {
            const double r = static_cast<double>(i) / 64.0;
            const double v = m.inverse_cdf(r);
            REQUIRE(v >= prev);
            prev = v;
        }
        for (std::size_t i = 0; i + 1 < m.size(); ++i) {
            const double c = m.cumulative()[i];
            REQUIRE(m.inverse_cdf(c) == m.inverse_cdf(c - 1e-9));
            REQUIRE(m.inverse_cdf(c + 1e-9) >= m.inverse_cdf(c));
        }
    }
}

TEST_CASE("quantile coupling realizes the pair law") {
    // any u > 0 hits the atoms; at u = 0 the quantile convention returns 0
    const MeasurePair ab{DiscreteMeasure::dirac(0.3), DiscreteMeasure::dirac(0.8)};
    for (double u : {0.01, 0.3, 0.99})
        REQUIRE(quantile_coupling(ab, u) == std::pair<double, double>{0.3, 0.8});
    REQUIRE(quantile_coupling(ab, 0.0) == std::pair<double, double>{0.0, 0.0});

    const MeasurePair mixed{DiscreteMeasure({{0.0, 0.5}, {1.0, 0.5}}),
                            DiscreteMeasure::dirac(2.0, 2.0)};
    REQUIRE(quantile_coupling(mixed, 0.9) == std::pair<double, double>{1.0, 2.0});

    // marginal check: 1e5 uniforms pushed through the map, within 3 binomial se
    std::mt19937_64 rng = substream_rng(102, 0);
    const DiscreteMeasure m1({{0.1, 0.3}, {0.4, 0.45}, {0.9, 0.25}});
    const DiscreteMeasure m2({{0.2, 0.6}, {0.7, 0.4}});
    const MeasurePair mu{m1, m2};
    const std::size_t n = 100000;
    std::vector<double> count1(m1.size(), 0.0), count2(m2.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y] = quantile_coupling(mu, uniform_01(rng));
        for (std::size_t j = 0; j < m1.size(); ++j)
            if (x == m1.atoms()[j].location) count1[j] += 1.0;
        for (std::size_t j = 0; j < m2.size(); ++j)
            if (y == m2.atoms()[j].location) count2[j] += 1.0;
    }
    for (std::size_t j = 0; j < m1.size(); ++j) {
        const double p = m1.atoms()[j].weight;
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
        REQUIRE(count1[j] / static_cast<double>(n) == Catch::Approx(p).margin(3 * se));
    }
    for (std::size_t j = 0; j < m2.size(); ++j) {
        const double p = m2.atoms()[j].weight;
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
        REQUIRE(count2[j] / static_cast<double>(n) == Catch::Approx(p).margin(3 * se));
    }
}

TEST_CASE("wasserstein distances on quantile steps") {
    REQUIRE(wasserstein_p(DiscreteMeasure::dirac(0.2), DiscreteMeasure::dirac(0.9), 1) ==
            Catch::Approx(0.7));
    const DiscreteMeasure spread({{0.0, 0.5}, {2.0, 0.5}}, 2.0);
    REQUIRE(wasserstein_p(spread, DiscreteMeasure::dirac(1.0, 2.0), 1) == Catch::Approx(1.0));
    REQUIRE_THROWS_AS(wasserstein_p(spread, spread, 3), std::invalid_argument);

    std::mt19937_64 rng = substream_rng(103, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const DiscreteMeasure a = random_measure(rng, 5);
        const DiscreteMeasure b = random_measure(rng, 5);
        const DiscreteMeasure c = random_measure(rng, 5);
        for (int p : {1, 2}) {
            REQUIRE(wasserstein_p(a, b, p) == Catch::Approx(wasserstein_p(b, a, p)).margin(1e-12));
            REQUIRE(wasserstein_p(a, c, p) <=
                    wasserstein_p(a, b, p) + wasserstein_p(b, c, p) + 1e-12);
        }
        REQUIRE(wasserstein_p(a, b, 1) <= wasserstein_p(a, b, 2) + 1e-12);
    }

    // Monte-Carlo oracle: W1 = E|F_a^{-1}(U) - F_b^{-1}(U)| under the shared uniform
    const DiscreteMeasure a({{0.1, 0.35}, {0.55, 0.4}, {0.8, 0.25}});
    const DiscreteMeasure b({{0.3, 0.7}, {0.95, 0.3}});
    MeanVar mc;
    for (int i = 0; i < 200000; ++i) {
        const double u = uniform_01(rng);
        mc.push(std::abs(a.inverse_cdf(u) - b.inverse_cdf(u)));
    }
    REQUIRE(wasserstein_p(a, b, 1) ==
            Catch::Approx(mc.mean()).margin(3 * mc.stderr_of_mean()));
}

TEST_CASE("discretize to cone and back") {
    const MeasurePair dirac_pair{DiscreteMeasure::dirac(0.4), DiscreteMeasure::dirac(0.7)};
    const ConePoint x3 = discretize_to_cone(dirac_pair, 3);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(x3(k, 0) == Catch::Approx(0.4));
        REQUIRE(x3(k, 1) == Catch::Approx(0.7));
    }

    const MeasurePair mixed{DiscreteMeasure({{1.0, 0.5}, {3.0, 0.5}}, 3.0),
                            DiscreteMeasure::dirac(2.0, 3.0)};
    const ConePoint x2 = discretize_to_cone(mixed, 2);
    REQUIRE(x2(0, 0) == Catch::Approx(1.0));
    REQUIRE(x2(0, 1) == Catch::Approx(2.0));
    REQUIRE(x2(1, 0) == Catch::Approx(3.0));
    REQUIRE(x2(1, 1) == Catch::Approx(2.0));
    const ConePoint x1 = discretize_to_cone(mixed, 1);
    REQUIRE(x1(0, 0) == Catch::Approx(2.0));
    REQUIRE(x1(0, 1) == Catch::Approx(2.0));
    REQUIRE_THROWS_AS(discretize_to_cone(mixed, 0), std::invalid_argument);

    const MeasurePair round = cone_to_measure_pair(x2);
    REQUIRE(round.first.size() == 2);
    REQUIRE(round.first.atoms()[0].location == 1.0);
    REQUIRE(round.second.size() == 1);
    REQUIRE(round.second.atoms()[0].location == 2.0);

    const ConePoint diag = ConePoint::from_rows({{0.6, 0.6}});
    const MeasurePair dp = cone_to_measure_pair(diag);
    REQUIRE(dp.first.size() == 1);
    REQUIRE(dp.first.atoms()[0].location == 0.6);

    REQUIRE_THROWS_AS(cone_to_measure_pair(ConePoint::from_rows({{2.0, 1.0}, {1.0, 2.0}})),
                      std::invalid_argument);

    // round trip cone -> measures -> cone on random points
    std::mt19937_64 rng = substream_rng(104, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t levels = 1 + rng() % 4;
        ConePoint x(levels, 2);
        for (std::size_t d = 0; d < 2; ++d) {
            std::vector<double> v(levels);
            for (double& t : v) t = uniform_01(rng);
            std::sort(v.begin(), v.end());
            for (std::size_t k = 0; k < levels; ++k) x(k, d) = v[k];
        }
        const ConePoint back = discretize_to_cone(cone_to_measure_pair(x), levels);
        for (std::size_t k = 0; k < levels; ++k)
            for (std::size_t d = 0; d < 2; ++d)
                REQUIRE(back(k, d) == Catch::Approx(x(k, d)).margin(1e-12));
    }

    // measure -> cone -> measure round trip for equal-weight K-atom inputs
    for (int trial = 0; trial < 50; ++trial) {
        const MeasurePair mu{random_measure(rng, 4), random_measure(rng, 4)};
        const std::size_t levels = 2 + rng() % 3;
        const ConePoint x = discretize_to_cone(mu, levels);
        REQUIRE(contains_bar_uk(x, 1e-12));
        const ConePoint again = discretize_to_cone(cone_to_measure_pair(x), levels);
        for (std::size_t k = 0; k < levels; ++k)
            for (std::size_t d = 0; d < 2; ++d)
                REQUIRE(again(k, d) == Catch::Approx(x(k, d)).margin(1e-12));
    }
}

TEST_CASE("monotone coupling law produces comonotone samples") {
    std::mt19937_64 rng = substream_rng(105, 0);
    const DiscreteMeasure half({{0.0, 0.5}, {1.0, 0.5}});
    const JointSample s = monotone_coupling_law(half, half, 2000, rng);
    for (const auto& [x, y] : s.pairs) REQUIRE(x == y);

    const JointSample sc = monotone_coupling_law(DiscreteMeasure::dirac(0.4), half, 500, rng);
    for (const auto& [x, y] : sc.pairs) REQUIRE(x == 0.4);

    REQUIRE(monotone_coupling_check(s, 1e-9).monotone);

    // empirical cdf identity at every atom pair, within 3 binomial se
    const DiscreteMeasure other({{0.2, 0.3}, {0.6, 0.45}, {0.9, 0.25}});
    const std::size_t n = 10000;
    const JointSample big = monotone_coupling_law(half, other, n, rng);
    const double se = 3.0 / (2.0 * std::sqrt(static_cast<double>(n)));  // 3 * max binomial se
    const MonotoneCouplingReport rep = monotone_coupling_check(big, se);
    REQUIRE(rep.dominance_ok);
    REQUIRE(rep.cdf_identity_ok);
}

TEST_CASE("monotone coupling check rejects counterexamples") {
    JointSample anti;
    anti.pairs = {{0.0, 1.0}, {1.0, 0.0}};
    const MonotoneCouplingReport rep = monotone_coupling_check(anti, 1e-9);
    REQUIRE_FALSE(rep.dominance_ok);
    REQUIRE(rep.violating_pair.has_value());
    REQUIRE_FALSE(rep.monotone);

    // independent coupling of two nondegenerate laws fails condition (2)
    std::mt19937_64 rng = substream_rng(106, 0);
    const DiscreteMeasure half({{0.0, 0.5}, {1.0, 0.5}});
    JointSample indep;
    for (int i = 0; i < 10000; ++i)
        indep.pairs.emplace_back(half.inverse_cdf(uniform_01(rng)),
                                 half.inverse_cdf(uniform_01(rng)));
    REQUIRE_FALSE(monotone_coupling_check(indep, 0.05).monotone);
    REQUIRE_THROWS_AS(monotone_coupling_check(JointSample{}, 1e-9), std::invalid_argument);
}

TEST_CASE("dominance and cdf characterizations agree on small exact joints") {
    // exhaustive over permutation joints of size <= 6 with distinct coordinates
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            JointSample s;
            for (std::size_t i = 0; i < n; ++i)
                s.pairs.emplace_back(static_cast<double>(i), static_cast<double>(perm[i]));
            const MonotoneCouplingReport rep = monotone_coupling_check(s, 1e-12);
            REQUIRE(rep.dominance_ok == rep.cdf_identity_ok);
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}
