#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bsg/cascade.hpp"
#include "bsg/rng.hpp"

using namespace bsg;

TEST_CASE("cascade spec validation and measures") {
    CascadeSpec spec{{0.3, 0.7}, {{{0.1, 0.2, 0.5}, {0.0, 0.3, 0.3}}}};
    spec.validate();
    const DiscreteMeasure m0 = spec.measure(0);
    REQUIRE(m0.size() == 3);
    REQUIRE(m0.atoms()[0].weight == Catch::Approx(0.3));
    REQUIRE(m0.atoms()[1].weight == Catch::Approx(0.4));
    REQUIRE(m0.atoms()[2].weight == Catch::Approx(0.3));
    // coincident ladder values merge in the measure
    REQUIRE(spec.measure(1).size() == 2);

    CascadeSpec bad{{0.7, 0.3}, {{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}}};
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    CascadeSpec bad_q{{0.5}, {{{0.4, 0.2}, {0.0, 0.0}}}};
    REQUIRE_THROWS_AS(bad_q.validate(), std::invalid_argument);

    // round trip through the induced measure pair
    const CascadeSpec rebuilt = CascadeSpec::from_measures(spec.measures());
    REQUIRE(rebuilt.measures().first == spec.measures().first);
    REQUIRE(rebuilt.measures().second == spec.measures().second);
}

TEST_CASE("reduced drops zero-weight interior levels") {
    CascadeSpec degenerate{{0.4, 0.4}, {{{0.1, 0.2, 0.5}, {0.0, 0.1, 0.2}}}};
    degenerate.validate();
    const CascadeSpec red = degenerate.reduced();
    REQUIRE(red.depth() == 1);
    REQUIRE(red.zetas[0] == 0.4);
    REQUIRE(red.q[0] == std::vector<double>{0.1, 0.5});
    REQUIRE(red.measures().first == degenerate.measures().first);
}

TEST_CASE("alpha wedge") {
    std::vector<std::size_t> a{1, 4}, b{1, 7}, c{2, 0}, d{3, 0};
    REQUIRE(alpha_wedge(a, a) == 2);
    REQUIRE(alpha_wedge(a, b) == 1);
    REQUIRE(alpha_wedge(c, d) == 0);
    std::vector<std::size_t> shallow{1};
    REQUIRE_THROWS_AS(alpha_wedge(a, shallow), std::invalid_argument);

    TruncatedCascade tc;
    tc.depth = 2;
    tc.branching = 10;
    REQUIRE(tc.wedge(14, 17) == 1);  // digits (1,4) vs (1,7)
    REQUIRE(tc.wedge(20, 30) == 0);
    REQUIRE(tc.wedge(14, 14) == 2);
    REQUIRE(tc.path_vertex(14, 0) == 0);
    REQUIRE(tc.path_vertex(14, 1) == 1 + 1);
    REQUIRE(tc.path_vertex(14, 2) == 1 + 10 + 14);
}

TEST_CASE("sampled cascades have normalized decreasing-by-construction weights") {
    std::mt19937_64 rng = substream_rng(301, 0);
    const CascadeSpec trivial{{}, {{{0.0}, {0.0}}}};
    const TruncatedCascade root_only = sample_cascade(trivial, 100, rng);
    REQUIRE(root_only.leaf_count() == 1);
    REQUIRE(root_only.leaf_weights[0] == 1.0);

    const CascadeSpec depth1{{0.5}, {{{0.0, 0.0}, {0.0, 0.0}}}};
    const TruncatedCascade tc = sample_cascade(depth1, 200, rng);
    REQUIRE(tc.leaf_count() == 200);
    double sum = 0.0;
    for (std::size_t i = 0; i < tc.leaf_count(); ++i) {
        REQUIRE(tc.leaf_weights[i] > 0.0);
        if (i > 0) REQUIRE(tc.leaf_weights[i] <= tc.leaf_weights[i - 1]);
        sum += tc.leaf_weights[i];
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_THROWS_AS(sample_cascade(depth1, 0, rng), std::invalid_argument);
}

TEST_CASE("self-overlap matches one minus zeta at depth one") {
    std::mt19937_64 rng = substream_rng(302, 0);
    const CascadeSpec spec{{0.5}, {{{0.0, 0.0}, {0.0, 0.0}}}};
    MeanVar mv;
    for (int i = 0; i < 2000; ++i) {
        const TruncatedCascade tc = sample_cascade(spec, 200, rng);
        double s = 0.0;
        for (double w : tc.leaf_weights) s += w * w;
        mv.push(s);
    }
    REQUIRE(mv.mean() == Catch::Approx(0.5).margin(3 * mv.stderr_of_mean()));
}

TEST_CASE("overlap law histograms") {
    std::mt19937_64 rng = substream_rng(303, 0);
    const CascadeSpec depth1{{0.5}, {{{0.0, 0.0}, {0.0, 0.0}}}};
    const OverlapLawEstimate law1 = cascade_overlap_law(depth1, 200, 2000, rng, 4);
    REQUIRE(law1.probability[0] == Catch::Approx(0.5).margin(3 * law1.stderr_[0]));
    REQUIRE(law1.probability[1] == Catch::Approx(0.5).margin(3 * law1.stderr_[1]));

    // zeta_1 -> 1 trend: mass moves onto wedge 0. The exact value
    // zeta_{l+1} - zeta_l is out of reach for deep zeta at any feasible
    // truncation (the kept fraction of the point-process mass scales like
    // M^{-(1-zeta)/zeta}), so the trend is what a sampled test can pin.
    double prev0 = -1.0;
    for (double zeta : {0.3, 0.6, 0.85}) {
        const CascadeSpec spec{{zeta}, {{{0.0, 0.0}, {0.0, 0.0}}}};
        const OverlapLawEstimate law = cascade_overlap_law(spec, 400, 600, rng, 4);
        REQUIRE(law.probability[0] > prev0);
        prev0 = law.probability[0];
    }
    REQUIRE(prev0 > 0.75);
}

TEST_CASE("recursive integration of the cascade") {
    const CascadeSpec depth1{{0.5}, {{{0.0, 0.0}, {0.0, 0.0}}}};
    std::mt19937_64 rng = substream_rng(304, 0);
    auto constant = [](const std::vector<std::vector<double>>&) { return 3.25; };
    const std::vector<LevelIntegrator> gh2 = {LevelIntegrator::gauss_hermite_rule(40),
                                              LevelIntegrator::gauss_hermite_rule(40)};
    REQUIRE(recursive_integrate(constant, depth1, gh2, rng) == Catch::Approx(3.25).margin(1e-12));

    // terminal a*y_1: closed form zeta a^2 / 2 by the gaussian mgf
    const double a = 0.9;
    auto linear = [a](const std::vector<std::vector<double>>& w) { return a * w[1][0]; };
    REQUIRE(recursive_integrate(linear, depth1, gh2, rng) ==
            Catch::Approx(0.5 * a * a / 2.0).margin(1e-9));

    // depth 0 reduces to the plain expectation
    const CascadeSpec depth0{{}, {{{0.0}, {0.0}}}};
    auto square = [](const std::vector<std::vector<double>>& w) { return w[0][0] * w[0][0]; };
    REQUIRE(recursive_integrate(square, depth0, {LevelIntegrator::gauss_hermite_rule(40)}, rng) ==
            Catch::Approx(1.0).margin(1e-10));

    REQUIRE_THROWS_AS(
        recursive_integrate(constant, depth1, {LevelIntegrator::gauss_hermite_rule(40)}, rng),
        std::invalid_argument);

    // log-exp smoothing is nondecreasing in zeta
    auto bumpy = [](const std::vector<std::vector<double>>& w) {
        return 0.7 * w[1][0] + 0.4 * std::sin(w[1][0]);
    };
    double prev = -1e100;
    for (double zeta : {0.2, 0.5, 0.8}) {
        const CascadeSpec spec{{zeta}, {{{0.0, 0.0}, {0.0, 0.0}}}};
        const double val = recursive_integrate(bumpy, spec, gh2, rng);
        REQUIRE(val >= prev - 1e-10);
        prev = val;
    }

    // monte-carlo levels agree with quadrature within their error
    std::mt19937_64 rng2 = substream_rng(304, 1);
    MeanVar mc;
    for (int rep = 0; rep < 40; ++rep) {
        const std::vector<LevelIntegrator> mix = {LevelIntegrator::gauss_hermite_rule(40),
                                                  LevelIntegrator::monte_carlo_rule(512, 1)};
        mc.push(recursive_integrate(linear, depth1, mix, rng2));
    }
    REQUIRE(mc.mean() ==
            Catch::Approx(0.5 * a * a / 2.0).margin(3 * mc.stderr_of_mean() + 2e-3));
}
