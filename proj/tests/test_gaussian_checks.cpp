#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bsg/gaussian_checks.hpp"
#include "bsg/rng.hpp"

using namespace bsg;

namespace {

std::vector<double> random_psd(std::mt19937_64& rng, std::size_t d) {
    std::vector<double> a(d * d);
    for (double& v : a) v = standard_normal(rng);
    std::vector<double> c(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = 0; l < d; ++l) c[i * d + j] += a[i * d + l] * a[j * d + l];
    return c;
}

}  // namespace

TEST_CASE("integration by parts on a single state") {
    std::mt19937_64 rng = substream_rng(501, 0);
    // one state: <x1> averages to 0 and the rhs collapses to C12 - C12 = 0
    std::vector<double> cov{1.0, 0.4, 0.4, 2.0};
    const GibpReport rep = gibp_check(cov, {1.0}, 40000, rng);
    REQUIRE(rep.lhs_first == Catch::Approx(0.0).margin(3 * rep.stderr_first + 0.02));
    REQUIRE(rep.rhs_first == 0.0);
    REQUIRE(rep.first_ok());
    REQUIRE(rep.second_ok());
}

TEST_CASE("independent fields decouple the second identity") {
    std::mt19937_64 rng = substream_rng(502, 0);
    const std::size_t s = 3, d = 2 * s;
    std::vector<double> cov(d * d, 0.0);
    // block-diagonal: C12 = 0, C11 and C22 random PSD
    const std::vector<double> c11 = random_psd(rng, s);
    const std::vector<double> c22 = random_psd(rng, s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            cov[i * d + j] = c11[i * s + j];
            cov[(s + i) * d + (s + j)] = c22[i * s + j];
        }
    const GibpReport rep = gibp_check(cov, {0.2, 0.5, 0.3}, 200000, rng);
    REQUIRE(rep.first_ok());
    REQUIRE(rep.second_ok());
    REQUIRE(rep.lhs_first == Catch::Approx(0.0).margin(3 * rep.stderr_first + 0.02));
}

TEST_CASE("both identities hold on random instances") {
    std::mt19937_64 rng = substream_rng(503, 0);
    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t s = 4;
        const std::vector<double> cov = random_psd(rng, 2 * s);
        std::vector<double> weights{0.1, 0.2, 0.3, 0.4};
        const GibpReport rep = gibp_check(cov, weights, 200000, rng);
        INFO("first " << rep.lhs_first << " vs " << rep.rhs_first << " se " << rep.stderr_first);
        INFO("second " << rep.lhs_second << " vs " << rep.rhs_second << " se "
                       << rep.stderr_second);
        REQUIRE(rep.first_ok());
        REQUIRE(rep.second_ok());
    }

    std::vector<double> not_psd{1.0, 0.0, 0.0, -1.0};
    REQUIRE_THROWS_AS(gibp_check(not_psd, {1.0}, 10, rng), std::invalid_argument);
}

TEST_CASE("covariance embedding: pure tree and pure spin cases") {
    std::vector<EmbedPoint> points;
    for (std::size_t i = 0; i < 4; ++i)
        points.push_back({{1.0, -1.0}, {i / 2, i % 2}});
    const EmbedReport tree_only = perturbation_covariance_embed(points, 0.0, 0.7, 1);
    REQUIRE(tree_only.routes_agree);
    REQUIRE(tree_only.psd);
    // gram entries are 0.7 * wedge
    REQUIRE(tree_only.gram[0 * 4 + 1] == Catch::Approx(0.7));   // shared first step
    REQUIRE(tree_only.gram[0 * 4 + 2] == Catch::Approx(0.0));   // disjoint paths
    REQUIRE(tree_only.gram[0 * 4 + 0] == Catch::Approx(1.4));   // self wedge = depth

    const EmbedReport spin_only = perturbation_covariance_embed(points, 0.5, 0.0, 1);
    REQUIRE(spin_only.routes_agree);
    REQUIRE(spin_only.psd);
    REQUIRE(spin_only.gram[0 * 4 + 1] == Catch::Approx(0.5 * 2.0));

    REQUIRE_THROWS_AS(perturbation_covariance_embed(points, 1.0, 1.0, 0),
                      std::invalid_argument);
}

TEST_CASE("covariance embedding matches the explicit tensor on small cases") {
    // independent oracle: materialize the p-fold tensor and inner-product it
    std::mt19937_64 rng = substream_rng(504, 0);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t n_points = 5, spin_dim = 2, depth = 2, p = 3;
        std::vector<EmbedPoint> points;
        for (std::size_t i = 0; i < n_points; ++i) {
            EmbedPoint pt;
            pt.sigma = {standard_normal(rng), standard_normal(rng)};
            pt.path = {rng() % 2, rng() % 2};
            points.push_back(pt);
        }
        const double l1 = 0.8, l2 = 1.3;
        const EmbedReport rep = perturbation_covariance_embed(points, l1, l2, p);
        REQUIRE(rep.routes_agree);
        REQUIRE(rep.psd);

        // rebuild the embedding with explicit prefix coordinates
        std::map<std::vector<std::size_t>, std::size_t> prefixes;
        for (const auto& pt : points) {
            std::vector<std::size_t> pre;
            for (std::size_t l = 0; l < depth; ++l) {
                pre.push_back(pt.path[l]);
                prefixes.emplace(pre, prefixes.size());
            }
        }
        const std::size_t dim = spin_dim + prefixes.size();
        auto embed = [&](const EmbedPoint& pt) {
            std::vector<double> h(dim, 0.0);
            for (std::size_t j = 0; j < spin_dim; ++j) h[j] = std::sqrt(l1) * pt.sigma[j];
            std::vector<std::size_t> pre;
            for (std::size_t l = 0; l < depth; ++l) {
                pre.push_back(pt.path[l]);
                h[spin_dim + prefixes.at(pre)] = std::sqrt(l2);
            }
            return h;
        };
        auto tensor = [&](const std::vector<double>& h) {
            // p-fold tensor, flattened
            std::vector<double> t = h;
            for (std::size_t e = 1; e < p; ++e) {
                std::vector<double> next(t.size() * dim);
                for (std::size_t i = 0; i < t.size(); ++i)
                    for (std::size_t j = 0; j < dim; ++j) next[i * dim + j] = t[i] * h[j];
                t = std::move(next);
            }
            return t;
        };
        for (std::size_t i = 0; i < n_points; ++i)
            for (std::size_t j = 0; j < n_points; ++j) {
                const std::vector<double> ti = tensor(embed(points[i]));
                const std::vector<double> tj = tensor(embed(points[j]));
                double inner = 0.0;
                for (std::size_t c = 0; c < ti.size(); ++c) inner += ti[c] * tj[c];
                REQUIRE(rep.gram[i * n_points + j] == Catch::Approx(inner).margin(1e-10));
            }
    }
}
