#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fcp/cluster.hpp"
#include "fcp/max_distribution.hpp"
#include "fcp/superset.hpp"
#include "fcp/threshold.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fcp;
namespace tu = fcp::test_util;

namespace {

using oracle::flood_partition;
using oracle::partition_of;

std::optional<double> brute_envelope(const ImageGrid& img, const Mask& u, double t, double eps, Connectivity conn)
{
    return oracle::envelope_at(img, u, t, eps, conn);
}

Mask rect_mask(std::size_t rows, std::size_t cols, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1)
{
    Mask m(rows, cols);
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) m(r, c) = 1;
    return m;
}

} // namespace

TEST(LevelSet, Examples)
{
    const ImageGrid img(2, 2, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(count_true(level_set(img, 0.0)), 4u);
    EXPECT_EQ(count_true(level_set(img, 4.0)), 0u);
    const auto m = level_set(img, 2.5);
    EXPECT_EQ(m, Mask(2, 2, std::vector<unsigned char>{0, 0, 1, 1}));
    EXPECT_EQ(count_true(level_set(img, 2.0)), 2u); // ties fall outside
}

TEST(ConnectedComponents, DiagonalNeighbours)
{
    const Mask m(2, 2, std::vector<unsigned char>{1, 0, 0, 1});
    EXPECT_EQ(connected_components(m, Connectivity::Eight).count(), 1u);
    EXPECT_EQ(connected_components(m, Connectivity::Four).count(), 2u);
}

TEST(ConnectedComponents, EmptyMask)
{
    const auto cs = connected_components(Mask(5, 7), Connectivity::Eight);
    EXPECT_TRUE(cs.empty());
    EXPECT_EQ(cs.rows, 5u);
    EXPECT_EQ(cs.cols, 7u);
}

TEST(ConnectedComponents, MatchesFloodFillOnRandomMasks)
{
    for (std::uint64_t s = 0; s < 100; ++s) {
        const double density = 0.2 + 0.5 * static_cast<double>(s % 5) / 4.0;
        const auto m = tu::random_mask(20, 20, density, s);
        for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
            // Both oracles number components by first pixel in raster order.
            EXPECT_EQ(partition_of(connected_components(m, conn)), flood_partition(m, conn)) << s;
        }
    }
}

TEST(ConnectedComponents, ClusterGeometry)
{
    ImageGrid img(4, 5, 0.0);
    img(1, 1) = 3;
    img(1, 2) = 7;
    img(2, 2) = 5;
    img(3, 4) = 2;
    const auto cs = clusters_at(img, 0.5);
    ASSERT_EQ(cs.count(), 2u);
    const auto& a = cs.clusters[0];
    EXPECT_EQ(a.id, 0u);
    EXPECT_EQ(a.area(), 3u);
    EXPECT_DOUBLE_EQ(a.centroid_row, 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(a.centroid_col, 5.0 / 3.0);
    EXPECT_EQ(a.peak, 7.0);
    EXPECT_EQ(a.bbox, (BoundingBox{1, 2, 1, 2}));
    EXPECT_EQ(cs.clusters[1].pixels, std::vector<std::size_t>{19});
    EXPECT_EQ(cs.threshold, 0.5);

    const auto lab = label_image(cs);
    EXPECT_EQ(lab(0, 0), -1);
    EXPECT_EQ(lab(2, 2), 0);
    EXPECT_EQ(lab(3, 4), 1);
    EXPECT_EQ(filter_min_area(cs, 2).count(), 1u);
}

TEST(ConnectedComponents, NestingAcrossThresholds)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto img = gaussian_smooth(tu::random_grid(24, 24, s), 1.0);
        const auto lo = clusters_at(img, -0.05);
        const auto lab = label_image(lo);
        for (double t : {-0.02, 0.0, 0.03, 0.08}) {
            for (const auto& c : clusters_at(img, t).clusters) {
                std::set<long> owners;
                for (std::size_t p : c.pixels) owners.insert(lab[p]);
                EXPECT_EQ(owners.size(), 1u);
                EXPECT_GE(*owners.begin(), 0);
            }
        }
    }
}

TEST(Envelope, Examples)
{
    ImageGrid img(6, 6, 0.0);
    img(1, 1) = 1;
    img(4, 4) = 1;
    const auto cs = clusters_at(img, 0.5);
    const auto u_first = rect_mask(6, 6, 0, 3, 0, 3);
    EXPECT_EQ(envelope(cs, rect_mask(6, 6, 0, 6, 0, 6), 0.99), 1.0);
    EXPECT_EQ(envelope(cs, Mask(6, 6), 0.99), 0.0);
    EXPECT_EQ(envelope(cs, u_first, 0.99), 0.5);
    EXPECT_EQ(envelope(clusters_at(img, 2.0), u_first, 0.99), std::nullopt);
    EXPECT_THROW(envelope(cs, u_first, 0.0), ParameterError);
}

TEST(Envelope, PartialOverlapUsesEpsilon)
{
    ImageGrid img(1, 4, 1.0);
    const auto cs = clusters_at(img, 0.0);
    const Mask u(1, 4, std::vector<unsigned char>{1, 1, 1, 0});
    EXPECT_EQ(envelope(cs, u, 0.75), 1.0);
    EXPECT_EQ(envelope(cs, u, 0.76), 0.0);
}

TEST(TrueFcp, ExtremesAndAgreementWithEnvelope)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto img = gaussian_smooth(tu::random_grid(20, 20, s), 1.0);
        const auto cs = clusters_at(img, 0.0);
        if (cs.empty()) continue;
        EXPECT_EQ(true_fcp(cs, Mask(20, 20, 1), 0.99), 1.0);
        EXPECT_EQ(true_fcp(cs, Mask(20, 20), 0.99), 0.0);
        const auto s0 = tu::random_mask(20, 20, 0.6, s + 100);
        EXPECT_EQ(true_fcp(cs, s0, 0.5), envelope(cs, s0, 0.5));
    }
}

TEST(FindThreshold, EmptySupersetTakesSmallestCandidate)
{
    const auto img = tu::random_grid(10, 10, 3);
    const auto res = find_threshold(img, Mask(10, 10), 0.99, 0.1);
    ASSERT_TRUE(res.found);
    const double lo = *std::ranges::min_element(img.values());
    // Nothing is in U, so the envelope is zero all the way down to the global
    // minimum, which still leaves k >= 1.
    EXPECT_EQ(res.t_c, lo);
    EXPECT_EQ(res.envelope_value, 0.0);
}

TEST(FindThreshold, FullSupersetFindsNothing)
{
    const auto img = tu::random_grid(10, 10, 3);
    const auto res = find_threshold(img, Mask(10, 10, 1), 0.99, 0.1);
    EXPECT_FALSE(res.found);
    EXPECT_TRUE(std::isinf(res.t_c));
    EXPECT_TRUE(res.clusters.empty());
    EXPECT_FALSE(res.note.empty());
}

TEST(FindThreshold, StopsBeforeTheLevelSetPercolates)
{
    // A bright block outside U and scattered noise inside U. Far below the
    // block every pixel merges into one cluster that is mostly, but less than
    // epsilon, in U; the search must not jump past the noise clusters to it.
    auto img = tu::random_grid(20, 20, 1, 0.0, 1.0);
    Mask u(20, 20, 1);
    for (std::size_t r = 2; r < 8; ++r) {
        for (std::size_t c = 2; c < 8; ++c) {
            img(r, c) = 5.0;
            u(r, c) = 0;
        }
    }
    const auto res = find_threshold(img, u, 0.99, 0.1);
    ASSERT_TRUE(res.found);
    ASSERT_EQ(res.clusters.count(), 1u);
    EXPECT_GE(res.clusters.clusters[0].area(), 36u);
    EXPECT_EQ(res.clusters.clusters[0].peak, 5.0);
    // The next candidate down is where the envelope first exceeds c.
    const auto next = std::ranges::find_if(res.envelope_curve, [&](const auto& p) { return p.t < res.t_c; });
    ASSERT_NE(next, res.envelope_curve.end());
    EXPECT_GT(next->value.value(), 0.1);
    const auto& low = res.envelope_curve.back();
    EXPECT_EQ(low.k, 1u);
    EXPECT_EQ(low.value, 0.0); // would qualify on its own
}

TEST(FindThreshold, RejectsBadParameters)
{
    const ImageGrid img(3, 3, 0.0);
    EXPECT_THROW(find_threshold(img, Mask(3, 3), 0.99, 1.0), ParameterError);
    EXPECT_THROW(find_threshold(img, Mask(3, 3), 0.99, -0.1), ParameterError);
    EXPECT_THROW(find_threshold(img, Mask(3, 3), 1.5, 0.1), ParameterError);
    EXPECT_THROW(find_threshold(img, Mask(3, 4), 0.99, 0.1), StructuralError);
}

TEST(FindThreshold, PlateauMatchesExhaustiveScan)
{
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto img = tu::random_grid(16, 16, s, 0.0, 1.0);
        for (std::size_t r = 5; r < 9; ++r)
            for (std::size_t c = 6; c < 11; ++c) img(r, c) = 3.0;
        Mask u(16, 16);
        for (std::size_t i = 0; i < img.size(); ++i) u[i] = img[i] <= 0.9 ? 1 : 0;
        const double c = 0.1 * static_cast<double>(s % 4);
        for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
            auto cand = std::vector<double>(img.values().begin(), img.values().end());
            const auto res = find_threshold(img, u, 0.99, c, conn, cand);
            const auto brute = oracle::threshold_scan(img, u, 0.99, c, cand, conn);
            ASSERT_EQ(res.found, brute.has_value()) << s;
            if (brute) {
                EXPECT_EQ(res.t_c, *brute) << s;
                EXPECT_EQ(partition_of(res.clusters), flood_partition(level_set(img, *brute), conn));
            }
            for (const auto& pt : res.envelope_curve)
                EXPECT_EQ(pt.value, brute_envelope(img, u, pt.t, 0.99, conn)) << "t=" << pt.t;
        }
    }
}

TEST(FindThreshold, DefaultGridMatchesExhaustiveScan)
{
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto img = gaussian_smooth(tu::random_grid(16, 16, s), 1.0);
        const auto u = tu::random_mask(16, 16, 0.7, s + 7);
        const std::vector<double> cand(img.values().begin(), img.values().end());
        const auto res = find_threshold(img, u, 0.8, 0.3);
        const auto brute = oracle::threshold_scan(img, u, 0.8, 0.3, cand, Connectivity::Eight);
        ASSERT_EQ(res.found, brute.has_value());
        if (brute) {
            EXPECT_EQ(res.t_c, *brute);
        }
    }
}

TEST(FindThreshold, InvariantUnderIncreasingTransform)
{
    const auto f = [](double x) { return std::exp(3.0 * x) - 1.0; };
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto img = gaussian_smooth(tu::random_grid(20, 20, s), 1.0);
        const auto img_f = map_pixels(img, f);
        const double r = 0.05;
        Mask u(20, 20), u_f(20, 20);
        for (std::size_t i = 0; i < img.size(); ++i) {
            u[i] = img[i] <= r;
            u_f[i] = img_f[i] <= f(r);
        }
        ASSERT_EQ(u, u_f);
        std::vector<double> grid, grid_f;
        for (double t = -0.3; t < 0.3; t += 0.01) {
            grid.push_back(t);
            grid_f.push_back(f(t));
        }
        const auto a = find_threshold(img, u, 0.99, 0.1, Connectivity::Eight, grid);
        const auto b = find_threshold(img_f, u_f, 0.99, 0.1, Connectivity::Eight, grid_f);
        ASSERT_EQ(a.found, b.found);
        if (a.found) {
            EXPECT_EQ(f(a.t_c), b.t_c);
            EXPECT_EQ(partition_of(a.clusters), partition_of(b.clusters));
        }
    }
}

TEST(FindThreshold, EnvelopeBoundsTrueFcpOnPlantedSources)
{
    constexpr std::size_t n = 32;
    constexpr double alpha = 0.05;
    const auto model = gaussian_model(0, 1);
    const double r = max_percentile(simulate_maxima(model, n, n, 1000, 1), alpha);

    constexpr int runs = 200;
    int held = 0;
    for (int s = 0; s < runs; ++s) {
        auto img = simulate_noise_image(model, n, n, 7000 + static_cast<std::uint64_t>(s));
        Mask s0(n, n, 1);
        const std::size_t centres[3][2] = {{8, 8}, {20, 12}, {12, 24}};
        for (const auto& ctr : centres) {
            for (std::size_t rr = 0; rr < n; ++rr) {
                for (std::size_t cc = 0; cc < n; ++cc) {
                    const double d2 = std::pow(double(rr) - double(ctr[0]), 2) + std::pow(double(cc) - double(ctr[1]), 2);
                    if (d2 <= 9.0) {
                        img(rr, cc) += 4.0 * std::exp(-d2 / 8.0);
                        s0(rr, cc) = 0;
                    }
                }
            }
        }
        const auto u = superset_alg2(img, r, alpha);
        const auto res = find_threshold(img, u, 0.99, 0.1);
        bool ok = true;
        for (const auto& pt : res.envelope_curve) {
            if (!pt.value) continue;
            ok = ok && *true_fcp(clusters_at(img, pt.t), s0, 0.99) <= *pt.value;
        }
        held += ok ? 1 : 0;
    }
    EXPECT_GE(held / double(runs), tu::binomial_lower_band(1.0 - alpha, runs));
}
