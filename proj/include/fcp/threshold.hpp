#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcp/cluster.hpp"
#include "fcp/error.hpp"
#include "fcp/image.hpp"
#include "fcp/superset.hpp"
#include "fcp/union_find.hpp"

namespace fcp {

inline void check_epsilon(double epsilon)
{
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw ParameterError("epsilon must lie in (0, 1], got " + std::to_string(epsilon));
}

/// A cluster is false when at least a fraction epsilon of its pixels lie in
/// the reference set.
inline bool is_false_cluster(std::size_t overlap, std::size_t area, double epsilon) noexcept
{
    return static_cast<double>(overlap) / static_cast<double>(area) >= epsilon;
}

/// Fraction of clusters that are false with respect to `reference`.
/// Returns nullopt when there are no clusters.
inline std::optional<double> false_cluster_proportion(const ClusterSet& clusters, const Mask& reference,
                                                      double epsilon)
{
    check_epsilon(epsilon);
    if (clusters.rows != reference.rows() || clusters.cols != reference.cols())
        throw StructuralError("cluster set and mask shapes differ");
    if (clusters.empty()) return std::nullopt;
    std::size_t n_false = 0;
    for (const auto& c : clusters.clusters) {
        std::size_t overlap = 0;
        for (std::size_t p : c.pixels) overlap += reference[p] ? 1 : 0;
        n_false += is_false_cluster(overlap, c.area(), epsilon) ? 1 : 0;
    }
    return static_cast<double>(n_false) / static_cast<double>(clusters.count());
}

/// The computable envelope: false clusters judged against the superset U.
inline std::optional<double> envelope(const ClusterSet& clusters, const ConfidenceSuperset& u, double epsilon)
{
    return false_cluster_proportion(clusters, u.mask, epsilon);
}

inline std::optional<double> envelope(const ClusterSet& clusters, const Mask& u, double epsilon)
{
    return false_cluster_proportion(clusters, u, epsilon);
}

/// The true false-cluster proportion against the known null set S0.
inline std::optional<double> true_fcp(const ClusterSet& clusters, const Mask& s0, double epsilon)
{
    return false_cluster_proportion(clusters, s0, epsilon);
}

struct EnvelopePoint {
    double t = 0.0;
    std::optional<double> value; // nullopt when k_t = 0
    std::size_t k = 0;
};

struct FcpResult {
    bool found = false;
    double t_c = std::numeric_limits<double>::infinity();
    ClusterSet clusters;
    double envelope_value = 0.0;
    std::vector<EnvelopePoint> envelope_curve;
    std::string note;
};

namespace detail {

/// Default candidate thresholds: every distinct pixel value.
inline std::vector<double> default_candidates(const ImageGrid& img)
{
    return {img.values().begin(), img.values().end()};
}

} // namespace detail

/// Sweeps the candidate thresholds in descending order, adding pixels to an
/// incremental union-find, and records the envelope at each. t_c is the
/// smallest candidate reached before the envelope first exceeds c (points
/// with no clusters neither qualify nor stop the sweep). The full curve is
/// still evaluated for output.
inline FcpResult find_threshold(const ImageGrid& img, const Mask& u, double epsilon, double c,
                                Connectivity conn = Connectivity::Eight,
                                std::optional<std::vector<double>> t_grid = std::nullopt)
{
    check_epsilon(epsilon);
    if (!(c >= 0.0 && c < 1.0)) throw ParameterError("c must lie in [0, 1), got " + std::to_string(c));
    require_same_shape(img, u, "find_threshold");

    std::vector<double> cand = t_grid ? std::move(*t_grid) : detail::default_candidates(img);
    std::ranges::sort(cand, std::greater<>{});
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    const std::size_t n = img.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return img[a] > img[b]; });

    UnionFind uf(n);
    std::vector<unsigned char> added(n, 0);
    std::vector<std::size_t> in_u(n, 0);
    std::size_t k = 0;
    std::size_t n_false = 0;
    std::size_t next = 0;

    FcpResult result;
    bool crossed = false;
    result.envelope_curve.reserve(cand.size());
    for (double t : cand) {
        while (next < n && img[order[next]] > t) {
            const std::size_t p = order[next++];
            added[p] = 1;
            in_u[p] = u[p] ? 1 : 0;
            ++k;
            std::size_t root = p;
            bool root_false = is_false_cluster(in_u[p], 1, epsilon);
            n_false += root_false ? 1 : 0;
            detail::for_each_neighbor(p / img.cols(), p % img.cols(), img.rows(), img.cols(), conn,
                                      [&](std::size_t q) {
                                          if (!added[q]) return;
                                          const std::size_t other = uf.find(q);
                                          if (other == root) return;
                                          const bool other_false =
                                              is_false_cluster(in_u[other], uf.size_of_root(other), epsilon);
                                          n_false -= (root_false ? 1 : 0) + (other_false ? 1 : 0);
                                          const std::size_t merged_in_u = in_u[root] + in_u[other];
                                          root = uf.unite(root, other);
                                          in_u[root] = merged_in_u;
                                          root_false = is_false_cluster(in_u[root], uf.size_of_root(root), epsilon);
                                          n_false += root_false ? 1 : 0;
                                          --k;
                                      });
        }
        EnvelopePoint pt{t, std::nullopt, k};
        if (k > 0) pt.value = static_cast<double>(n_false) / static_cast<double>(k);
        if (pt.value && *pt.value > c) crossed = true;
        if (pt.value && !crossed) {
            result.found = true;
            result.t_c = t;
            result.envelope_value = *pt.value;
        }
        result.envelope_curve.push_back(pt);
    }

    if (result.found) {
        result.clusters = clusters_at(img, result.t_c, conn);
    } else {
        result.clusters.connectivity = conn;
        result.clusters.rows = img.rows();
        result.clusters.cols = img.cols();
        result.note = "no candidate threshold yields at least one cluster with envelope <= c";
    }
    return result;
}

inline FcpResult find_threshold(const ImageGrid& img, const ConfidenceSuperset& u, double epsilon, double c,
                                Connectivity conn = Connectivity::Eight,
                                std::optional<std::vector<double>> t_grid = std::nullopt)
{
    return find_threshold(img, u.mask, epsilon, c, conn, std::move(t_grid));
}

} // namespace fcp
