#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "fcp/error.hpp"
#include "fcp/rng.hpp"
#include "fcp/threshold.hpp"
#include "fcp/union_find.hpp"

namespace fcp::graph {

struct Location {
    double x = 0.0;
    double y = 0.0;
    double pvalue = 1.0;
    double phase = 0.0; // radians, [-pi, pi)
};

/// Irregular point cloud with per-point p-values and response phases.
class LocationSet {
public:
    LocationSet() = default;
    explicit LocationSet(std::vector<Location> points) : points_(std::move(points))
    {
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ParameterError("location " + std::to_string(i) + " has non-finite coordinates");
            if (!(p.pvalue >= 0.0 && p.pvalue <= 1.0))
                throw ParameterError("location " + std::to_string(i) + " has p-value outside [0, 1]");
            if (!std::isfinite(p.phase)) throw ParameterError("location " + std::to_string(i) + " has non-finite phase");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] const Location& operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] const std::vector<Location>& points() const noexcept { return points_; }

private:
    std::vector<Location> points_;
};

struct ClassLabeling {
    std::vector<std::size_t> labels;
    std::size_t K = 1;
};

inline constexpr std::uint64_t kPhaseClassifierSeed = 0x5EED'C1A5'51F1'E500ULL;

/// K-means on the unit-circle embedding (cos phase, sin phase), k-means++
/// seeded from a fixed internal seed. Classes are renumbered by ascending
/// circular mean phase.
inline ClassLabeling classify_phase(const LocationSet& points, std::size_t K = 2)
{
    if (K < 1) throw ParameterError("class count K must be >= 1");
    const std::size_t n = points.size();
    if (n < K) throw ParameterError("classify_phase needs at least K=" + std::to_string(K) + " points");

    std::vector<double> ex(n), ey(n);
    for (std::size_t i = 0; i < n; ++i) {
        ex[i] = std::cos(points[i].phase);
        ey[i] = std::sin(points[i].phase);
    }
    auto dist2 = [&](std::size_t i, double cx, double cy) {
        const double dx = ex[i] - cx, dy = ey[i] - cy;
        return dx * dx + dy * dy;
    };

    Engine eng = make_engine(kPhaseClassifierSeed);
    std::vector<double> cx, cy;
    {
        boost::random::uniform_int_distribution<std::size_t> first(0, n - 1);
        const std::size_t f = first(eng);
        cx.push_back(ex[f]);
        cy.push_back(ey[f]);
    }
    std::vector<double> nearest(n);
    while (cx.size() < K) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < cx.size(); ++k) best = std::min(best, dist2(i, cx[k], cy[k]));
            nearest[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            boost::random::uniform_real_distribution<double> u(0.0, total);
            const double target = u(eng);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                pick = i;
                acc += nearest[i];
                if (target < acc) break;
            }
        }
        cx.push_back(ex[pick]);
        cy.push_back(ey[pick]);
    }

    std::vector<std::size_t> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = dist2(i, cx[0], cy[0]);
            for (std::size_t k = 1; k < K; ++k) {
                const double d = dist2(i, cx[k], cy[k]);
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            if (label[i] != best) changed = true;
            label[i] = best;
        }
        if (!changed) break;
        std::vector<double> sx(K, 0.0), sy(K, 0.0);
        std::vector<std::size_t> cnt(K, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sx[label[i]] += ex[i];
            sy[label[i]] += ey[i];
            ++cnt[label[i]];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (cnt[k] == 0) continue; // empty class keeps its centroid
            cx[k] = sx[k] / static_cast<double>(cnt[k]);
            cy[k] = sy[k] / static_cast<double>(cnt[k]);
        }
    }

    // Renumber by ascending circular mean of the members.
    std::vector<double> sx(K, 0.0), sy(K, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sx[label[i]] += ex[i];
        sy[label[i]] += ey[i];
    }
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
        return std::atan2(sy[a], sx[a]) < std::atan2(sy[b], sx[b]);
    });
    std::vector<std::size_t> rename(K);
    for (std::size_t r = 0; r < K; ++r) rename[order[r]] = r;
    for (auto& l : label) l = rename[l];
    return {std::move(label), K};
}

/// 1 - (1 - alpha)^(1/n), evaluated without cancellation.
inline double conservative_threshold(std::size_t n, double alpha)
{
    check_alpha(alpha);
    if (n < 1) throw ParameterError("conservative_threshold needs n >= 1");
    return -std::expm1(std::log1p(-alpha) / static_cast<double>(n));
}

/// Indices of the points whose p-value exceeds 1 - (1 - alpha)^(1/n).
inline std::vector<std::size_t> conservative_superset(const LocationSet& points, double alpha)
{
    const double thr = conservative_threshold(points.size(), alpha);
    std::vector<std::size_t> u;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].pvalue > thr) u.push_back(i);
    return u;
}

struct GraphCluster {
    std::size_t id = 0;
    std::vector<std::size_t> members; // ascending point indices
};

inline void check_labels(const LocationSet& points, const ClassLabeling& labels)
{
    if (labels.labels.size() != points.size())
        throw StructuralError("class labeling length differs from the number of points");
}

/// Undirected same-class edges of length <= d, as adjacency lists.
inline std::vector<std::vector<std::size_t>> proximity_graph(const LocationSet& points, const ClassLabeling& labels,
                                                             double d)
{
    if (!(d > 0.0) || !std::isfinite(d)) throw ParameterError("distance bound d must be > 0");
    check_labels(points, labels);
    const std::size_t n = points.size();
    std::vector<std::size_t> by_x(n);
    std::iota(by_x.begin(), by_x.end(), 0);
    std::ranges::stable_sort(by_x, [&](std::size_t a, std::size_t b) { return points[a].x < points[b].x; });
    std::vector<std::vector<std::size_t>> adj(n);
    const double d2 = d * d;
    for (std::size_t a = 0; a < n; ++a) {
        const auto& pa = points[by_x[a]];
        for (std::size_t b = a + 1; b < n && points[by_x[b]].x - pa.x <= d; ++b) {
            const std::size_t i = by_x[a], j = by_x[b];
            if (labels.labels[i] != labels.labels[j]) continue;
            const double dx = points[j].x - pa.x, dy = points[j].y - pa.y;
            if (dx * dx + dy * dy <= d2) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }
    return adj;
}

namespace detail {

inline std::vector<GraphCluster> collect_components(UnionFind& uf, const std::vector<unsigned char>& active)
{
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> slot(active.size(), kNone);
    std::vector<GraphCluster> out;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (!active[i]) continue;
        const std::size_t r = uf.find(i);
        if (slot[r] == kNone) {
            slot[r] = out.size();
            out.push_back({out.size(), {}});
        }
        out[slot[r]].members.push_back(i);
    }
    return out;
}

} // namespace detail

/// Connected components among points with p-value < t, joining same-class
/// points at Euclidean distance <= d. Ids follow the smallest member index.
inline std::vector<GraphCluster> graph_components(const LocationSet& points, const ClassLabeling& labels, double t,
                                                  double d)
{
    const auto adj = proximity_graph(points, labels, d);
    const std::size_t n = points.size();
    std::vector<unsigned char> active(n, 0);
    for (std::size_t i = 0; i < n; ++i) active[i] = points[i].pvalue < t ? 1 : 0;
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        for (std::size_t j : adj[i])
            if (active[j]) uf.unite(i, j);
    }
    return detail::collect_components(uf, active);
}

struct GraphEnvelopePoint {
    double t = 0.0;
    std::optional<double> value;
    std::size_t k = 0;
};

struct GraphFcpResult {
    bool found = false;
    double t_c = -std::numeric_limits<double>::infinity();
    std::vector<GraphCluster> clusters;
    double envelope_value = 0.0;
    std::vector<GraphEnvelopePoint> envelope_curve;
};

/// Ascending sweep over the distinct p-values; t_c is the largest candidate
/// reached before the envelope first exceeds c. A cluster is false when at
/// least a fraction epsilon of its members are in U.
inline GraphFcpResult graph_find_threshold(const LocationSet& points, const ClassLabeling& labels,
                                           const std::vector<std::size_t>& u, double epsilon, double c, double d)
{
    check_epsilon(epsilon);
    if (!(c >= 0.0 && c < 1.0)) throw ParameterError("c must lie in [0, 1), got " + std::to_string(c));
    const auto adj = proximity_graph(points, labels, d);
    const std::size_t n = points.size();
    std::vector<unsigned char> in_u_flag(n, 0);
    for (std::size_t i : u) {
        if (i >= n) throw ParameterError("superset index out of range");
        in_u_flag[i] = 1;
    }

    std::vector<double> cand(n);
    for (std::size_t i = 0; i < n; ++i) cand[i] = points[i].pvalue;
    std::ranges::sort(cand);
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return points[a].pvalue < points[b].pvalue; });

    UnionFind uf(n);
    std::vector<unsigned char> active(n, 0);
    std::vector<std::size_t> in_u(n, 0);
    std::size_t k = 0, n_false = 0, next = 0;

    GraphFcpResult result;
    bool crossed = false;
    for (double t : cand) {
        while (next < n && points[order[next]].pvalue < t) {
            const std::size_t p = order[next++];
            active[p] = 1;
            in_u[p] = in_u_flag[p];
            ++k;
            std::size_t root = p;
            bool root_false = is_false_cluster(in_u[p], 1, epsilon);
            n_false += root_false ? 1 : 0;
            for (std::size_t q : adj[p]) {
                if (!active[q]) continue;
                const std::size_t other = uf.find(q);
                if (other == root) continue;
                const bool other_false = is_false_cluster(in_u[other], uf.size_of_root(other), epsilon);
                n_false -= (root_false ? 1 : 0) + (other_false ? 1 : 0);
                const std::size_t merged = in_u[root] + in_u[other];
                root = uf.unite(root, other);
                in_u[root] = merged;
                root_false = is_false_cluster(in_u[root], uf.size_of_root(root), epsilon);
                n_false += root_false ? 1 : 0;
                --k;
            }
        }
        GraphEnvelopePoint pt{t, std::nullopt, k};
        if (k > 0) pt.value = static_cast<double>(n_false) / static_cast<double>(k);
        if (pt.value && *pt.value > c) crossed = true;
        if (pt.value && !crossed) {
            result.found = true;
            result.t_c = t;
            result.envelope_value = *pt.value;
        }
        result.envelope_curve.push_back(pt);
    }
    if (result.found) result.clusters = graph_components(points, labels, result.t_c, d);
    return result;
}

} // namespace fcp::graph
