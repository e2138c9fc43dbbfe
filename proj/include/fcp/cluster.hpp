#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fcp/error.hpp"
#include "fcp/image.hpp"
#include "fcp/union_find.hpp"

namespace fcp {

enum class Connectivity { Four, Eight };

inline Connectivity parse_connectivity(std::string_view s)
{
    if (s == "4" || s == "four") return Connectivity::Four;
    if (s == "8" || s == "eight") return Connectivity::Eight;
    throw ParameterError("connectivity must be four or eight, got '" + std::string(s) + "'");
}

inline std::string_view to_string(Connectivity c) { return c == Connectivity::Four ? "four" : "eight"; }

struct BoundingBox {
    std::size_t row_min = 0, row_max = 0, col_min = 0, col_max = 0;
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Cluster {
    std::size_t id = 0;
    std::vector<std::size_t> pixels; // row-major linear indices, ascending
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    double peak = std::numeric_limits<double>::quiet_NaN();
    BoundingBox bbox;

    [[nodiscard]] std::size_t area() const noexcept { return pixels.size(); }
};

/// Connected components of a level set. `threshold` is NaN when the set
/// was built from a bare mask.
struct ClusterSet {
    double threshold = std::numeric_limits<double>::quiet_NaN();
    Connectivity connectivity = Connectivity::Eight;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Cluster> clusters;

    [[nodiscard]] std::size_t count() const noexcept { return clusters.size(); }
    [[nodiscard]] bool empty() const noexcept { return clusters.empty(); }
};

/// Pixels with value strictly greater than t.
inline Mask level_set(const ImageGrid& img, double t)
{
    Mask mask(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.size(); ++i) mask[i] = img[i] > t ? 1 : 0;
    return mask;
}

namespace detail {

/// Calls fn(neighbor_index) for the already-visited (raster-earlier)
/// neighbors of pixel (r, c).
template <typename Fn>
void for_each_prior_neighbor(std::size_t r, std::size_t c, std::size_t cols, Connectivity conn, Fn&& fn)
{
    if (c > 0) fn(r * cols + c - 1);
    if (r > 0) {
        fn((r - 1) * cols + c);
        if (conn == Connectivity::Eight) {
            if (c > 0) fn((r - 1) * cols + c - 1);
            if (c + 1 < cols) fn((r - 1) * cols + c + 1);
        }
    }
}

/// Calls fn(neighbor_index) for every in-bounds neighbor of pixel (r, c).
template <typename Fn>
void for_each_neighbor(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols, Connectivity conn,
                       Fn&& fn)
{
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (conn == Connectivity::Four && dr != 0 && dc != 0) continue;
            if ((dr < 0 && r == 0) || (dr > 0 && r + 1 >= rows)) continue;
            if ((dc < 0 && c == 0) || (dc > 0 && c + 1 >= cols)) continue;
            const auto nr = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr);
            const auto nc = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + dc);
            fn(nr * cols + nc);
        }
    }
}

} // namespace detail

/// Union-find labeling. Cluster ids follow the raster order of each
/// cluster's first pixel. If `intensity` is given, peaks are filled in.
inline ClusterSet connected_components(const Mask& mask, Connectivity conn = Connectivity::Eight,
                                       const ImageGrid* intensity = nullptr)
{
    if (intensity) require_same_shape(mask, *intensity, "connected_components");
    const std::size_t rows = mask.rows();
    const std::size_t cols = mask.cols();
    UnionFind uf(mask.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            if (!mask[i]) continue;
            detail::for_each_prior_neighbor(r, c, cols, conn, [&](std::size_t j) {
                if (mask[j]) uf.unite(i, j);
            });
        }
    }

    ClusterSet set;
    set.connectivity = conn;
    set.rows = rows;
    set.cols = cols;
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> slot(mask.size(), kNone);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const std::size_t root = uf.find(i);
        if (slot[root] == kNone) {
            slot[root] = set.clusters.size();
            Cluster cl;
            cl.id = set.clusters.size();
            cl.bbox = {i / cols, i / cols, i % cols, i % cols};
            set.clusters.push_back(std::move(cl));
        }
        Cluster& cl = set.clusters[slot[root]];
        cl.pixels.push_back(i);
        const std::size_t r = i / cols, c = i % cols;
        cl.bbox.row_min = std::min(cl.bbox.row_min, r);
        cl.bbox.row_max = std::max(cl.bbox.row_max, r);
        cl.bbox.col_min = std::min(cl.bbox.col_min, c);
        cl.bbox.col_max = std::max(cl.bbox.col_max, c);
    }
    for (auto& cl : set.clusters) {
        double sr = 0.0, sc = 0.0;
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t p : cl.pixels) {
            sr += static_cast<double>(p / cols);
            sc += static_cast<double>(p % cols);
            if (intensity) peak = std::max(peak, (*intensity)[p]);
        }
        cl.centroid_row = sr / static_cast<double>(cl.area());
        cl.centroid_col = sc / static_cast<double>(cl.area());
        if (intensity) cl.peak = peak;
    }
    return set;
}

/// Clusters of the strict level set of `img` at `t`, with peaks.
inline ClusterSet clusters_at(const ImageGrid& img, double t, Connectivity conn = Connectivity::Eight)
{
    ClusterSet set = connected_components(level_set(img, t), conn, &img);
    set.threshold = t;
    return set;
}

/// Drops clusters smaller than `min_area` pixels and renumbers nothing;
/// surviving clusters keep their ids.
inline ClusterSet filter_min_area(ClusterSet set, std::size_t min_area)
{
    std::erase_if(set.clusters, [&](const Cluster& c) { return c.area() < min_area; });
    return set;
}

/// Per-pixel cluster label (-1 outside every cluster).
inline Grid<long> label_image(const ClusterSet& set)
{
    Grid<long> labels(set.rows, set.cols, -1L);
    for (const auto& c : set.clusters)
        for (std::size_t p : c.pixels) labels[p] = static_cast<long>(c.id);
    return labels;
}

} // namespace fcp
