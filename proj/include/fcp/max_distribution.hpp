#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/random/uniform_int_distribution.hpp>
#include <nlohmann/json.hpp>

#include "fcp/error.hpp"
#include "fcp/noise_model.hpp"
#include "fcp/rng.hpp"

namespace fcp {

/// Empirical null distributions of the maximum over retained areas.
///
/// `areas` is strictly descending; `maxima[i]` holds the B replicate maxima
/// at `areas[i]`, sorted ascending. Within one replicate, smaller areas are
/// obtained by removing further pixels from the same random order, so the
/// per-replicate maximum never increases as the area shrinks.
struct MaxDistributionTable {
    std::size_t B = 0;
    std::vector<std::size_t> areas;
    std::vector<std::vector<double>> maxima;

    // Provenance, for validating a cached table against a run.
    std::optional<NoiseModel> model;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::optional<std::size_t> area_index(std::size_t area) const noexcept
    {
        auto it = std::lower_bound(areas.begin(), areas.end(), area, std::greater<>{});
        if (it == areas.end() || *it != area) return std::nullopt;
        return static_cast<std::size_t>(it - areas.begin());
    }

    [[nodiscard]] std::size_t smallest_area() const noexcept { return areas.empty() ? 0 : areas.back(); }
};

namespace detail {

inline std::uint64_t image_seed(std::uint64_t seed, std::size_t b) { return child_seed(child_seed(seed, b), 0); }
inline std::uint64_t order_seed(std::uint64_t seed, std::size_t b) { return child_seed(child_seed(seed, b), 1); }

inline void validate_counts(std::size_t B, std::size_t rows, std::size_t cols)
{
    if (B < 1) throw ParameterError("replicate count B must be >= 1");
    if (rows == 0 || cols == 0) throw ParameterError("image dimensions must be positive");
}

} // namespace detail

/// Records, for replicate `b`, the maximum over the retained pixels at
/// every requested area (descending, all <= N). Pixels are removed in a
/// seeded uniformly random order, cumulatively.
inline std::vector<double> replicate_area_maxima(const ImageGrid& sim, std::span<const std::size_t> areas,
                                                 std::uint64_t order_seed)
{
    const std::size_t n = sim.size();
    const std::size_t removals = n - areas.back();
    std::vector<double> values(sim.values().begin(), sim.values().end());

    // Partial Fisher-Yates: the first `removals` slots become the removal order.
    Engine eng = make_engine(order_seed);
    for (std::size_t i = 0; i < removals; ++i) {
        boost::random::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(values[i], values[pick(eng)]);
    }

    // Walk back from the smallest retained set, adding pixels in reverse
    // removal order; the retained set at area A is values[n-A, n).
    std::vector<double> out(areas.size());
    double running = -std::numeric_limits<double>::infinity();
    for (std::size_t i = removals; i < n; ++i) running = std::max(running, values[i]);
    std::size_t next = removals; // values[next, n) already folded in
    for (std::size_t ai = areas.size(); ai-- > 0;) {
        const std::size_t start = n - areas[ai];
        while (next > start) running = std::max(running, values[--next]);
        out[ai] = running;
    }
    return out;
}

/// Builds maxima tables for an explicit set of areas. For any area present
/// in both, the result agrees exactly with build_max_distributions.
inline MaxDistributionTable build_max_distributions_at(const NoiseModel& model, std::size_t rows,
                                                       std::size_t cols, std::size_t B,
                                                       std::vector<std::size_t> areas, std::uint64_t seed)
{
    detail::validate_counts(B, rows, cols);
    const std::size_t n = rows * cols;
    std::ranges::sort(areas, std::greater<>{});
    areas.erase(std::unique(areas.begin(), areas.end()), areas.end());
    if (areas.empty()) throw ParameterError("at least one area is required");
    if (areas.front() > n || areas.back() < 1)
        throw ParameterError("areas must lie in [1, " + std::to_string(n) + "]");

    MaxDistributionTable table;
    table.B = B;
    table.areas = areas;
    table.maxima.assign(areas.size(), std::vector<double>(B));
    table.model = model;
    table.rows = rows;
    table.cols = cols;
    table.seed = seed;

    NoiseSimulator sim(model, rows, cols);
    for (std::size_t b = 0; b < B; ++b) {
        const ImageGrid img = sim.simulate(detail::image_seed(seed, b));
        const auto row = replicate_area_maxima(img, areas, detail::order_seed(seed, b));
        for (std::size_t i = 0; i < areas.size(); ++i) table.maxima[i][b] = row[i];
    }
    for (auto& m : table.maxima) std::ranges::sort(m);
    return table;
}

/// Null maxima at every area N, N-1, ..., N-a.
inline MaxDistributionTable build_max_distributions(const NoiseModel& model, std::size_t rows,
                                                    std::size_t cols, std::size_t B, std::size_t a,
                                                    std::uint64_t seed)
{
    detail::validate_counts(B, rows, cols);
    const std::size_t n = rows * cols;
    if (a >= n)
        throw ParameterError("removal count a=" + std::to_string(a) + " must be < N=" + std::to_string(n));
    std::vector<std::size_t> areas(a + 1);
    for (std::size_t k = 0; k <= a; ++k) areas[k] = n - k;
    return build_max_distributions_at(model, rows, cols, B, std::move(areas), seed);
}

/// Sorted maxima of B full null images (the input to the percentile rule).
inline std::vector<double> simulate_maxima(const NoiseModel& model, std::size_t rows, std::size_t cols,
                                           std::size_t B, std::uint64_t seed)
{
    return std::move(build_max_distributions(model, rows, cols, B, 0, seed).maxima.front());
}

/// Default table depth: min(5000, N/10).
inline std::size_t default_removal_count(std::size_t n) { return std::min<std::size_t>(5000, n / 10); }

/// Fraction of the B null maxima at `area` that are >= x. Uses #/B without
/// the (1+#)/(1+B) correction.
inline double empirical_pvalue(const MaxDistributionTable& table, double x, std::size_t area)
{
    auto idx = table.area_index(area);
    if (!idx) throw LookupError("area " + std::to_string(area) + " is not in the maxima table");
    const auto& m = table.maxima[*idx];
    auto it = std::lower_bound(m.begin(), m.end(), x);
    return static_cast<double>(m.end() - it) / static_cast<double>(m.size());
}

/// Per replicate, the maximum over one uniformly placed side x side square.
inline std::vector<double> build_square_region_maxima(const NoiseModel& model, std::size_t rows,
                                                      std::size_t cols, std::size_t B, std::size_t side,
                                                      std::uint64_t seed)
{
    detail::validate_counts(B, rows, cols);
    if (side < 1 || side > std::min(rows, cols))
        throw ParameterError("square side " + std::to_string(side) + " must lie in [1, min(rows, cols)]");
    NoiseSimulator sim(model, rows, cols);
    std::vector<double> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        const ImageGrid img = sim.simulate(detail::image_seed(seed, b));
        Engine eng = make_engine(detail::order_seed(seed, b));
        boost::random::uniform_int_distribution<std::size_t> pr(0, rows - side);
        boost::random::uniform_int_distribution<std::size_t> pc(0, cols - side);
        const std::size_t r0 = pr(eng);
        const std::size_t c0 = pc(eng);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = r0; i < r0 + side; ++i)
            for (std::size_t j = c0; j < c0 + side; ++j) best = std::max(best, img(i, j));
        out[b] = best;
    }
    std::ranges::sort(out);
    return out;
}

/// The ceil((1-alpha) B)-th order statistic (1-based) of sorted maxima.
inline double max_percentile(std::span<const double> sorted_maxima, double alpha)
{
    if (sorted_maxima.empty()) throw ParameterError("max_percentile: empty maxima list");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
    const double b = static_cast<double>(sorted_maxima.size());
    // (1 - alpha) * B is often meant to be an integer (0.95 * 100); absorb
    // the rounding error of the product before taking the ceiling.
    const double x = (1.0 - alpha) * b;
    auto rank = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
    rank = std::clamp<std::size_t>(rank, 1, sorted_maxima.size());
    return sorted_maxima[rank - 1];
}

inline void to_json(nlohmann::json& j, const MaxDistributionTable& t)
{
    j = {{"B", t.B}, {"areas", t.areas}, {"maxima", t.maxima}, {"rows", t.rows}, {"cols", t.cols},
         {"seed", t.seed}};
    if (t.model) j["model"] = *t.model;
}

inline void from_json(const nlohmann::json& j, MaxDistributionTable& t)
{
    t.B = j.at("B").get<std::size_t>();
    t.areas = j.at("areas").get<std::vector<std::size_t>>();
    t.maxima = j.at("maxima").get<std::vector<std::vector<double>>>();
    t.rows = j.value("rows", std::size_t{0});
    t.cols = j.value("cols", std::size_t{0});
    t.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("model")) t.model = j.at("model").get<NoiseModel>();
    else t.model.reset();
    if (t.areas.size() != t.maxima.size()) throw ParseError("maxima table: areas and maxima lengths differ");
    for (std::size_t i = 0; i < t.areas.size(); ++i) {
        if (t.maxima[i].size() != t.B) throw ParseError("maxima table: list length differs from B");
        if (!std::ranges::is_sorted(t.maxima[i])) throw ParseError("maxima table: list not sorted");
        if (i > 0 && !(t.areas[i] < t.areas[i - 1])) throw ParseError("maxima table: areas not descending");
    }
}

} // namespace fcp
