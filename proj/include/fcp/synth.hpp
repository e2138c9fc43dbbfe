#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "fcp/error.hpp"
#include "fcp/image.hpp"
#include "fcp/rng.hpp"

namespace fcp {

struct SourceSpec {
    double row = 0.0;
    double col = 0.0;
    double amplitude = 0.0; // peak source rate
    double width = 1.0;     // Gaussian standard deviation, pixels
};

/// Poisson counts over a known source field. `truth` marks the source
/// pixels (source rate > 0).
struct SyntheticSky {
    ImageGrid image;
    ImageGrid source_rate;
    Mask truth;
    std::vector<SourceSpec> sources;

    /// The true null set S0 (complement of truth).
    [[nodiscard]] Mask null_set() const
    {
        Mask s0(truth.rows(), truth.cols());
        for (std::size_t i = 0; i < truth.size(); ++i) s0[i] = truth[i] ? 0 : 1;
        return s0;
    }
};

/// Each bump is cut to zero where it falls below this fraction of its peak.
inline constexpr double kBumpCutoff = 1e-3;

inline ImageGrid source_rate_field(std::size_t rows, std::size_t cols, const std::vector<SourceSpec>& sources)
{
    ImageGrid rate(rows, cols);
    for (const auto& s : sources) {
        if (!(s.amplitude >= 0.0) || !std::isfinite(s.amplitude))
            throw ParameterError("source amplitude must be finite and >= 0");
        if (!(s.width > 0.0)) throw ParameterError("source width must be > 0");
        if (s.amplitude == 0.0) continue;
        const double reach = s.width * std::sqrt(-2.0 * std::log(kBumpCutoff));
        const auto r0 = static_cast<std::ptrdiff_t>(std::floor(s.row - reach));
        const auto r1 = static_cast<std::ptrdiff_t>(std::ceil(s.row + reach));
        const auto c0 = static_cast<std::ptrdiff_t>(std::floor(s.col - reach));
        const auto c1 = static_cast<std::ptrdiff_t>(std::ceil(s.col + reach));
        for (auto r = std::max<std::ptrdiff_t>(r0, 0); r <= std::min<std::ptrdiff_t>(r1, static_cast<std::ptrdiff_t>(rows) - 1); ++r) {
            for (auto c = std::max<std::ptrdiff_t>(c0, 0); c <= std::min<std::ptrdiff_t>(c1, static_cast<std::ptrdiff_t>(cols) - 1); ++c) {
                const double dr = static_cast<double>(r) - s.row, dc = static_cast<double>(c) - s.col;
                const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * s.width * s.width));
                if (v >= kBumpCutoff) rate(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) += s.amplitude * v;
            }
        }
    }
    return rate;
}

inline SyntheticSky synth_sky(std::size_t rows, std::size_t cols, double lambda0, std::vector<SourceSpec> sources,
                              std::uint64_t seed)
{
    if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw ParameterError("lambda0 must be finite and >= 0");
    SyntheticSky sky;
    sky.source_rate = source_rate_field(rows, cols, sources);
    sky.sources = std::move(sources);
    sky.image = ImageGrid(rows, cols);
    sky.truth = Mask(rows, cols);

    Engine eng = make_engine(seed);
    boost::random::poisson_distribution<int, double> background(lambda0 > 0.0 ? lambda0 : 1.0);
    for (std::size_t i = 0; i < sky.image.size(); ++i) {
        const double lam1 = sky.source_rate[i];
        sky.truth[i] = lam1 > 0.0 ? 1 : 0;
        const double mean = lam1 + lambda0;
        if (mean <= 0.0) continue;
        if (lam1 == 0.0) {
            sky.image[i] = background(eng);
        } else {
            boost::random::poisson_distribution<int, double> dist(mean);
            sky.image[i] = dist(eng);
        }
    }
    return sky;
}

/// Uniformly placed sources with amplitude and width drawn uniformly from
/// the given ranges, kept `margin` pixels away from the border.
inline std::vector<SourceSpec> random_sources(std::size_t count, std::size_t rows, std::size_t cols, double amp_lo,
                                              double amp_hi, double width_lo, double width_hi, double margin,
                                              std::uint64_t seed)
{
    if (2.0 * margin >= static_cast<double>(std::min(rows, cols)))
        throw ParameterError("source margin leaves no room inside the image");
    Engine eng = make_engine(seed);
    boost::random::uniform_real_distribution<double> ur(margin, static_cast<double>(rows) - 1.0 - margin);
    boost::random::uniform_real_distribution<double> uc(margin, static_cast<double>(cols) - 1.0 - margin);
    boost::random::uniform_real_distribution<double> ua(amp_lo, amp_hi);
    boost::random::uniform_real_distribution<double> uw(width_lo, width_hi);
    std::vector<SourceSpec> out(count);
    for (auto& s : out) {
        s.row = ur(eng);
        s.col = uc(eng);
        s.amplitude = amp_lo == amp_hi ? amp_lo : ua(eng);
        s.width = width_lo == width_hi ? width_lo : uw(eng);
    }
    return out;
}

} // namespace fcp
