#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fcp/convolution.hpp"
#include "fcp/error.hpp"
#include "fcp/image.hpp"

namespace fcp {

/// Sampled 1-D Gaussian of standard deviation `sigma`, truncated at
/// radius ceil(4 sigma) and renormalized to unit sum.
inline std::vector<double> gaussian_taps(double sigma)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ParameterError("gaussian sigma must be > 0, got " + std::to_string(sigma));
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t u = -radius; u <= radius; ++u) {
        const double w = std::exp(-0.5 * static_cast<double>(u * u) / (sigma * sigma));
        taps[static_cast<std::size_t>(u + radius)] = w;
        sum += w;
    }
    for (double& w : taps) w /= sum;
    return taps;
}

/// The full 2-D smoothing kernel (outer product of gaussian_taps).
inline Kernel2D gaussian_kernel(double sigma)
{
    auto taps = gaussian_taps(sigma);
    Kernel2D k{taps.size() / 2, std::vector<double>(taps.size() * taps.size())};
    for (std::size_t i = 0; i < taps.size(); ++i)
        for (std::size_t j = 0; j < taps.size(); ++j) k.weights[i * taps.size() + j] = taps[i] * taps[j];
    return k;
}

inline ImageGrid gaussian_smooth(const ImageGrid& img, double sigma)
{
    auto taps = gaussian_taps(sigma);
    return convolve_separable(img, taps, taps);
}

inline ImageGrid sqrt_transform(const ImageGrid& img)
{
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (img[i] < 0.0) {
            auto p = img.coord(i);
            throw DomainError("sqrt_transform: negative value " + std::to_string(img[i]) +
                              " at pixel (" + std::to_string(p.row) + ", " +
                              std::to_string(p.col) + ")");
        }
    }
    return map_pixels(img, [](double v) { return std::sqrt(v); });
}

inline ImageGrid z_score(const ImageGrid& img, double mu0, double sigma0)
{
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
        throw ParameterError("z_score sigma0 must be > 0, got " + std::to_string(sigma0));
    return map_pixels(img, [=](double v) { return (v - mu0) / sigma0; });
}

struct Background {
    double mu0 = 0.0;
    double sigma0 = 1.0;
};

inline constexpr double kMadToSigma = 1.4826;
inline constexpr double kSigmaFloor = 1e-12;

namespace detail {

/// Median by selection; averages the two middle elements for even sizes.
inline double median_inplace(std::vector<double>& v)
{
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Robust location/scale: median and 1.4826 x MAD (floored at 1e-12).
inline Background estimate_background(const ImageGrid& img)
{
    if (img.empty()) throw StructuralError("estimate_background: empty grid");
    std::vector<double> v(img.values().begin(), img.values().end());
    const double med = detail::median_inplace(v);
    for (double& x : v) x = std::abs(x - med);
    const double mad = detail::median_inplace(v);
    return {med, std::max(kMadToSigma * mad, kSigmaFloor)};
}

/// Background rate for count data: the plain mean of the counts. The median
/// of low-rate Poisson counts is 0, so it cannot stand in for the rate;
/// sources only push the mean up, which makes simulated null maxima larger.
inline double estimate_poisson_rate(const ImageGrid& counts)
{
    if (counts.empty()) throw StructuralError("estimate_poisson_rate: empty grid");
    double sum = 0.0;
    for (double v : counts.values()) sum += v;
    return std::max(0.0, sum / static_cast<double>(counts.size()));
}

} // namespace fcp
