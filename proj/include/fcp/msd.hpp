#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fcp/convolution.hpp"
#include "fcp/error.hpp"
#include "fcp/image.hpp"

namespace fcp {

/// Ascending, strictly positive list of smoothing bandwidths (pixels).
class ScaleGrid {
public:
    explicit ScaleGrid(std::vector<double> scales) : scales_(std::move(scales))
    {
        if (scales_.empty()) throw ParameterError("scale grid must be nonempty");
        for (std::size_t i = 0; i < scales_.size(); ++i) {
            if (!(scales_[i] > 0.0) || !std::isfinite(scales_[i]))
                throw ParameterError("scale grid entries must be finite and > 0");
            if (i > 0 && !(scales_[i] > scales_[i - 1]))
                throw ParameterError("scale grid must be strictly ascending");
        }
    }

    static ScaleGrid defaults() { return ScaleGrid({1.0, 2.0, 4.0, 8.0}); }

    [[nodiscard]] const std::vector<double>& values() const noexcept { return scales_; }
    [[nodiscard]] std::size_t size() const noexcept { return scales_.size(); }

    friend bool operator==(const ScaleGrid&, const ScaleGrid&) = default;

private:
    std::vector<double> scales_;
};

struct MsdKernel {
    double h = 1.0;
    Kernel2D kernel;

    [[nodiscard]] std::size_t radius() const noexcept { return kernel.radius; }
    [[nodiscard]] double weight(std::ptrdiff_t u, std::ptrdiff_t v) const noexcept
    {
        return kernel.at(u, v);
    }
};

inline std::size_t default_msd_radius(double h)
{
    return static_cast<std::size_t>(std::ceil(4.0 * h));
}

/// Samples the bandwidth derivative of the unit-mass isotropic Gaussian,
///   d/dh phi(u,v|h) = (d^2/h^3 - 2/h) phi(u,v|h),
/// on the (2r+1)^2 lattice, with no zero-DC correction.
inline MsdKernel msd_kernel_raw(double h, std::optional<std::size_t> radius = std::nullopt)
{
    if (!(h > 0.0) || !std::isfinite(h))
        throw ParameterError("msd bandwidth must be > 0, got " + std::to_string(h));
    const std::size_t rad = radius.value_or(default_msd_radius(h));
    const auto r = static_cast<std::ptrdiff_t>(rad);
    MsdKernel k{h, Kernel2D{rad, std::vector<double>((2 * rad + 1) * (2 * rad + 1))}};
    const double norm = 1.0 / (2.0 * std::numbers::pi * h * h);
    for (std::ptrdiff_t u = -r; u <= r; ++u) {
        for (std::ptrdiff_t v = -r; v <= r; ++v) {
            const double d2 = static_cast<double>(u * u + v * v);
            const double phi = norm * std::exp(-0.5 * d2 / (h * h));
            k.kernel.weights[static_cast<std::size_t>((u + r) * (2 * r + 1) + (v + r))] =
                (d2 / (h * h * h) - 2.0 / h) * phi;
        }
    }
    return k;
}

/// msd_kernel_raw shifted by a constant so the weights sum to zero; the
/// response to any constant image is then zero.
inline MsdKernel msd_kernel(double h, std::optional<std::size_t> radius = std::nullopt)
{
    MsdKernel k = msd_kernel_raw(h, radius);
    auto& w = k.kernel.weights;
    // Compensated sum: the correction must cancel to rounding error.
    double sum = 0.0, comp = 0.0;
    for (double x : w) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double shift = sum / static_cast<double>(w.size());
    for (double& x : w) x -= shift;
    return k;
}

/// Reusable multi-scale derivative filter for one image shape. Holds FFT
/// plans; not thread-safe.
class MsdFilterBank {
public:
    MsdFilterBank(std::size_t rows, std::size_t cols, const ScaleGrid& scales)
        : scales_(scales), conv_(rows, cols, kernels_for(scales))
    {
    }

    [[nodiscard]] const ScaleGrid& scales() const noexcept { return scales_; }

    std::vector<ImageGrid> responses(const ImageGrid& img) { return conv_.convolve(img); }

    /// Per-pixel minimum over scales (the M image).
    ImageGrid min_image(const ImageGrid& img) { return conv_.convolve_min(img); }

private:
    static std::vector<Kernel2D> kernels_for(const ScaleGrid& scales)
    {
        std::vector<Kernel2D> ks;
        for (double h : scales.values()) ks.push_back(msd_kernel(h).kernel);
        return ks;
    }

    ScaleGrid scales_;
    FftConvolver conv_;
};

inline ImageGrid msd_response(const ImageGrid& img, double h)
{
    return convolve_fft(img, msd_kernel(h).kernel);
}

inline ImageGrid msd_image(const ImageGrid& img, const ScaleGrid& scales)
{
    MsdFilterBank bank(img.rows(), img.cols(), scales);
    return bank.min_image(img);
}

/// D = -M, so sources become large positive values.
inline ImageGrid detection_statistic(const ImageGrid& m)
{
    return map_pixels(m, [](double v) { return -v; });
}

} // namespace fcp
