#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <fftw3.h>

#include "fcp/error.hpp"
#include "fcp/image.hpp"

namespace fcp {

/// Half-sample symmetric reflection (d c b a | a b c d | d c b a), valid for
/// any integer offset. This mode preserves the sum of a signal under any
/// symmetric kernel.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept
{
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
    return static_cast<std::size_t>(m);
}

/// Square convolution kernel of odd side 2*radius+1, row-major.
struct Kernel2D {
    std::size_t radius = 0;
    std::vector<double> weights;

    [[nodiscard]] std::size_t side() const noexcept { return 2 * radius + 1; }
    [[nodiscard]] double at(std::ptrdiff_t du, std::ptrdiff_t dv) const noexcept
    {
        const auto r = static_cast<std::ptrdiff_t>(radius);
        return weights[static_cast<std::size_t>((du + r) * static_cast<std::ptrdiff_t>(side()) + dv + r)];
    }
};

/// Straightforward nested-loop convolution with reflect padding. O(N r^2);
/// kept as the reference the fast paths are checked against.
inline ImageGrid convolve_direct(const ImageGrid& img, const Kernel2D& k)
{
    const auto r = static_cast<std::ptrdiff_t>(k.radius);
    ImageGrid out(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.rows(); ++i) {
        for (std::size_t j = 0; j < img.cols(); ++j) {
            double acc = 0.0;
            for (std::ptrdiff_t du = -r; du <= r; ++du) {
                const auto ii = reflect_index(static_cast<std::ptrdiff_t>(i) - du, img.rows());
                for (std::ptrdiff_t dv = -r; dv <= r; ++dv) {
                    const auto jj = reflect_index(static_cast<std::ptrdiff_t>(j) - dv, img.cols());
                    acc += k.at(du, dv) * img(ii, jj);
                }
            }
            out(i, j) = acc;
        }
    }
    return out;
}

/// Separable convolution: rows with `row_taps`, then columns with `col_taps`
/// (both of odd length, centered). Equivalent to convolve_direct with the
/// outer-product kernel.
inline ImageGrid convolve_separable(const ImageGrid& img, std::span<const double> row_taps,
                                    std::span<const double> col_taps)
{
    const auto rr = static_cast<std::ptrdiff_t>(row_taps.size() / 2);
    const auto rc = static_cast<std::ptrdiff_t>(col_taps.size() / 2);
    const std::size_t rows = img.rows();
    const std::size_t cols = img.cols();

    ImageGrid tmp(rows, cols);
    std::vector<double> line(cols + 2 * static_cast<std::size_t>(rr));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t p = 0; p < line.size(); ++p)
            line[p] = img(i, reflect_index(static_cast<std::ptrdiff_t>(p) - rr, cols));
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < row_taps.size(); ++t)
                acc += row_taps[t] * line[j + row_taps.size() - 1 - t];
            tmp(i, j) = acc;
        }
    }

    ImageGrid out(rows, cols);
    std::vector<double> column(rows + 2 * static_cast<std::size_t>(rc));
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t p = 0; p < column.size(); ++p)
            column[p] = tmp(reflect_index(static_cast<std::ptrdiff_t>(p) - rc, rows), j);
        for (std::size_t i = 0; i < rows; ++i) {
            double acc = 0.0;
            for (std::size_t t = 0; t < col_taps.size(); ++t)
                acc += col_taps[t] * column[i + col_taps.size() - 1 - t];
            out(i, j) = acc;
        }
    }
    return out;
}

namespace detail {

struct FftwDeleter {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
struct PlanDeleter {
    void operator()(fftw_plan p) const noexcept { fftw_destroy_plan(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n)
{
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

} // namespace detail

/// Convolves images of one fixed shape with a bank of kernels through the
/// Fourier domain. The image is reflect-padded once by the largest kernel
/// radius, transformed once, and multiplied by each kernel's spectrum.
///
/// Not thread-safe: holds FFTW plans and scratch buffers.
class FftConvolver {
public:
    FftConvolver(std::size_t rows, std::size_t cols, std::vector<Kernel2D> kernels)
        : rows_(rows), cols_(cols), kernels_(std::move(kernels))
    {
        if (kernels_.empty()) throw ParameterError("FftConvolver needs at least one kernel");
        for (const auto& k : kernels_) pad_ = std::max(pad_, k.radius);
        prow_ = rows_ + 2 * pad_;
        pcol_ = cols_ + 2 * pad_;
        ccol_ = pcol_ / 2 + 1;
        real_ = detail::fftw_buffer<double>(prow_ * pcol_);
        spec_ = detail::fftw_buffer<fftw_complex>(prow_ * ccol_);
        work_ = detail::fftw_buffer<fftw_complex>(prow_ * ccol_);
        forward_.reset(fftw_plan_dft_r2c_2d(static_cast<int>(prow_), static_cast<int>(pcol_),
                                            real_.get(), spec_.get(), FFTW_ESTIMATE));
        inverse_.reset(fftw_plan_dft_c2r_2d(static_cast<int>(prow_), static_cast<int>(pcol_),
                                            work_.get(), real_.get(), FFTW_ESTIMATE));
        if (!forward_ || !inverse_) throw Error("FFTW planning failed");

        // Kernel spectra: each kernel is laid out with its center at (0,0),
        // wrapping negative offsets, so the circular product is a centered
        // convolution. Padding by pad_ keeps every output pixel wrap-free.
        for (const auto& k : kernels_) {
            std::fill_n(real_.get(), prow_ * pcol_, 0.0);
            const auto r = static_cast<std::ptrdiff_t>(k.radius);
            for (std::ptrdiff_t du = -r; du <= r; ++du) {
                for (std::ptrdiff_t dv = -r; dv <= r; ++dv) {
                    auto pi = static_cast<std::size_t>((du + static_cast<std::ptrdiff_t>(prow_)) %
                                                       static_cast<std::ptrdiff_t>(prow_));
                    auto pj = static_cast<std::size_t>((dv + static_cast<std::ptrdiff_t>(pcol_)) %
                                                       static_cast<std::ptrdiff_t>(pcol_));
                    real_[pi * pcol_ + pj] = k.at(du, dv);
                }
            }
            fftw_execute(forward_.get());
            std::vector<std::complex<double>> s(prow_ * ccol_);
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = {spec_[i][0], spec_[i][1]};
            spectra_.push_back(std::move(s));
        }
    }

    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;
    FftConvolver(FftConvolver&&) noexcept = default;
    FftConvolver& operator=(FftConvolver&&) noexcept = default;

    [[nodiscard]] std::size_t kernel_count() const noexcept { return kernels_.size(); }

    /// Returns one convolved image per kernel, in kernel order.
    std::vector<ImageGrid> convolve(const ImageGrid& img)
    {
        std::vector<ImageGrid> out;
        out.reserve(kernels_.size());
        transform(img);
        for (std::size_t k = 0; k < kernels_.size(); ++k) out.push_back(inverse(k));
        return out;
    }

    /// Per-pixel minimum over all kernel responses, without materializing
    /// every response.
    ImageGrid convolve_min(const ImageGrid& img)
    {
        transform(img);
        ImageGrid best = inverse(0);
        for (std::size_t k = 1; k < kernels_.size(); ++k) {
            ImageGrid next = inverse(k);
            for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::min(best[i], next[i]);
        }
        return best;
    }

private:
    void transform(const ImageGrid& img)
    {
        if (img.rows() != rows_ || img.cols() != cols_) {
            throw StructuralError("FftConvolver built for " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_) + " images");
        }
        const auto pad = static_cast<std::ptrdiff_t>(pad_);
        for (std::size_t i = 0; i < prow_; ++i) {
            const auto si = reflect_index(static_cast<std::ptrdiff_t>(i) - pad, rows_);
            for (std::size_t j = 0; j < pcol_; ++j) {
                real_[i * pcol_ + j] =
                    img(si, reflect_index(static_cast<std::ptrdiff_t>(j) - pad, cols_));
            }
        }
        fftw_execute(forward_.get());
        image_spec_.assign(prow_ * ccol_, {});
        for (std::size_t i = 0; i < image_spec_.size(); ++i)
            image_spec_[i] = {spec_[i][0], spec_[i][1]};
    }

    ImageGrid inverse(std::size_t k)
    {
        const auto& ks = spectra_[k];
        for (std::size_t i = 0; i < ks.size(); ++i) {
            auto v = image_spec_[i] * ks[i];
            work_[i][0] = v.real();
            work_[i][1] = v.imag();
        }
        fftw_execute(inverse_.get());
        const double scale = 1.0 / static_cast<double>(prow_ * pcol_);
        ImageGrid out(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                out(i, j) = real_[(i + pad_) * pcol_ + (j + pad_)] * scale;
        return out;
    }

    std::size_t rows_, cols_;
    std::vector<Kernel2D> kernels_;
    std::size_t pad_ = 0;
    std::size_t prow_ = 0, pcol_ = 0, ccol_ = 0;
    detail::FftwBuffer<double> real_;
    detail::FftwBuffer<fftw_complex> spec_;
    detail::FftwBuffer<fftw_complex> work_;
    detail::FftwPlan forward_;
    detail::FftwPlan inverse_;
    std::vector<std::vector<std::complex<double>>> spectra_;
    std::vector<std::complex<double>> image_spec_;
};

/// One-shot FFT convolution with reflect padding.
inline ImageGrid convolve_fft(const ImageGrid& img, const Kernel2D& k)
{
    FftConvolver conv(img.rows(), img.cols(), {k});
    return std::move(conv.convolve(img).front());
}

} // namespace fcp
