#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcp/error.hpp"

namespace fcp {

struct PixelCoord {
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Row-major rectangular grid. Used both for real-valued images and
/// (with T = bool-like) for masks.
template <typename T>
class Grid {
public:
    Grid() = default;

    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), values_(rows * cols, fill)
    {
        if (rows == 0 || cols == 0) {
            throw StructuralError("grid dimensions must be positive, got " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
        }
    }

    Grid(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), values_(std::move(values))
    {
        if (rows == 0 || cols == 0) {
            throw StructuralError("grid dimensions must be positive, got " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
        }
        if (values_.size() != rows * cols) {
            throw StructuralError("grid payload has " + std::to_string(values_.size()) +
                                  " values, expected " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + "=" + std::to_string(rows * cols));
        }
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    [[nodiscard]] const T& operator()(std::size_t r, std::size_t c) const
    {
        return values_[r * cols_ + c];
    }
    [[nodiscard]] T& operator[](std::size_t i) { return values_[i]; }
    [[nodiscard]] const T& operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] std::span<T> values() & noexcept { return values_; }
    [[nodiscard]] std::span<const T> values() const& noexcept { return values_; }
    // A span into a temporary grid would dangle.
    std::span<const T> values() const&& = delete;

    [[nodiscard]] PixelCoord coord(std::size_t index) const noexcept
    {
        return {index / cols_, index % cols_};
    }

    [[nodiscard]] bool same_shape(const auto& other) const noexcept
    {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

using ImageGrid = Grid<double>;

/// Boolean pixel subset. Stored as bytes so that spans of it are addressable.
using Mask = Grid<unsigned char>;

inline void require_same_shape(const auto& a, const auto& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw StructuralError(std::string(what) + ": grid shapes differ (" +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                              " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
    }
}

inline bool all_finite(const ImageGrid& img)
{
    return std::ranges::all_of(img.values(), [](double v) { return std::isfinite(v); });
}

inline std::size_t count_true(const Mask& mask)
{
    return static_cast<std::size_t>(
        std::ranges::count_if(mask.values(), [](unsigned char v) { return v != 0; }));
}

/// Applies `fn` elementwise and returns a new grid of the same shape.
template <typename Fn>
ImageGrid map_pixels(const ImageGrid& img, Fn&& fn)
{
    std::vector<double> out(img.size());
    std::ranges::transform(img.values(), out.begin(), fn);
    return ImageGrid(img.rows(), img.cols(), std::move(out));
}

} // namespace fcp
