#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "fcp/error.hpp"
#include "fcp/image.hpp"
#include "fcp/max_distribution.hpp"

namespace fcp {

enum class SupersetMethod { Alg1, Alg2 };

inline SupersetMethod parse_superset_method(std::string_view s)
{
    if (s == "alg1") return SupersetMethod::Alg1;
    if (s == "alg2") return SupersetMethod::Alg2;
    throw ParameterError("superset method must be alg1 or alg2, got '" + std::string(s) + "'");
}

inline std::string_view to_string(SupersetMethod m) { return m == SupersetMethod::Alg1 ? "alg1" : "alg2"; }

/// A 1-alpha confidence superset U for the null pixels: true = pixel in U.
struct ConfidenceSuperset {
    Mask mask;
    double alpha = 0.05;
    SupersetMethod method = SupersetMethod::Alg2;
    std::size_t removed = 0; // pixels excluded from U
};

inline void check_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1), got " + std::to_string(alpha));
}

/// U = complement of the strict level set at r, i.e. pixels with value <= r.
inline ConfidenceSuperset superset_alg2(const ImageGrid& img, double r, double alpha)
{
    check_alpha(alpha);
    if (!std::isfinite(r)) throw ParameterError("superset_alg2: threshold must be finite");
    ConfidenceSuperset u{Mask(img.rows(), img.cols()), alpha, SupersetMethod::Alg2, 0};
    for (std::size_t i = 0; i < img.size(); ++i) {
        u.mask[i] = img[i] <= r ? 1 : 0;
        u.removed += u.mask[i] ? 0 : 1;
    }
    return u;
}

/// Removes pixels in descending intensity order (ties in raster order)
/// until the maximum of what remains has empirical p-value > alpha at the
/// remaining area.
inline ConfidenceSuperset superset_alg1(const ImageGrid& img, const MaxDistributionTable& table, double alpha)
{
    check_alpha(alpha);
    const std::size_t n = img.size();
    if (table.areas.empty() || table.areas.front() != n) {
        throw StructuralError("maxima table starts at area " +
                              std::to_string(table.areas.empty() ? 0 : table.areas.front()) +
                              ", image has " + std::to_string(n) + " pixels");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return img[a] > img[b]; });

    ConfidenceSuperset u{Mask(img.rows(), img.cols(), 1), alpha, SupersetMethod::Alg1, 0};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t area = n - k;
        if (!table.area_index(area)) {
            throw CapacityError("maxima table ends at area " + std::to_string(table.smallest_area()) +
                                " before the p-value exceeded alpha; rebuild with a larger removal count a");
        }
        if (empirical_pvalue(table, img[order[k]], area) > alpha) {
            u.removed = k;
            return u;
        }
        u.mask[order[k]] = 0;
    }
    throw CapacityError("every pixel was removed without the p-value exceeding alpha");
}

} // namespace fcp
