#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcp/error.hpp"
#include "fcp/image.hpp"

namespace fcp {

enum class ImageFormat { AsciiMatrix, RawF64 };

inline ImageFormat parse_image_format(std::string_view name)
{
    if (name == "ascii" || name == "ascii-matrix") return ImageFormat::AsciiMatrix;
    if (name == "raw" || name == "raw-f64-le") return ImageFormat::RawF64;
    throw ParameterError("unknown image format '" + std::string(name) +
                         "' (expected ascii-matrix or raw-f64-le)");
}

/// Sidecar header used by the raw format: `<payload>.json` holding {"rows","cols"}.
inline std::filesystem::path raw_header_path(const std::filesystem::path& payload)
{
    return std::filesystem::path(payload.string() + ".json");
}

namespace detail {

inline bool is_blank(std::string_view s)
{
    return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

inline std::vector<double> parse_ascii_row(std::string_view line, std::size_t lineno)
{
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r'))
            ++pos;
        if (pos >= line.size()) break;
        const char* begin = line.data() + pos;
        const char* end = line.data() + line.size();
        // from_chars rejects a leading '+', which plain text writers sometimes emit
        if (*begin == '+') ++begin;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc{} || (ptr != end && *ptr != ' ' && *ptr != '\t' && *ptr != '\r')) {
            throw ParseError("line " + std::to_string(lineno) + ", column " +
                             std::to_string(pos + 1) + ": expected a decimal number");
        }
        if (!std::isfinite(v)) {
            throw ParseError("line " + std::to_string(lineno) + ", column " +
                             std::to_string(pos + 1) + ": non-finite value");
        }
        row.push_back(v);
        pos = static_cast<std::size_t>(ptr - line.data());
    }
    return row;
}

} // namespace detail

/// Parses the ascii-matrix format: one row per line, whitespace-separated numbers.
/// Blank lines are ignored.
inline ImageGrid parse_ascii_matrix(std::string_view text)
{
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::size_t lineno = 0;
    while (!text.empty()) {
        ++lineno;
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (detail::is_blank(line)) continue;
        auto row = detail::parse_ascii_row(line, lineno);
        if (rows == 0) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw StructuralError("line " + std::to_string(lineno) + ": row has " +
                                  std::to_string(row.size()) + " values, expected " +
                                  std::to_string(cols));
        }
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw StructuralError("ascii matrix is empty");
    return ImageGrid(rows, cols, std::move(values));
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ImageGrid load_raw_f64(const std::filesystem::path& path)
{
    auto header_path = raw_header_path(path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(read_text_file(header_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("header '" + header_path.string() + "': " + e.what());
    }
    if (!header.contains("rows") || !header.contains("cols") ||
        !header["rows"].is_number_unsigned() || !header["cols"].is_number_unsigned()) {
        throw ParseError("header '" + header_path.string() +
                         "' must hold unsigned integer fields rows and cols");
    }
    auto rows = header["rows"].get<std::size_t>();
    auto cols = header["cols"].get<std::size_t>();

    std::string bytes = read_text_file(path);
    if (bytes.size() % 8 != 0) {
        throw ParseError("raw payload '" + path.string() + "' has " +
                         std::to_string(bytes.size()) + " bytes, not a multiple of 8");
    }
    std::size_t n = bytes.size() / 8;
    if (n != rows * cols) {
        throw StructuralError("raw payload holds " + std::to_string(n) +
                              " values but header declares " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) {
            bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]);
        }
        double v = std::bit_cast<double>(bits);
        if (!std::isfinite(v)) {
            throw ParseError("raw payload offset " + std::to_string(i * 8) + ": non-finite value");
        }
        values[i] = v;
    }
    return ImageGrid(rows, cols, std::move(values));
}

inline ImageGrid load_image(const std::filesystem::path& path, ImageFormat format)
{
    if (format == ImageFormat::AsciiMatrix) return parse_ascii_matrix(read_text_file(path));
    return load_raw_f64(path);
}

inline std::string format_ascii_matrix(const ImageGrid& img)
{
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t r = 0; r < img.rows(); ++r) {
        for (std::size_t c = 0; c < img.cols(); ++c) {
            if (c) out << ' ';
            out << img(r, c);
        }
        out << '\n';
    }
    return out.str();
}

inline void save_image(const ImageGrid& img, const std::filesystem::path& path, ImageFormat format)
{
    if (format == ImageFormat::AsciiMatrix) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ParseError("cannot write '" + path.string() + "'");
        out << format_ascii_matrix(img);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    for (double v : img.values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        out.write(buf, 8);
    }
    std::ofstream header(raw_header_path(path));
    header << nlohmann::json{{"rows", img.rows()}, {"cols", img.cols()}}.dump() << '\n';
}

/// Masks are stored as ascii 0/1 matrices.
inline Mask load_mask(const std::filesystem::path& path)
{
    auto img = parse_ascii_matrix(read_text_file(path));
    Mask mask(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.size(); ++i) mask[i] = img[i] != 0.0 ? 1 : 0;
    return mask;
}

inline void save_mask(const Mask& mask, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) {
            if (c) out << ' ';
            out << (mask(r, c) ? 1 : 0);
        }
        out << '\n';
    }
}

} // namespace fcp
