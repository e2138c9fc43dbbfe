#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcp/graph_fcp.hpp"
#include "fcp/pipeline.hpp"

namespace fcp {

// ---- RunConfig ------------------------------------------------------------

inline void to_json(nlohmann::json& j, const RunConfig& c)
{
    j = {{"input", c.input},
         {"format", c.format == ImageFormat::AsciiMatrix ? "ascii-matrix" : "raw-f64-le"},
         {"method", std::string(to_string(c.method))},
         {"alpha", c.alpha},
         {"c", c.c},
         {"epsilon", c.epsilon},
         {"sigma", c.sigma_smooth},
         {"scales", c.scales},
         {"B", c.B},
         {"superset", std::string(to_string(c.superset))},
         {"connectivity", std::string(to_string(c.connectivity))},
         {"seed", c.seed},
         {"min_area", c.min_area}};
    j["lambda0"] = c.lambda0 ? nlohmann::json(*c.lambda0) : nlohmann::json(nullptr);
    j["a"] = c.a ? nlohmann::json(*c.a) : nlohmann::json(nullptr);
    if (!c.table.empty()) j["table"] = c.table;
}

/// Reads the fields present in `j`; absent fields keep their current value.
inline void from_json(const nlohmann::json& j, RunConfig& c)
{
    if (j.contains("input")) c.input = j["input"].get<std::string>();
    if (j.contains("format")) c.format = parse_image_format(j["format"].get<std::string>());
    if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("c")) c.c = j["c"].get<double>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("sigma")) c.sigma_smooth = j["sigma"].get<double>();
    if (j.contains("scales")) c.scales = j["scales"].get<std::vector<double>>();
    if (j.contains("B")) c.B = j["B"].get<std::size_t>();
    if (j.contains("superset")) c.superset = parse_superset_method(j["superset"].get<std::string>());
    if (j.contains("connectivity")) c.connectivity = parse_connectivity(j["connectivity"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("min_area")) c.min_area = j["min_area"].get<std::size_t>();
    if (j.contains("lambda0")) {
        if (j["lambda0"].is_null()) c.lambda0.reset();
        else c.lambda0 = j["lambda0"].get<double>();
    }
    if (j.contains("a")) {
        if (j["a"].is_null()) c.a.reset();
        else c.a = j["a"].get<std::size_t>();
    }
    if (j.contains("table")) c.table = j["table"].get<std::string>();
}

/// Accepts either a bare config object or a metadata document with a
/// "config" member.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {})
{
    const nlohmann::json& src = j.contains("config") ? j["config"] : j;
    from_json(src, base);
    return base;
}

// ---- clusters and results -------------------------------------------------

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline void to_json(nlohmann::json& j, const Cluster& c)
{
    j = {{"id", c.id},
         {"area", c.area()},
         {"centroid", {c.centroid_row, c.centroid_col}},
         {"peak", finite_or_null(c.peak)},
         {"bbox", {c.bbox.row_min, c.bbox.row_max, c.bbox.col_min, c.bbox.col_max}},
         {"pixels", c.pixels}};
}

inline void from_json(const nlohmann::json& j, Cluster& c)
{
    c.id = j.at("id").get<std::size_t>();
    c.pixels = j.at("pixels").get<std::vector<std::size_t>>();
    const auto cen = j.at("centroid").get<std::vector<double>>();
    c.centroid_row = cen.at(0);
    c.centroid_col = cen.at(1);
    c.peak = j.at("peak").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("peak").get<double>();
    const auto bb = j.at("bbox").get<std::vector<std::size_t>>();
    c.bbox = {bb.at(0), bb.at(1), bb.at(2), bb.at(3)};
}

inline void to_json(nlohmann::json& j, const ClusterSet& s)
{
    j = {{"threshold", finite_or_null(s.threshold)},
         {"connectivity", std::string(to_string(s.connectivity))},
         {"rows", s.rows},
         {"cols", s.cols},
         {"clusters", s.clusters}};
}

inline void from_json(const nlohmann::json& j, ClusterSet& s)
{
    s.threshold = j.at("threshold").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("threshold").get<double>();
    s.connectivity = parse_connectivity(j.at("connectivity").get<std::string>());
    s.rows = j.at("rows").get<std::size_t>();
    s.cols = j.at("cols").get<std::size_t>();
    s.clusters = j.at("clusters").get<std::vector<Cluster>>();
}

inline void to_json(nlohmann::json& j, const FcpResult& r)
{
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.envelope_curve)
        curve.push_back({p.t, p.value ? nlohmann::json(*p.value) : nlohmann::json(nullptr), p.k});
    j = {{"found", r.found},
         {"t_c", finite_or_null(r.t_c)},
         {"envelope_value", r.envelope_value},
         {"clusters", r.clusters},
         {"envelope_curve", curve}};
    if (!r.note.empty()) j["note"] = r.note;
}

inline void from_json(const nlohmann::json& j, FcpResult& r)
{
    r.found = j.at("found").get<bool>();
    r.t_c = j.at("t_c").is_null() ? std::numeric_limits<double>::infinity() : j.at("t_c").get<double>();
    r.envelope_value = j.at("envelope_value").get<double>();
    r.clusters = j.at("clusters").get<ClusterSet>();
    r.envelope_curve.clear();
    for (const auto& p : j.at("envelope_curve")) {
        EnvelopePoint pt{p.at(0).get<double>(), std::nullopt, p.at(2).get<std::size_t>()};
        if (!p.at(1).is_null()) pt.value = p.at(1).get<double>();
        r.envelope_curve.push_back(pt);
    }
    r.note = j.value("note", std::string{});
}

// ---- CSV outputs ----------------------------------------------------------

inline std::string catalog_csv(const Catalog& cat)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "id,row,col,area,peak,bbox_rmin,bbox_rmax,bbox_cmin,bbox_cmax\n";
    for (const auto& e : cat.entries) {
        out << e.id << ',' << e.centroid_row << ',' << e.centroid_col << ',' << e.area << ',' << e.peak << ','
            << e.bbox.row_min << ',' << e.bbox.row_max << ',' << e.bbox.col_min << ',' << e.bbox.col_max << '\n';
    }
    return out.str();
}

inline std::string envelope_csv(const FcpResult& r)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "t,envelope,k_t\n";
    for (const auto& p : r.envelope_curve) {
        out << p.t << ',';
        if (p.value) out << *p.value;
        out << ',' << p.k << '\n';
    }
    return out.str();
}

inline nlohmann::json metadata_json(const RunConfig& cfg, const Catalog& cat)
{
    const auto& m = cat.metadata;
    return {{"method", std::string(to_string(m.method))},
            {"found", m.found},
            {"t_c", finite_or_null(m.t_c)},
            {"alpha", m.alpha},
            {"c", m.c},
            {"epsilon", m.epsilon},
            {"seed", m.seed},
            {"B", m.B},
            {"lambda0", m.lambda0},
            {"detections", cat.entries.size()},
            {"timestamp", m.timestamp},
            {"config", cfg}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    out << text;
}

// ---- graph CSV ------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

inline double parse_cell(const std::string& s, std::size_t lineno, const char* name)
{
    double v = 0.0;
    const char* b = s.data();
    if (!s.empty() && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(lineno) + ": bad " + name + " value '" + s + "'");
    return v;
}

} // namespace detail

/// Reads CSV with header x,y,pvalue,phase (columns in any order).
inline graph::LocationSet parse_locations_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    int ix = -1, iy = -1, ip = -1, iph = -1;
    std::vector<graph::Location> pts;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = detail::split_csv_line(line);
        if (ix < 0) {
            for (int k = 0; k < static_cast<int>(cells.size()); ++k) {
                const auto& h = cells[static_cast<std::size_t>(k)];
                if (h == "x") ix = k;
                else if (h == "y") iy = k;
                else if (h == "pvalue") ip = k;
                else if (h == "phase") iph = k;
            }
            if (ix < 0 || iy < 0 || ip < 0 || iph < 0)
                throw ParseError("line " + std::to_string(lineno) + ": header must name x,y,pvalue,phase");
            continue;
        }
        const auto need = static_cast<std::size_t>(std::max({ix, iy, ip, iph}));
        if (cells.size() <= need) throw ParseError("line " + std::to_string(lineno) + ": too few columns");
        pts.push_back({detail::parse_cell(cells[static_cast<std::size_t>(ix)], lineno, "x"),
                       detail::parse_cell(cells[static_cast<std::size_t>(iy)], lineno, "y"),
                       detail::parse_cell(cells[static_cast<std::size_t>(ip)], lineno, "pvalue"),
                       detail::parse_cell(cells[static_cast<std::size_t>(iph)], lineno, "phase")});
    }
    if (ix < 0) throw ParseError("location CSV is empty");
    return graph::LocationSet(std::move(pts));
}

/// x,y,class,cluster_id with -1 for points in no detected cluster.
inline std::string graph_output_csv(const graph::LocationSet& pts, const graph::ClassLabeling& labels,
                                    const std::vector<graph::GraphCluster>& clusters)
{
    std::vector<long> cid(pts.size(), -1);
    for (const auto& c : clusters)
        for (std::size_t m : c.members) cid[m] = static_cast<long>(c.id);
    std::ostringstream out;
    out << std::setprecision(17) << "x,y,class,cluster_id\n";
    for (std::size_t i = 0; i < pts.size(); ++i)
        out << pts[i].x << ',' << pts[i].y << ',' << labels.labels[i] << ',' << cid[i] << '\n';
    return out.str();
}

} // namespace fcp
