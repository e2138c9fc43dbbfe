#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcp/cluster.hpp"
#include "fcp/error.hpp"
#include "fcp/filters.hpp"
#include "fcp/image.hpp"
#include "fcp/image_io.hpp"
#include "fcp/max_distribution.hpp"
#include "fcp/noise_model.hpp"
#include "fcp/superset.hpp"
#include "fcp/threshold.hpp"

namespace fcp {

enum class Method { FcpZ, Msfcp };

inline Method parse_method(std::string_view s)
{
    if (s == "fcp-z") return Method::FcpZ;
    if (s == "msfcp") return Method::Msfcp;
    throw ParameterError("method must be fcp-z or msfcp, got '" + std::string(s) + "'");
}

inline std::string_view to_string(Method m) { return m == Method::FcpZ ? "fcp-z" : "msfcp"; }

struct RunConfig {
    std::string input;
    ImageFormat format = ImageFormat::AsciiMatrix;
    Method method = Method::Msfcp;
    double alpha = 0.05;
    double c = 0.10;
    double epsilon = 0.99;
    double sigma_smooth = 1.0;
    std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
    std::optional<double> lambda0; // background rate; estimated from the counts when absent
    std::size_t B = 2000;
    std::optional<std::size_t> a; // alg1 depth; min(5000, N/10) when absent
    SupersetMethod superset = SupersetMethod::Alg2;
    Connectivity connectivity = Connectivity::Eight;
    std::uint64_t seed = 1;
    std::size_t min_area = 1;
    std::string table; // optional cached maxima table (JSON)
    std::string out_catalog;
    std::string out_envelope;
    std::string out_metadata;
    std::string out_result;

    void validate() const
    {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
        if (!(c > 0.0 && c < 1.0)) throw ParameterError("c must lie in (0, 1)");
        check_epsilon(epsilon);
        if (!(sigma_smooth > 0.0)) throw ParameterError("sigma must be > 0");
        ScaleGrid check(scales);
        if (lambda0 && !(*lambda0 >= 0.0)) throw ParameterError("lambda0 must be >= 0");
        if (B < 1) throw ParameterError("B must be >= 1");
        if (min_area < 1) throw ParameterError("min-area must be >= 1");
    }
};

struct CatalogEntry {
    std::size_t id = 0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    std::size_t area = 0;
    double peak = 0.0;
    BoundingBox bbox;
};

struct CatalogMetadata {
    Method method = Method::Msfcp;
    bool found = false;
    double t_c = 0.0;
    double alpha = 0.0;
    double c = 0.0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    std::size_t B = 0;
    double lambda0 = 0.0;
    std::string timestamp;
};

/// Detected sources, sorted by descending peak statistic.
struct Catalog {
    std::vector<CatalogEntry> entries;
    CatalogMetadata metadata;
};

struct DetectionRun {
    Catalog catalog;
    FcpResult result;
    ConfidenceSuperset superset;
    ImageGrid statistic;
    NoiseModel null_model;
    std::optional<double> r_alpha; // alg2 cutoff
};

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// The statistic's stage list. fcp-z: smooth, sqrt, z-score (with location
/// and scale estimated from the smooth-then-root image); msfcp: smooth,
/// sqrt, multi-scale derivative, negate.
inline std::vector<Stage> statistic_stages(const RunConfig& cfg, const ImageGrid& counts)
{
    std::vector<Stage> stages{stage::Smooth{cfg.sigma_smooth}, stage::Sqrt{}};
    if (cfg.method == Method::FcpZ) {
        StagePipeline pre(counts.rows(), counts.cols(), stages);
        const Background bg = estimate_background(pre.apply(counts));
        stages.push_back(stage::ZScore{bg.mu0, bg.sigma0});
    } else {
        stages.push_back(stage::Msd{cfg.scales});
        stages.push_back(stage::Negate{});
    }
    return stages;
}

/// Seed stream for the null simulations of a run.
inline std::uint64_t null_simulation_seed(std::uint64_t seed) { return child_seed(seed, 0x7AB1E); }

inline MaxDistributionTable load_table(const std::filesystem::path& path)
{
    try {
        return nlohmann::json::parse(read_text_file(path)).get<MaxDistributionTable>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("maxima table '" + path.string() + "': " + e.what());
    }
}

/// A cached table must have been simulated from exactly the null model the
/// data statistic implies.
inline void check_table_matches(const MaxDistributionTable& table, const NoiseModel& model, std::size_t rows,
                                std::size_t cols)
{
    if (!table.model || !(*table.model == model))
        throw ModelError("cached maxima table was simulated under a different null model than this run's statistic");
    if (table.rows != rows || table.cols != cols)
        throw StructuralError("cached maxima table was simulated for a different image shape");
}

inline Catalog make_catalog(const RunConfig& cfg, const FcpResult& result, double lambda0)
{
    Catalog cat;
    for (const auto& cl : result.clusters.clusters)
        cat.entries.push_back({cl.id, cl.centroid_row, cl.centroid_col, cl.area(), cl.peak, cl.bbox});
    std::ranges::stable_sort(cat.entries, [](const auto& a, const auto& b) { return a.peak > b.peak; });
    cat.metadata = {cfg.method, result.found, result.t_c, cfg.alpha, cfg.c, cfg.epsilon, cfg.seed, cfg.B, lambda0,
                    utc_timestamp()};
    return cat;
}

/// Runs the configured detection on raw counts.
inline DetectionRun run_detection(const RunConfig& cfg, const ImageGrid& counts)
{
    cfg.validate();
    const std::size_t rows = counts.rows(), cols = counts.cols();
    const double lambda0 = cfg.lambda0.value_or(estimate_poisson_rate(counts));

    DetectionRun run;
    const auto stages = statistic_stages(cfg, counts);
    run.null_model = poisson_model(lambda0, stages);
    run.null_model.validate();
    StagePipeline pipeline(rows, cols, stages);
    run.statistic = pipeline.apply(counts);

    std::optional<MaxDistributionTable> cached;
    if (!cfg.table.empty()) {
        cached = load_table(cfg.table);
        check_table_matches(*cached, run.null_model, rows, cols);
    }
    const std::uint64_t sim_seed = null_simulation_seed(cfg.seed);

    if (cfg.superset == SupersetMethod::Alg2) {
        std::vector<double> maxima;
        if (cached) {
            if (cached->areas.empty() || cached->areas.front() != rows * cols)
                throw StructuralError("cached maxima table lacks the full-image area");
            maxima = cached->maxima.front();
        } else {
            maxima = simulate_maxima(run.null_model, rows, cols, cfg.B, sim_seed);
        }
        run.r_alpha = max_percentile(maxima, cfg.alpha);
        run.superset = superset_alg2(run.statistic, *run.r_alpha, cfg.alpha);
    } else {
        const std::size_t n = rows * cols;
        const MaxDistributionTable table =
            cached ? std::move(*cached)
                   : build_max_distributions(run.null_model, rows, cols, cfg.B, cfg.a.value_or(default_removal_count(n)),
                                             sim_seed);
        run.superset = superset_alg1(run.statistic, table, cfg.alpha);
    }

    run.result = find_threshold(run.statistic, run.superset, cfg.epsilon, cfg.c, cfg.connectivity);
    if (cfg.min_area > 1) run.result.clusters = filter_min_area(std::move(run.result.clusters), cfg.min_area);
    run.catalog = make_catalog(cfg, run.result, lambda0);
    return run;
}

inline DetectionRun run_fcp_z(RunConfig cfg, const ImageGrid& counts)
{
    cfg.method = Method::FcpZ;
    return run_detection(cfg, counts);
}

inline DetectionRun run_msfcp(RunConfig cfg, const ImageGrid& counts)
{
    cfg.method = Method::Msfcp;
    return run_detection(cfg, counts);
}

inline DetectionRun run_detection(const RunConfig& cfg)
{
    if (cfg.input.empty()) throw ParameterError("no input image given");
    return run_detection(cfg, load_image(cfg.input, cfg.format));
}

struct EvaluationReport {
    std::optional<double> xi;           // true false-cluster proportion; nullopt without detections
    std::optional<double> completeness; // nullopt when the truth has no sources
    std::size_t true_sources = 0;
    std::size_t detections = 0;
    std::vector<bool> matched; // per detected cluster: overlaps a source pixel
};

/// Scores detected clusters against a truth mask (true = source pixel).
/// True sources are the eight-connected components of the truth mask.
inline EvaluationReport evaluate(const ClusterSet& detected, const Mask& truth, double epsilon)
{
    if (detected.rows != truth.rows() || detected.cols != truth.cols())
        throw StructuralError("evaluate: detection and truth shapes differ");
    EvaluationReport rep;
    Mask s0(truth.rows(), truth.cols());
    for (std::size_t i = 0; i < truth.size(); ++i) s0[i] = truth[i] ? 0 : 1;
    rep.xi = true_fcp(detected, s0, epsilon);
    rep.detections = detected.count();

    Mask hit(truth.rows(), truth.cols());
    for (const auto& cl : detected.clusters) {
        bool m = false;
        for (std::size_t p : cl.pixels) {
            hit[p] = 1;
            m = m || truth[p];
        }
        rep.matched.push_back(m);
    }
    const ClusterSet sources = connected_components(truth, Connectivity::Eight);
    rep.true_sources = sources.count();
    if (rep.true_sources > 0) {
        std::size_t found = 0;
        for (const auto& s : sources.clusters)
            found += std::ranges::any_of(s.pixels, [&](std::size_t p) { return hit[p] != 0; }) ? 1 : 0;
        rep.completeness = static_cast<double>(found) / static_cast<double>(rep.true_sources);
    }
    return rep;
}

inline EvaluationReport evaluate(const FcpResult& result, const Mask& truth, double epsilon)
{
    return evaluate(result.clusters, truth, epsilon);
}

} // namespace fcp
