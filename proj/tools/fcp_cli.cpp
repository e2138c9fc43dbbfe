// fcp: command-line front end for false-cluster-proportion source detection.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fcp/fcp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;

std::vector<double> parse_scale_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw fcp::ParameterError("bad scale '" + item + "'");
        }
    }
    return out;
}

/// Flags shared by `detect` and `simulate`; each is applied only when given,
/// so it overrides the config file.
struct DetectFlags {
    std::string config;
    std::optional<std::string> input, format, method, superset, connectivity, scales, table;
    std::optional<double> alpha, c, epsilon, sigma, lambda0;
    std::optional<std::size_t> B, a, min_area;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App& app)
    {
        app.add_option("--config", config, "JSON run configuration (flags override it)");
        app.add_option("-i,--input", input, "input count image");
        app.add_option("--format", format, "input format: ascii-matrix | raw-f64-le");
        app.add_option("--method", method, "fcp-z | msfcp");
        app.add_option("--alpha", alpha, "superset confidence level alpha (default 0.05)");
        app.add_option("--c", c, "false cluster proportion bound (default 0.10)");
        app.add_option("--epsilon", epsilon, "overlap fraction declaring a cluster false (default 0.99)");
        app.add_option("--sigma", sigma, "Gaussian smoothing sigma in pixels (default 1)");
        app.add_option("--scales", scales, "comma-separated MSD bandwidths (default 1,2,4,8)");
        app.add_option("--lambda0", lambda0, "background Poisson rate (default: mean count)");
        app.add_option("--B", B, "null simulation replicates (default 2000)");
        app.add_option("--a", a, "alg1 removal depth (default min(5000, N/10))");
        app.add_option("--superset", superset, "alg1 | alg2 (default alg2)");
        app.add_option("--connectivity", connectivity, "four | eight (default eight)");
        app.add_option("--seed", seed, "master seed (default 1)");
        app.add_option("--min-area", min_area, "drop detected clusters smaller than this");
        app.add_option("--table", table, "cached maxima table from `fcp simulate`");
    }

    fcp::RunConfig resolve() const
    {
        fcp::RunConfig cfg;
        if (!config.empty()) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(fcp::read_text_file(config));
            } catch (const nlohmann::json::exception& e) {
                throw fcp::ParameterError("config '" + config + "': " + e.what());
            }
            cfg = fcp::config_from_json(j);
        }
        if (input) cfg.input = *input;
        if (format) cfg.format = fcp::parse_image_format(*format);
        if (method) cfg.method = fcp::parse_method(*method);
        if (alpha) cfg.alpha = *alpha;
        if (c) cfg.c = *c;
        if (epsilon) cfg.epsilon = *epsilon;
        if (sigma) cfg.sigma_smooth = *sigma;
        if (scales) cfg.scales = parse_scale_list(*scales);
        if (lambda0) cfg.lambda0 = *lambda0;
        if (B) cfg.B = *B;
        if (a) cfg.a = *a;
        if (superset) cfg.superset = fcp::parse_superset_method(*superset);
        if (connectivity) cfg.connectivity = fcp::parse_connectivity(*connectivity);
        if (seed) cfg.seed = *seed;
        if (min_area) cfg.min_area = *min_area;
        if (table) cfg.table = *table;
        cfg.validate();
        return cfg;
    }
};

int cmd_detect(const DetectFlags& flags, const std::string& out_catalog, const std::string& out_envelope,
               const std::string& out_metadata, const std::string& out_result)
{
    fcp::RunConfig cfg = flags.resolve();
    const fcp::ImageGrid counts = fcp::load_image(cfg.input, cfg.format);
    const fcp::DetectionRun run = fcp::run_detection(cfg, counts);

    const std::string csv = fcp::catalog_csv(run.catalog);
    if (out_catalog.empty()) std::cout << csv;
    else fcp::write_text(out_catalog, csv);
    if (!out_envelope.empty()) fcp::write_text(out_envelope, fcp::envelope_csv(run.result));
    if (!out_metadata.empty()) fcp::write_text(out_metadata, fcp::metadata_json(cfg, run.catalog).dump(2) + "\n");
    if (!out_result.empty()) fcp::write_text(out_result, nlohmann::json(run.result).dump() + "\n");

    std::cerr << to_string(cfg.method) << ": " << run.catalog.entries.size() << " detection(s)";
    if (run.result.found) std::cerr << " at t_c=" << run.result.t_c << ", envelope=" << run.result.envelope_value;
    else std::cerr << " (" << run.result.note << ")";
    std::cerr << ", superset excludes " << run.superset.removed << " pixel(s)\n";
    return kExitOk;
}

int cmd_simulate(const DetectFlags& flags, const std::string& model_path, std::size_t rows, std::size_t cols,
                 const std::string& out)
{
    fcp::MaxDistributionTable table;
    if (!model_path.empty()) {
        // Generic null model: table for an arbitrary model and image shape.
        fcp::NoiseModel model;
        try {
            model = nlohmann::json::parse(fcp::read_text_file(model_path)).get<fcp::NoiseModel>();
        } catch (const nlohmann::json::exception& e) {
            throw fcp::ParameterError("model '" + model_path + "': " + e.what());
        }
        if (rows == 0 || cols == 0) throw fcp::ParameterError("--rows and --cols are required with --model");
        const std::size_t B = flags.B.value_or(2000);
        const std::size_t a = flags.a.value_or(0);
        table = fcp::build_max_distributions(model, rows, cols, B, a, flags.seed.value_or(1));
    } else {
        // The table a `detect` run with the same flags would simulate.
        fcp::RunConfig cfg = flags.resolve();
        const fcp::ImageGrid counts = fcp::load_image(cfg.input, cfg.format);
        const double lambda0 = cfg.lambda0.value_or(fcp::estimate_poisson_rate(counts));
        const auto model = fcp::poisson_model(lambda0, fcp::statistic_stages(cfg, counts));
        const std::size_t a = cfg.superset == fcp::SupersetMethod::Alg1
                                  ? cfg.a.value_or(fcp::default_removal_count(counts.size()))
                                  : 0;
        table = fcp::build_max_distributions(model, counts.rows(), counts.cols(), cfg.B, a,
                                             fcp::null_simulation_seed(cfg.seed));
    }
    fcp::write_text(out, nlohmann::json(table).dump() + "\n");
    std::cerr << "wrote maxima table: B=" << table.B << ", areas " << table.areas.front() << ".."
              << table.areas.back() << "\n";
    return kExitOk;
}

int cmd_msd(const std::string& input, const std::string& format, const std::string& scales, const std::string& output,
            const std::string& out_format)
{
    const auto img = fcp::load_image(input, fcp::parse_image_format(format));
    const fcp::ScaleGrid grid(parse_scale_list(scales));
    const auto d = fcp::detection_statistic(fcp::msd_image(img, grid));
    fcp::save_image(d, output, fcp::parse_image_format(out_format.empty() ? format : out_format));
    return kExitOk;
}

std::vector<fcp::SourceSpec> parse_sources(const std::string& s)
{
    std::vector<fcp::SourceSpec> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        const auto v = parse_scale_list(item);
        if (v.size() != 4) throw fcp::ParameterError("source '" + item + "' must be row,col,amplitude,width");
        out.push_back({v[0], v[1], v[2], v[3]});
    }
    return out;
}

int cmd_evaluate(const std::string& result_path, const std::string& truth_path, double epsilon)
{
    fcp::FcpResult result;
    try {
        result = nlohmann::json::parse(fcp::read_text_file(result_path)).get<fcp::FcpResult>();
    } catch (const nlohmann::json::exception& e) {
        throw fcp::ParseError("result '" + result_path + "': " + e.what());
    }
    const fcp::Mask truth = fcp::load_mask(truth_path);
    const auto rep = fcp::evaluate(result, truth, epsilon);
    nlohmann::json j = {{"detections", rep.detections},
                        {"true_sources", rep.true_sources},
                        {"xi", rep.xi ? nlohmann::json(*rep.xi) : nlohmann::json("no-detections")},
                        {"completeness", rep.completeness ? nlohmann::json(*rep.completeness) : nlohmann::json(nullptr)},
                        {"matched", rep.matched}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_graphfcp(const std::string& input, const std::string& output, double alpha, double c, double epsilon,
                 double d, std::size_t K)
{
    const auto pts = fcp::parse_locations_csv(fcp::read_text_file(input));
    if (pts.size() == 0) throw fcp::ParseError("location CSV has no rows");
    const auto labels = fcp::graph::classify_phase(pts, K);
    const auto u = fcp::graph::conservative_superset(pts, alpha);
    const auto res = fcp::graph::graph_find_threshold(pts, labels, u, epsilon, c, d);
    const std::string csv = fcp::graph_output_csv(pts, labels, res.clusters);
    if (output.empty()) std::cout << csv;
    else fcp::write_text(output, csv);
    std::cerr << "graphfcp: |U|=" << u.size() << ", " << res.clusters.size() << " cluster(s)";
    if (res.found) std::cerr << " at t_c=" << res.t_c;
    std::cerr << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"False cluster proportion source detection"};
    app.require_subcommand(1);

    DetectFlags detect_flags;
    std::string out_catalog, out_envelope, out_metadata, out_result;
    auto* detect = app.add_subcommand("detect", "detect sources with FCP-Z or MSFCP");
    detect_flags.add_to(*detect);
    detect->add_option("--catalog", out_catalog, "catalog CSV (default stdout)");
    detect->add_option("--envelope", out_envelope, "envelope curve CSV");
    detect->add_option("--metadata", out_metadata, "run metadata JSON");
    detect->add_option("--result", out_result, "full result JSON (input to `evaluate`)");

    DetectFlags sim_flags;
    std::string sim_model, sim_out;
    std::size_t sim_rows = 0, sim_cols = 0;
    auto* simulate = app.add_subcommand("simulate", "simulate and cache a null maxima table");
    sim_flags.add_to(*simulate);
    simulate->add_option("--model", sim_model, "noise model JSON (instead of deriving it from --input)");
    simulate->add_option("--rows", sim_rows, "image rows (with --model)");
    simulate->add_option("--cols", sim_cols, "image cols (with --model)");
    simulate->add_option("-o,--out", sim_out, "output table JSON")->required();

    std::string msd_in, msd_format = "ascii-matrix", msd_scales = "1,2,4,8", msd_out, msd_out_format;
    auto* msd = app.add_subcommand("msd", "write the multi-scale derivative detection statistic D = -M");
    msd->add_option("-i,--input", msd_in, "input image")->required();
    msd->add_option("--format", msd_format, "input format");
    msd->add_option("--scales", msd_scales, "comma-separated bandwidths");
    msd->add_option("-o,--output", msd_out, "output image")->required();
    msd->add_option("--out-format", msd_out_format, "output format (default: input format)");

    std::size_t syn_rows = 128, syn_cols = 128, syn_random = 0;
    double syn_lambda0 = 0.3, amp_lo = 5.0, amp_hi = 20.0, width_lo = 1.0, width_hi = 2.5;
    std::string syn_sources, syn_out, syn_truth, syn_format = "ascii-matrix";
    std::uint64_t syn_seed = 1;
    auto* synth = app.add_subcommand("synth", "generate a synthetic Poisson sky with planted sources");
    synth->add_option("--rows", syn_rows);
    synth->add_option("--cols", syn_cols);
    synth->add_option("--lambda0", syn_lambda0, "background rate");
    synth->add_option("--sources", syn_sources, "explicit sources 'row,col,amp,width;...'");
    synth->add_option("--random", syn_random, "number of randomly placed sources");
    synth->add_option("--amp-min", amp_lo);
    synth->add_option("--amp-max", amp_hi);
    synth->add_option("--width-min", width_lo);
    synth->add_option("--width-max", width_hi);
    synth->add_option("--seed", syn_seed);
    synth->add_option("-o,--out", syn_out, "output count image")->required();
    synth->add_option("--format", syn_format, "output format");
    synth->add_option("--truth", syn_truth, "output truth mask (ascii 0/1)");

    std::string ev_result, ev_truth;
    double ev_epsilon = 0.99;
    auto* evaluate = app.add_subcommand("evaluate", "score a detection result against a truth mask");
    evaluate->add_option("--result", ev_result, "result JSON from `detect --result`")->required();
    evaluate->add_option("--truth", ev_truth, "truth mask (ascii 0/1, 1 = source)")->required();
    evaluate->add_option("--epsilon", ev_epsilon);

    std::string g_in, g_out;
    double g_alpha = 0.05, g_c = 0.10, g_eps = 0.99, g_d = 1.5;
    std::size_t g_k = 2;
    auto* graphfcp = app.add_subcommand("graphfcp", "FCP on a point cloud with phase classes");
    graphfcp->add_option("-i,--input", g_in, "CSV with header x,y,pvalue,phase")->required();
    graphfcp->add_option("-o,--output", g_out, "output CSV (default stdout)");
    graphfcp->add_option("--alpha", g_alpha);
    graphfcp->add_option("--c", g_c);
    graphfcp->add_option("--epsilon", g_eps);
    graphfcp->add_option("--d", g_d, "maximum edge length");
    graphfcp->add_option("--K", g_k, "number of phase classes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*detect) return cmd_detect(detect_flags, out_catalog, out_envelope, out_metadata, out_result);
        if (*simulate) return cmd_simulate(sim_flags, sim_model, sim_rows, sim_cols, sim_out);
        if (*msd) return cmd_msd(msd_in, msd_format, msd_scales, msd_out, msd_out_format);
        if (*synth) {
            std::vector<fcp::SourceSpec> sources = parse_sources(syn_sources);
            if (syn_random > 0) {
                auto extra = fcp::random_sources(syn_random, syn_rows, syn_cols, amp_lo, amp_hi, width_lo, width_hi,
                                                 3.0 * width_hi, fcp::child_seed(syn_seed, 1));
                sources.insert(sources.end(), extra.begin(), extra.end());
            }
            const auto sky = fcp::synth_sky(syn_rows, syn_cols, syn_lambda0, sources, syn_seed);
            fcp::save_image(sky.image, syn_out, fcp::parse_image_format(syn_format));
            if (!syn_truth.empty()) fcp::save_mask(sky.truth, syn_truth);
            return kExitOk;
        }
        if (*evaluate) return cmd_evaluate(ev_result, ev_truth, ev_epsilon);
        if (*graphfcp) return cmd_graphfcp(g_in, g_out, g_alpha, g_c, g_eps, g_d, g_k);
    } catch (const fcp::ParameterError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fcp::ModelError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fcp::CapacityError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fcp::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitConfig;
}
