#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fcp/pipeline.hpp"
#include "fcp/serialize.hpp"
#include "fcp/synth.hpp"
#include "test_util.hpp"

using namespace fcp;
namespace tu = fcp::test_util;

namespace {

RunConfig small_config(Method m, std::size_t B = 200, std::uint64_t seed = 3)
{
    RunConfig cfg;
    cfg.method = m;
    cfg.B = B;
    cfg.seed = seed;
    cfg.lambda0 = 0.3;
    return cfg;
}

std::filesystem::path temp_path(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("fcp_pipeline_test_" + name);
}

} // namespace

TEST(SynthSky, NoSourcesIsPureBackground)
{
    const auto sky = synth_sky(256, 256, 0.3, {}, 4);
    EXPECT_EQ(count_true(sky.truth), 0u);
    EXPECT_LT(std::abs(tu::mean_of(sky.image) - 0.3), 3.0 * std::sqrt(0.3 / 65536.0));
    EXPECT_EQ(count_true(sky.null_set()), sky.image.size());
}

TEST(SynthSky, SingleSourceTruthIsTruncatedDisk)
{
    const auto sky = synth_sky(40, 40, 0.3, {{20.0, 18.0, 50.0, 2.0}}, 1);
    // exp(-d^2 / 8) >= 1e-3 exactly when d^2 <= 8 ln 1000.
    const double d2max = 8.0 * std::log(1000.0);
    for (std::size_t r = 0; r < 40; ++r) {
        for (std::size_t c = 0; c < 40; ++c) {
            const double d2 = std::pow(r - 20.0, 2) + std::pow(c - 18.0, 2);
            EXPECT_EQ(sky.truth(r, c) != 0, d2 <= d2max) << r << "," << c;
        }
    }
    EXPECT_DOUBLE_EQ(sky.source_rate(20, 18), 50.0);
    EXPECT_THROW(synth_sky(8, 8, -0.1, {}, 1), ParameterError);
    EXPECT_THROW(synth_sky(8, 8, 0.3, {{1, 1, -2, 1}}, 1), ParameterError);
}

TEST(SynthSky, Reproducible)
{
    const std::vector<SourceSpec> src{{10, 10, 5, 1.5}, {30, 5, 2, 1}};
    EXPECT_EQ(synth_sky(40, 40, 0.3, src, 9).image, synth_sky(40, 40, 0.3, src, 9).image);
    EXPECT_NE(synth_sky(40, 40, 0.3, src, 9).image, synth_sky(40, 40, 0.3, src, 10).image);
    const auto a = random_sources(12, 50, 60, 1, 3, 0.5, 2, 5, 7);
    const auto b = random_sources(12, 50, 60, 1, 3, 0.5, 2, 5, 7);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].row, b[i].row);
        EXPECT_GE(a[i].row, 5.0);
        EXPECT_LE(a[i].row, 44.0);
        EXPECT_GE(a[i].col, 5.0);
        EXPECT_LE(a[i].col, 54.0);
        EXPECT_GE(a[i].amplitude, 1.0);
        EXPECT_LE(a[i].width, 2.0);
    }
}

TEST(RunConfig, Validation)
{
    RunConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.alpha = 0.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.c = 1.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.scales = {2, 1};
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.epsilon = 0.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Pipeline, NullModelMirrorsStatisticStages)
{
    const auto sky = synth_sky(32, 32, 0.3, {{16, 16, 20, 1.5}}, 2);
    for (auto m : {Method::FcpZ, Method::Msfcp}) {
        const auto run = run_detection(small_config(m, 50), sky.image);
        StagePipeline pipe(32, 32, run.null_model.stages);
        EXPECT_EQ(pipe.apply(sky.image), run.statistic);
        EXPECT_EQ(std::get<PoissonField>(run.null_model.base).lambda0, 0.3);
    }
    const auto z = run_fcp_z(small_config(Method::Msfcp, 50), sky.image);
    EXPECT_TRUE(std::holds_alternative<stage::ZScore>(z.null_model.stages.back()));
    const auto m = run_msfcp(small_config(Method::FcpZ, 50), sky.image);
    EXPECT_TRUE(std::holds_alternative<stage::Negate>(m.null_model.stages.back()));
}

TEST(Pipeline, DefaultBackgroundRateIsSampleMean)
{
    const auto sky = synth_sky(32, 32, 0.3, {}, 2);
    auto cfg = small_config(Method::FcpZ, 20);
    cfg.lambda0.reset();
    const auto run = run_detection(cfg, sky.image);
    EXPECT_DOUBLE_EQ(std::get<PoissonField>(run.null_model.base).lambda0, tu::mean_of(sky.image));
    EXPECT_DOUBLE_EQ(run.catalog.metadata.lambda0, tu::mean_of(sky.image));
}

TEST(Pipeline, DeterministicCatalogs)
{
    const auto sky = synth_sky(48, 48, 0.3, random_sources(4, 48, 48, 3, 8, 0.8, 1.5, 5, 1), 5);
    for (auto m : {Method::FcpZ, Method::Msfcp}) {
        for (auto alg : {SupersetMethod::Alg1, SupersetMethod::Alg2}) {
            auto cfg = small_config(m, 100);
            cfg.superset = alg;
            const auto a = run_detection(cfg, sky.image);
            const auto b = run_detection(cfg, sky.image);
            EXPECT_EQ(catalog_csv(a.catalog), catalog_csv(b.catalog));
            EXPECT_EQ(envelope_csv(a.result), envelope_csv(b.result));
        }
    }
}

TEST(Pipeline, BrightSourceGivesOneEntry)
{
    // Amplitude 50 over a 0.3 background: the peak pixel alone sits near
    // 90 sigma above the background.
    const auto sky = synth_sky(64, 64, 0.3, {{30.0, 37.0, 50.0, 1.5}}, 8);
    for (auto m : {Method::FcpZ, Method::Msfcp}) {
        const auto run = run_detection(small_config(m, 300), sky.image);
        ASSERT_EQ(run.catalog.entries.size(), 1u) << to_string(m);
        EXPECT_NEAR(run.catalog.entries[0].centroid_row, 30.0, 1.5);
        EXPECT_NEAR(run.catalog.entries[0].centroid_col, 37.0, 1.5);
        const auto rep = evaluate(run.result, sky.truth, 0.99);
        EXPECT_EQ(rep.completeness, 1.0);
        EXPECT_EQ(rep.xi, 0.0);
    }
}

TEST(Pipeline, PureNoiseUsuallyGivesEmptyCatalog)
{
    constexpr int runs = 150;
    for (auto [m, n] : {std::pair{Method::FcpZ, std::size_t{48}}, std::pair{Method::Msfcp, std::size_t{32}}}) {
        int empty = 0;
        for (int s = 0; s < runs; ++s) {
            const auto sky = synth_sky(n, n, 0.3, {}, 500 + static_cast<std::uint64_t>(s));
            const auto run = run_detection(small_config(m, 400, static_cast<std::uint64_t>(s)), sky.image);
            empty += run.catalog.entries.empty() ? 1 : 0;
        }
        EXPECT_GE(empty / double(runs), tu::binomial_lower_band(0.95, runs)) << to_string(m);
    }
}

TEST(Pipeline, LargerToleranceNeverLosesDetections)
{
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto sky = synth_sky(64, 64, 0.3, random_sources(6, 64, 64, 1, 6, 0.6, 1.5, 4, s), 40 + s);
        for (auto m : {Method::FcpZ, Method::Msfcp}) {
            auto cfg = small_config(m, 200, s);
            const auto run = run_detection(cfg, sky.image);
            const auto looser = find_threshold(run.statistic, run.superset, cfg.epsilon, 0.20);
            EXPECT_GE(looser.clusters.count(), run.result.clusters.count()) << s << " " << to_string(m);
            EXPECT_LE(looser.t_c, run.result.t_c);
        }
    }
}

TEST(Pipeline, CatalogSortedByPeak)
{
    const auto sky = synth_sky(64, 64, 0.3, random_sources(6, 64, 64, 5, 15, 0.8, 1.5, 4, 3), 11);
    const auto run = run_msfcp(small_config(Method::Msfcp, 200), sky.image);
    ASSERT_GE(run.catalog.entries.size(), 2u);
    for (std::size_t i = 1; i < run.catalog.entries.size(); ++i)
        EXPECT_GE(run.catalog.entries[i - 1].peak, run.catalog.entries[i].peak);
    const auto csv = catalog_csv(run.catalog);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,row,col,area,peak,bbox_rmin,bbox_rmax,bbox_cmin,bbox_cmax");
}

TEST(Pipeline, MetadataReproducesCatalog)
{
    const auto sky = synth_sky(40, 40, 0.3, random_sources(3, 40, 40, 4, 10, 1, 1.5, 4, 2), 6);
    const auto path = temp_path("meta_input.txt");
    save_image(sky.image, path, ImageFormat::AsciiMatrix);
    auto cfg = small_config(Method::Msfcp, 150, 17);
    cfg.input = path.string();
    cfg.lambda0.reset();
    cfg.superset = SupersetMethod::Alg1;
    cfg.a = 40;
    const auto first = run_detection(cfg);
    const auto meta = nlohmann::json::parse(metadata_json(cfg, first.catalog).dump());
    const auto again = run_detection(config_from_json(meta));
    EXPECT_EQ(catalog_csv(first.catalog), catalog_csv(again.catalog));
    EXPECT_EQ(meta["config"]["a"], 40);
    std::filesystem::remove(path);
}

TEST(Pipeline, CachedTableIsReusedAndChecked)
{
    const auto sky = synth_sky(32, 32, 0.3, {{12, 20, 12, 1.2}}, 4);
    for (auto alg : {SupersetMethod::Alg1, SupersetMethod::Alg2}) {
        auto cfg = small_config(Method::Msfcp, 120, 9);
        cfg.superset = alg;
        cfg.a = 30;
        const auto direct = run_detection(cfg, sky.image);
        const auto model = poisson_model(0.3, statistic_stages(cfg, sky.image));
        const auto table = build_max_distributions(model, 32, 32, cfg.B, 30, null_simulation_seed(cfg.seed));
        const auto path = temp_path("table.json");
        write_text(path, nlohmann::json(table).dump());
        cfg.table = path.string();
        const auto cached = run_detection(cfg, sky.image);
        EXPECT_EQ(catalog_csv(direct.catalog), catalog_csv(cached.catalog));
        EXPECT_EQ(direct.superset.mask, cached.superset.mask);

        auto wrong = cfg;
        wrong.lambda0 = 0.5;
        EXPECT_THROW(run_detection(wrong, sky.image), ModelError);
        auto other = cfg;
        other.method = Method::FcpZ;
        EXPECT_THROW(run_detection(other, sky.image), ModelError);
        std::filesystem::remove(path);
    }
}

TEST(Evaluate, PerfectAndEmpty)
{
    Mask truth(8, 8);
    truth(1, 1) = truth(1, 2) = 1;
    truth(5, 5) = truth(6, 6) = 1;
    ImageGrid stat(8, 8, 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) stat[i] = truth[i] ? 5.0 : 0.0;
    const auto perfect = evaluate(clusters_at(stat, 1.0), truth, 0.99);
    EXPECT_EQ(perfect.xi, 0.0);
    EXPECT_EQ(perfect.completeness, 1.0);
    EXPECT_EQ(perfect.true_sources, 2u);
    EXPECT_EQ(perfect.matched, (std::vector<bool>{true, true}));

    const auto none = evaluate(clusters_at(stat, 10.0), truth, 0.99);
    EXPECT_EQ(none.xi, std::nullopt);
    EXPECT_EQ(none.completeness, 0.0);
    EXPECT_EQ(none.detections, 0u);
    EXPECT_THROW(evaluate(clusters_at(ImageGrid(8, 9, 0.0), 1.0), truth, 0.99), StructuralError);
}

TEST(Evaluate, HandComputedCase)
{
    // Sources: A = {(0,0),(0,1)}, B = {(4,4)}, C = {(7,0)}.
    Mask truth(8, 8);
    truth(0, 0) = truth(0, 1) = truth(4, 4) = truth(7, 0) = 1;
    ImageGrid stat(8, 8, 0.0);
    stat(0, 1) = stat(0, 2) = stat(0, 3) = 2.0; // null fraction 2/3
    stat(3, 3) = stat(4, 4) = 2.0;              // diagonal pair, null fraction 1/2
    stat(2, 7) = 2.0;                           // isolated noise pixel: false
    stat(6, 6) = stat(6, 7) = 2.0;              // noise pair: false
    const auto rep = evaluate(clusters_at(stat, 1.0), truth, 0.7);
    EXPECT_EQ(rep.detections, 4u);
    EXPECT_EQ(rep.xi, 0.5);
    EXPECT_EQ(rep.true_sources, 3u);
    EXPECT_DOUBLE_EQ(*rep.completeness, 2.0 / 3.0);
    EXPECT_EQ(rep.matched, (std::vector<bool>{true, false, true, false}));
    EXPECT_EQ(evaluate(clusters_at(stat, 1.0), truth, 0.6).xi, 0.75);
    EXPECT_EQ(evaluate(clusters_at(stat, 1.0), truth, 0.5).xi, 1.0);
}
