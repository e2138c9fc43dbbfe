#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fcp/image_io.hpp"

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() / ("fcp_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args) const
    {
        const std::string cmd = std::string(FCP_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                                path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string slurp(const std::string& name) const
    {
        std::ifstream in(path(name));
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, SynthDetectEvaluateRoundTrip)
{
    ASSERT_EQ(run("synth --rows 48 --cols 48 --lambda0 0.3 --sources '20,24,40,1.5' --seed 3 -o " + path("sky.txt") +
                  " --truth " + path("truth.txt")),
              0);
    const auto sky = fcp::load_image(path("sky.txt"), fcp::ImageFormat::AsciiMatrix);
    EXPECT_EQ(sky.rows(), 48u);

    const std::string detect = "detect -i " + path("sky.txt") + " --method msfcp --B 200 --lambda0 0.3 --seed 5";
    ASSERT_EQ(run(detect + " --catalog " + path("cat.csv") + " --envelope " + path("env.csv") + " --metadata " +
                  path("meta.json") + " --result " + path("res.json")),
              0)
        << slurp("stderr.txt");
    const auto cat = slurp("cat.csv");
    EXPECT_EQ(cat.substr(0, cat.find('\n')), "id,row,col,area,peak,bbox_rmin,bbox_rmax,bbox_cmin,bbox_cmax");
    EXPECT_EQ(std::count(cat.begin(), cat.end(), '\n'), 2);
    EXPECT_EQ(slurp("env.csv").rfind("t,envelope,k_t\n", 0), 0u);
    const auto meta = nlohmann::json::parse(slurp("meta.json"));
    EXPECT_EQ(meta["method"], "msfcp");
    EXPECT_EQ(meta["config"]["B"], 200);

    ASSERT_EQ(run("evaluate --result " + path("res.json") + " --truth " + path("truth.txt")), 0);
    const auto rep = nlohmann::json::parse(slurp("stdout.txt"));
    EXPECT_EQ(rep["detections"], 1);
    EXPECT_EQ(rep["completeness"], 1.0);

    // Same flags, same catalog; the metadata alone reproduces it too.
    ASSERT_EQ(run(detect + " --catalog " + path("cat2.csv")), 0);
    EXPECT_EQ(slurp("cat2.csv"), cat);
    ASSERT_EQ(run("detect --config " + path("meta.json") + " --catalog " + path("cat3.csv")), 0);
    EXPECT_EQ(slurp("cat3.csv"), cat);
}

TEST_F(CliTest, CachedTableAndModelMismatch)
{
    ASSERT_EQ(run("synth --rows 32 --cols 32 --lambda0 0.3 --random 2 --amp-min 5 --amp-max 10 --seed 1 -o " +
                  path("sky.txt")),
              0);
    const std::string base = "-i " + path("sky.txt") + " --method fcp-z --B 100 --lambda0 0.3";
    ASSERT_EQ(run("simulate " + base + " -o " + path("table.json")), 0) << slurp("stderr.txt");
    ASSERT_EQ(run("detect " + base + " --catalog " + path("a.csv")), 0);
    ASSERT_EQ(run("detect " + base + " --table " + path("table.json") + " --catalog " + path("b.csv")), 0);
    EXPECT_EQ(slurp("a.csv"), slurp("b.csv"));
    // A table simulated for fcp-z does not match an msfcp statistic.
    EXPECT_EQ(run("detect -i " + path("sky.txt") + " --method msfcp --B 100 --lambda0 0.3 --table " +
                  path("table.json")),
              2);
}

TEST_F(CliTest, SimulateFromModelJson)
{
    std::ofstream(path("model.json")) << R"({"base": {"type": "gaussian", "mu": 0, "sigma": 1},
                                             "stages": [{"type": "smooth", "sigma": 1.0}]})";
    ASSERT_EQ(run("simulate --model " + path("model.json") + " --rows 16 --cols 16 --B 20 -o " + path("t.json")), 0)
        << slurp("stderr.txt");
    const auto t = nlohmann::json::parse(slurp("t.json"));
    EXPECT_EQ(t["B"], 20);
}

TEST_F(CliTest, MsdWritesStatistic)
{
    std::ofstream(path("img.txt")) << "0 0 0 0 0\n0 0 0 0 0\n0 0 9 0 0\n0 0 0 0 0\n0 0 0 0 0\n";
    ASSERT_EQ(run("msd -i " + path("img.txt") + " --scales 1,2 -o " + path("d.raw") + " --out-format raw-f64-le"), 0);
    const auto d = fcp::load_image(path("d.raw"), fcp::ImageFormat::RawF64);
    EXPECT_GT(d(2, 2), 0.0);
}

TEST_F(CliTest, GraphFcp)
{
    std::ofstream(path("pts.csv")) << "x,y,pvalue,phase\n0,0,0.0001,0.1\n1,0,0.0002,0.0\n0,1,0.0001,0.2\n"
                                      "10,10,0.9,3.0\n11,10,0.8,3.1\n5,5,0.5,3.0\n";
    ASSERT_EQ(run("graphfcp -i " + path("pts.csv") + " --d 1.5 --K 2 -o " + path("out.csv")), 0) << slurp("stderr.txt");
    EXPECT_EQ(slurp("out.csv"), "x,y,class,cluster_id\n0,0,0,0\n1,0,0,0\n0,1,0,0\n10,10,1,-1\n11,10,1,-1\n5,5,1,-1\n");
}

TEST_F(CliTest, ExitCodes)
{
    std::ofstream(path("bad.txt")) << "1 2 3\n4 x 6\n";
    std::ofstream(path("ok.txt")) << "1 2\n3 4\n";
    EXPECT_EQ(run("detect -i " + path("bad.txt")), 3);
    EXPECT_NE(slurp("stderr.txt").find("line 2"), std::string::npos);
    EXPECT_EQ(run("detect -i " + path("missing.txt")), 3);
    EXPECT_EQ(run("detect -i " + path("ok.txt") + " --alpha 1.5"), 2);
    EXPECT_EQ(run("detect -i " + path("ok.txt") + " --scales 2,1"), 2);
    EXPECT_EQ(run("detect --no-such-flag"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("detect -i " + path("ok.txt") + " --superset alg1 --a 1 --B 5 --lambda0 0.0 --sigma 0.5"), 2);
    EXPECT_EQ(run("--help"), 0);
}
