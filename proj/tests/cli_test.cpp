#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lcvx/cli.hpp"
#include "lcvx/config.hpp"

using namespace lcvx;
namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

struct Outcome
{
    int code{0};
    std::string out;
    std::string err;
};

Outcome cli(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    Outcome r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("lcvx_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) const
    {
        const fs::path p = dir_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p.string();
    }

    std::string write(const std::string& name, const json& j) const { return write(name, j.dump(2)); }

    fs::path dir_;
};

/// Forward/backward thrust on a double integrator at fixed tf; maximize the final position.
json push_config(double tf = 6.0)
{
    return json{
        {"schema_version", 1},
        {"dynamics", {{"model", "explicit"}, {"A", {{0, 1}, {0, 0}}}, {"B", {{0}, {1}}}}},
        {"initial_state", {0.0, 0.5}},
        {"grid", {{"N", 20}}},
        {"inputs", {{"K", 1}, {"rho1", 0.3}, {"rho2", 1.0}, {"cones", {{{"ray", {1.0}}}, {{"ray", {-1.0}}}}}}},
        {"terminal", {{"state", {nullptr, 0.0}}, {"final_time", tf}, {"cost", {{"kind", "affine"}, {"q", {-1.0, 0.0}}}}}},
        {"time", {{"tf", tf}}},
    };
}

json docking_json()
{
    return json::parse(dump_config(docking_preset()));
}

}  // namespace

TEST_F(Cli, BadConfigNamesTheField)
{
    json j = push_config();
    j["inputs"]["rho1"] = "small";
    Outcome r = cli({"check", write("a.json", j)});
    EXPECT_EQ(r.code, kExitBadConfig);
    EXPECT_NE(r.err.find("/inputs/rho1"), std::string::npos) << r.err;

    j = push_config();
    j["inputs"].erase("K");
    r = cli({"solve", write("b.json", j), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, kExitBadConfig);
    EXPECT_NE(r.err.find("/inputs/K"), std::string::npos) << r.err;

    j = push_config();
    j["inputs"]["cones"][1]["ray"] = {1.0, 2.0};
    r = cli({"check", write("c.json", j)});
    EXPECT_EQ(r.code, kExitBadConfig);
    EXPECT_NE(r.err.find("/inputs/cones/1/ray"), std::string::npos) << r.err;

    r = cli({"check", write("d.json", std::string("{not json"))});
    EXPECT_EQ(r.code, kExitBadConfig);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitBadConfig);
    EXPECT_EQ(cli({"check", (dir_ / "missing.json").string()}).code, kExitBadConfig);
}

TEST_F(Cli, CheckDockingHolds)
{
    const Outcome r = cli({"check", write("dock.json", docking_json())});
    EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
    const json rep = json::parse(r.out);
    EXPECT_EQ(rep["overall"], "holds");
}

TEST_F(Cli, CheckDuplicateDirectionsFails)
{
    json j = docking_json();
    j["inputs"]["cones"][5] = j["inputs"]["cones"][2];
    const Outcome r = cli({"check", write("dup.json", j), "--out", (dir_ / "rep.json").string()});
    EXPECT_EQ(r.code, kExitFail) << r.out << r.err;
    EXPECT_NE(r.out.find("fails"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir_ / "rep.json"));
}

TEST_F(Cli, CheckFacetConesIsInconclusive)
{
    json j = push_config();
    j["inputs"]["cones"] = {{{"facets", {{-1.0}}}}, {{"facets", {{1.0}}}}};
    const Outcome r = cli({"check", write("facets.json", j)});
    EXPECT_EQ(r.code, kExitInconclusive) << r.out << r.err;
    EXPECT_NE(r.out.find("non-ray pointing sets"), std::string::npos);
}

TEST_F(Cli, PresetRoundTrips)
{
    const std::string path = (dir_ / "preset.json").string();
    ASSERT_EQ(cli({"preset", "docking", "--out", path}).code, kExitOk);
    const std::string text = slurp(path);
    const ProblemConfig cfg = parse_config(text);
    EXPECT_EQ(dump_config(cfg), text);
    const ProblemConfig ref = docking_preset();
    EXPECT_EQ(cfg.spec.sys.A, ref.spec.sys.A);
    EXPECT_EQ(cfg.spec.x0, ref.spec.x0);
    EXPECT_EQ(cfg.spec.cones.size(), ref.spec.cones.size());
    for (std::size_t i = 0; i < ref.spec.cones.size(); ++i)
    {
        EXPECT_EQ(*cfg.spec.cones[i].ray_direction(), *ref.spec.cones[i].ray_direction());
    }
    EXPECT_EQ(cfg.N, 300);
    EXPECT_EQ(cfg.spec.K, 4);
    EXPECT_EQ(cli({"preset", "nowhere"}).code, kExitBadConfig);
}

TEST_F(Cli, SolveWritesDeterministicOutputs)
{
    const std::string cfg = write("push.json", push_config());
    const fs::path a = dir_ / "a";
    const fs::path b = dir_ / "b";
    const Outcome ra = cli({"solve", cfg, "--out", a.string()});
    ASSERT_EQ(ra.code, kExitOk) << ra.err;
    ASSERT_EQ(cli({"solve", cfg, "--out", b.string()}).code, kExitOk);
    for (const char* f : {"trajectory.csv", "plot_states.csv", "plot_input_norms.csv", "plot_gains.csv"})
    {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    std::istringstream csv(slurp(a / "trajectory.csv"));
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 1 + 2 + 2 * 5 - 1);
    EXPECT_EQ(header.substr(0, 8), "t,x0,x1,");
    int rows = 0;
    for (std::string line; std::getline(csv, line);)
    {
        ++rows;
    }
    EXPECT_EQ(rows, 21);

    const json s = json::parse(slurp(a / "summary.json"));
    EXPECT_EQ(s["status"], "optimal");
    EXPECT_NEAR(s["solution"]["cost"].get<double>(), -10.425, 1e-4);
    EXPECT_EQ(s["verification"]["conformance"], 1.0);
    EXPECT_TRUE(s["adjoint"]["available"].get<bool>());
}

TEST_F(Cli, SolveInfeasibleHorizon)
{
    const Outcome r = cli({"solve", write("short.json", push_config(0.3)), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, kExitFail);
    EXPECT_EQ(json::parse(slurp(dir_ / "o" / "summary.json"))["status"], "infeasible");
}

TEST_F(Cli, SolveMinTimeNeedsBracket)
{
    json j = push_config();
    j["terminal"] = {{"state", {10.0, 0.0}}, {"cost", {{"kind", "minimum-time"}}}};
    j["inputs"]["cones"] = {{{"unrestricted", true}}};
    j["initial_state"] = {0.0, 0.0};
    j["time"] = json::object();
    Outcome r = cli({"solve", write("mt.json", j), "--out", (dir_ / "o").string()});
    EXPECT_EQ(r.code, kExitBadConfig);
    EXPECT_NE(r.err.find("/time/bracket"), std::string::npos);

    j["time"] = {{"bracket", {1.0, 20.0}}, {"tol", 1e-3}};
    j["grid"]["N"] = 50;
    r = cli({"solve", write("mt2.json", j), "--out", (dir_ / "p").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json s = json::parse(slurp(dir_ / "p" / "summary.json"));
    const double tf = s["solution"]["tf"].get<double>();
    EXPECT_LE(std::abs(tf - 2.0 * std::sqrt(10.0)), tf / 50);
    EXPECT_FALSE(s["min_time"]["probes"].empty());
}

TEST_F(Cli, CompareAgreesWithRelaxation)
{
    const Outcome r = cli({"compare", write("push.json", push_config()), "--tf", "6", "--out", dir_.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const json c = json::parse(slurp(dir_ / "comparison.json"));
    EXPECT_LE(c["relative_difference"].get<double>(), 1e-4);
    EXPECT_TRUE(fs::exists(dir_ / "relaxed_summary.json"));
    EXPECT_EQ(json::parse(slurp(dir_ / "micp_summary.json"))["status"], "optimal");
}

TEST_F(Cli, BinaryRuns)
{
    const std::string cmd = std::string(LCVX_CLI_PATH) + " preset docking --out " + (dir_ / "p.json").string();
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(slurp(dir_ / "p.json"), dump_config(docking_preset()));
    const std::string bad = std::string(LCVX_CLI_PATH) + " check " + (dir_ / "none.json").string() + " 2>/dev/null";
    const int status = std::system(bad.c_str());
    EXPECT_EQ(WEXITSTATUS(status), kExitBadConfig);
}
