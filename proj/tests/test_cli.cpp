#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mlmom/io.hpp"

namespace fs = std::filesystem;
using namespace mlmom;

namespace {

struct Result {
    int code;
    std::string out;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / ("mlmom_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

Result cli(const std::string& args) {
    const fs::path out = scratch() / "stdout.txt";
    const std::string cmd = std::string(MLMOM_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    const int st = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
    std::vector<std::vector<std::string>> r;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string x;
        while (std::getline(ls, x, ',')) f.push_back(x);
        r.push_back(f);
    }
    return r;
}

}  // namespace

TEST(CliMlEval, KnownValuesAndGridShape) {
    auto r = cli("ml-eval --a 1,2 --x 1,4");
    ASSERT_EQ(r.code, 0);
    auto t = rows(r.out);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_NEAR(std::stod(t[0][2]), 2.7182818285, 1e-10);
    EXPECT_NEAR(std::stod(t[3][2]), std::cosh(2.0), 1e-10);
    auto g = cli("ml-eval --a 1,1.5,2 --x 0,1,2,3,4");
    EXPECT_EQ(rows(g.out).size(), 15u);
}

TEST(CliExitCodes, UsageNumericBudget) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("no-such-command").code, 2);
    EXPECT_EQ(cli("ml-eval --a x").code, 2);
    EXPECT_EQ(cli("ml-eval --a 0.5").code, 2);
    EXPECT_EQ(cli("tail-report").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
    // beta at or below nu makes the angular integral diverge
    EXPECT_EQ(cli("eps-profile --preset custom --family power_law --nu 1.5 --beta 1.0 --qmax 8").code, 3);
    EXPECT_EQ(cli("dsmc-run --N 100000 --budget 1000").code, 4);
}

TEST(CliEpsProfile, PresetsProduceProfiles) {
    for (const char* p : {"bounded", "power", "truncated"}) {
        auto r = cli(std::string("eps-profile --qmax 64 --preset ") + p);
        ASSERT_EQ(r.code, 0) << p;
        auto t = rows(r.out);
        ASSERT_EQ(t.size(), 5u);
        EXPECT_LT(std::stod(t.back()[4]), std::stod(t.front()[4])) << p;
    }
}

TEST(CliBetaSums, AnchorAndSummary) {
    const auto dir = scratch() / "beta";
    auto r = cli("--out " + dir.string() + " beta-sums --lemma A4 --param 2 --qmin 3 --qmax 10");
    ASSERT_EQ(r.code, 0);
    auto t = rows(slurp(dir / "beta_sums.csv"));
    ASSERT_EQ(t.size(), 8u);
    EXPECT_NEAR(std::stod(t[0][3]), 2.0 / 105.0, 1e-15);
    auto s = json::parse(slurp(dir / "beta_sums_summary.json"));
    EXPECT_EQ(s.at("lemma"), "A4");
    EXPECT_TRUE(fs::exists(dir / "beta-sums.manifest.json"));
}

TEST(CliPovzner, SweepWritesSummary) {
    const auto dir = scratch() / "pov";
    auto r = cli("--out " + dir.string() + " --seed 3 povzner-sweep --configs 15 --rq 2,4");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(rows(slurp(dir / "povzner.csv")).size(), 30u);
    auto s = json::parse(slurp(dir / "povzner_summary.json"));
    EXPECT_EQ(s.at("per_rq").at("2").at("count"), 15);
    EXPECT_EQ(s.at("per_rq").at("2").at("printed_violations"), 0);
}

TEST(CliEnvelope, GenerationAndPropagationForms) {
    auto g = cli("moment-envelope --points 5 --tmax 2");
    ASSERT_EQ(g.code, 0);
    EXPECT_EQ(rows(g.out).size(), 4u);  // t = 0 is skipped in the generation form
    auto p = cli("moment-envelope --points 5 --tmax 2 --initial 3");
    ASSERT_EQ(p.code, 0);
    auto t = rows(p.out);
    ASSERT_EQ(t.size(), 5u);
    EXPECT_NEAR(std::stod(t[0][2]), 3.0, 1e-12);
}

TEST(CliDsmc, ManifestReplayAndWorkerInvariance) {
    const auto a = scratch() / "run_a", b = scratch() / "run_b", c = scratch() / "run_c";
    const std::string args = " dsmc-run --ic compact_support --N 4000 --horizon 0.5 --snapshots 3 --qmax 10";
    ASSERT_EQ(cli("--seed 9 --workers 1 --out " + a.string() + args).code, 0);
    ASSERT_EQ(cli("--seed 9 --workers 4 --out " + b.string() + args).code, 0);
    const auto ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
    EXPECT_EQ(ma.at("trajectory_checksum"), mb.at("trajectory_checksum"));
    EXPECT_EQ(ma.at("trajectory_checksum"), checksum_hex(slurp(a / "trajectory.csv")));
    EXPECT_EQ(ma.at("schema_version"), kSchemaVersion);
    // replay from the manifest
    ASSERT_EQ(cli("--workers 2 --out " + c.string() + " dsmc-run --manifest " + (a / "manifest.json").string()).code, 0);
    EXPECT_EQ(json::parse(slurp(c / "manifest.json")).at("trajectory_checksum"), ma.at("trajectory_checksum"));
    // manifest config round-trips
    EXPECT_EQ(to_json(run_config_from_json(ma.at("config"))), ma.at("config"));
}

TEST(CliConfig, FileValuesAndFlagOverride) {
    const auto ini = scratch() / "run.ini";
    std::ofstream(ini) << "seed = 9\n[dsmc-run]\nic = compact_support\nN = 4000\nhorizon = 0.5\nsnapshots = 3\nqmax = 10\n";
    const auto d1 = scratch() / "cfg1", d2 = scratch() / "cfg2", ref = scratch() / "cfgref";
    ASSERT_EQ(cli("--config " + ini.string() + " --out " + d1.string() + " dsmc-run").code, 0);
    ASSERT_EQ(cli("--seed 9 --out " + ref.string() + " dsmc-run --ic compact_support --N 4000 --horizon 0.5 --snapshots 3 --qmax 10").code,
              0);
    EXPECT_EQ(slurp(d1 / "trajectory.csv"), slurp(ref / "trajectory.csv"));
    ASSERT_EQ(cli("--config " + ini.string() + " --out " + d2.string() + " dsmc-run --N 5000").code, 0);
    EXPECT_EQ(json::parse(slurp(d2 / "manifest.json")).at("config").at("N"), 5000);
    EXPECT_EQ(json::parse(slurp(d2 / "manifest.json")).at("config").at("seed"), 9);
    const auto bad = scratch() / "bad.ini";
    std::ofstream(bad) << "[dsmc-run\nN=3\n";
    EXPECT_EQ(cli("--config " + bad.string() + " dsmc-run").code, 2);
}

TEST(CliTailReport, HeavyTailPropagationAndEmptyInput) {
    const auto d = scratch() / "heavy";
    ASSERT_EQ(cli("--seed 2 --out " + d.string() + " dsmc-run --ic heavy_tail --s0 1 --alpha0 0.5 --N 5000 --horizon 0.5 --snapshots 3 --qmax 60")
                  .code,
              0);
    auto r = cli("tail-report --trajectory " + (d / "trajectory.csv").string() + " --s 1 --alpha0 0.5");
    ASSERT_EQ(r.code, 0);
    auto j = json::parse(r.out);
    EXPECT_EQ(j.at("propagation").at("verdict"), "PASS");
    EXPECT_LE(j.at("propagation").at("alpha_found").get<double>(), 0.5);
    EXPECT_TRUE(j.at("generation").contains("verdict"));
    const auto empty = scratch() / "empty.csv";
    std::ofstream(empty) << "t,order,value,stderr\n";
    EXPECT_EQ(cli("tail-report --trajectory " + empty.string()).code, 2);
    auto b = cli("bootstrap-scan --trajectory " + (d / "trajectory.csv").string() + " --alpha 0.01 --nmax 20");
    ASSERT_EQ(b.code, 0);
    auto t = rows(b.out);
    ASSERT_EQ(t.size(), 21u);
    for (const auto& row : t) EXPECT_NEAR(std::stod(row[1]), 0.5, 1e-15);
}
