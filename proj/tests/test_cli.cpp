#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ergo/cli.hpp"
#include "ergo/errors.hpp"

namespace fs = std::filesystem;
using namespace ergo::cli;

namespace {

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "ergolab");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    return main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::path(testing::TempDir()) / ("ergolab_" + name);
    fs::remove_all(d);
    return d;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST(Cli, InvalidSamplingFunctionWritesNothing) {
    auto d = fresh_dir("badf");
    EXPECT_EQ(run_args({"ids", "--f", "bogus", "--out", d.string()}), kExitConfig);
    EXPECT_FALSE(fs::exists(d));
    EXPECT_EQ(run_args({"ids", "--no_such_key", "1", "--out", d.string()}), kExitConfig);
    EXPECT_EQ(run_args({"nonsense"}), kExitConfig);
    EXPECT_FALSE(fs::exists(d));
}

TEST(Cli, FreeLyapunovMatchesClosedForm) {
    auto d = fresh_dir("lyap");
    ASSERT_EQ(run_args({"lyapunov", "--lambda", "0", "--E_min", "2.5", "--E_max", "3.5", "--E_points", "11", "--N",
                        "10000", "--samples", "4", "--out", d.string()}),
              kExitOk);
    auto rows = csv_rows(slurp(d / "results.csv"));
    ASSERT_EQ(rows.size(), 11u);
    for (auto& r : rows) {
        double E = std::stod(r[0]), L = std::stod(r[1]);
        EXPECT_NEAR(L, std::log((E + std::sqrt(E * E - 4)) / 2), 1e-3) << "E = " << E;
    }
    auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    EXPECT_EQ(s["format_version"], kFormatVersion);
    EXPECT_EQ(s["invariants"]["failed"], 0);
    EXPECT_EQ(s["invariants"]["passed"], 2);
    EXPECT_TRUE(s.contains("wall_time_seconds"));
}

TEST(Cli, ReplayFromSummaryIsByteIdenticalAcrossWorkers) {
    auto d = fresh_dir("replay");
    ASSERT_EQ(run_args({"ids", "--system", "skew-shift", "--dim", "3", "--f", "linear-centered", "--lambda", "0.5",
                        "--samples", "300", "--E_points", "31", "--out", d.string()}),
              kExitOk);
    const std::string first = slurp(d / "results.csv");
    fs::copy_file(d / "summary.json", d / "first.json");
    ASSERT_EQ(run_args({"ids", "--config", (d / "first.json").string(), "--workers", "3"}), kExitOk);
    EXPECT_EQ(slurp(d / "results.csv"), first);
    auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    EXPECT_EQ(s["workers"], 3);
}

TEST(Cli, KeyValueFileWithFlagOverrides) {
    auto d = fresh_dir("kv");
    fs::create_directories(d);
    std::ofstream(d / "run.cfg") << "# IDS of the free operator\nlambda = 0\nN=3\nE = 0\nsamples=7\nout=" << d.string()
                                 << "\n";
    ASSERT_EQ(run_args({"ids", "--config", (d / "run.cfg").string(), "--samples", "9"}), kExitOk);
    auto rows = csv_rows(slurp(d / "results.csv"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][1], "0.33333333333333331");
    EXPECT_EQ(rows[0][4], "9");
    std::ofstream(d / "broken.cfg") << "lambda 0\n";
    EXPECT_EQ(run_args({"ids", "--config", (d / "broken.cfg").string()}), kExitConfig);
}

TEST(Cli, ConfigParsing) {
    auto kv = parse_config_text("a = 1 # comment\n\n b=x,y\n");
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "x,y");
    auto js = parse_config_text(R"({"format_version": 1, "config": {"lambda": "0.5"}})");
    EXPECT_EQ(js.at("lambda"), "0.5");
    EXPECT_THROW(resolve_config("ids", {{"bogus", "1"}}, {}), ergo::ConfigError);
    auto c = resolve_config("ids", {{"lambda", "2"}}, {{"lambda", "3"}});
    EXPECT_EQ(c.get("lambda"), "3");
}

TEST(Cli, ResultsDirEnvironment) {
    auto d = fresh_dir("env");
    setenv("RESULTS_DIR", d.string().c_str(), 1);
    EXPECT_EQ(run_args({"ids", "--samples", "5", "--E_points", "3"}), kExitOk);
    unsetenv("RESULTS_DIR");
    EXPECT_TRUE(fs::exists(d / "ids" / "results.csv"));
    EXPECT_TRUE(fs::exists(d / "ids" / "summary.json"));
}

TEST(Cli, MsaCertifyReportsMeasureAndRate) {
    auto d = fresh_dir("msa");
    ASSERT_EQ(run_args({"msa-certify", "--out", d.string()}), kExitOk);
    auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    auto& r = s["results"];
    double frac = r["surviving_fraction"].get<double>();
    EXPECT_GT(frac, 0.0);
    EXPECT_LE(frac, 1.0 + 1e-12);
    double kappa = std::exp(-8 * 0.25 - 1.0 / 99) / 5;
    EXPECT_NEAR(r["kappa_log_lambda"].get<double>(), kappa * std::log(100.0), 1e-15);
    EXPECT_GE(r["certified_rate"].get<double>(), kappa * std::log(100.0));
    // desk scale cannot meet the large-scale inequalities; they are named, not enforced
    EXPECT_FALSE(s["hypotheses_failed"].empty());
    auto e = fresh_dir("msa_enforced");
    EXPECT_EQ(run_args({"msa-certify", "--enforce_hypotheses", "true", "--out", e.string()}), kExitHypothesis);
    EXPECT_TRUE(fs::exists(e / "summary.json"));
}

TEST(Cli, InitialCriticalityFailureIsAHypothesisExit) {
    auto d = fresh_dir("msa_fail");
    EXPECT_EQ(run_args({"msa-certify", "--lambda", "0.01", "--gamma", "1", "--E_min", "-0.5", "--E_max", "0.5",
                        "--out", d.string()}),
              kExitHypothesis);
    auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    EXPECT_NE(s["hypotheses_failed"][0].get<std::string>().find("initial criticality"), std::string::npos);
}

TEST(Cli, RemainingSubcommandsRun) {
    auto d = fresh_dir("misc");
    EXPECT_EQ(run_args({"wegner-skew", "--samples", "2000", "--E_points", "5", "--out", (d / "w").string()}), kExitOk);
    EXPECT_EQ(csv_rows(slurp(d / "w" / "results.csv")).size(), 10u);
    EXPECT_EQ(run_args({"nondegen", "--f", "linear-centered", "--samples", "20000", "--out", (d / "n").string()}),
              kExitOk);
    auto n = nlohmann::json::parse(slurp(d / "n" / "summary.json"));
    EXPECT_NEAR(n["results"]["alpha"].get<double>(), 1.0, 0.1);
    EXPECT_EQ(run_args({"prufer-check", "--samples", "5", "--N", "2000", "--out", (d / "p").string()}), kExitOk);
    EXPECT_EQ(run_args({"ldt", "--N_list", "100,1000", "--samples", "100", "--lambda", "0.0",
                        "--out", (d / "l").string()}),
              kExitOk);
    EXPECT_EQ(run_args({"ldt", "--samples", "10", "--out", (d / "l2").string()}), kExitConfig);
}
