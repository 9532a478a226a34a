#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crpsreg/cli.hpp"
#include "crpsreg/distributions.hpp"
#include "crpsreg/error.hpp"
#include "crpsreg/textio.hpp"
#include "manifest.hpp"

namespace crpsreg {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("crpsreg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  static std::string read(const std::string& p) { return textio::read_file(p); }

  Result run(std::vector<std::string> args) const {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  nlohmann::json manifest(const std::string& out_dir) const {
    return nlohmann::json::parse(read(out_dir + "/manifest.json"));
  }

  fs::path dir_;
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string field(const std::string& line, std::size_t i) {
  std::istringstream in(line);
  std::string f;
  for (std::size_t k = 0; k <= i; ++k) std::getline(in, f, ',');
  return f;
}

TEST_F(Cli, ScoreBayesRiskOfGpd) {
  Rng rng(2024);
  std::string fc, obs;
  for (int i = 0; i < 1000000; ++i) {
    fc += "gpd,0.5,1\n";
    obs += textio::format_real(gpd_sample({0.5, 1.0}, rng)) + '\n';
  }
  const Result r = run({"score", write("f.csv", fc), write("y.csv", obs), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 2u);
  const double mean = std::stod(field(lines[0], 1));
  const double se = std::stod(field(lines[1], 1));
  EXPECT_LT(std::abs(mean - 4.0 / 3.0), 3.0 * se);
  EXPECT_EQ(lines_of(read(path("o/scores.csv"))).size(), 1000003u);
}

TEST_F(Cli, ScorePerfectEnsembleIsZero) {
  const Result r = run({"score", write("f.csv", "# members\n1.5\n-2\n\n7\n"), write("y.csv", "1.5\n-2\n7\n"),
                        "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(read(path("o/scores.csv")));
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "row,crps");
  for (int i = 1; i <= 3; ++i) EXPECT_EQ(field(lines[i], 1), "0.0");
  EXPECT_EQ(lines[4], "mean,0.0");
}

TEST_F(Cli, ScoreThresholdBelowSupport) {
  const Result r = run({"score", write("f.csv", "1,2,3\ngpd,0.3,1\n0.5,4\n"), write("y.csv", "2.5\n1\n0\n"),
                        "--threshold", "-5", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(read(path("o/scores.csv")));
  EXPECT_EQ(lines[0], "row,crps,wcrps");
  for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_EQ(field(lines[i], 1), field(lines[i], 2));
}

TEST_F(Cli, ScoreErrors) {
  Result r = run({"score", write("f.csv", "1\n2\n3\n"), write("y.csv", "1\n2\n"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row-count mismatch"), std::string::npos);
  r = run({"score", write("f2.csv", "1\n2\n# c\n3,abc\n"), write("y2.csv", "1\n2\n3\n"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
  r = run({"score", write("f3.csv", "gpd,1.2,1\n"), write("y3.csv", "1\n"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  r = run({"score", path("missing.csv"), write("y4.csv", "1\n"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, PredictSingleRow) {
  const Result r = run({"predict", write("t.csv", "0.3,2.5\n"), write("q.csv", "0.9\n0\n"), "--k", "1",
                        "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "2.5:1.0\n2.5:1.0\n");
  EXPECT_EQ(read(path("o/predictions.txt")), r.out);
}

TEST_F(Cli, PredictWideKernelIsConstant) {
  std::string train;
  for (int i = 0; i < 30; ++i)
    train += textio::format_real(i / 29.0) + ',' + textio::format_real(1.0 - i / 29.0) + ',' +
             std::to_string(i % 7) + '\n';
  const Result r = run({"predict", write("t.csv", train), write("q.csv", "0,0\n0.5,0.2\n1,1\n"), "--method",
                        "kernel", "--bandwidth", "1.4142135623730951", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], lines[1]);
  EXPECT_EQ(lines[1], lines[2]);
}

TEST_F(Cli, PredictAutoEchoesK) {
  std::string train;
  for (int i = 0; i < 64; ++i) train += textio::format_real((i + 0.5) / 64.0) + ',' + std::to_string(i) + '\n';
  Result r = run({"predict", write("t.csv", train), write("q.csv", "0.5\n"), "--auto", "--class-h", "1",
                  "--class-C", "1", "--class-M", "1", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(manifest(path("o"))["results"]["k"], 3);
  EXPECT_EQ(lines_of(r.out)[0].find(' ') != std::string::npos, true);

  r = run({"predict", path("t.csv"), path("q.csv"), "--method", "kernel", "--auto", "--out", path("o2")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(manifest(path("o2"))["results"].contains("bandwidth"));
}

TEST_F(Cli, PredictErrors) {
  const std::string t = write("t.csv", "0.1,1\n0.2,2\n");
  EXPECT_EQ(run({"predict", t, write("q.csv", "1.5\n"), "--k", "1", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", t, write("q2.csv", "0.5\n"), "--k", "3", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", t, path("q2.csv"), "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", t, path("q2.csv"), "--k", "1", "--auto", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", t, path("q2.csv"), "--method", "forest", "--k", "1", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", write("t2.csv", "1.1,1\n"), path("q2.csv"), "--k", "1", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"predict", t, write("q3.csv", "0.5,0.5\n"), "--k", "1", "--out", path("o")}).code, 2);
}

constexpr const char* kConfig = R"(# small sweep
[experiment]
seed = 11
sample_sizes = 32, 64, 128
replications = 6
test_points = 8

[model]
kind = binary_smooth
dimension = 2

[method]
name = knn
tuning = optimal
)";

TEST_F(Cli, ExperimentWritesTables) {
  const Result r = run({"experiment", write("e.ini", kConfig), "--out", path("o"), "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto results = lines_of(read(path("o/results.csv")));
  EXPECT_EQ(results[0], "n,replication,excess_risk");
  EXPECT_EQ(results.size(), 1u + 3 * 6);
  const auto summary = lines_of(read(path("o/summary.csv")));
  EXPECT_EQ(summary[0], "n,mean,se,bound");
  EXPECT_EQ(summary.size(), 4u);
  const std::string fit = read(path("o/ratefit.txt"));
  EXPECT_NE(fit.find("slope="), std::string::npos);
  EXPECT_NE(fit.find("slope_se="), std::string::npos);
  EXPECT_NE(fit.find("target_slope=-0.5"), std::string::npos);
  EXPECT_NE(fit.find("verdict="), std::string::npos);
  const auto m = manifest(path("o"));
  EXPECT_EQ(m["master_seed"], 11);
  EXPECT_EQ(m["command"], "experiment");
  EXPECT_EQ(m["input_hash"].get<std::string>().size(), 40u);
}

TEST_F(Cli, ExperimentDeterministic) {
  const std::string cfg = write("e.ini", kConfig);
  ASSERT_EQ(run({"experiment", cfg, "--out", path("a"), "--threads", "1"}).code, 0);
  ASSERT_EQ(run({"experiment", cfg, "--out", path("b"), "--threads", "8"}).code, 0);
  ASSERT_EQ(run({"experiment", cfg, "--out", path("c"), "--threads", "1"}).code, 0);
  for (const char* f : {"/results.csv", "/summary.csv", "/ratefit.txt"}) {
    EXPECT_EQ(read(path("a") + f), read(path("b") + f)) << f;
    EXPECT_EQ(read(path("a") + f), read(path("c") + f)) << f;
  }
  EXPECT_EQ(manifest(path("a"))["input_hash"], manifest(path("b"))["input_hash"]);
  ASSERT_EQ(run({"experiment", cfg, "--out", path("d"), "--seed", "12"}).code, 0);
  EXPECT_NE(read(path("a/results.csv")), read(path("d/results.csv")));
  EXPECT_NE(manifest(path("a"))["input_hash"], manifest(path("d"))["input_hash"]);
}

TEST_F(Cli, ExperimentSingleReplication) {
  std::string text = kConfig;
  text.replace(text.find("replications = 6"), 16, "replications = 1");
  const Result r = run({"experiment", write("e.ini", text), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string fit = read(path("o/ratefit.txt"));
  EXPECT_NE(fit.find("slope="), std::string::npos);
  EXPECT_EQ(fit.find("slope_se="), std::string::npos);
}

TEST_F(Cli, ExperimentConfigErrors) {
  std::string text = kConfig;
  text.replace(text.find("dimension = 2"), 13, "dimension = 2\ncolour = red");
  Result r = run({"experiment", write("e.ini", text), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  EXPECT_NE(r.err.find("valid keys: kind, dimension"), std::string::npos) << r.err;

  r = run({"experiment", write("e2.ini", std::string(kConfig) + "[extra]\na = 1\n"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("valid sections"), std::string::npos);

  text = kConfig;
  text.replace(text.find("32, 64, 128"), 11, "64, 32, 128");
  EXPECT_EQ(run({"experiment", write("e3.ini", text), "--out", path("o")}).code, 2);
  text = kConfig;
  text.replace(text.find("name = knn"), 10, "name = svm");
  EXPECT_EQ(run({"experiment", write("e4.ini", text), "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"experiment", path("none.ini"), "--out", path("o")}).code, 2);
}

TEST_F(Cli, Bounds) {
  Result r = run({"bounds", "--n", "100", "--dim", "1", "--k", "100", "--bandwidth", "1", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("upper_bound_knn,8.01\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("upper_bound_kernel,1.0301\n"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(path("o/manifest.json")));

  r = run({"bounds", "--n", "10000", "--dim", "2", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(r.out);
  const auto cd = std::find_if(lines.begin(), lines.end(), [](const std::string& l) { return l.rfind("c_d,", 0) == 0; });
  ASSERT_NE(cd, lines.end());
  const double r2 = 1.0 + std::sqrt(2.0);
  EXPECT_NEAR(std::stod(field(*cd, 1)), 16.0 * r2 * r2 / std::numbers::pi, 1e-13);
  EXPECT_NE(r.out.find("optimal_k,18.0\n"), std::string::npos);

  EXPECT_EQ(run({"bounds", "--n", "100", "--class-h", "2", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"bounds", "--n", "100", "--k", "101", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"bounds", "--n", "0", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"bounds", "--out", path("o")}).code, 2);
}

TEST_F(Cli, UsageAndHelp) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"score", "--help"}).code, 0);
  EXPECT_EQ(run({"--threads", "0", "bounds", "--n", "5"}).code, 2);
  EXPECT_EQ(run({"--seed", "x", "bounds", "--n", "5"}).code, 2);
}

TEST_F(Cli, ManifestForEveryCommand) {
  const std::string t = write("t.csv", "0.1,1\n");
  const std::string q = write("q.csv", "0.5\n");
  ASSERT_EQ(run({"predict", t, q, "--k", "1", "--out", path("p"), "--seed", "5"}).code, 0);
  ASSERT_EQ(run({"score", write("f.csv", "1\n"), write("y.csv", "2\n"), "--out", path("s")}).code, 0);
  ASSERT_EQ(run({"bounds", "--n", "10", "--out", path("b")}).code, 0);
  for (const char* d : {"p", "s", "b"}) {
    const auto m = manifest(path(d));
    for (const char* key : {"config", "input_hash", "master_seed", "tool_version", "wall_clock_seconds"})
      EXPECT_TRUE(m.contains(key)) << d << ' ' << key;
  }
  EXPECT_EQ(manifest(path("p"))["master_seed"], 5);
  // Identical inputs give an identical hash; any byte change alters it.
  const std::string h = manifest(path("p"))["input_hash"];
  ASSERT_EQ(run({"predict", t, q, "--k", "1", "--out", path("p2"), "--seed", "5"}).code, 0);
  EXPECT_EQ(manifest(path("p2"))["input_hash"], h);
  write("q.csv", "0.6\n");
  ASSERT_EQ(run({"predict", t, q, "--k", "1", "--out", path("p3"), "--seed", "5"}).code, 0);
  EXPECT_NE(manifest(path("p3"))["input_hash"], h);
}

TEST(TextIo, FormatReal) {
  EXPECT_EQ(textio::format_real(1.0), "1.0");
  EXPECT_EQ(textio::format_real(0.0), "0.0");
  EXPECT_EQ(textio::format_real(-3.0), "-3.0");
  EXPECT_EQ(textio::format_real(0.1), "0.1");
  EXPECT_EQ(textio::format_real(1e300), "1e+300");
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(std::stod(textio::format_real(v)), v);
  }
}

TEST(TextIo, ReadRows) {
  std::istringstream in("# header\n\n 1, 2 ,3\n  # indented comment\n4\n");
  const auto rows = textio::read_rows(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].line, 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_EQ(rows[1].line, 5u);
  EXPECT_THROW(textio::parse_real("1.5x", 3), Error);
  EXPECT_THROW(textio::parse_real("nan", 3), Error);
  EXPECT_THROW(textio::parse_real("", 3), Error);
  EXPECT_EQ(textio::parse_real("-2.5e-3", 1), -2.5e-3);
}

TEST(Manifest, GitBlobHash) {
  // Reference ids from `git hash-object --stdin`.
  EXPECT_EQ(cli::git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(cli::git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

}  // namespace
}  // namespace crpsreg
