#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "epibound/errors.hpp"
#include "epibound/serialization.hpp"

namespace fs = std::filesystem;
using namespace epibound;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::string kWorked = std::string(EPIBOUND_SOURCE_DIR) + "/tests/data/worked_binary.json";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv(cli::kOutDirEnv);
    dir_ = fs::temp_directory_path() / ("epibound_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    unsetenv(cli::kOutDirEnv);
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST(CliParsing, Lists) {
  EXPECT_EQ(cli::parse_index_list("1:4"), (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(cli::parse_index_list("1,2,5:6"), (std::vector<std::size_t>{1, 2, 5, 6}));
  EXPECT_THROW(cli::parse_index_list("3:1"), InvalidArgument);
  EXPECT_THROW(cli::parse_index_list("-1"), InvalidArgument);
  EXPECT_THROW(cli::parse_index_list(""), InvalidArgument);
  EXPECT_EQ(cli::parse_number_list("0.05,0.5"), (std::vector<double>{0.05, 0.5}));
  EXPECT_THROW(cli::parse_number_list("0.1,x"), InvalidArgument);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"oracle", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"bound", "--instance", kWorked}).code, cli::kExitUsage);
  EXPECT_EQ(run({"oracle", "--alphas", "0.1,zz", "--out", path("r.json")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({"experiment", "--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, BoundWorkedInstance) {
  const auto r = run({"bound", "--statement", "thm1", "--instance", kWorked, "--alpha", "0.15", "--out",
                      path("report.json"), "--csv", path("report.csv")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const Json j = read_json_file(path("report.json"));
  EXPECT_NEAR(j["margin"].get<double>(), 0.70, 1e-12);
  EXPECT_EQ(j["delta"].get<double>(), 0.0);
  EXPECT_EQ(j["statement_id"], "thm1");
  EXPECT_TRUE(fs::exists(path("report.json.manifest.json")));
  EXPECT_EQ(slurp(path("report.csv")).substr(0, 12), "statement_id");
}

TEST_F(CliTest, BoundPreconditionAndMalformedInput) {
  auto r = run({"bound", "--statement", "lemma1", "--instance", kWorked, "--out", path("r.json")});
  EXPECT_EQ(r.code, cli::kExitFailed);
  EXPECT_NE(r.err.find("precondition"), std::string::npos);
  {
    std::ofstream f(path("bad.json"));
    f << "{\n  \"model\": {\"type\": \"explicit\",\n";
  }
  r = run({"bound", "--statement", "thm1", "--instance", path("bad.json"), "--out", path("r.json")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("bad.json:"), std::string::npos) << r.err;
  {
    std::ofstream f(path("bad2.json"));
    f << R"({"model": {"type": "explicit", "members": [{"type": "categorical", "p": [0.5]}]}})";
  }
  r = run({"bound", "--statement", "thm1", "--instance", path("bad2.json"), "--out", path("r.json")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(run({"bound", "--statement", "thm7", "--instance", kWorked, "--out", path("r.json")}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, OracleWritesReportAndReplaysIdentically) {
  const auto r = run({"--threads", "2", "oracle", "--instances", "30", "--seed", "3", "--transfer-instances", "4",
                      "--out", path("oracle.json")});
  ASSERT_NE(r.code, cli::kExitUsage) << r.err;
  const Json j = read_json_file(path("oracle.json"));
  EXPECT_EQ(r.code == cli::kExitOk, j["total_violations"].get<std::size_t>() == 0);
  EXPECT_NE(r.out.find("thm1"), std::string::npos);
  const std::string first = slurp(path("oracle.json"));
  fs::create_directories(dir_ / "replay");
  const auto again = run({"replay", "--manifest", path("oracle.json.manifest.json"), "--out", path("replay")});
  EXPECT_EQ(again.code, r.code);
  EXPECT_EQ(slurp(dir_ / "replay" / "oracle.json"), first);
}

TEST_F(CliTest, OutDirEnvironmentOverride) {
  fs::create_directories(dir_ / "env");
  setenv(cli::kOutDirEnv, (dir_ / "env").c_str(), 1);
  const auto r = run({"bound", "--statement", "thm1", "--instance", kWorked, "--out", path("ignored/report.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "env" / "report.json"));
  EXPECT_FALSE(fs::exists(dir_ / "ignored"));
}

TEST_F(CliTest, ExperimentOutputsAreReproducible) {
  const std::vector<std::string> args = {"experiment", "negative-transfer", "--scenario", "neg", "--n-grid", "1,5",
                                         "--sims", "6", "--seed", "9", "--components", "16", "--out", path("a")};
  auto r = run(args);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  for (const char* f : {"negative_transfer_neg.csv", "negative_transfer_neg.json", "negative_transfer_neg.manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  const std::string csv = slurp(dir_ / "a" / "negative_transfer_neg.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);

  r = run({"replay", "--manifest", path("a/negative_transfer_neg.manifest.json"), "--out", path("b")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(slurp(dir_ / "b" / "negative_transfer_neg.csv"), csv);
  EXPECT_EQ(slurp(dir_ / "b" / "negative_transfer_neg.json"), slurp(dir_ / "a" / "negative_transfer_neg.json"));

  r = run({"experiment", "neighborhood", "--epsilons", "0.1,0.3", "--sims", "4", "--components", "16", "--out",
           path("n")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "n" / "neighborhood.csv"));
  EXPECT_EQ(run({"experiment", "negative-transfer", "--scenario", "up", "--out", path("x")}).code, cli::kExitUsage);
}

TEST_F(CliTest, VerifyExitCodes) {
  {
    std::ifstream in(kWorked);
    Json j = Json::parse(in);
    j["statement"] = "thm1";
    j["alpha"] = 0.15;
    std::ofstream(path("setup.json")) << dump(j);
  }
  auto r = run({"verify", "--setup", path("setup.json"), "--trials", "500", "--seed", "1", "--out", path("v.json")});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(read_json_file(path("v.json"))["empirical_freq"].get<double>(), 0.0);
  // Four tasks each at TV 0.3 from their uniform barycenter: every draw
  // exceeds alpha = 0.3 while the claimed probability is 0.444.
  {
    Json tasks = Json::array();
    for (int k = 0; k < 4; ++k) {
      std::vector<double> p(4, 0.15);
      p[k] = 0.55;
      tasks.push_back({{"weight", 0.25}, {"dist", {{"type", "categorical"}, {"p", p}}}});
    }
    const Json src = {{"type", "finite_tasks"}, {"tasks", tasks}};
    const Json u = {{"type", "categorical"}, {"p", {0.25, 0.25, 0.25, 0.25}}};
    const Json j = {{"model", {{"type", "explicit"}, {"members", {u}}}}, {"predictor", u}, {"source", src},
                    {"target", src}, {"alpha", 0.3}, {"statement", "lemma1"}};
    std::ofstream(path("setup2.json")) << dump(j);
  }
  r = run({"verify", "--setup", path("setup2.json"), "--trials", "100", "--out", path("v2.json")});
  EXPECT_EQ(r.code, cli::kExitFailed) << r.err << r.out;
}
