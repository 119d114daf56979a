#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "crosspoint/runner.hpp"

using namespace crosspoint;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = CROSSPOINT_SCENARIOS;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(testing::TempDir()) / ("crosspoint_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CROSSPOINT_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

std::map<std::string, std::string> read_all(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

json small_crossing() {
  return json::parse(R"({
    "command": "crossing", "seed": 5, "samples": 4000,
    "input": {"kind": "qpsk", "n": 2},
    "gaussian": {"diag": [1.0, 1.0]},
    "path": {"kind": "snr", "snr_max": 20},
    "grid": {"kind": "geometric", "from": 0.05, "to": 20, "points": 12}
  })");
}

}  // namespace

TEST(CliRunner, CrossingWritesCsvAndConsistentVerdict) {
  const fs::path out = fresh_dir("crossing");
  ASSERT_EQ(run_cli("--config " + (kScenarios / "bpsk2_crossing.json").string() + " --out " + out.string() + " --format csv"), 0);
  const json res = json::parse(slurp(out / "results.json"));
  EXPECT_EQ(res.at("results").at("verdict"), "consistent");
  EXPECT_EQ(res.at("seed"), 7);
  const std::string csv = slurp(out / "diag_1.csv");
  std::istringstream is(csv);
  std::string first, header;
  std::getline(is, first);
  std::getline(is, header);
  EXPECT_EQ(first, "# config_hash=" + res.at("config_hash").get<std::string>() + " seed=7");
  EXPECT_EQ(header, "t,value,err,sign");
  EXPECT_TRUE(fs::exists(out / "diag_2.csv"));
  EXPECT_TRUE(fs::exists(out / "d_sum.csv"));
}

TEST(CliRunner, GaussianMiEstimatesAgree) {
  const fs::path out = fresh_dir("mi");
  ASSERT_EQ(run_cli("--config " + (kScenarios / "gaussian_mi.json").string() + " --out " + out.string()), 0);
  const json res = json::parse(slurp(out / "results.json")).at("results");
  EXPECT_TRUE(res.at("agree").get<bool>());
  const auto& e = res.at("estimates");
  EXPECT_TRUE(e.contains("closed_form"));
  EXPECT_TRUE(e.contains("direct"));
  EXPECT_TRUE(e.contains("immse_integral"));
  EXPECT_FALSE(fs::exists(out / "mi.csv"));
}

TEST(CliRunner, RepeatedRunsAreByteIdenticalAcrossThreadCounts) {
  const fs::path dir = fresh_dir("determinism");
  const fs::path cfg = write_config(dir, small_crossing());
  const fs::path a = dir / "a", b = dir / "b", c = dir / "c";
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + a.string() + " --format csv --threads 1"), 0);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + b.string() + " --format csv --threads 1"), 0);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + c.string() + " --format csv --threads 3"), 0);
  const auto fa = read_all(a);
  EXPECT_GT(fa.size(), 1u);
  EXPECT_EQ(fa, read_all(b));
  EXPECT_EQ(fa, read_all(c));
}

TEST(CliRunner, ConfigErrorsExitWithOne) {
  const fs::path dir = fresh_dir("errors");
  json no_seed = small_crossing();
  no_seed.erase("seed");
  EXPECT_EQ(run_cli("--config " + write_config(dir, no_seed).string() + " --out " + (dir / "o").string()), 1);
  json bad_cmd = small_crossing();
  bad_cmd["command"] = "nonsense";
  EXPECT_EQ(run_cli("--config " + write_config(dir, bad_cmd).string() + " --out " + (dir / "o").string()), 1);
  EXPECT_EQ(run_cli("--config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("--out " + (dir / "o").string()), 1);
  EXPECT_EQ(run_cli("--config " + write_config(dir, small_crossing()).string() + " --format xml"), 1);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(RunScenario, ConfigHashAndStatuses) {
  const json cfg = small_crossing();
  const auto out = run_scenario(cfg, 1, OutputFormat::json);
  ASSERT_EQ(out.status, exit_code::ok);
  ASSERT_EQ(out.files.size(), 1u);
  const json doc = json::parse(out.files.at("results.json"));
  EXPECT_EQ(doc.at("config_hash").get<std::string>(), config_hash(cfg));
  // Key order in the source text does not change the hash.
  EXPECT_EQ(config_hash(json::parse(R"({"b": 1, "a": 2})")), config_hash(json::parse(R"({"a": 2, "b": 1})")));

  json bad = cfg;
  bad["input"] = json{{"kind", "qpsk"}, {"n", 3}};
  EXPECT_EQ(run_scenario(bad, 1, OutputFormat::json).status, exit_code::config_error);
  EXPECT_EQ(run_scenario(json::array(), 1, OutputFormat::json).status, exit_code::config_error);
}

TEST(RunScenario, InputJsonRoundTrip) {
  const auto x = seeded_random_mixture(2, 3, 4);
  const auto back = mixture_from_json(to_json(x));
  EXPECT_EQ(back.size(), x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_DOUBLE_EQ(back[k].weight, x[k].weight);
    EXPECT_TRUE(back[k].mean.isApprox(x[k].mean));
    EXPECT_TRUE(back[k].cov.matrix().isApprox(x[k].cov.matrix()));
  }
  const ConditionalInput cond({{0.25, bpsk()}, {0.75, bpsk()}});
  const json jc = to_json(cond);
  ASSERT_TRUE(jc.contains("u"));
  EXPECT_DOUBLE_EQ(conditional_from_json(jc)[1].q, 0.75);
}

class ScenarioFiles : public testing::TestWithParam<std::string> {};

TEST_P(ScenarioFiles, RunsCleanly) {
  const fs::path out = fresh_dir("scenario_" + GetParam());
  EXPECT_EQ(run_cli("--config " + (kScenarios / (GetParam() + ".json")).string() + " --out " + out.string() + " --format csv"), 0);
  EXPECT_TRUE(fs::exists(out / "results.json"));
}

INSTANTIATE_TEST_SUITE_P(Shipped, ScenarioFiles,
                         testing::Values("bc_region_covariance", "bc_witness_bpsk", "conditioned_match", "epi", "fisher_bpsk", "gaussian_mi",
                                         "mixture_eig_crossing", "weighted_crossing"));
