#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "commands.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "netboot_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(NETBOOT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir(const std::string& name) { return (kRoot / name).string(); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(run("--seed 3 --out " + dir("gen") + " generate --preset sbm2 --n 60"), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
};

}  // namespace

TEST(BlockMatrix, ParsesRowsAndRejectsRagged) {
  const auto B = netboot::cli::parse_block_matrix("0.5,0.2;0.2,0.5");
  EXPECT_EQ(B.rows(), 2);
  EXPECT_EQ(B(0, 1), 0.2);
  EXPECT_THROW(netboot::cli::parse_block_matrix("0.5,0.2;0.2"), netboot::InvalidArgument);
  EXPECT_THROW(netboot::cli::parse_block_matrix("0.5,x;0.2,0.5"), netboot::InvalidArgument);
}

TEST(Presets, ShapesAndRanks) {
  netboot::cli::ModelOptions o;
  EXPECT_EQ(netboot::cli::model_n(netboot::cli::build_model(o, 1)), 300u);
  EXPECT_EQ(netboot::cli::model_rank(netboot::cli::build_model(o, 1)), 3);
  o.preset = "sbm4";
  EXPECT_EQ(netboot::cli::model_n(netboot::cli::build_model(o, 1)), 1000u);
  o.preset = "nope";
  EXPECT_THROW(netboot::cli::build_model(o, 1), netboot::InvalidArgument);
}

TEST_F(Cli, GenerateIsReproducible) {
  ASSERT_EQ(run("--seed 3 --out " + dir("gen2") + " generate --preset sbm2 --n 60"), 0);
  for (const char* f : {"adjacency.mtx", "adjacency.tsv", "probabilities.csv", "communities.tsv", "manifest.json"})
    EXPECT_EQ(slurp(kRoot / "gen" / f), slurp(kRoot / "gen2" / f)) << f;
  ASSERT_EQ(run("--seed 4 --out " + dir("gen3") + " generate --preset sbm2 --n 60"), 0);
  EXPECT_NE(slurp(kRoot / "gen" / "adjacency.mtx"), slurp(kRoot / "gen3" / "adjacency.mtx"));
}

TEST_F(Cli, ValidateReportDoesNotDependOnWorkers) {
  const std::string args = " validate --preset sbm2 --n 60 --d 2 -M 12 -R 40";
  ASSERT_EQ(run("--workers 1 --out " + dir("v1") + args), 0);
  ASSERT_EQ(run("--workers 3 --out " + dir("v3") + args), 0);
  EXPECT_EQ(slurp(kRoot / "v1" / "report.json"), slurp(kRoot / "v3" / "report.json"));
  const auto report = nlohmann::json::parse(slurp(kRoot / "v1" / "report.json"));
  EXPECT_EQ(report["M"], 12);
  EXPECT_EQ(report["p_values"].size(), 12u);
  EXPECT_TRUE(fs::exists(kRoot / "v1" / "qq.svg"));
  EXPECT_TRUE(fs::exists(kRoot / "v1" / "qq.csv"));
}

TEST_F(Cli, ReplayReproducesTheReport) {
  const std::string args = " validate --preset sbm2 --n 60 --method eswr -M 6 -R 30 --test-d 2";
  ASSERT_EQ(run("--seed 8 --out " + dir("orig") + args), 0);
  ASSERT_EQ(run("--out " + dir("replayed") + " replay --manifest " + dir("orig") + "/manifest.json"), 0);
  EXPECT_EQ(slurp(kRoot / "orig" / "report.json"), slurp(kRoot / "replayed" / "report.json"));
  EXPECT_EQ(slurp(kRoot / "orig" / "manifest.json"), slurp(kRoot / "replayed" / "manifest.json"));
}

TEST_F(Cli, ConfigFileSections) {
  std::ofstream(kRoot / "run.toml") << "seed = 5\n[validate]\npreset = \"sbm2\"\nn = 50\nd = 2\ntrials = 5\npermutations = 20\n";
  ASSERT_EQ(run("--config " + dir("run.toml") + " --out " + dir("cfg") + " validate"), 0);
  const auto report = nlohmann::json::parse(slurp(kRoot / "cfg" / "report.json"));
  EXPECT_EQ(report["seed"], 5);
  EXPECT_EQ(report["M"], 5);
}

TEST_F(Cli, BootstrapEmbedAndKscanOutputs) {
  const std::string graph = dir("gen") + "/adjacency.mtx";
  ASSERT_EQ(run("--out " + dir("boot") + " bootstrap --input " + graph + " -B 2 --d 2 --phat-format mtx"), 0);
  EXPECT_TRUE(fs::exists(kRoot / "boot" / "phat.mtx"));
  EXPECT_TRUE(fs::exists(kRoot / "boot" / "replicates" / "replicate_1.tsv"));
  ASSERT_EQ(run("--out " + dir("emb") + " embed --input " + graph + " --input " + graph + " --method uase --d 2"), 0);
  EXPECT_TRUE(fs::exists(kRoot / "emb" / "embedding.csv"));
  ASSERT_EQ(run("--out " + dir("ks") + " kscan --preset sbm2 --n 40 --d 2 -M 3 -R 10 --ks 3 --ks 10"), 0);
  EXPECT_TRUE(fs::exists(kRoot / "ks" / "kscan.csv"));
  EXPECT_TRUE(fs::exists(kRoot / "ks" / "kscan.svg"));
}

TEST_F(Cli, FuzzinessOutputs) {
  ASSERT_EQ(run("--out " + dir("fz") + " fuzziness --input " + dir("gen") +
                "/adjacency.mtx --d 2 -B 8 --perplexity 10 --iterations 150"),
            0);
  for (const char* f : {"uncertainty.json", "fuzziness_edges.tsv", "layout.csv", "overlay.svg", "score.json"})
    EXPECT_TRUE(fs::exists(kRoot / "fz" / f)) << f;
}

TEST_F(Cli, IngestWritesNodeTable) {
  std::ofstream(kRoot / "contacts.txt") << "20 1 2 A B\n40 2 3 B B\n100 1 3 A B\n";
  ASSERT_EQ(run("--out " + dir("ing") + " ingest --contacts " + dir("contacts.txt") + " --start 0 --end 60"), 0);
  EXPECT_EQ(slurp(kRoot / "ing" / "nodes.tsv"), "node\tid\tclass\n0\t1\tA\n1\t2\tB\n2\t3\tB\n");
  EXPECT_EQ(netboot::cli::read_node_classes(dir("ing") + "/nodes.tsv", 3), (std::vector<std::string>{"A", "B", "B"}));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("validate --method bogus"), 2);
  EXPECT_EQ(run("--out " + dir("x") + " bootstrap --input " + dir("missing.mtx")), 2);
  EXPECT_EQ(run("validate --no-such-flag"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("--out " + dir("x") + " bootstrap --input " + dir("gen") + "/adjacency.mtx --method identity"), 2);
}
