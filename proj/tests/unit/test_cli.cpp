#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "volt/checkpoint.hpp"

namespace {

namespace fs = std::filesystem;

const fs::path kRoot = fs::temp_directory_path() / "volt_cli_test";

int run(const std::string& args, const std::string& log_name = "last.log") {
  const std::string cmd = std::string(VOLT_CLI_PATH) + " " + args + " > " +
                          (kRoot / log_name).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p, std::string* header = nullptr) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  if (header) *header = line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

std::map<std::string, std::string> read_kv(const fs::path& p) {
  std::map<std::string, std::string> out;
  std::ifstream is(p);
  std::string k, eq, v;
  while (is >> k >> eq >> v) out[k] = v;
  return out;
}

const std::string kData = (kRoot / "data").string();
const std::string kRun = (kRoot / "run").string();
const std::string kMicro = "--preset micro --objects 12 --seed 5";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(run("gen " + kMicro + " --out " + kData), 0);
    ASSERT_EQ(run("train " + kMicro + " --steps 30 --lr 0.01 --data " + kData + " --out " + kRun), 0);
  }
};

TEST_F(Cli, GenRefusesExistingDatasetUnlessForced) {
  const std::string before = slurp(fs::path(kData) / "manifest.txt");
  EXPECT_EQ(run("gen " + kMicro + " --out " + kData), 2);
  EXPECT_EQ(run("gen " + kMicro + " --out " + kData + " --force"), 0);
  EXPECT_EQ(slurp(fs::path(kData) / "manifest.txt"), before);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("train --no-such-flag 1"), 2);
  EXPECT_EQ(run("train " + kMicro + " --lr -1 --data " + kData), 2);
  EXPECT_EQ(run("train " + kMicro + " --variant fancy --data " + kData), 2);
  EXPECT_EQ(run("train " + kMicro + " --config " + (kRoot / "missing.cfg").string()), 2);
  EXPECT_EQ(run("train " + kMicro + " --data " + (kRoot / "nowhere").string() + " --out " +
                (kRoot / "x").string()),
            3);
  EXPECT_EQ(run("eval " + kMicro + " --data " + kData + " --checkpoint " +
                (kRoot / "none.vltc").string() + " --out " + (kRoot / "x").string()),
            3);
  EXPECT_EQ(run("train " + kMicro + " --lr 1e300 --steps 3 --data " + kData + " --out " +
                (kRoot / "blowup").string()),
            4);
  EXPECT_EQ(run("grad-check"), 0);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  {
    std::ofstream cfg(kRoot / "echo.cfg");
    cfg << "preset = micro\nlr = 0.5\nseed = 11\n";
  }
  ASSERT_EQ(run("grad-check --config " + (kRoot / "echo.cfg").string() + " --seed 9", "echo.log"), 0);
  const std::string log = slurp(kRoot / "echo.log");
  EXPECT_NE(log.find("lr = 0.5\n"), std::string::npos);
  EXPECT_NE(log.find("seed = 9\n"), std::string::npos);
  EXPECT_NE(log.find("l_enc = 2\n"), std::string::npos);
}

TEST_F(Cli, TrainWritesLogAndIsDeterministic) {
  const std::string again = (kRoot / "run2").string();
  ASSERT_EQ(run("train " + kMicro + " --steps 30 --lr 0.01 --data " + kData + " --out " + again), 0);
  std::string header;
  const auto a = read_csv(fs::path(kRun) / "train_log.csv", &header);
  const auto b = read_csv(fs::path(again) / "train_log.csv");
  EXPECT_EQ(header, "epoch,step,loss,train_iou,wallclock_s");
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a.back()[1], "30");
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), 5u);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(a[i][c], b[i][c]) << "row " << i;
  }
  const volt::Checkpoint ca = volt::load_checkpoint(kRun + "/checkpoint.vltc");
  const volt::Checkpoint cb = volt::load_checkpoint(again + "/checkpoint.vltc");
  for (const auto& e : ca.model.params().entries()) {
    EXPECT_EQ(cb.model.params().get(e.name), e.value) << e.name;
  }
  EXPECT_EQ(slurp(fs::path(kRun) / "train_summary.txt"), slurp(fs::path(again) / "train_summary.txt"));
}

TEST_F(Cli, EvalReproducesTrainIou) {
  const std::string out = (kRoot / "eval_train").string();
  ASSERT_EQ(run("eval " + kMicro + " --split train --eval_views 2 --thresholds 0.5 --data " + kData +
                " --checkpoint " + kRun + "/checkpoint.vltc --out " + out),
            0);
  const double train_iou = std::stod(read_kv(fs::path(kRun) / "train_summary.txt").at("final_train_iou"));
  std::string header;
  const auto sweep = read_csv(fs::path(out) / "threshold_sweep.csv", &header);
  EXPECT_EQ(header, "views,threshold,mean_iou");
  ASSERT_EQ(sweep.size(), 1u);
  EXPECT_NEAR(std::stod(sweep[0][2]), train_iou, 1e-9);
}

TEST_F(Cli, EvalRowsAndShuffleInvariance) {
  const std::string a = (kRoot / "eval_a").string(), b = (kRoot / "eval_b").string();
  const std::string common = "eval " + kMicro + " --split all --eval_views 1,2 --data " + kData +
                             " --checkpoint " + kRun + "/checkpoint.vltc";
  ASSERT_EQ(run(common + " --out " + a), 0);
  ASSERT_EQ(run(common + " --shuffle_views 77 --out " + b), 0);
  std::string header;
  const auto ra = read_csv(fs::path(a) / "metrics.csv", &header);
  const auto rb = read_csv(fs::path(b) / "metrics.csv");
  EXPECT_EQ(header, "object_id,views,iou,fscore,precision,recall");
  ASSERT_EQ(ra.size(), 2u * 12u);
  ASSERT_EQ(rb.size(), ra.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ASSERT_EQ(ra[i].size(), 6u);
    EXPECT_EQ(ra[i][0], rb[i][0]);
    EXPECT_NEAR(std::stod(ra[i][2]), std::stod(rb[i][2]), 1e-9);
    EXPECT_NEAR(std::stod(ra[i][3]), std::stod(rb[i][3]), 1e-9);
    const double iou = std::stod(ra[i][2]);
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
  }
}

TEST_F(Cli, DiagnoseMatchesExportedAttention) {
  const std::string out = (kRoot / "diag").string();
  ASSERT_EQ(run("diagnose " + kMicro + " --split all --diag_export 12 --data " + kData +
                " --checkpoint " + kRun + "/checkpoint.vltc --out " + out),
            0);
  std::string header;
  const auto attn = read_csv(fs::path(out) / "attention.csv", &header);
  EXPECT_EQ(header, "layer,object_id,row,col,score");
  std::map<std::pair<std::string, std::string>, volt::Tensor> mats;
  for (const auto& r : attn) {
    auto [it, fresh] = mats.try_emplace({r[0], r[1]}, volt::Tensor({2, 2}));
    it->second(std::stoul(r[2]), std::stoul(r[3])) = std::stod(r[4]);
  }
  const auto div = read_csv(fs::path(out) / "divergence.csv", &header);
  EXPECT_EQ(header, "layer,object_id,D");
  ASSERT_EQ(div.size(), 2u * 12u);
  for (const auto& r : div) {
    const auto it = mats.find({r[0], r[1]});
    ASSERT_NE(it, mats.end());
    EXPECT_NEAR(std::stod(r[2]), volt::oracle::view_divergence(it->second), 1e-9);
  }
  const auto kde = read_csv(fs::path(out) / "kde.csv", &header);
  EXPECT_EQ(header, "layer,D_grid,density");
  EXPECT_EQ(kde.size(), 2u * 201u);
}

}  // namespace
