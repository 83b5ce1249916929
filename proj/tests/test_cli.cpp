#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "dwr_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(DWR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(kDir);
  const fs::path p = kDir / name;
  std::ofstream(p) << body;
  return p;
}

std::string common() {
  return "reference_depth = 4\ntiming = false\noutput_dir = " + (kDir / "out").string() + "\ncache_dir = " +
         (kDir / "cache").string() + "\n";
}

}  // namespace

TEST(Cli, RunSucceeds) {
  const auto cfg = write_config("ok.cfg", common() + "max_levels = 2\n");
  EXPECT_EQ(run("run " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(kDir / "out" / "results.csv"));
  EXPECT_TRUE(fs::exists(kDir / "out" / "mesh_L1.svg"));
}

TEST(Cli, ReferenceSucceeds) {
  const auto cfg = write_config("ref.cfg", common());
  EXPECT_EQ(run("reference " + cfg.string()), 0);
}

TEST(Cli, ConfigErrorsExitWithOne) {
  EXPECT_EQ(run("run " + write_config("bad.cfg", "flavour = vanilla\n").string()), 1);
  EXPECT_EQ(run("run " + (kDir / "missing.cfg").string()), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("--backend gpu run " + write_config("ok2.cfg", common()).string()), 1);
}

TEST(Cli, BackendAndSeedOverrides) {
  const auto cfg = write_config("nn.cfg", common() + "max_levels = 1\nnn.layers = 2,4,1\nnn.max_epochs = 5\n"
                                                     "nn.collocation = uniform:50\n");
  EXPECT_EQ(run("--backend nn --seed 3 run " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(kDir / "out" / "loss_L0.csv"));
}

TEST(Cli, SolverFailureExitsWithTwo) {
  // A single cell straddles the goal region, which the regional goal rejects at run time.
  const auto cfg = write_config("fail.cfg", common() + "goal = regional\ninitial_cells = 1\n");
  EXPECT_EQ(run("run " + cfg.string()), 2);
}
