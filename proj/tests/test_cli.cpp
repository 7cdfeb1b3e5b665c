// Drives the command-line binary end to end on a small synthetic world.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "polereloc/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(POLERELOC_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string value_of(const std::string& text, const std::string& key) {
  for (const auto& line : lines_of(text)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

// One synthetic world shared by every test in the suite.
class Cli : public ::testing::Test {
 protected:
  static inline fs::path root_;

  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("polereloc_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    write(root_ / "world.cfg",
          "scene.area_x = 160\nscene.area_y = 160\nscene.n_clusters = 110\nscene.seed = 5\n"
          "run.loop_width = 100\nrun.loop_height = 100\nrun.distance = 30\n"
          "pipeline.reloc_period = 1.0\n"
          "eval.max_distance = 20\n");
    write(root_ / "drift.cfg",
          "scene.area_x = 160\nscene.area_y = 160\nscene.n_clusters = 110\nscene.seed = 5\n"
          "run.loop_width = 100\nrun.loop_height = 100\nrun.distance = 30\nrun.frame_noise_sigma = 0.02\n"
          "drift.translational_drift = 0.02\ndrift.rotational_drift = 0.1\ndrift.noise_sigma = 0.01\n");
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
  static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }
};

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(cli("").code, 64);
  EXPECT_EQ(cli("--bogus").code, 64);
  EXPECT_EQ(cli("simulate --out " + q(root_ / "x") + " --bogus").code, 64);
  EXPECT_EQ(cli("evaluate --mode nonsense").code, 64);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, ErrorCategories) {
  EXPECT_EQ(cli("build-map --dataset " + q(root_ / "missing") + " --out " + q(root_ / "m.map")).code, 74);
  write(root_ / "bad.cfg", "association.radius = 3\n");
  EXPECT_EQ(cli("simulate --scene " + q(root_ / "bad.cfg") + " --out " + q(root_ / "bad")).code, 78);
  write(root_ / "tight.cfg", "scene.area_x = 10\nscene.area_y = 10\nscene.n_clusters = 50\n");
  EXPECT_EQ(cli("simulate --scene " + q(root_ / "tight.cfg") + " --out " + q(root_ / "tight")).code, 78);
  write(root_ / "garbage.map", "polemap 1\nlabel pole 80\n");
  EXPECT_EQ(cli("relocalize --map " + q(root_ / "garbage.map") + " --dataset " + q(root_ / "missing") + " --frame 0")
                .code,
            65);
}

TEST_F(Cli, ZeroDriftEndToEnd) {
  const fs::path data = root_ / "clean";
  const CliRun sim = cli("simulate --scene " + q(root_ / "world.cfg") + " --out " + q(data));
  ASSERT_EQ(sim.code, 0) << sim.out;
  EXPECT_EQ(value_of(sim.out, "frames"), "31");

  const CliRun built = cli("build-map --dataset " + q(data) + " --out " + q(root_ / "clean.map"));
  ASSERT_EQ(built.code, 0);
  EXPECT_FALSE(value_of(built.out, "clusters").empty());
  EXPECT_EQ(value_of(built.out, "trajectory_length"), "30.000");

  const CliRun loc = cli("localize --map " + q(root_ / "clean.map") + " --dataset " + q(data) + " --out " +
                      q(root_ / "clean.tum") + " --config " + q(root_ / "world.cfg"));
  ASSERT_EQ(loc.code, 0);
  EXPECT_EQ(value_of(loc.out, "rmse"), "0.000000");
  EXPECT_EQ(value_of(loc.out, "reloc_attempts"), "4");
  const auto traj = polereloc::load_poses(root_ / "clean.tum");
  const auto truth = polereloc::load_poses(data / "poses.txt");
  ASSERT_EQ(traj.size(), truth.size());
  for (std::size_t k = 0; k < traj.size(); ++k) EXPECT_LT((traj[k].translation - truth[k].translation).norm(), 1e-6);

  const CliRun reloc = cli("relocalize --map " + q(data / "scene.map") + " --dataset " + q(data) + " --frame 10");
  ASSERT_EQ(reloc.code, 0) << reloc.out;
  const auto record = nlohmann::json::parse(reloc.out);
  EXPECT_TRUE(record["success"].get<bool>());
  EXPECT_EQ(record["frame"].get<int>(), 10);
  const Eigen::Vector3d t(record["translation"][0].get<double>(), record["translation"][1].get<double>(),
                          record["translation"][2].get<double>());
  EXPECT_LT((t - truth[10].translation).norm(), 0.01);
}

TEST_F(Cli, DriftRunAndLocReport) {
  const fs::path data = root_ / "drift";
  ASSERT_EQ(cli("simulate --scene " + q(root_ / "drift.cfg") + " --out " + q(data)).code, 0);
  const CliRun report = cli("evaluate --mode loc --dataset " + q(data) + " --map " + q(data / "scene.map"));
  ASSERT_EQ(report.code, 0);
  const auto rows = lines_of(report.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "trajectory,frames,rmse_m");
  const double pipeline = std::stod(rows[1].substr(rows[1].rfind(',') + 1));
  const double odometry = std::stod(rows[2].substr(rows[2].rfind(',') + 1));
  EXPECT_LT(pipeline, odometry);

  const CliRun odo = cli("localize --no-reloc --map " + q(data / "scene.map") + " --dataset " + q(data) + " --out " +
                      q(root_ / "odo.tum"));
  ASSERT_EQ(odo.code, 0);
  EXPECT_EQ(value_of(odo.out, "fixes_applied"), "0");
  const CliRun scored = cli("evaluate --mode loc --dataset " + q(data) + " --trajectory " + q(root_ / "odo.tum"));
  ASSERT_EQ(scored.code, 0);
  const std::string file_row = lines_of(scored.out).at(1);
  EXPECT_EQ(file_row.substr(file_row.find(',')), rows[2].substr(rows[2].find(',')));
}

TEST_F(Cli, RelocReportHasOneRowPerRetention) {
  const CliRun r =
      cli("evaluate --mode reloc --retention 1.0,0.8,0.6 --trials 2 --config " + q(root_ / "world.cfg"));
  ASSERT_EQ(r.code, 0);
  const auto rows = lines_of(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "retention,trials,successes,success_rate,p50_m,p90_m,p95_m,p99_m,rmse_m,density_per_m");
  EXPECT_EQ(rows[1].substr(0, 7), "1.00,2,");
  EXPECT_EQ(rows[2].substr(0, 7), "0.80,2,");
  EXPECT_EQ(rows[3].substr(0, 7), "0.60,2,");
  EXPECT_EQ(cli("evaluate --mode reloc --retention 1.0,x --trials 2").code, 64);
}

TEST_F(Cli, OutputsAreByteIdentical) {
  const fs::path a = root_ / "rep_a", b = root_ / "rep_b";
  ASSERT_EQ(cli("simulate --scene " + q(root_ / "drift.cfg") + " --out " + q(a)).code, 0);
  ASSERT_EQ(cli("simulate --scene " + q(root_ / "drift.cfg") + " --out " + q(b)).code, 0);
  for (const char* rel : {"poses.txt", "odometry.txt", "scene.map", "scene.map.pts", "velodyne/000007.bin",
                          "labels/000007.label"}) {
    EXPECT_EQ(polereloc::read_file(a / rel), polereloc::read_file(b / rel)) << rel;
  }
  const CliRun m1 = cli("build-map --dataset " + q(a) + " --out " + q(root_ / "rep1.map"));
  const CliRun m2 = cli("build-map --dataset " + q(b) + " --out " + q(root_ / "rep2.map"));
  EXPECT_EQ(m1.out, m2.out);
  EXPECT_EQ(polereloc::read_file(root_ / "rep1.map"), polereloc::read_file(root_ / "rep2.map"));
}
