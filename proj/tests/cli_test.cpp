#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "gwil/env_suite.hpp"
#include "gwil/io.hpp"

namespace gwil {
namespace {

namespace fs = std::filesystem;
using io::Json;

const fs::path kFixtures = GWIL_FIXTURE_DIR;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gwil");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

double printed_value(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string k;
  std::string v;
  while (in >> k >> v) {
    if (k == key) return std::stod(v);
  }
  ADD_FAILURE() << key << " not printed in: " << out;
  return 0.0;
}

// The CSV with the wall-clock column blanked.
std::string without_wall_ms(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gwil_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }
  fs::path dir_;
};

TEST_F(CliTest, GwIdenticalFilesIsZero) {
  const auto f = (kFixtures / "maze5_expert.json").string();
  const CliRun r = cli({"gw", f, f, "--out", path("gw")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(printed_value(r.out, "gw_sq"), 1e-8);
}

TEST_F(CliTest, GwTwoAtomFixture) {
  const CliRun r = cli({"gw", (kFixtures / "two_atom_d1.json").string(),
                     (kFixtures / "two_atom_d3.json").string(), "--out", path("gw")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(printed_value(r.out, "gw_sq"), 2.0, 1e-9);
  const Coupling c = io::coupling_from_json(io::read_json(path("gw/coupling.json")));
  EXPECT_NEAR(c.u(0, 0) * c.u(0, 1), 0.0, 1e-12);
  EXPECT_TRUE(fs::exists(path("gw/objective_history.csv")));
  EXPECT_TRUE(fs::exists(path("gw/manifest.json")));
}

TEST_F(CliTest, GwEntropic) {
  const CliRun r = cli({"gw", (kFixtures / "two_atom_d1.json").string(),
                     (kFixtures / "two_atom_d3.json").string(), "--epsilon", "0.01", "--out", path("gw")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(printed_value(r.out, "gw_sq"), 2.0, 0.05);
}

TEST_F(CliTest, GwInputErrors) {
  const auto good = (kFixtures / "two_atom_d1.json").string();
  CliRun r = cli({"gw", path("missing.json"), good, "--out", path("gw")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.json"), std::string::npos);
  io::write_file(path("bad.json"), "{not json");
  EXPECT_EQ(cli({"gw", path("bad.json"), good, "--out", path("gw")}).code, 2);
  EXPECT_EQ(cli({"gw", good}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, MakeEnvFromAscii) {
  const CliRun r = cli({"make-env", (kFixtures / "maze5.txt").string(), "--out", path("env")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = io::mdp_from_json(io::read_json(path("env/mdp.json")));
  EXPECT_EQ(m.num_states, 25 - 7);
  EXPECT_FALSE(fs::exists(path("env/reflection.json")));
}

TEST_F(CliTest, MakeEnvReflectSymmetric) {
  const CliRun r = cli({"make-env", (kFixtures / "symmetric.txt").string(), "--reflect", "--out", path("env")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json refl = io::read_json(path("env/reflection.json"));
  EXPECT_TRUE(refl["phi_involution"].get<bool>());
  EXPECT_TRUE(refl["conjugation_exact"].get<bool>());
  const auto phi = refl["phi"].get<std::vector<int>>();
  for (std::size_t i = 0; i < phi.size(); ++i) EXPECT_EQ(phi[static_cast<std::size_t>(phi[i])], static_cast<int>(i));
}

TEST_F(CliTest, MakeEnvJsonSpecAndErrors) {
  CliRun r = cli({"make-env", (kFixtures / "maze5_spec.json").string(), "--sparse", "--out", path("env")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(io::maze_from_json(io::read_json(path("env/maze.json"))).sparse);
  EXPECT_EQ(cli({"make-env", (kFixtures / "disconnected.txt").string(), "--out", path("d")}).code, 3);
  io::write_file(path("ragged.txt"), "S..\n.G\n");
  EXPECT_EQ(cli({"make-env", path("ragged.txt"), "--out", path("r")}).code, 2);
}

TEST_F(CliTest, OracleCorridor) {
  const CliRun r = cli({"oracle", (kFixtures / "corridor.txt").string(), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tr = io::trajectory_from_json(io::read_json(path("o/expert_trajectory.json")));
  EXPECT_EQ(tr.size(), 1u);
  EXPECT_EQ(printed_value(r.out, "trajectory_return"), printed_value(r.out, "optimal_return"));
}

TEST_F(CliTest, OracleChainPushesRight) {
  io::write_json(path("chain.json"), io::to_json(build_chain_env(5, 3)));
  const CliRun r = cli({"oracle", path("chain.json"), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json o = io::read_json(path("o/oracle.json"));
  const auto acts = o["greedy_actions"].get<std::vector<int>>();
  for (int s = 0; s < 4; ++s) EXPECT_EQ(acts[static_cast<std::size_t>(s)], 2);
  const auto pol = io::policy_from_json(io::read_json(path("o/policy.json")));
  EXPECT_EQ(pol.pi(0, 2), 1.0);
}

TEST_F(CliTest, OracleMazeReturnsMatch) {
  const CliRun r = cli({"oracle", (kFixtures / "maze5.txt").string(), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(printed_value(r.out, "trajectory_return"), printed_value(r.out, "optimal_return"), 1e-12);
  EXPECT_EQ(printed_value(r.out, "trajectory_length"), 8.0);
}

TEST_F(CliTest, ImitateIsDeterministicAndExports) {
  ASSERT_EQ(cli({"make-env", (kFixtures / "maze5.txt").string(), "--reflect", "--out", path("env")}).code, 0);
  const auto expert = (kFixtures / "maze5_expert.json").string();
  const std::vector<std::string> base{"imitate", path("env/reflected_mdp.json"), expert,
                                      "--episodes", "30", "--seed", "1", "--seeds", "3"};
  auto a_args = base;
  a_args.insert(a_args.end(), {"--out", path("a")});
  auto b_args = base;
  b_args.insert(b_args.end(), {"--out", path("b")});
  const CliRun a = cli(a_args);
  const CliRun b = cli(b_args);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  for (int seed = 1; seed <= 3; ++seed) {
    const std::string sub = "seed_" + std::to_string(seed);
    EXPECT_EQ(without_wall_ms(io::read_file(path("a/" + sub + "/train_log.csv"))),
              without_wall_ms(io::read_file(path("b/" + sub + "/train_log.csv"))));
    EXPECT_EQ(io::read_file(path("a/" + sub + "/policy.json")), io::read_file(path("b/" + sub + "/policy.json")));
  }
  std::size_t manifests = 0;
  for (const auto& e : fs::recursive_directory_iterator(path("a"))) {
    manifests += e.path().filename() == "manifest.json";
  }
  EXPECT_EQ(manifests, 1u);

  ASSERT_EQ(cli({"export", path("a")}).code, 0);
  const std::string first = io::read_file(path("a/learning_curves.csv"));
  ASSERT_EQ(cli({"export", path("a"), "--format", "csv"}).code, 0);
  EXPECT_EQ(io::read_file(path("a/learning_curves.csv")), first);
  ASSERT_EQ(cli({"export", path("b"), "--out", path("b.csv")}).code, 0);
  EXPECT_EQ(io::read_file(path("b.csv")), first);
  const std::string header = first.substr(0, first.find('\n'));
  EXPECT_NE(header.find("seed3_gw_sq"), std::string::npos);
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 31);
}

TEST_F(CliTest, ImitateWassersteinBaseline) {
  ASSERT_EQ(cli({"oracle", (kFixtures / "maze5.txt").string(), "--out", path("o")}).code, 0);
  const CliRun r = cli({"imitate", (kFixtures / "maze5.txt").string(), path("o/expert_trajectory.json"),
                     (kFixtures / "imitate_config.json").string(), "--baseline", "wasserstein",
                     "--episodes", "200", "--out", path("w")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(printed_value(r.out, "success_rate"), 1.0);
  const auto log = io::train_log_from_csv(io::read_file(path("w/seed_0/train_log.csv")));
  EXPECT_EQ(log.size(), 200u);
  EXPECT_EQ(cli({"imitate", (kFixtures / "maze5.txt").string(), path("o/expert_trajectory.json"),
                 "--baseline", "sinkhorn", "--out", path("x")}).code, 2);
}

TEST_F(CliTest, ImitateAbortsWhenEveryEpisodeFails) {
  // Features this large overflow the pairwise distances of every agent episode.
  auto m = build_maze(builtin_maze("maze5"));
  *m.state_features *= 1e200;
  io::write_json(path("huge.json"), io::to_json(m));
  const CliRun r = cli({"imitate", path("huge.json"), (kFixtures / "maze5_expert.json").string(),
                        "--out", path("run")});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST_F(CliTest, ImitateBadConfig) {
  io::write_json(path("cfg.json"), Json{{"episodes", 0}});
  EXPECT_EQ(cli({"imitate", (kFixtures / "maze5.txt").string(), (kFixtures / "maze5_expert.json").string(),
                 path("cfg.json"), "--out", path("run")}).code, 2);
}

TEST_F(CliTest, ExportErrors) {
  EXPECT_EQ(cli({"export", path("")}).code, 2);
  EXPECT_EQ(cli({"export", path("nowhere")}).code, 2);
  ASSERT_EQ(cli({"gw", (kFixtures / "two_atom_d1.json").string(), (kFixtures / "two_atom_d1.json").string(),
                 "--out", path("gw")}).code, 0);
  EXPECT_EQ(cli({"export", path("gw")}).code, 2);
}

TEST_F(CliTest, JsonArtifactsRoundTrip) {
  ASSERT_EQ(cli({"make-env", (kFixtures / "maze5.txt").string(), "--reflect", "--out", path("env")}).code, 0);
  for (const char* f : {"env/mdp.json", "env/reflected_mdp.json"}) {
    const Json j = io::read_json(path(f));
    EXPECT_EQ(io::to_json(io::mdp_from_json(j)), j) << f;
  }
  const Json spec = io::read_json(path("env/maze.json"));
  EXPECT_EQ(io::to_json(io::maze_from_json(spec)), spec);
  ASSERT_EQ(cli({"oracle", (kFixtures / "maze5.txt").string(), "--out", path("o")}).code, 0);
  const Json traj = io::read_json(path("o/expert_trajectory.json"));
  EXPECT_EQ(io::to_json(io::trajectory_from_json(traj)), traj);
  const Json pol = io::read_json(path("o/policy.json"));
  EXPECT_EQ(io::to_json(io::policy_from_json(pol)), pol);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace gwil
