#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "gwil/env_suite.hpp"
#include "gwil/error.hpp"
#include "gwil/gw_solver.hpp"
#include "gwil/gwil_trainer.hpp"
#include "gwil/io.hpp"
#include "gwil/tabular_mdp.hpp"

namespace gwil::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  Json config = Json::object();
  Json seeds = nullptr;
  std::vector<fs::path> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const fs::path& dir, const Manifest& m, double seconds) {
  Json inputs = Json::array();
  for (const auto& p : m.inputs) {
    inputs.push_back(Json{{"path", p.string()}, {"sha256", sha256_hex(io::read_file(p))}});
  }
  Json out{{"command", m.command},
           {"args", m.args},
           {"config", m.config},
           {"seeds", m.seeds},
           {"inputs", std::move(inputs)},
           {"outputs", m.outputs},
           {"wall_seconds", seconds}};
  io::write_json(dir / "manifest.json", out);
}

struct LoadedEnv {
  TabularMetricMDP mdp;
  std::optional<MazeSpec> maze;
};

// An MDP JSON, a maze spec JSON, or a plain ASCII maze.
LoadedEnv load_env(const fs::path& path, bool sparse) {
  const std::string text = io::read_file(path);
  LoadedEnv env;
  if (Json::accept(text)) {
    const Json j = Json::parse(text);
    if (j.is_object() && j.contains("nS")) {
      if (sparse) throw InvalidInput("--sparse applies to maze specs, not MDP files");
      env.mdp = io::mdp_from_json(j);
      return env;
    }
    env.maze = io::maze_from_json(j);
  } else {
    env.maze = parse_ascii_maze(text);
  }
  if (sparse) env.maze->sparse = true;
  env.mdp = build_maze(*env.maze);
  return env;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int thread_cap() {
  if (const char* v = std::getenv("GWIL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && n >= 1) return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs jobs[0..n) on up to `cap` threads; rethrows the first failure in index order.
void run_parallel(int n, int cap, const std::function<void(int)>& job) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(cap, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct GwArgs {
  std::string x, y, out = "gw_run";
  int restarts = 5;
  std::uint64_t seed = 0;
  std::optional<double> epsilon;
  bool exhaustive = false;
};

int cmd_gw(const GwArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto x = io::load_space(io::read_json(a.x));
  const auto y = io::load_space(io::read_json(a.y));
  GWOptions opts;
  opts.restarts = a.restarts;
  opts.seed = a.seed;
  opts.exhaustive = a.exhaustive;
  opts.northwest_init = true;
  const GWSolveResult res = a.epsilon ? solve_gw_entropic(x, y, *a.epsilon, opts) : solve_gw(x, y, opts);

  const fs::path dir = a.out;
  io::write_json(dir / "coupling.json", io::to_json(res.coupling));
  io::write_file(dir / "objective_history.csv", io::objective_history_csv(res.objective_history));
  io::write_json(dir / "result.json", Json{{"gw_sq", res.gw_sq},
                                           {"restarts_run", res.restarts_run},
                                           {"converged", res.converged}});
  Manifest m;
  m.command = "gw";
  m.args = argv;
  m.config = Json{{"restarts", a.restarts}, {"seed", a.seed}, {"exhaustive", a.exhaustive}};
  m.config["epsilon"] = a.epsilon ? Json(*a.epsilon) : Json(nullptr);
  m.seeds = Json::array({a.seed});
  m.inputs = {a.x, a.y};
  m.outputs = {"coupling.json", "objective_history.csv", "result.json"};
  write_manifest(dir, m, seconds_since(t0));
  out << "gw_sq " << io::format_double(res.gw_sq) << "\n";
  return kOk;
}

struct MakeEnvArgs {
  std::string spec, out = "env_out";
  bool reflect = false;
  bool sparse = false;
};

int cmd_make_env(const MakeEnvArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedEnv env = load_env(a.spec, a.sparse);
  if (!env.maze) throw InvalidInput("make-env needs a maze spec or ASCII maze");
  const fs::path dir = a.out;
  Manifest m;
  m.command = "make-env";
  m.args = argv;
  m.config = Json{{"reflect", a.reflect}, {"sparse", a.sparse}};
  m.inputs = {a.spec};
  io::write_json(dir / "maze.json", io::to_json(*env.maze));
  io::write_json(dir / "mdp.json", io::to_json(env.mdp));
  m.outputs = {"maze.json", "mdp.json"};
  out << "states " << env.mdp.num_states << "\n";
  if (a.reflect) {
    const ReflectedMaze ref = reflect_maze(*env.maze);
    const TabularMetricMDP mirrored = build_maze(ref.spec);
    const TabularMetricMDP conj =
        apply_isometry(env.mdp, ref.phi, ref.psi, ref.state_map, ref.action_map);
    bool involution = true;
    for (std::size_t i = 0; i < ref.phi.size(); ++i) {
      involution = involution && ref.phi[static_cast<std::size_t>(ref.phi[i])] == static_cast<int>(i);
    }
    const bool exact = mirrored.transitions == conj.transitions && mirrored.rewards == conj.rewards &&
                       mirrored.initial == conj.initial && mirrored.state_dist == conj.state_dist &&
                       mirrored.action_dist == conj.action_dist;
    io::write_json(dir / "reflected_maze.json", io::to_json(ref.spec));
    io::write_json(dir / "reflected_mdp.json", io::to_json(mirrored));
    io::write_json(dir / "reflection.json", Json{{"phi", ref.phi},
                                                 {"psi", ref.psi},
                                                 {"phi_involution", involution},
                                                 {"conjugation_exact", exact}});
    m.outputs.insert(m.outputs.end(), {"reflected_maze.json", "reflected_mdp.json", "reflection.json"});
    out << "phi_involution " << (involution ? "true" : "false") << "\n";
  }
  write_manifest(dir, m, seconds_since(t0));
  return kOk;
}

struct OracleArgs {
  std::string env, out = "oracle_out";
  int horizon = 200;
  std::uint64_t seed = 0;
  bool sparse = false;
};

int cmd_oracle(const OracleArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.horizon < 1) throw InvalidInput("--horizon must be at least 1");
  const LoadedEnv env = load_env(a.env, a.sparse);
  const OptimalSolution sol = value_iteration(env.mdp);
  const Trajectory traj = rollout(env.mdp, sol.policy, a.horizon, a.seed);
  double ret = 0.0;
  double disc = 1.0;
  for (const Step& st : traj.steps) {
    ret += disc * st.env_reward;
    disc *= env.mdp.gamma;
  }
  const fs::path dir = a.out;
  io::write_json(dir / "policy.json", io::to_json(sol.policy));
  io::write_json(dir / "expert_trajectory.json", io::to_json(traj));
  io::write_json(dir / "oracle.json", Json{{"optimal_return", sol.expected_return},
                                           {"trajectory_return", ret},
                                           {"trajectory_length", traj.size()},
                                           {"greedy_actions", sol.policy.greedy_actions()},
                                           {"values", io::to_json(sol.values)},
                                           {"bellman_residual", sol.bellman_residual}});
  Manifest m;
  m.command = "oracle";
  m.args = argv;
  m.config = Json{{"horizon", a.horizon}, {"sparse", a.sparse}};
  m.seeds = Json::array({a.seed});
  m.inputs = {a.env};
  m.outputs = {"policy.json", "expert_trajectory.json", "oracle.json"};
  write_manifest(dir, m, seconds_since(t0));
  out << "optimal_return " << io::format_double(sol.expected_return) << "\n";
  out << "trajectory_length " << traj.size() << "\n";
  out << "trajectory_return " << io::format_double(ret) << "\n";
  return kOk;
}

struct ImitateArgs {
  std::string env, expert, config, out = "imitate_out", baseline = "gw";
  std::optional<std::uint64_t> seed;
  int seeds = 1;
  bool sparse = false;
  std::optional<double> beta;
  std::optional<int> horizon, episodes, restarts;
  int eval_rollouts = 1;
};

int cmd_imitate(const ImitateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedEnv env = load_env(a.env, a.sparse);
  const Trajectory expert = io::trajectory_from_json(io::read_json(a.expert));
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : io::train_config_from_json(io::read_json(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.beta) {
    cfg.include_env_reward = true;
    cfg.beta = *a.beta;
  }
  if (a.horizon) cfg.horizon = *a.horizon;
  if (a.episodes) cfg.episodes = *a.episodes;
  if (a.restarts) cfg.gw_opts.restarts = *a.restarts;
  cfg.validate();
  if (a.seeds < 1) throw InvalidInput("--seeds must be at least 1");
  if (a.eval_rollouts < 1) throw InvalidInput("--eval-rollouts must be at least 1");
  const RewardSource source =
      a.baseline == "wasserstein" ? RewardSource::kWasserstein : RewardSource::kGromovWasserstein;

  const fs::path dir = a.out;
  std::vector<TrainResult> results(static_cast<std::size_t>(a.seeds));
  std::vector<EvalResult> evals(static_cast<std::size_t>(a.seeds));
  run_parallel(a.seeds, thread_cap(), [&](int k) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(k);
    results[static_cast<std::size_t>(k)] = train(env.mdp, &expert, c, source);
    evals[static_cast<std::size_t>(k)] =
        evaluate(env.mdp, results[static_cast<std::size_t>(k)].policy, a.eval_rollouts, c.seed, c.horizon);
  });

  Manifest m;
  m.command = "imitate";
  m.args = argv;
  m.config = io::to_json(cfg);
  m.config["baseline"] = a.baseline;
  m.config["sparse"] = a.sparse;
  m.config["eval_rollouts"] = a.eval_rollouts;
  m.seeds = Json::array();
  m.inputs = {a.env, a.expert};
  if (!a.config.empty()) m.inputs.emplace_back(a.config);
  const double optimum = value_iteration(env.mdp).expected_return;
  for (int k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    const auto& res = results[static_cast<std::size_t>(k)];
    const auto& ev = evals[static_cast<std::size_t>(k)];
    const std::string sub = "seed_" + std::to_string(seed);
    io::write_file(dir / sub / "train_log.csv", io::train_log_csv(res.log));
    io::write_json(dir / sub / "policy.json", io::to_json(res.policy));
    Json summary{{"seed", seed},
                 {"success_rate", ev.success_rate},
                 {"mean_return", ev.mean_return},
                 {"std_return", ev.std_return},
                 {"optimal_return", optimum}};
    summary["first_success"] = res.first_success ? Json(*res.first_success) : Json(nullptr);
    summary["final_gw_sq"] = res.log.back().gw_sq;
    io::write_json(dir / sub / "summary.json", summary);
    m.seeds.push_back(seed);
    m.outputs.insert(m.outputs.end(), {sub + "/train_log.csv", sub + "/policy.json", sub + "/summary.json"});
    out << "seed " << seed << " success_rate " << io::format_double(ev.success_rate)
        << " eval_return " << io::format_double(ev.mean_return) << " optimal_return "
        << io::format_double(optimum) << " first_success "
        << (res.first_success ? std::to_string(*res.first_success) : "none") << "\n";
  }
  write_manifest(dir, m, seconds_since(t0));
  return kOk;
}

struct ExportArgs {
  std::string run_dir, format = "csv", out;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const fs::path dir = a.run_dir;
  if (!fs::exists(dir / "manifest.json")) {
    throw InvalidInput("no manifest.json in " + dir.string());
  }
  const Json manifest = io::read_json(dir / "manifest.json");
  if (!manifest.contains("seeds") || !manifest["seeds"].is_array() ||
      manifest.value("command", "") != "imitate") {
    throw InvalidInput("manifest does not describe an imitate run");
  }
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<EpisodeRecord>> logs;
  std::size_t rows = 0;
  for (const Json& s : manifest["seeds"]) {
    seeds.push_back(s.get<std::uint64_t>());
    logs.push_back(io::train_log_from_csv(
        io::read_file(dir / ("seed_" + std::to_string(seeds.back())) / "train_log.csv")));
    rows = std::max(rows, logs.back().size());
  }
  std::string csv = "episode";
  for (auto s : seeds) {
    const std::string p = ",seed" + std::to_string(s) + "_";
    csv += p + "proxy_return" + p + "env_return" + p + "gw_sq" + p + "eval_return" + p + "success";
  }
  csv += "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    csv += std::to_string(r);
    for (const auto& log : logs) {
      if (r < log.size()) {
        const auto& e = log[r];
        csv += "," + io::format_double(e.proxy_return) + "," + io::format_double(e.env_return) + "," +
               io::format_double(e.gw_sq) + "," + io::format_double(e.eval_return) + "," +
               (e.success ? "1" : "0");
      } else {
        csv += ",,,,,";
      }
    }
    csv += "\n";
  }
  const fs::path target = a.out.empty() ? dir / "learning_curves.csv" : fs::path(a.out);
  io::write_file(target, csv);
  out << "wrote " << target.string() << "\n";
  return kOk;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gromov-Wasserstein imitation learning on tabular metric MDPs", "gwil"};
  app.require_subcommand(1);

  GwArgs gw;
  auto* gw_cmd = app.add_subcommand("gw", "GW distance between two trajectories or spaces");
  gw_cmd->add_option("space_x", gw.x, "trajectory or space JSON")->required();
  gw_cmd->add_option("space_y", gw.y, "trajectory or space JSON")->required();
  gw_cmd->add_option("--restarts", gw.restarts, "random restarts")->check(CLI::PositiveNumber);
  gw_cmd->add_option("--seed", gw.seed, "seed for random restarts");
  gw_cmd->add_option("--epsilon", gw.epsilon, "use the entropic solver with this regularization");
  gw_cmd->add_flag("--exhaustive", gw.exhaustive, "also start from every permutation (n = m <= 7)");
  gw_cmd->add_option("--out", gw.out, "output directory");

  ImitateArgs im;
  auto* im_cmd = app.add_subcommand("imitate", "train an agent from one expert trajectory");
  im_cmd->add_option("env", im.env, "agent environment: MDP JSON, maze JSON or ASCII maze")->required();
  im_cmd->add_option("expert", im.expert, "expert trajectory JSON")->required();
  im_cmd->add_option("config", im.config, "training config JSON");
  im_cmd->add_option("--seed", im.seed, "first seed");
  im_cmd->add_option("--seeds", im.seeds, "number of consecutive seeds");
  im_cmd->add_option("--baseline", im.baseline, "reward source")
      ->check(CLI::IsMember({"gw", "wasserstein"}));
  im_cmd->add_flag("--sparse", im.sparse, "sparse maze rewards");
  im_cmd->add_option("--beta", im.beta, "add beta times the environment reward");
  im_cmd->add_option("--horizon", im.horizon, "episode horizon");
  im_cmd->add_option("--episodes", im.episodes, "training episodes");
  im_cmd->add_option("--restarts", im.restarts, "GW restarts per episode");
  im_cmd->add_option("--eval-rollouts", im.eval_rollouts, "greedy evaluation rollouts");
  im_cmd->add_option("--out", im.out, "run directory");

  MakeEnvArgs me;
  auto* me_cmd = app.add_subcommand("make-env", "build a maze MDP");
  me_cmd->add_option("spec", me.spec, "maze JSON or ASCII maze")->required();
  me_cmd->add_flag("--reflect", me.reflect, "also write the mirrored maze and its maps");
  me_cmd->add_flag("--sparse", me.sparse, "sparse maze rewards");
  me_cmd->add_option("--out", me.out, "output directory");

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "optimal policy and one expert trajectory");
  orc_cmd->add_option("env", orc.env, "MDP JSON, maze JSON or ASCII maze")->required();
  orc_cmd->add_option("--horizon", orc.horizon, "trajectory horizon");
  orc_cmd->add_option("--seed", orc.seed, "rollout seed");
  orc_cmd->add_flag("--sparse", orc.sparse, "sparse maze rewards");
  orc_cmd->add_option("--out", orc.out, "output directory");

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("export", "consolidate per-seed learning curves");
  ex_cmd->add_option("run_dir", ex.run_dir, "imitate run directory")->required();
  ex_cmd->add_option("--format", ex.format, "output format")->check(CLI::IsMember({"csv"}));
  ex_cmd->add_option("--out", ex.out, "output file");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (gw_cmd->parsed()) return cmd_gw(gw, args, out);
    if (im_cmd->parsed()) return cmd_imitate(im, args, out);
    if (me_cmd->parsed()) return cmd_make_env(me, args, out);
    if (orc_cmd->parsed()) return cmd_oracle(orc, args, out);
    if (ex_cmd->parsed()) return cmd_export(ex, out);
  } catch (const TrainingAborted& e) {
    err << "error: training aborted: " << e.what() << "\n";
    return kTrainingAborted;
  } catch (const Infeasible& e) {
    err << "error: infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace gwil::cli
