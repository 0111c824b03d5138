#include "gwil/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gwil/error.hpp"

namespace gwil::io {

namespace {

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw InvalidInput(what + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw InvalidInput(what + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw InvalidInput(what + ": expected an integer");
  return j.get<int>();
}

bool boolean(const Json& j, const std::string& what) {
  if (!j.is_boolean()) throw InvalidInput(what + ": expected true or false");
  return j.get<bool>();
}

std::vector<double> numbers(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Json cell_json(Cell c) { return Json::array({c.x, c.y}); }

Cell cell_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput(what + ": expected [x, y]");
  return {integer(j[0], what), integer(j[1], what)};
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw InvalidInput(what + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw InvalidInput(what + ": unknown field \"" + item.key() + "\"");
    }
  }
}

}  // namespace

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = 0;
  Matrix m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = numbers(j[static_cast<std::size_t>(r)], what);
    if (r == 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw InvalidInput(what + ": rows differ in length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  const auto vals = numbers(j, what);
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Json to_json(const Trajectory& traj) {
  Json steps = Json::array();
  for (const Step& st : traj.steps) {
    steps.push_back(Json{{"state", st.state},
                         {"action", st.action},
                         {"env_reward", st.env_reward},
                         {"t", st.t}});
  }
  return Json{{"steps", std::move(steps)}};
}

Trajectory trajectory_from_json(const Json& j) {
  const Json& steps = field(j, "steps", "trajectory");
  if (!steps.is_array()) throw InvalidInput("trajectory: \"steps\" must be an array");
  Trajectory traj;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string what = "trajectory.steps[" + std::to_string(i) + "]";
    const Json& s = steps[i];
    Step st;
    st.state = numbers(field(s, "state", what), what + ".state");
    st.action = numbers(field(s, "action", what), what + ".action");
    st.env_reward = s.contains("env_reward") ? number(s["env_reward"], what) : 0.0;
    st.t = s.contains("t") ? integer(s["t"], what) : static_cast<int>(i);
    traj.steps.push_back(std::move(st));
  }
  traj.validate();
  return traj;
}

Json to_json(const MetricMeasureSpace& space) {
  return Json{{"dist", to_json(space.dist())}, {"mass", to_json(space.mass())}};
}

MetricMeasureSpace space_from_json(const Json& j) {
  const Matrix d = matrix_from_json(field(j, "dist", "space"), "space.dist");
  if (!j.contains("mass")) {
    return from_distance_matrix(d, Vector::Constant(d.rows(), 1.0 / static_cast<double>(d.rows())));
  }
  return from_distance_matrix(d, vector_from_json(j["mass"], "space.mass"));
}

MetricMeasureSpace load_space(const Json& j, const TrajectorySpaceOptions& opts) {
  if (j.is_object() && j.contains("steps")) return from_trajectory(trajectory_from_json(j), opts);
  if (j.is_object() && j.contains("dist")) return space_from_json(j);
  throw InvalidInput("expected a trajectory (\"steps\") or a space (\"dist\")");
}

Json to_json(const TabularMetricMDP& mdp) {
  Json p = Json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    Json per_action = Json::array();
    for (int a = 0; a < mdp.num_actions; ++a) {
      per_action.push_back(to_json(Vector(mdp.transitions.row(s * mdp.num_actions + a).transpose())));
    }
    p.push_back(std::move(per_action));
  }
  Json absorbing = Json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.is_absorbing(s)) absorbing.push_back(s);
  }
  Json out{{"nS", mdp.num_states},
           {"nA", mdp.num_actions},
           {"P", std::move(p)},
           {"R", to_json(mdp.rewards)},
           {"p0", to_json(mdp.initial)},
           {"gamma", mdp.gamma},
           {"dS", to_json(mdp.state_dist)},
           {"dA", to_json(mdp.action_dist)}};
  if (mdp.state_features) out["state_features"] = to_json(*mdp.state_features);
  if (mdp.action_features) out["action_features"] = to_json(*mdp.action_features);
  out["absorbing"] = std::move(absorbing);
  return out;
}

TabularMetricMDP mdp_from_json(const Json& j) {
  check_keys(j, {"nS", "nA", "P", "R", "p0", "gamma", "dS", "dA", "state_features",
                 "action_features", "absorbing"},
             "mdp");
  TabularMetricMDP m;
  m.num_states = integer(field(j, "nS", "mdp"), "mdp.nS");
  m.num_actions = integer(field(j, "nA", "mdp"), "mdp.nA");
  if (m.num_states < 1 || m.num_actions < 1) throw InvalidInput("mdp: nS and nA must be positive");
  const Json& p = field(j, "P", "mdp");
  if (!p.is_array() || static_cast<int>(p.size()) != m.num_states) {
    throw InvalidInput("mdp.P: expected nS entries");
  }
  m.transitions = Matrix(m.num_states * m.num_actions, m.num_states);
  for (int s = 0; s < m.num_states; ++s) {
    const Matrix block = matrix_from_json(p[static_cast<std::size_t>(s)], "mdp.P");
    if (block.rows() != m.num_actions || block.cols() != m.num_states) {
      throw InvalidInput("mdp.P: each state needs an nA x nS block");
    }
    m.transitions.middleRows(s * m.num_actions, m.num_actions) = block;
  }
  m.rewards = matrix_from_json(field(j, "R", "mdp"), "mdp.R");
  m.initial = vector_from_json(field(j, "p0", "mdp"), "mdp.p0");
  m.gamma = number(field(j, "gamma", "mdp"), "mdp.gamma");
  m.state_dist = matrix_from_json(field(j, "dS", "mdp"), "mdp.dS");
  m.action_dist = matrix_from_json(field(j, "dA", "mdp"), "mdp.dA");
  if (j.contains("state_features") && !j["state_features"].is_null()) {
    m.state_features = matrix_from_json(j["state_features"], "mdp.state_features");
  }
  if (j.contains("action_features") && !j["action_features"].is_null()) {
    m.action_features = matrix_from_json(j["action_features"], "mdp.action_features");
  }
  if (j.contains("absorbing")) {
    const Json& abs = j["absorbing"];
    if (!abs.is_array()) throw InvalidInput("mdp.absorbing: expected an array of states");
    if (!abs.empty()) m.absorbing.assign(static_cast<std::size_t>(m.num_states), false);
    for (const Json& s : abs) {
      const int idx = integer(s, "mdp.absorbing");
      if (idx < 0 || idx >= m.num_states) throw InvalidInput("mdp.absorbing: state out of range");
      m.absorbing[static_cast<std::size_t>(idx)] = true;
    }
  }
  m.validate();
  return m;
}

Json to_json(const Policy& policy) { return Json{{"pi", to_json(policy.pi)}}; }

Policy policy_from_json(const Json& j) {
  Policy p{matrix_from_json(field(j, "pi", "policy"), "policy.pi")};
  p.validate();
  return p;
}

Json to_json(const Coupling& c) {
  return Json{{"u", to_json(c.u)}, {"row_mass", to_json(c.row_mass)}, {"col_mass", to_json(c.col_mass)}};
}

Coupling coupling_from_json(const Json& j) {
  Coupling c{matrix_from_json(field(j, "u", "coupling"), "coupling.u"),
             vector_from_json(field(j, "row_mass", "coupling"), "coupling.row_mass"),
             vector_from_json(field(j, "col_mass", "coupling"), "coupling.col_mass")};
  c.check_feasible();
  return c;
}

Json to_json(const MazeSpec& spec) {
  Json walls = Json::array();
  for (const Cell& w : spec.walls) walls.push_back(cell_json(w));
  return Json{{"width", spec.width},
              {"height", spec.height},
              {"walls", std::move(walls)},
              {"start", cell_json(spec.start)},
              {"goal", cell_json(spec.goal)},
              {"step_reward", spec.step_reward},
              {"goal_reward", spec.goal_reward},
              {"sparse", spec.sparse},
              {"slip_prob", spec.slip_prob},
              {"gamma", spec.gamma}};
}

MazeSpec maze_from_json(const Json& j) {
  check_keys(j, {"width", "height", "walls", "start", "goal", "step_reward", "goal_reward",
                 "sparse", "slip_prob", "gamma", "ascii", "builtin"},
             "maze");
  MazeSpec spec;
  if (j.contains("builtin")) {
    if (!j["builtin"].is_string()) throw InvalidInput("maze.builtin: expected a name");
    spec = builtin_maze(j["builtin"].get<std::string>());
  } else if (j.contains("ascii")) {
    const Json& a = j["ascii"];
    if (a.is_string()) {
      spec = parse_ascii_maze(a.get<std::string>());
    } else if (a.is_array()) {
      std::string text;
      for (const Json& row : a) {
        if (!row.is_string()) throw InvalidInput("maze.ascii: rows must be strings");
        text += row.get<std::string>() + "\n";
      }
      spec = parse_ascii_maze(text);
    } else {
      throw InvalidInput("maze.ascii: expected a string or an array of rows");
    }
  } else {
    spec.width = integer(field(j, "width", "maze"), "maze.width");
    spec.height = integer(field(j, "height", "maze"), "maze.height");
    spec.start = cell_from_json(field(j, "start", "maze"), "maze.start");
    spec.goal = cell_from_json(field(j, "goal", "maze"), "maze.goal");
    if (j.contains("walls")) {
      if (!j["walls"].is_array()) throw InvalidInput("maze.walls: expected an array");
      for (const Json& w : j["walls"]) spec.walls.push_back(cell_from_json(w, "maze.walls"));
    }
  }
  if (j.contains("step_reward")) spec.step_reward = number(j["step_reward"], "maze.step_reward");
  if (j.contains("goal_reward")) spec.goal_reward = number(j["goal_reward"], "maze.goal_reward");
  if (j.contains("sparse")) spec.sparse = boolean(j["sparse"], "maze.sparse");
  if (j.contains("slip_prob")) spec.slip_prob = number(j["slip_prob"], "maze.slip_prob");
  if (j.contains("gamma")) spec.gamma = number(j["gamma"], "maze.gamma");
  return spec;
}

Json to_json(const TrainConfig& cfg) {
  Json out{{"episodes", cfg.episodes},
           {"horizon", cfg.horizon},
           {"learning_rate", cfg.learning_rate},
           {"entropy_temp", cfg.entropy_temp},
           {"final_temp", cfg.final_temp}};
  out["gamma"] = cfg.gamma ? Json(*cfg.gamma) : Json(nullptr);
  out["seed"] = cfg.seed;
  out["include_env_reward"] = cfg.include_env_reward;
  out["beta"] = cfg.beta;
  out["include_T_A"] = cfg.include_T_A;
  out["eval_every"] = cfg.eval_every;
  out["td_sweeps"] = cfg.td_sweeps;
  out["max_consecutive_failures"] = cfg.max_consecutive_failures;
  out["restarts"] = cfg.gw_opts.restarts;
  out["max_iters"] = cfg.gw_opts.max_iters;
  out["rel_tol"] = cfg.gw_opts.rel_tol;
  out["northwest_init"] = cfg.gw_opts.northwest_init;
  out["timestep_weight"] = cfg.space_opts.timestep_weight;
  return out;
}

TrainConfig train_config_from_json(const Json& j) {
  check_keys(j, {"episodes", "horizon", "learning_rate", "entropy_temp", "final_temp", "gamma",
                 "seed", "include_env_reward", "beta", "include_T_A", "eval_every", "td_sweeps",
                 "max_consecutive_failures", "restarts", "max_iters", "rel_tol",
                 "northwest_init", "timestep_weight"},
             "config");
  TrainConfig cfg;
  auto get_int = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = integer(j[key], std::string("config.") + key);
  };
  auto get_num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = number(j[key], std::string("config.") + key);
  };
  auto get_bool = [&](const char* key, bool& dst) {
    if (j.contains(key)) dst = boolean(j[key], std::string("config.") + key);
  };
  get_int("episodes", cfg.episodes);
  get_int("horizon", cfg.horizon);
  get_num("learning_rate", cfg.learning_rate);
  get_num("entropy_temp", cfg.entropy_temp);
  get_num("final_temp", cfg.final_temp);
  if (j.contains("gamma") && !j["gamma"].is_null()) cfg.gamma = number(j["gamma"], "config.gamma");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw InvalidInput("config.seed: expected a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  get_bool("include_env_reward", cfg.include_env_reward);
  get_num("beta", cfg.beta);
  get_bool("include_T_A", cfg.include_T_A);
  get_int("eval_every", cfg.eval_every);
  get_int("td_sweeps", cfg.td_sweeps);
  get_int("max_consecutive_failures", cfg.max_consecutive_failures);
  get_int("restarts", cfg.gw_opts.restarts);
  get_int("max_iters", cfg.gw_opts.max_iters);
  get_num("rel_tol", cfg.gw_opts.rel_tol);
  get_bool("northwest_init", cfg.gw_opts.northwest_init);
  get_num("timestep_weight", cfg.space_opts.timestep_weight);
  if (cfg.space_opts.timestep_weight != 0.0) cfg.space_opts.dedup = Dedup::kAppendTimestep;
  cfg.validate();
  return cfg;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string train_log_csv(const std::vector<EpisodeRecord>& log) {
  std::string out = "episode,proxy_return,env_return,gw_sq,eval_return,success,steps,skipped,wall_ms\n";
  for (const auto& r : log) {
    out += std::to_string(r.episode) + "," + format_double(r.proxy_return) + "," +
           format_double(r.env_return) + "," + format_double(r.gw_sq) + "," +
           format_double(r.eval_return) + "," + (r.success ? "1" : "0") + "," +
           std::to_string(r.steps) + "," + (r.skipped ? "1" : "0") + "," +
           format_double(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<EpisodeRecord> train_log_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,", 0) != 0) {
    throw InvalidInput("train log: missing header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw InvalidInput("train log: expected 9 columns");
    auto num = [&](const std::string& s) {
      return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    try {
      EpisodeRecord r;
      r.episode = std::stoi(cells[0]);
      r.proxy_return = num(cells[1]);
      r.env_return = num(cells[2]);
      r.gw_sq = num(cells[3]);
      r.eval_return = num(cells[4]);
      r.success = cells[5] == "1";
      r.steps = std::stoi(cells[6]);
      r.skipped = cells[7] == "1";
      r.wall_ms = num(cells[8]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw InvalidInput("train log: malformed number in \"" + line + "\"");
    }
  }
  return out;
}

std::string objective_history_csv(const std::vector<double>& history) {
  std::string out = "iteration,objective\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += std::to_string(i) + "," + format_double(history[i]) + "\n";
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace gwil::io
