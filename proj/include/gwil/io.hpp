#ifndef GWIL_IO_HPP_
#define GWIL_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwil/env_suite.hpp"
#include "gwil/gw_solver.hpp"
#include "gwil/gwil_trainer.hpp"
#include "gwil/mmspace.hpp"
#include "gwil/tabular_mdp.hpp"

namespace gwil::io {

using Json = nlohmann::ordered_json;

// Any malformed document raises InvalidInput with a path-like hint.

Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);

// {"steps": [{"state": [...], "action": [...], "env_reward": r, "t": k}, ...]}
Json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);

// {"dist": [[...]], "mass": [...]}
Json to_json(const MetricMeasureSpace& space);
MetricMeasureSpace space_from_json(const Json& j);

// Either document kind: a trajectory (has "steps") or a space (has "dist").
MetricMeasureSpace load_space(const Json& j, const TrajectorySpaceOptions& opts = {});

// {"nS","nA","P" (nS x nA x nS),"R","p0","gamma","dS","dA",
//  "state_features","action_features","absorbing": [state indices]}
Json to_json(const TabularMetricMDP& mdp);
TabularMetricMDP mdp_from_json(const Json& j);

Json to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

Json to_json(const Coupling& c);
Coupling coupling_from_json(const Json& j);

// Explicit fields, {"ascii": "...", ...} or {"builtin": name, ...}; scalar
// fields given alongside ascii/builtin override the layout's defaults.
Json to_json(const MazeSpec& spec);
MazeSpec maze_from_json(const Json& j);

// Flat object; missing keys keep their defaults, unknown keys are rejected.
Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

// Doubles print with 17 significant digits so the text round-trips.
std::string format_double(double v);

// episode,proxy_return,env_return,gw_sq,eval_return,success,steps,skipped,wall_ms
std::string train_log_csv(const std::vector<EpisodeRecord>& log);
std::vector<EpisodeRecord> train_log_from_csv(const std::string& text);

std::string objective_history_csv(const std::vector<double>& history);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace gwil::io

#endif  // GWIL_IO_HPP_
