#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnep/path_following.hpp"

namespace gnep {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitIo = 3;

struct SolveArgs {
  GameConfig game;
  PathConfig path;
  std::string out_dir;
  bool timings = false;  // false => wall_ms column written as 0 (deterministic)
};

struct ParsedCli {
  enum class Command { solve, poa, check } command = Command::solve;
  SolveArgs solve;
  std::string poa_nash_dir;  // poa: directory of the Nash run
  std::string poa_coop_dir;  // poa: directory of the cooperative run
};

// Thrown (not an error) when the user asks for --help; carries the text.
struct HelpRequested {
  std::string text;
};

// Parse argv (without the program name). Throws UsageError on bad input and
// HelpRequested on an explicit help request.
ParsedCli parse_cli(const std::vector<std::string>& args);

// history.csv: header k,gamma,beta,sum_objectives,newton_iters,damping,wall_ms
// one row per continuation step, 17 significant digits, LF line endings.
// Unless timings is set the wall_ms column is written as 0 so that repeated
// runs produce byte-identical files.
void write_history(const PathHistory& history, const std::string& path, bool timings = false);
PathHistory read_history(const std::string& path);

// Vertex fields: x,y,value rows in mesh vertex order. mesh.csv carries the
// triangle connectivity so fields can be re-attached to the geometry.
void write_field(const Mesh& mesh, const Eigen::VectorXd& values, const std::string& path);
void write_mesh_connectivity(const Mesh& mesh, const std::string& path);
struct FieldData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> value;
};
FieldData read_field(const std::string& path);

// Boundary fields: x,y,value,s rows over the boundary vertices in
// counter-clockwise order starting at the origin, s = arc length. An optional
// mask restricts the rows to a subset of boundary vertices.
void write_boundary_field(const Mesh& mesh, const Eigen::VectorXd& vertex_values,
                          const std::string& path,
                          const std::vector<int>* restrict_vertices = nullptr);

// manifest.json: full configuration, file inventory and summary statistics of
// one run; readable back for the poa command.
struct RunManifest {
  GameConfig game;
  PathConfig path;
  bool timings = false;
  std::string termination_reason;
  int steps = 0;
  double final_gamma = 0.0;
  double final_beta = 0.0;
  double final_sum_objectives = 0.0;
  double final_max_violation = 0.0;
  ResidualReport residuals;
  std::vector<std::string> files;
};
void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest read_manifest(const std::string& path);

// Subcommand drivers. run_solve writes all artifacts into args.out_dir,
// run_poa prints the objective ratio of two completed runs, run_check runs
// the built-in self-test battery. All return a process exit code.
int run_solve(const SolveArgs& args);
int run_poa(const std::string& nash_dir, const std::string& coop_dir);
int run_check();

// Top-level entry used by the binary: parse, dispatch, map exceptions to
// exit codes (usage 1, solver 2, io 3).
int cli_main(int argc, const char* const* argv);

}  // namespace gnep
