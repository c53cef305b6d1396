#include "gnep/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gnep {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string kind_name(ProblemKind kind) {
  return kind == ProblemKind::distributed ? "distributed" : "boundary";
}

ProblemKind kind_from_name(const std::string& name) {
  if (name == "distributed") {
    return ProblemKind::distributed;
  }
  if (name == "boundary") {
    return ProblemKind::boundary;
  }
  throw UsageError("unknown problem kind: " + name);
}

std::string mode_name(GameMode mode) {
  return mode == GameMode::gnep ? "gnep" : "coop";
}

GameMode mode_from_name(const std::string& name) {
  if (name == "gnep") {
    return GameMode::gnep;
  }
  if (name == "coop") {
    return GameMode::coop;
  }
  throw UsageError("unknown game mode: " + name);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path + " for reading");
  }
  return in;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) {
    throw IoError("write to " + path + " failed");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse number '" + s + "' in " + context);
  }
}

int parse_int(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse integer '" + s + "' in " + context);
  }
}

const char* kHistoryHeader = "k,gamma,beta,sum_objectives,newton_iters,damping,wall_ms";

}  // namespace

ParsedCli parse_cli(const std::vector<std::string>& args) {
  ParsedCli out;
  SolveArgs& sa = out.solve;
  std::string problem = "distributed";
  std::string mode = "gnep";

  CLI::App app{"Penalty path-following solver for PDE-constrained quadrant games"};
  app.name("gnep_solve");
  app.require_subcommand(1);

  CLI::App* solve = app.add_subcommand("solve", "run the continuation solver, write artifacts");
  solve->add_option("--problem", problem, "distributed | boundary")
      ->check(CLI::IsMember({"distributed", "boundary"}));
  solve->add_option("--mode", mode, "gnep | coop")->check(CLI::IsMember({"gnep", "coop"}));
  solve->add_option("--mesh-n", sa.game.mesh_n, "mesh subdivisions per side");
  solve->add_option("--players", sa.game.num_players, "number of players (1 or 4)");
  solve->add_option("--alpha", sa.game.alpha, "control cost weight");
  solve->add_option("--a", sa.game.a, "lower control bound");
  solve->add_option("--b", sa.game.b, "upper control bound");
  solve->add_option("--psi-lower", sa.game.psi_lower, "lower state obstacle");
  solve->add_option("--psi-upper", sa.game.psi_upper, "upper state obstacle");
  solve->add_option("--yd", sa.game.yd, "desired state constant per player")
      ->delimiter(',')
      ->expected(-1);
  solve->add_option("--gamma0", sa.path.gamma0, "initial penalty parameter");
  solve->add_option("--c-path", sa.path.c_path, "numerator constant of the gamma update");
  solve->add_option("--eps", sa.path.eps, "minimal gamma increment");
  solve->add_option("--gamma-max", sa.path.gamma_max, "stop once the next gamma would pass this");
  solve->add_option("--beta-tol", sa.path.beta_tol, "stop once beta falls to this value");
  solve->add_option("--sample-w", sa.path.w_grid,
                    "gamma grid at which the value function is sampled after the run")
      ->delimiter(',')
      ->expected(-1);
  solve->add_option("--out", sa.out_dir, "output directory (required to run)");
  solve->add_flag("--timings", sa.timings, "record measured wall times in history.csv");

  CLI::App* poa = app.add_subcommand("poa", "objective ratio of two completed runs");
  poa->add_option("nash_dir", out.poa_nash_dir, "run directory of the equilibrium solve")
      ->required();
  poa->add_option("coop_dir", out.poa_coop_dir, "run directory of the cooperative solve")
      ->required();

  app.add_subcommand("check", "run the built-in invariant suite");

  std::vector<const char*> argv;
  argv.push_back("gnep_solve");
  for (const std::string& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (solve->parsed()) {
    out.command = ParsedCli::Command::solve;
    sa.game.kind = kind_from_name(problem);
    sa.game.mode = mode_from_name(mode);
    if (solve->count("--yd") == 0 &&
        sa.game.num_players < static_cast<int>(sa.game.yd.size())) {
      sa.game.yd.resize(static_cast<std::size_t>(sa.game.num_players));
    }
    sa.path.sample_w = !sa.path.w_grid.empty();
  } else if (poa->parsed()) {
    out.command = ParsedCli::Command::poa;
  } else {
    out.command = ParsedCli::Command::check;
  }
  return out;
}

void write_history(const PathHistory& history, const std::string& path, bool timings) {
  if (history.records.empty()) {
    throw UsageError("history is empty; nothing to write");
  }
  std::ofstream out = open_output(path);
  out << kHistoryHeader << "\n";
  for (const PathRecord& rec : history.records) {
    out << rec.k << ',' << fmt17(rec.gamma) << ',' << fmt17(rec.beta_value) << ','
        << fmt17(rec.sum_objectives) << ',' << rec.newton.iterations << ','
        << fmt17(rec.newton.damping_used) << ',' << (timings ? fmt17(rec.wall_ms) : "0") << "\n";
  }
  finish_output(out, path);
}

PathHistory read_history(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(path + " is empty");
  }
  if (line != kHistoryHeader) {
    throw IoError(path + " has an unexpected header: " + line);
  }
  PathHistory hist;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 7) {
      throw IoError(path + ":" + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                    " fields, expected 7");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    PathRecord rec;
    rec.k = parse_int(f[0], ctx);
    rec.gamma = parse_double(f[1], ctx);
    rec.beta_value = parse_double(f[2], ctx);
    rec.sum_objectives = parse_double(f[3], ctx);
    rec.newton.iterations = parse_int(f[4], ctx);
    rec.newton.damping_used = parse_double(f[5], ctx);
    rec.wall_ms = parse_double(f[6], ctx);
    hist.records.push_back(std::move(rec));
  }
  return hist;
}

void write_field(const Mesh& mesh, const Eigen::VectorXd& values, const std::string& path) {
  if (values.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw UsageError("field length does not match the mesh");
  }
  std::ofstream out = open_output(path);
  out << "x,y,value\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out << fmt17(mesh.vertices[static_cast<std::size_t>(v)][0]) << ','
        << fmt17(mesh.vertices[static_cast<std::size_t>(v)][1]) << ',' << fmt17(values[v])
        << "\n";
  }
  finish_output(out, path);
}

void write_mesh_connectivity(const Mesh& mesh, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "v0,v1,v2\n";
  for (const auto& t : mesh.triangles) {
    out << t[0] << ',' << t[1] << ',' << t[2] << "\n";
  }
  finish_output(out, path);
}

FieldData read_field(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != "x,y,value") {
    throw IoError(path + " has an unexpected header");
  }
  FieldData data;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 3) {
      throw IoError(path + ":" + std::to_string(lineno) + " has the wrong field count");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    data.x.push_back(parse_double(f[0], ctx));
    data.y.push_back(parse_double(f[1], ctx));
    data.value.push_back(parse_double(f[2], ctx));
  }
  return data;
}

void write_boundary_field(const Mesh& mesh, const Eigen::VectorXd& vertex_values,
                          const std::string& path, const std::vector<int>* restrict_vertices) {
  if (vertex_values.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw UsageError("field length does not match the mesh");
  }
  std::vector<int> sorted;
  if (restrict_vertices != nullptr) {
    sorted = *restrict_vertices;
    std::sort(sorted.begin(), sorted.end());
  }
  std::ofstream out = open_output(path);
  out << "x,y,value,s\n";
  double s = 0.0;
  for (const Mesh::BoundaryEdge& e : mesh.boundary_edges) {
    const int v = e.a;
    const bool keep = restrict_vertices == nullptr ||
                      std::binary_search(sorted.begin(), sorted.end(), v);
    if (keep) {
      out << fmt17(mesh.vertices[static_cast<std::size_t>(v)][0]) << ','
          << fmt17(mesh.vertices[static_cast<std::size_t>(v)][1]) << ','
          << fmt17(vertex_values[v]) << ',' << fmt17(s) << "\n";
    }
    s += (mesh.vertices[static_cast<std::size_t>(e.b)] -
          mesh.vertices[static_cast<std::size_t>(e.a)])
             .norm();
  }
  finish_output(out, path);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  json j;
  j["tool"] = "gnep_solve";
  j["game"] = {{"problem", kind_name(manifest.game.kind)},
               {"mode", mode_name(manifest.game.mode)},
               {"mesh_n", manifest.game.mesh_n},
               {"players", manifest.game.num_players},
               {"alpha", manifest.game.alpha},
               {"a", manifest.game.a},
               {"b", manifest.game.b},
               {"psi_lower", manifest.game.psi_lower},
               {"psi_upper", manifest.game.psi_upper},
               {"yd", manifest.game.yd}};
  j["path"] = {{"gamma0", manifest.path.gamma0},   {"c_path", manifest.path.c_path},
               {"eps", manifest.path.eps},         {"gamma_max", manifest.path.gamma_max},
               {"beta_tol", manifest.path.beta_tol}, {"sample_w", manifest.path.sample_w},
               {"w_grid", manifest.path.w_grid}};
  j["timings"] = manifest.timings;
  j["result"] = {{"termination_reason", manifest.termination_reason},
                 {"steps", manifest.steps},
                 {"final_gamma", manifest.final_gamma},
                 {"final_beta", manifest.final_beta},
                 {"final_sum_objectives", manifest.final_sum_objectives},
                 {"final_max_violation", manifest.final_max_violation},
                 {"residuals",
                  {{"stationarity", manifest.residuals.stationarity},
                   {"primal_infeasibility", manifest.residuals.primal_infeasibility},
                   {"complementarity_gap", manifest.residuals.complementarity_gap},
                   {"normal_cone_violation", manifest.residuals.normal_cone_violation}}}};
  j["files"] = manifest.files;
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
  finish_output(out, path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in = open_input(path);
  RunManifest m;
  try {
    json j = json::parse(in);
    const json& g = j.at("game");
    m.game.kind = kind_from_name(g.at("problem").get<std::string>());
    m.game.mode = mode_from_name(g.at("mode").get<std::string>());
    m.game.mesh_n = g.at("mesh_n").get<int>();
    m.game.num_players = g.at("players").get<int>();
    m.game.alpha = g.at("alpha").get<double>();
    m.game.a = g.at("a").get<double>();
    m.game.b = g.at("b").get<double>();
    m.game.psi_lower = g.at("psi_lower").get<double>();
    m.game.psi_upper = g.at("psi_upper").get<double>();
    m.game.yd = g.at("yd").get<std::vector<double>>();
    const json& p = j.at("path");
    m.path.gamma0 = p.at("gamma0").get<double>();
    m.path.c_path = p.at("c_path").get<double>();
    m.path.eps = p.at("eps").get<double>();
    m.path.gamma_max = p.at("gamma_max").get<double>();
    m.path.beta_tol = p.at("beta_tol").get<double>();
    m.path.sample_w = p.at("sample_w").get<bool>();
    m.path.w_grid = p.at("w_grid").get<std::vector<double>>();
    m.timings = j.at("timings").get<bool>();
    const json& r = j.at("result");
    m.termination_reason = r.at("termination_reason").get<std::string>();
    m.steps = r.at("steps").get<int>();
    m.final_gamma = r.at("final_gamma").get<double>();
    m.final_beta = r.at("final_beta").get<double>();
    m.final_sum_objectives = r.at("final_sum_objectives").get<double>();
    m.final_max_violation = r.at("final_max_violation").get<double>();
    const json& res = r.at("residuals");
    m.residuals.stationarity = res.at("stationarity").get<double>();
    m.residuals.primal_infeasibility = res.at("primal_infeasibility").get<double>();
    m.residuals.complementarity_gap = res.at("complementarity_gap").get<double>();
    m.residuals.normal_cone_violation = res.at("normal_cone_violation").get<double>();
    m.files = j.at("files").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IoError(path + " is not a valid run manifest: " + e.what());
  }
  return m;
}

namespace {

void echo_config(const SolveArgs& args) {
  const GameConfig& g = args.game;
  const PathConfig& p = args.path;
  std::cout << "problem: " << kind_name(g.kind) << "\n"
            << "mode: " << mode_name(g.mode) << "\n"
            << "mesh_n: " << g.mesh_n << "\n"
            << "players: " << g.num_players << "\n"
            << "alpha: " << fmt17(g.alpha) << "\n"
            << "control bounds: [" << fmt17(g.a) << ", " << fmt17(g.b) << "]\n"
            << "obstacles: [" << fmt17(g.psi_lower) << ", " << fmt17(g.psi_upper) << "]\n";
  std::cout << "yd:";
  for (double d : g.yd) {
    std::cout << ' ' << fmt17(d);
  }
  std::cout << "\n"
            << "gamma0: " << fmt17(p.gamma0) << "  c_path: " << fmt17(p.c_path)
            << "  eps: " << fmt17(p.eps) << "  gamma_max: " << fmt17(p.gamma_max)
            << "  beta_tol: " << fmt17(p.beta_tol) << "\n";
  std::cout << "out: " << (args.out_dir.empty() ? "(none)" : args.out_dir) << "\n";
}

// Scatter a compact per-player control into a full vertex vector (zero off
// the support).
Eigen::VectorXd scatter_control(const StateProblem& problem, int i, const Eigen::VectorXd& u_i) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(problem.num_vertices());
  const auto& dofs = problem.control_dofs[static_cast<std::size_t>(i)];
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    full[dofs[k]] = u_i[static_cast<Eigen::Index>(k)];
  }
  return full;
}

}  // namespace

int run_solve(const SolveArgs& args) {
  echo_config(args);
  if (args.out_dir.empty()) {
    throw UsageError("solve requires --out <directory>");
  }
  args.game.validate();
  args.path.validate();
  try {
    fs::create_directories(args.out_dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create output directory: ") + e.what());
  }
  const Mesh mesh = build_crossed_mesh(args.game.mesh_n);
  const StateProblem problem = build_state_problem(mesh, args.game.kind, args.game.num_players);
  auto join = [&](const std::string& name) { return (fs::path(args.out_dir) / name).string(); };

  PathSink sink = [](const PathRecord& rec) {
    std::fprintf(stderr, "[path] k=%d gamma=%.6g beta=%.3e newton=%d damping=%g\n", rec.k,
                 rec.gamma, rec.beta_value, rec.newton.iterations, rec.newton.damping_used);
  };

  EquilibriumState st;
  PathHistory hist;
  try {
    std::tie(st, hist) = run_path(problem, args.game, args.path, sink);
  } catch (const PathFailure& failure) {
    if (!failure.history.records.empty()) {
      write_history(failure.history, join("history.csv"), args.timings);
      std::cerr << "partial history written to " << join("history.csv") << "\n";
    }
    throw;
  }

  RunManifest manifest;
  manifest.game = args.game;
  manifest.path = args.path;
  manifest.timings = args.timings;
  manifest.termination_reason = hist.termination_reason;
  manifest.steps = static_cast<int>(hist.records.size());
  const PathRecord& last = hist.records.back();
  manifest.final_gamma = last.gamma;
  manifest.final_beta = last.beta_value;
  manifest.final_sum_objectives = last.sum_objectives;
  manifest.final_max_violation = last.max_violation;
  manifest.residuals = equilibrium_residuals(args.game, problem, st);

  write_history(hist, join("history.csv"), args.timings);
  manifest.files.push_back("history.csv");
  write_mesh_connectivity(mesh, join("mesh.csv"));
  manifest.files.push_back("mesh.csv");
  write_field(mesh, st.y, join("state.csv"));
  manifest.files.push_back("state.csv");

  const bool on_boundary = args.game.kind == ProblemKind::boundary;
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(problem.num_vertices());
  std::vector<Eigen::VectorXd> scattered;
  for (int i = 0; i < args.game.num_players; ++i) {
    scattered.push_back(scatter_control(problem, i, st.u[static_cast<std::size_t>(i)]));
  }
  if (on_boundary) {
    for (int v : mesh.boundary_vertices) {
      const int owner = args.game.num_players == 1
                            ? 0
                            : mesh.boundary_segment[static_cast<std::size_t>(v)] - 1;
      combined[v] = scattered[static_cast<std::size_t>(owner)][v];
    }
  } else {
    for (int v = 0; v < problem.num_vertices(); ++v) {
      const int owner = args.game.num_players == 1
                            ? 0
                            : mesh.vertex_subdomain[static_cast<std::size_t>(v)] - 1;
      combined[v] = scattered[static_cast<std::size_t>(owner)][v];
    }
  }
  for (int i = 0; i < args.game.num_players; ++i) {
    const std::string name = "control_" + std::to_string(i + 1) + ".csv";
    if (on_boundary) {
      write_boundary_field(mesh, scattered[static_cast<std::size_t>(i)], join(name),
                           &problem.control_dofs[static_cast<std::size_t>(i)]);
    } else {
      write_field(mesh, scattered[static_cast<std::size_t>(i)], join(name));
    }
    manifest.files.push_back(name);
  }
  if (on_boundary) {
    write_boundary_field(mesh, combined, join("control_combined.csv"), nullptr);
  } else {
    write_field(mesh, combined, join("control_combined.csv"));
  }
  manifest.files.push_back("control_combined.csv");
  for (std::size_t j = 0; j < st.p.size(); ++j) {
    const std::string name = "adjoint_" + std::to_string(j + 1) + ".csv";
    write_field(mesh, st.p[j], join(name));
    manifest.files.push_back(name);
  }
  if (!hist.w_samples.empty()) {
    std::ofstream out = open_output(join("w_samples.csv"));
    out << "gamma,W\n";
    for (const WSample& s : hist.w_samples) {
      out << fmt17(s.gamma) << ',' << fmt17(s.value) << "\n";
    }
    finish_output(out, join("w_samples.csv"));
    manifest.files.push_back("w_samples.csv");
  }
  write_manifest(manifest, join("manifest.json"));
  manifest.files.push_back("manifest.json");

  std::cout << "termination: " << hist.termination_reason << " after " << manifest.steps
            << " steps\n"
            << "final gamma = " << fmt17(manifest.final_gamma) << "\n"
            << "final beta = " << fmt17(manifest.final_beta) << "\n"
            << "sum of objectives = " << fmt17(manifest.final_sum_objectives) << "\n"
            << "max violation = " << fmt17(manifest.final_max_violation) << "\n"
            << "wrote " << manifest.files.size() << " files to " << args.out_dir << "\n";
  return kExitOk;
}

int run_poa(const std::string& nash_dir, const std::string& coop_dir) {
  const RunManifest nash = read_manifest((fs::path(nash_dir) / "manifest.json").string());
  const RunManifest coop = read_manifest((fs::path(coop_dir) / "manifest.json").string());
  const GameConfig& a = nash.game;
  const GameConfig& b = coop.game;
  const bool comparable = a.kind == b.kind && a.mesh_n == b.mesh_n &&
                          a.num_players == b.num_players && a.alpha == b.alpha && a.a == b.a &&
                          a.b == b.b && a.psi_lower == b.psi_lower &&
                          a.psi_upper == b.psi_upper && a.yd == b.yd;
  if (!comparable) {
    throw UsageError("the two runs use different problem data and are not comparable");
  }
  if (!(coop.final_sum_objectives > 0.0)) {
    throw SolverError("cooperative objective sum is not positive; ratio undefined");
  }
  const double ratio = nash.final_sum_objectives / coop.final_sum_objectives;
  std::cout << "nash_sum = " << fmt17(nash.final_sum_objectives) << "\n"
            << "coop_sum = " << fmt17(coop.final_sum_objectives) << "\n"
            << "poa = " << fmt17(ratio) << "\n";
  return kExitOk;
}

int run_check() {
  int failures = 0;
  auto check = [&failures](const std::string& label, const std::function<void()>& body) {
    try {
      body();
      std::cout << "[ok] " << label << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[fail] " << label << ": " << e.what() << "\n";
    }
  };
  auto expect = [](bool cond, const std::string& msg) {
    if (!cond) {
      throw SolverError(msg);
    }
  };

  check("crossed mesh invariants", [&] {
    Mesh mesh = build_crossed_mesh(4);
    expect(mesh.num_vertices() == 41, "vertex count");
    expect(mesh.num_triangles() == 64, "triangle count");
    double area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      area += mesh.triangle_area(t);
    }
    expect(std::abs(area - 1.0) < 1e-12, "areas sum to 1");
    double length = 0.0;
    for (const Mesh::BoundaryEdge& e : mesh.boundary_edges) {
      length += (mesh.vertices[static_cast<std::size_t>(e.b)] -
                 mesh.vertices[static_cast<std::size_t>(e.a)])
                    .norm();
    }
    expect(std::abs(length - 4.0) < 1e-12, "boundary length 4");
  });

  check("homogeneous source solve", [&] {
    Mesh mesh = build_crossed_mesh(8);
    StateProblem problem = build_state_problem(mesh, ProblemKind::distributed, 4);
    std::vector<Eigen::VectorXd> u;
    for (int i = 0; i < 4; ++i) {
      u.emplace_back(Eigen::VectorXd::Zero(
          static_cast<Eigen::Index>(problem.control_dofs[static_cast<std::size_t>(i)].size())));
    }
    auto [y, report] = solve_state(problem, u, Eigen::VectorXd::Zero(mesh.num_vertices()),
                                   problem.vol_lumped);
    expect(report.converged, "state Newton converged");
    const double peak = y.coefficients.maxCoeff();
    expect(std::abs(peak - 0.0736) < 5e-3, "peak of the unit-source solution");
  });

  check("gamma update arithmetic", [&] {
    PathConfig path;
    expect(gamma_update(10.0, 1e-7, path) == 110.0, "large-step branch exact");
    expect(gamma_update(10.0, 1.0, path) == 20.0, "floor branch exact");
  });

  check("toy quadratic game", [&] {
    ToyQuadraticGame game{1.0, 3.0, 0.0};
    ToyEquilibrium eq = solve_toy_game(game);
    expect(std::abs(eq.u1 - 2.0) < 1e-15 && std::abs(eq.u2 + 1.0) < 1e-15 &&
               std::abs(eq.y - 1.0) < 1e-15,
           "hand-derived equilibrium");
  });

  check("small continuation run", [&] {
    GameConfig cfg;
    cfg.mesh_n = 8;
    PathConfig path;
    path.gamma_max = 50.0;
    Mesh mesh = build_crossed_mesh(cfg.mesh_n);
    StateProblem problem = build_state_problem(mesh, cfg.kind, cfg.num_players);
    auto [st, hist] = run_path(problem, cfg, path);
    expect(hist.termination_reason == "gamma_max", "terminates at the gamma cap");
    expect(!hist.records.empty(), "records kept");
    ResidualReport res = equilibrium_residuals(cfg, problem, st);
    expect(res.stationarity < 1e-8, "control stationarity");
    expect(res.normal_cone_violation < 1e-8, "multiplier sign pattern");
  });

  check("history round trip", [&] {
    PathHistory hist;
    PathRecord rec;
    rec.k = 1;
    rec.gamma = 1.0;
    rec.beta_value = 0.125;
    rec.sum_objectives = 0.625;
    rec.newton.iterations = 3;
    rec.newton.damping_used = 0.5;
    rec.wall_ms = 12.5;
    hist.records.push_back(rec);
    fs::path dir = fs::temp_directory_path() / "gnep_selfcheck";
    fs::create_directories(dir);
    const std::string file = (dir / "history.csv").string();
    write_history(hist, file, true);
    PathHistory back = read_history(file);
    expect(back.records.size() == 1, "row count");
    const PathRecord& r = back.records[0];
    expect(r.k == 1 && r.gamma == 1.0 && r.beta_value == 0.125 && r.sum_objectives == 0.625 &&
               r.newton.iterations == 3 && r.newton.damping_used == 0.5 && r.wall_ms == 12.5,
           "lossless round trip");
    fs::remove_all(dir);
  });

  if (failures > 0) {
    std::cout << failures << " check(s) failed\n";
    return kExitSolver;
  }
  std::cout << "all checks passed\n";
  return kExitOk;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  try {
    ParsedCli cli = parse_cli(args);
    switch (cli.command) {
      case ParsedCli::Command::solve:
        return run_solve(cli.solve);
      case ParsedCli::Command::poa:
        return run_poa(cli.poa_nash_dir, cli.poa_coop_dir);
      case ParsedCli::Command::check:
        return run_check();
    }
    return kExitUsage;
  } catch (const HelpRequested& help) {
    std::cout << help.text;
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    std::cerr << "run with --help for the full flag list\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

}  // namespace gnep
