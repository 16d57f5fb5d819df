// cycloop: generate data, fit, synthesize loops, evaluate, serve.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cycloop/cyclic_solver.hpp"
#include "cycloop/datagen.hpp"
#include "cycloop/error.hpp"
#include "cycloop/kernels.hpp"
#include "cycloop/koopman.hpp"
#include "cycloop/service.hpp"

namespace {

using nlohmann::json;
using namespace cycloop;

struct GenArgs {
  std::string cls;
  std::optional<std::size_t> frames;
  std::string grid;
  std::string config;
  std::uint64_t seed = 7;
  std::string out;
};

struct FitArgs {
  std::string in;
  std::optional<std::size_t> rank;
  std::optional<double> energy;
  std::string out;
};

struct LoopArgs {
  std::string in;
  std::optional<std::size_t> rank;
  std::optional<double> energy;
  std::size_t harmonics = 8;
  double w_red = 1e-2;
  double w_u = 3.0;
  std::string control_energy = "gram";
  bool full_space = false;
  bool no_frames = false;
  std::string out;
  std::string metrics;
  std::string csv;
};

struct EvalArgs {
  std::string traj;
  std::string loop;
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_dir = ".";
  std::string snapshot_dir;
  std::size_t threads = 8;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
}

std::string source_of(const Trajectory& traj, const std::string& path) {
  if (!traj.source.empty()) return traj.source;
  for (const char* cls : {"nbody", "sheet", "water"}) {
    if (path.find(cls) != std::string::npos) return cls;
  }
  return {};
}

int cmd_gen(const GenArgs& a) {
  json overrides = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!overrides.is_object()) throw InvalidArgument("config must be a JSON object");
  if (a.frames) overrides["frames"] = *a.frames;
  if (!a.grid.empty()) {
    if (a.cls == "nbody") throw InvalidArgument("--grid does not apply to nbody");
    std::size_t nx = 0, ny = 0;
    char x = 0, tail = 0;
    if (std::sscanf(a.grid.c_str(), "%zu%c%zu%c", &nx, &x, &ny, &tail) != 3 || x != 'x') {
      throw InvalidArgument("--grid must look like NxM, got '" + a.grid + "'");
    }
    overrides["nx"] = nx;
    overrides["ny"] = ny;
  }
  const Trajectory traj = generate(a.cls, overrides, a.seed);
  save_trajectory(traj, a.out);
  std::cout << "wrote " << a.out << ": class=" << traj.source << " n=" << traj.state_dim()
            << " frames=" << traj.frame_count() << " dt=" << traj.dt << '\n';
  return 0;
}

int cmd_fit(const FitArgs& a) {
  const Trajectory traj = load_trajectory(a.in);
  traj.validate();
  const FrameSplit split = split_frames(traj);
  const SnapshotPair snaps = snapshot_pair(traj, split.fit_frames);
  ReduceOptions opt;
  opt.energy_fraction = a.energy;
  const std::size_t rank = a.rank.value_or(default_rank(source_of(traj, a.in)));
  const ReducedModel model = reduce(snaps, rank, opt);
  save_model(model, a.out);
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
  const double holdout = holdout_error(model, traj.frames[split.fit_frames - 1], traj.frames[split.holdout]);
  std::cout << "wrote " << a.out << ": n=" << model.state_dim() << " r=" << model.rank()
            << " fit_residual=" << json(model.fit_residual).dump()
            << " spectral_radius=" << json(model.spectral_radius).dump()
            << " holdout_error=" << json(holdout).dump() << '\n';
  return 0;
}

void print_table_row(const std::string& name, const Trajectory& traj, const CyclicSolution& sol) {
  std::printf("%-10s %-11s %-10s %-9s %-12s %-13s %-10s\n", "dataset", "frames", "state dim", "subspace",
              "processing", "optimization", "closure");
  const std::string frames = std::to_string(traj.frame_count()) + " / " + std::to_string(sol.period);
  std::printf("%-10s %-11s %-10zu %-9zu %-12s %-13s %-10.2e\n", name.c_str(), frames.c_str(),
              traj.state_dim(), sol.gamma.rows(),
              (std::to_string(sol.metrics.processing_seconds).substr(0, 6) + " s").c_str(),
              (std::to_string(sol.metrics.solve_seconds).substr(0, 6) + " s").c_str(),
              sol.metrics.closure_residual);
}

void write_csv(const std::string& path, const CyclicSolution& sol, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out.precision(17);
  const std::size_t r = sol.z1.size();
  out << "t,frame_rmse";
  for (std::size_t i = 0; i < r; ++i) out << ",z" << i;
  out << '\n';
  for (std::size_t t = 0; t < sol.reduced_cycle.size(); ++t) {
    double rmse = 0.0;
    if (!sol.full_cycle.frames.empty() && t < traj.frame_count()) {
      const Vector d = subtract(sol.full_cycle.frames[t], traj.frames[t]);
      rmse = std::sqrt(dot(d, d) / static_cast<double>(d.size()));
    }
    out << t + 1 << ',' << rmse;
    for (double z : sol.reduced_cycle[t]) out << ',' << z;
    out << '\n';
  }
}

int cmd_loop(const LoopArgs& a) {
  const Trajectory traj = load_trajectory(a.in);
  const std::string source = source_of(traj, a.in);
  CyclicOptions opt;
  opt.rank = a.rank.value_or(default_rank(source));
  opt.energy_fraction = a.energy;
  opt.harmonics = a.harmonics;
  opt.weights = {a.w_red, a.w_u};
  opt.energy = control_energy_from_string(a.control_energy);
  opt.full_space = a.full_space;
  const CyclicSolution sol = solve_cyclic(traj, opt);
  for (const auto& w : sol.model->warnings) std::cerr << "warning: " << w << '\n';
  const LoopReport report = evaluate(sol, traj);
  save_solution(sol, a.out, !a.no_frames);

  print_table_row(source.empty() ? "custom" : source, traj, sol);
  const json metrics = metrics_to_json(sol.metrics);
  const json rep = report_to_json(report);
  std::cout << "\nmetrics\n";
  for (const auto& [k, v] : metrics.items()) std::cout << "  " << k << ": " << v.dump() << '\n';
  std::cout << "report\n";
  for (const auto& [k, v] : rep.items()) std::cout << "  " << k << ": " << v.dump() << '\n';
  std::cout << "wrote " << a.out << '\n';

  if (!a.metrics.empty()) {
    const json doc = {{"input", a.in},
                      {"dataset", source},
                      {"n", traj.state_dim()},
                      {"frames", traj.frame_count()},
                      {"r", sol.gamma.rows()},
                      {"m", sol.gamma.cols()},
                      {"harmonics", sol.harmonics},
                      {"weights", {{"w_red", opt.weights.fidelity}, {"w_u", opt.weights.control}}},
                      {"control_energy", to_string(opt.energy)},
                      {"kernels", std::string(kernels::active().name)},
                      {"metrics", metrics},
                      {"report", rep}};
    std::ofstream out(a.metrics);
    if (!out) throw InvalidArgument("cannot write " + a.metrics);
    out << doc.dump(2) << '\n';
  }
  if (!a.csv.empty()) write_csv(a.csv, sol, traj);
  return 0;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_eval(const EvalArgs& a) {
  const Trajectory traj = load_trajectory(a.traj);
  CyclicSolution sol;
  if (has_suffix(a.loop, ".traj")) {
    // A loop stored as a plain trajectory: its last frame is the wrap frame.
    sol.full_cycle = load_trajectory(a.loop);
  } else {
    sol = load_solution(a.loop);
    if (sol.full_cycle.frames.empty()) {
      throw InvalidArgument(a.loop + " was written without frames; re-run loop without --no-frames");
    }
  }
  const LoopReport report = evaluate(sol, traj);
  std::cout << report_to_json(report).dump(2) << '\n';
  return 0;
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const ServeArgs& a) {
  ServiceOptions opt;
  opt.model_dir = a.model_dir;
  if (!a.snapshot_dir.empty()) opt.snapshot_dir = a.snapshot_dir;
  opt.threads = a.threads;
  Service service(opt);
  const int port = service.bind(a.host, a.port);
  if (port < 0) {
    std::cerr << "error: cannot bind " << a.host << ':' << a.port << '\n';
    return 1;
  }
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << a.host << ':' << port << " (kernels: " << kernels::active().name
            << ")" << std::endl;
  const bool ok = service.run();
  g_service = nullptr;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyclic animation loops from recorded trajectories"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a trajectory (nbody, sheet, water)");
  g->add_option("class", gen.cls, "Dataset class")->required()->check(CLI::IsMember({"nbody", "sheet", "water"}));
  g->add_option("--frames", gen.frames, "Recorded frame count");
  g->add_option("--grid", gen.grid, "Grid size NxM (sheet, water)")
      ->check(CLI::Validator(
          [](std::string& v) {
            std::size_t nx = 0, ny = 0;
            char x = 0, tail = 0;
            const bool ok = std::sscanf(v.c_str(), "%zu%c%zu%c", &nx, &x, &ny, &tail) == 3 && x == 'x' &&
                            nx > 0 && ny > 0;
            return ok ? std::string() : "grid must look like NxM";
          },
          "NxM"));
  g->add_option("--config", gen.config, "JSON config overriding the class defaults");
  g->add_option("--seed", gen.seed, "Seed for the default N-body scene search");
  g->add_option("--out", gen.out, "Output .traj path")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit a reduced linear model (.koop)");
  f->add_option("--in", fit.in, "Input .traj")->required()->check(CLI::ExistingFile);
  f->add_option("--rank", fit.rank, "Subspace dimension")->check(CLI::PositiveNumber);
  f->add_option("--energy", fit.energy, "Pick the rank capturing this singular-value energy fraction")
      ->check(CLI::Range(0.0, 1.0));
  f->add_option("--out", fit.out, "Output .koop path")->required();

  LoopArgs loop;
  auto* l = app.add_subcommand("loop", "Synthesize a cyclic loop (.cyc)");
  l->add_option("--in", loop.in, "Input .traj")->required()->check(CLI::ExistingFile);
  l->add_option("--rank", loop.rank, "Subspace dimension (default by dataset class)")->check(CLI::PositiveNumber);
  l->add_option("--energy", loop.energy, "Auto-rank: singular-value energy fraction")->check(CLI::Range(0.0, 1.0));
  l->add_option("--harmonics", loop.harmonics, "Fourier harmonics H (m = 2H)")->check(CLI::PositiveNumber);
  l->add_option("--w-red", loop.w_red, "Fidelity weight")->check(CLI::NonNegativeNumber);
  l->add_option("--w-u", loop.w_u, "Control weight")->check(CLI::NonNegativeNumber);
  l->add_option("--control-energy", loop.control_energy, "Control regularizer")
      ->check(CLI::IsMember({"gram", "identity"}));
  l->add_flag("--full-space", loop.full_space, "Solve with the dense full-state operator");
  l->add_flag("--no-frames", loop.no_frames, "Do not store lifted frames in the .cyc");
  l->add_option("--out", loop.out, "Output .cyc path")->required();
  l->add_option("--metrics", loop.metrics, "Write metrics JSON here");
  l->add_option("--csv", loop.csv, "Write per-frame CSV here");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compare a loop against its source trajectory");
  e->add_option("trajectory", ev.traj, "Source .traj")->required()->check(CLI::ExistingFile);
  e->add_option("loop", ev.loop, "Loop .cyc (or a .traj holding loop frames)")->required()->check(CLI::ExistingFile);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Start the HTTP edit service");
  s->add_option("--host", serve.host, "Bind address");
  s->add_option("--port", serve.port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  s->add_option("--model-dir", serve.model_dir, "Directory of .traj files sessions may name");
  s->add_option("--snapshot-dir", serve.snapshot_dir, "Write/restore session edit logs here");
  s->add_option("--threads", serve.threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*f) return cmd_fit(fit);
    if (*l) return cmd_loop(loop);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_serve(serve);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
