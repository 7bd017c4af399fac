// Copyright 2026 The dynident Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dynident command line.
//
//   dynident model check    --model M
//   dynident traj optimize  --model M --ff 0.1 --nh 6 --out T [--log L]
//   dynident traj export    --traj T --rate 200 --out CSV
//   dynident sim generate   --model M --traj T --out LOG --truth-out P
//   dynident identify       --model M --log LOG... --out P [--metrics CSV]
//   dynident validate       --model M --params P --log LOG [--truth P*]
//
// Exit status: 0 success, 1 numeric or solver failure, 2 usage or
// validation error. Each output directory gets a manifest.json recording
// the command, options and SHA-256 of every input.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynident/dynident.hpp"

namespace fs = std::filesystem;
using namespace dynident;

namespace {

constexpr int kReductionSamples = 2000;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  Json options = Json::object();

  void option(const CLI::App& app) {
    for (const CLI::Option* opt : app.get_options()) {
      if (opt->get_name() == "--help" || opt->count() == 0) continue;
      const auto& res = opt->results();
      options[opt->get_name()] = res.size() == 1 ? Json(res[0]) : Json(res);
    }
  }

  // One entry per primary output, merged into the directory's manifest.
  void write() const {
    if (outputs.empty()) return;
    Json entry;
    entry["tool"] = "dynident";
    entry["version"] = kVersion;
    entry["command"] = command;
    entry["seed"] = seed;
    entry["options"] = options;
    Json hashes = Json::object();
    for (const auto& in : inputs) hashes[in] = sha256_file(in);
    entry["inputs"] = hashes;
    Json outs = Json::object();
    for (const auto& out : outputs) outs[out] = sha256_file(out);
    entry["outputs"] = outs;
    const fs::path dir = fs::path(outputs.front()).parent_path();
    const fs::path path = (dir.empty() ? fs::path(".") : dir) / "manifest.json";
    Json doc = Json::object();
    if (std::ifstream in{path}) {
      try {
        doc = Json::parse(in);
      } catch (const Json::parse_error&) {
        doc = Json::object();
      }
    }
    if (!doc.is_object() || !doc.contains("runs")) doc = Json{{"runs", Json::object()}};
    doc["runs"][fs::path(outputs.front()).filename().string()] = entry;
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
  }
};

void write_json(const Json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- model

int cmd_model_check(const std::string& model_path) {
  const RobotModel model = load_model(model_path);
  const CouplingReport report = validate_coupling(model);
  const ParameterLayout layout = make_layout(model);
  const BaseReduction red = base_reduction(model, layout, kReductionSamples, 0);
  std::cout << "model " << model.name << ": " << model.joints.size() << " joints, " << model.motor_count()
            << " motors, " << model.complete_count() << " complete coordinates\n";
  for (const auto& b : report.blocks) std::cout << "  coupling " << b.name << " cond " << fmt(b.condition) << "\n";
  std::cout << "  parameters " << layout.size() << ", base " << red.base_count() << "\n";
  return 0;
}

// ---------------------------------------------------------------- traj

struct OptimizeArgs {
  std::string model, out, log;
  double ff = 0.1;
  int nh = 6;
  int multistart = 8;
  int iterations = 100;
  double ramp = 5.0;
  double duration = 0.0;
};

int cmd_traj_optimize(const OptimizeArgs& a, std::uint64_t seed, Manifest& mf) {
  const RobotModel model = load_model(a.model);
  const ParameterLayout layout = make_layout(model);
  DesignConfig cfg;
  cfg.f_f = a.ff;
  cfg.n_h = a.nh;
  cfg.multistart = a.multistart;
  cfg.max_iterations = a.iterations;
  cfg.seed = seed;
  cfg.ramp_duration = a.ramp;
  cfg.duration = a.duration;
  validate_design(cfg);
  const BaseReduction red = objective_reduction(model, layout, kReductionSamples, seed);
  const DesignResult res = optimize_trajectory(model, layout, red, cfg);
  save_trajectory(res.trajectory, a.out);
  mf.inputs = {a.model};
  mf.outputs = {a.out};
  if (!a.log.empty()) {
    std::ofstream log(a.log);
    if (!log) throw ValidationError("cannot write '" + a.log + "'");
    log << "restart,stage,iteration,objective,best\n";
    for (const auto& row : res.log) {
      log << row.restart << ',' << row.stage << ',' << row.iteration << ',' << fmt(row.objective) << ','
          << fmt(row.best) << '\n';
    }
    mf.outputs.push_back(a.log);
  }
  std::cout << "cond " << fmt(res.condition) << " (restart " << res.restart << ", worst margin "
            << fmt(res.report.worst()) << ")\n";
  return 0;
}

int cmd_traj_export(const std::string& traj_path, double rate, const std::string& out_path, Manifest& mf) {
  const FourierTrajectory traj = load_trajectory(traj_path);
  if (!(rate > 0.0)) throw ValidationError("--rate must be positive");
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write '" + out_path + "'");
  const int n = traj.joints();
  out << 't';
  for (const char* p : {"q", "dq", "ddq"}) {
    for (int j = 1; j <= n; ++j) out << ',' << p << j;
  }
  out << '\n';
  const auto count = static_cast<long>(std::floor(traj.duration * rate + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / rate;
    const TrajectoryState s = eval_trajectory(traj, t);
    out << fmt(t);
    for (const Vector* v : {&s.q, &s.dq, &s.ddq}) {
      for (int j = 0; j < n; ++j) out << ',' << fmt((*v)(j));
    }
    out << '\n';
  }
  out.close();
  mf.inputs = {traj_path};
  mf.outputs = {out_path};
  return 0;
}

// ---------------------------------------------------------------- sim

struct SimArgs {
  std::string model, traj, out, truth_out;
  double rate = 200.0;
  double noise = 0.02;
  double position_noise = 0.0;
  double duration = 0.0;
};

int cmd_sim_generate(const SimArgs& a, std::uint64_t seed, Manifest& mf) {
  const RobotModel model = load_model(a.model);
  const ParameterLayout layout = make_layout(model);
  const FourierTrajectory traj = load_trajectory(a.traj);
  if (traj.joints() != model.motor_count()) {
    throw ValidationError("trajectory has " + std::to_string(traj.joints()) + " joints, model " + model.name + " has " +
                          std::to_string(model.motor_count()) + " motors");
  }
  if (a.noise < 0.0 || a.position_noise < 0.0) throw ValidationError("noise levels must be non-negative");
  const ConstraintReport rep = check_constraints(model, traj, std::max(100, 20 * traj.n_h) * 10);
  if (!rep.feasible()) {
    throw ValidationError("trajectory violates the model's constraints (worst margin " + fmt(rep.worst()) + ")");
  }
  GroundTruth truth = sample_feasible_parameters(model, layout, seed);
  truth.noise_sigma_fraction = a.noise;
  SimulationConfig cfg;
  cfg.rate = a.rate;
  cfg.duration = a.duration;
  cfg.noise_fraction = a.noise;
  cfg.position_noise = a.position_noise;
  cfg.seed = seed;
  const JointLog log = simulate_log(model, layout, truth, traj, cfg);
  write_log_csv(log, a.out);
  mf.inputs = {a.model, a.traj};
  mf.outputs = {a.out};
  if (!a.truth_out.empty()) {
    Json doc = parameters_to_json(model, layout, truth.delta);
    doc["seed"] = seed;
    doc["noise_sigma_fraction"] = a.noise;
    write_json(doc, a.truth_out);
    mf.outputs.push_back(a.truth_out);
  }
  std::cout << "wrote " << log.size() << " samples at " << fmt(a.rate) << " Hz\n";
  return 0;
}

// ---------------------------------------------------------------- identify

struct FilterArgs {
  double cutoff = 1.8;
  int order = 6;
  double ramp = 5.0;
  double tail = 1.0;

  FilterConfig config() const {
    FilterConfig c;
    c.cutoff = cutoff;
    c.order = order;
    c.ramp_duration = ramp;
    c.tail_duration = tail;
    return c;
  }
};

void add_filter_options(CLI::App* app, FilterArgs& f) {
  app->add_option("--cutoff", f.cutoff, "low-pass cutoff, Hz")->capture_default_str();
  app->add_option("--order", f.order, "Butterworth order")->capture_default_str();
  app->add_option("--ramp", f.ramp, "seconds dropped at the start")->capture_default_str();
  app->add_option("--tail", f.tail, "seconds dropped at the end")->capture_default_str();
}

struct IdentifyArgs {
  std::string model, out, metrics;
  std::vector<std::string> logs;
  std::string method = "feasible";
  FilterArgs filter;
};

int cmd_identify(const IdentifyArgs& a, std::uint64_t seed, Manifest& mf) {
  const RobotModel model = load_model(a.model);
  const ParameterLayout layout = make_layout(model);
  std::vector<JointLog> logs;
  for (const auto& path : a.logs) logs.push_back(process_log(read_log_csv(path), a.filter.config()));
  const IdentificationProblem p = stack_problem(model, layout, logs);
  mf.inputs = {a.model};
  mf.inputs.insert(mf.inputs.end(), a.logs.begin(), a.logs.end());
  mf.outputs = {a.out};

  Vector delta;
  Json doc;
  if (a.method == "ols-base") {
    const BaseReduction red = base_reduction(model, layout, kReductionSamples, seed);
    const BaseEstimate est = solve_ols_base(p, red);
    doc = base_to_json(model, layout, red, est.delta_b, kReductionSamples, seed);
    doc["diagnostics"] = {{"method", "ols-base"}, {"weighted_residual", est.residual}, {"rows", p.W.rows()}};
    delta = red.expand(est.delta_b);
    std::cout << "ols-base: " << red.base_count() << " base parameters, weighted residual " << fmt(est.residual) << "\n";
  } else {
    const IdentifiedParameters est = solve_feasible(p, model, layout);
    doc = parameters_to_json(model, layout, est.delta);
    doc["diagnostics"] = {{"method", "feasible"},
                          {"weighted_residual", est.residual},
                          {"rows", p.W.rows()},
                          {"newton_iterations", est.iterations},
                          {"duality_gap", est.gap}};
    doc["feasibility"] = margins_to_json(est.margins);
    delta = est.delta;
    std::cout << "feasible: weighted residual " << fmt(est.residual) << ", worst margin " << fmt(est.margins.worst())
              << "\n";
  }
  write_json(doc, a.out);

  if (!a.metrics.empty()) {
    const Vector r = p.W * delta - p.omega;
    std::ofstream out(a.metrics);
    if (!out) throw ValidationError("cannot write '" + a.metrics + "'");
    out << "joint,weight,rms_residual,relative_error_percent\n";
    const Eigen::Index s = p.samples();
    for (int j = 0; j < p.joints; ++j) {
      double rr = 0.0, ww = 0.0;
      for (Eigen::Index k = 0; k < s; ++k) {
        rr += r(k * p.joints + j) * r(k * p.joints + j);
        ww += p.omega(k * p.joints + j) * p.omega(k * p.joints + j);
      }
      out << model.coupling.motors[j] << ',' << fmt(p.weights(j)) << ',' << fmt(std::sqrt(rr / s)) << ','
          << fmt(ww > 0.0 ? 100.0 * std::sqrt(rr / ww) : 0.0) << '\n';
    }
    out << "overall,," << fmt(std::sqrt(r.squaredNorm() / r.size())) << ',' << fmt(100.0 * r.norm() / p.omega.norm())
        << '\n';
    mf.outputs.push_back(a.metrics);
  }
  return 0;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string model, params, log, truth, out, prediction;
  FilterArgs filter;
};

int cmd_validate(const ValidateArgs& a, std::uint64_t seed, Manifest& mf) {
  const RobotModel model = load_model(a.model);
  const ParameterLayout layout = make_layout(model);
  const Vector delta = load_parameters(model, layout, a.params);
  const JointLog test = process_log(read_log_csv(a.log), a.filter.config());
  const PredictionError err = relative_prediction_error(model, layout, delta, test);
  mf.inputs = {a.model, a.params, a.log};

  std::ostringstream table;
  table << "joint,relative_error_percent\n";
  for (int j = 0; j < model.motor_count(); ++j) table << model.coupling.motors[j] << ',' << fmt(err.per_joint(j)) << '\n';
  table << "overall," << fmt(err.overall) << '\n';
  std::cout << table.str();
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw ValidationError("cannot write '" + a.out + "'");
    out << table.str();
    mf.outputs.push_back(a.out);
  }
  if (!a.prediction.empty()) {
    std::ofstream out(a.prediction);
    if (!out) throw ValidationError("cannot write '" + a.prediction + "'");
    out << 't';
    for (const auto& m : model.coupling.motors) out << ",measured_" << m << ",predicted_" << m;
    out << '\n';
    for (Eigen::Index k = 0; k < test.size(); ++k) {
      out << fmt(test.t(k));
      for (int j = 0; j < model.motor_count(); ++j) out << ',' << fmt(err.measured(k, j)) << ',' << fmt(err.predicted(k, j));
      out << '\n';
    }
    mf.outputs.push_back(a.prediction);
  }
  if (!a.truth.empty()) {
    // Only base combinations are identifiable; compare those.
    const Vector truth = load_parameters(model, layout, a.truth);
    mf.inputs.push_back(a.truth);
    const BaseReduction red = base_reduction(model, layout, kReductionSamples, seed);
    const Vector bt = red.base_parameters(truth);
    const Vector be = red.base_parameters(delta);
    std::cout << "base parameter recovery: relative error " << fmt((be - bt).norm() / bt.norm()) << "\n";
    for (int i = 0; i < red.base_count(); ++i) {
      std::cout << "  " << param_name(model, layout, red.independent[i]) << " truth " << fmt(bt(i)) << " estimate "
                << fmt(be(i)) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynident: dynamic parameter identification for cable-driven arms"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: DYNIDENT_THREADS or all cores)");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();
  app.set_version_flag("--version", std::string(kVersion));

  std::string check_model;
  auto* model_cmd = app.add_subcommand("model", "model utilities")->require_subcommand(1);
  auto* check = model_cmd->add_subcommand("check", "parse and validate a model file");
  check->add_option("--model", check_model, "model file")->required();

  OptimizeArgs opt;
  auto* traj_cmd = app.add_subcommand("traj", "excitation trajectories")->require_subcommand(1);
  auto* optimize = traj_cmd->add_subcommand("optimize", "design an excitation trajectory");
  optimize->add_option("--model", opt.model, "model file")->required();
  optimize->add_option("--out", opt.out, "trajectory file to write")->required();
  optimize->add_option("--log", opt.log, "optimizer log CSV");
  optimize->add_option("--ff", opt.ff, "fundamental frequency, Hz")->capture_default_str();
  optimize->add_option("--nh", opt.nh, "harmonics per joint")->capture_default_str();
  optimize->add_option("--multistart", opt.multistart, "random restarts")->capture_default_str();
  optimize->add_option("--iterations", opt.iterations, "iterations per penalty stage")->capture_default_str();
  optimize->add_option("--ramp", opt.ramp, "ramp-in duration, s")->capture_default_str();
  optimize->add_option("--duration", opt.duration, "total duration, s (0: ramp plus two periods)")->capture_default_str();
  optimize->add_option("--seed", seed, "seed")->capture_default_str();

  std::string export_traj, export_out;
  double export_rate = 200.0;
  auto* exp = traj_cmd->add_subcommand("export", "sample a trajectory to CSV");
  exp->add_option("--traj", export_traj, "trajectory file")->required();
  exp->add_option("--out", export_out, "CSV to write")->required();
  exp->add_option("--rate", export_rate, "sample rate, Hz")->capture_default_str();

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("sim", "synthetic data")->require_subcommand(1);
  auto* gen = sim_cmd->add_subcommand("generate", "simulate a torque log from random ground truth");
  gen->add_option("--model", sim.model, "model file")->required();
  gen->add_option("--traj", sim.traj, "trajectory file")->required();
  gen->add_option("--out", sim.out, "log CSV to write")->required();
  gen->add_option("--truth-out", sim.truth_out, "ground-truth parameter file to write");
  gen->add_option("--rate", sim.rate, "sample rate, Hz")->capture_default_str();
  gen->add_option("--noise", sim.noise, "torque noise sigma as a fraction of each joint's range")->capture_default_str();
  gen->add_option("--position-noise", sim.position_noise, "position noise sigma")->capture_default_str();
  gen->add_option("--duration", sim.duration, "log duration, s (0: trajectory duration)")->capture_default_str();
  gen->add_option("--seed", seed, "seed")->capture_default_str();

  IdentifyArgs ident;
  auto* identify = app.add_subcommand("identify", "identify parameters from logs");
  identify->add_option("--model", ident.model, "model file")->required();
  identify->add_option("--log", ident.logs, "log CSV (repeatable)")->required();
  identify->add_option("--out", ident.out, "parameter file to write")->required();
  identify->add_option("--metrics", ident.metrics, "metrics CSV to write");
  identify->add_option("--method", ident.method, "feasible or ols-base")
      ->check(CLI::IsMember({"feasible", "ols-base"}))
      ->capture_default_str();
  add_filter_options(identify, ident.filter);
  identify->add_option("--seed", seed, "seed")->capture_default_str();

  ValidateArgs val;
  auto* validate = app.add_subcommand("validate", "prediction error on a test log");
  validate->add_option("--model", val.model, "model file")->required();
  validate->add_option("--params", val.params, "identified parameter file")->required();
  validate->add_option("--log", val.log, "test log CSV")->required();
  validate->add_option("--truth", val.truth, "ground-truth parameter file");
  validate->add_option("--out", val.out, "error table CSV to write");
  validate->add_option("--prediction", val.prediction, "measured vs predicted torque CSV to write");
  add_filter_options(validate, val.filter);
  validate->add_option("--seed", seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    Manifest mf;
    mf.seed = seed;
    int rc = 0;
    auto run = [&](CLI::App* sub, const std::string& name, auto&& fn) {
      mf.command = name;
      mf.option(app);
      mf.option(*sub);
      rc = fn();
      mf.write();
    };
    if (check->parsed()) {
      run(check, "model check", [&] { return cmd_model_check(check_model); });
    } else if (optimize->parsed()) {
      run(optimize, "traj optimize", [&] { return cmd_traj_optimize(opt, seed, mf); });
    } else if (exp->parsed()) {
      run(exp, "traj export", [&] { return cmd_traj_export(export_traj, export_rate, export_out, mf); });
    } else if (gen->parsed()) {
      run(gen, "sim generate", [&] { return cmd_sim_generate(sim, seed, mf); });
    } else if (identify->parsed()) {
      run(identify, "identify", [&] { return cmd_identify(ident, seed, mf); });
    } else if (validate->parsed()) {
      run(validate, "validate", [&] { return cmd_validate(val, seed, mf); });
    }
    return rc;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
