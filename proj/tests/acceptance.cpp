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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "dynident/dynident.hpp"

namespace {

using namespace dynident;

std::string model_path(const std::string& name) { return std::string(DYNIDENT_MODEL_DIR) + "/" + name; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " | " << detail << std::endl;
}

// Numeric rank by SVD with the usual relative tolerance.
int svd_rank(const Matrix& W) {
  Eigen::BDCSVD<Matrix> svd(W);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol = s(0) * static_cast<double>(std::max(W.rows(), W.cols())) * 100.0 *
                     std::numeric_limits<double>::epsilon();
  return static_cast<int>((s.array() > tol).count());
}

RobotModel planar_2r() {
  return parse_model_text(R"({
    "schema": 1, "name": "planar 2R", "gravity": [0, 0, -9.81],
    "motors": ["qm1", "qm2"],
    "coordinates": [{"name": "q1", "terms": {"qm1": 1.0}}, {"name": "q2", "terms": {"qm2": 1.0}}],
    "basis": ["q1", "q2"],
    "joints": [
      {"name": "1", "type": "revolute", "parent": "base", "a": 0, "alpha": "90 deg", "d": 0, "theta": 0,
       "coordinate": {"q1": 1.0}, "link_inertia": true},
      {"name": "2", "type": "revolute", "parent": "1", "a": 0.4, "alpha": 0, "d": 0, "theta": 0,
       "coordinate": {"q2": 1.0}, "link_inertia": true}
    ],
    "limits": [
      {"coordinate": "q1", "q_min": -3, "q_max": 3, "dq_min": -2, "dq_max": 2},
      {"coordinate": "q2", "q_min": -3, "q_max": 3, "dq_min": -2, "dq_max": 2}
    ]
  })");
}

// ------------------------------------------------------------------ 1

void criterion_1(const std::vector<const RobotModel*>& models) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const RobotModel* m : models) {
    const ParameterLayout layout = make_layout(*m);
    std::mt19937_64 rng(101);
    const SampleSet states = random_samples(*m, 100, rng);
    for (int k = 0; k < 10; ++k) {
      const Vector delta = sample_feasible_parameters(*m, layout, 1000 + k).delta;
      for (Eigen::Index s = 0; s < states.size(); ++s) {
        const Vector q = states.q.row(s).transpose(), dq = states.dq.row(s).transpose(),
                     ddq = states.ddq.row(s).transpose();
        const Vector a = full_regressor(*m, layout, q, dq, ddq) * delta;
        const Vector b = lagrangian_oracle(*m, layout, delta, q, dq, ddq);
        worst = std::max(worst, (a - b).norm() / std::max(b.norm(), 1e-300));
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-6 && secs <= 120.0, "regressor matches Lagrangian oracle",
         "max relative discrepancy " + num(worst) + " (<= 1e-6), " + num(secs) + " s (<= 120)");
}

// ------------------------------------------------------------------ 2

void criterion_2(const std::vector<const RobotModel*>& models) {
  const RobotModel planar = planar_2r();
  std::vector<const RobotModel*> all = models;
  all.push_back(&planar);
  bool pass = true;
  std::ostringstream detail;
  for (const RobotModel* m : all) {
    const ParameterLayout layout = make_layout(*m);
    const BaseReduction red = base_reduction(*m, layout, 2000, 1);
    std::mt19937_64 rng(202);
    const int rank = svd_rank(stack_regressor(*m, layout, random_samples(*m, 10 * layout.size(), rng)));
    const SampleSet held = random_samples(*m, 100, rng);
    const Matrix W = stack_regressor(*m, layout, held);
    const Matrix Wb = red.base_regressor(W);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      std::mt19937_64 prng(300 + k);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Vector delta(layout.size());
      for (int i = 0; i < layout.size(); ++i) delta(i) = u(prng);
      const Vector full = W * delta;
      worst = std::max(worst, (full - Wb * red.base_parameters(delta)).norm() / full.norm());
    }
    pass = pass && worst <= 1e-8 && rank == red.base_count();
    detail << m->name << ": b=" << red.base_count() << " svd rank=" << rank << " residual " << num(worst) << "; ";
  }
  report(2, pass, "base reduction consistent and minimal", detail.str() + "(<= 1e-8, ranks equal)");
}

// ------------------------------------------------- shared closed-loop setup

struct Loop {
  const RobotModel* model = nullptr;
  ParameterLayout layout;
  BaseReduction red;
  FilterConfig filter;
  GroundTruth truth;
  FourierTrajectory train, test;
};

Loop make_loop(const RobotModel& m, double f_f, double cutoff, std::uint64_t seed) {
  Loop L;
  L.model = &m;
  L.layout = make_layout(m);
  L.red = base_reduction(m, L.layout, 2000, seed);
  L.filter.cutoff = cutoff;
  L.truth = sample_feasible_parameters(m, L.layout, seed);
  const BaseReduction objective = objective_reduction(m, L.layout, 2000, seed);
  DesignConfig cfg;
  cfg.f_f = f_f;
  cfg.n_h = 6;
  cfg.multistart = 2;
  cfg.max_iterations = 40;
  cfg.seed = seed;
  L.train = optimize_trajectory(m, L.layout, objective, cfg).trajectory;
  std::mt19937_64 rng(seed + 7);
  L.test = random_feasible_trajectory(m, L.layout, objective, cfg, rng);
  return L;
}

struct LoopResult {
  PredictionError error, truth_error;
  IdentifiedParameters id;
};

LoopResult run_loop(const Loop& L, double noise) {
  SimulationConfig sim;
  sim.noise_fraction = noise;
  sim.seed = 11;
  const JointLog train = process_log(simulate_log(*L.model, L.layout, L.truth, L.train, sim), L.filter);
  sim.seed = 12;
  const JointLog test = process_log(simulate_log(*L.model, L.layout, L.truth, L.test, sim), L.filter);
  const IdentificationProblem p = stack_problem(*L.model, L.layout, {train});
  LoopResult r;
  r.id = solve_feasible(p, *L.model, L.layout);
  r.error = relative_prediction_error(*L.model, L.layout, r.id.delta, test);
  r.truth_error = relative_prediction_error(*L.model, L.layout, L.truth.delta, test);
  return r;
}

// ------------------------------------------------------------------ 3

void criterion_3(const std::vector<Loop>& loops) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::ostringstream detail;
  for (const Loop& L : loops) {
    const LoopResult r = run_loop(L, 0.0);
    const double margin = r.id.margins.worst();
    pass = pass && r.error.overall <= 0.1 && margin >= -1e-9;
    detail << L.model->name << " (cutoff " << num(L.filter.cutoff) << " Hz): overall " << num(r.error.overall)
           << "% (<= 0.1), true parameters give " << num(r.truth_error.overall) << "%, worst margin " << num(margin)
           << "; ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs <= 600.0;
  report(3, pass, "noiseless closed loop", detail.str() + num(secs) + " s");
}

// ------------------------------------------------------------------ 4

void criterion_4(const Loop& mtm) {
  const LoopResult r = run_loop(mtm, 0.02);
  const double first3 = r.error.per_joint.head(3).maxCoeff();
  std::ostringstream detail;
  detail << "per joint";
  for (Eigen::Index j = 0; j < r.error.per_joint.size(); ++j) detail << ' ' << num(r.error.per_joint(j));
  detail << " %, first three max " << num(first3) << "% (<= 5), overall " << num(r.error.overall) << "% (<= 10)";
  report(4, first3 <= 5.0 && r.error.overall <= 10.0, "noisy MTM closed loop at 2% noise", detail.str());
}

// ------------------------------------------------------------------ 5

void criterion_5(const RobotModel& m) {
  const ParameterLayout layout = make_layout(m);
  const BaseReduction red = objective_reduction(m, layout, 2000, 5);
  DesignConfig cfg;
  cfg.f_f = 0.1;
  cfg.n_h = 6;
  cfg.multistart = 8;
  cfg.seed = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const DesignResult res = optimize_trajectory(m, layout, red, cfg);
  const double secs = seconds_since(t0);
  const int grid = std::max(100, 20 * cfg.n_h) * cfg.check_factor;
  const bool feasible = check_constraints(m, res.trajectory, grid).feasible();
  std::mt19937_64 rng(55);
  std::vector<double> random;
  for (int i = 0; i < 100; ++i) {
    random.push_back(condition_objective(m, layout, red, random_feasible_trajectory(m, layout, red, cfg, rng),
                                         cfg.sample_count));
  }
  std::sort(random.begin(), random.end());
  const double median = 0.5 * (random[49] + random[50]);
  const bool pass = feasible && res.condition <= 1000.0 && res.condition * 5.0 <= median;
  report(5, pass, "MTM excitation design (n_H 6, f_f 0.1 Hz)",
         "cond " + num(res.condition) + " (<= 1000), random median " + num(median) + " (ratio " +
             num(median / res.condition) + ", >= 5), feasible " + (feasible ? "yes" : "no") + ", " + num(secs) +
             " s; reference value 211");
}

// ------------------------------------------------------------------ 6

void criterion_6(const RobotModel& mtm) {
  const double fs = 200.0, cutoff = 1.8, w = 2.0 * kPi * cutoff / 10.0;
  const Eigen::Index n = 8000;
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = std::sin(w * static_cast<double>(i) / fs);
  const Vector y = butterworth_zero_phase(x, fs, cutoff, 6);
  const Eigen::Index lo = n / 4, m = n / 2;
  Matrix A(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = static_cast<double>(lo + i) / fs;
    A(i, 0) = std::sin(w * t);
    A(i, 1) = std::cos(w * t);
  }
  const Vector c = A.colPivHouseholderQr().solve(Vector(y.segment(lo, m)));
  const double amp_err = std::abs(std::hypot(c(0), c(1)) - 1.0);
  const double phase = std::abs(std::atan2(c(1), c(0)));

  Vector quad(200);
  for (Eigen::Index i = 0; i < quad.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    quad(i) = 1.5 * t * t - 0.3 * t + 0.2;
  }
  const Vector d = differentiate(quad, fs);
  double diff_err = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) diff_err = std::max(diff_err, std::abs(d(i) - (3.0 * static_cast<double>(i) / fs - 0.3)));

  // Processed accelerations of a synthetic MTM log against the trajectory.
  const ParameterLayout layout = make_layout(mtm);
  const BaseReduction red = objective_reduction(mtm, layout, 300, 6);
  DesignConfig cfg;
  cfg.n_h = 3;
  std::mt19937_64 rng(6);
  const FourierTrajectory traj = random_feasible_trajectory(mtm, layout, red, cfg, rng);
  SimulationConfig sim;
  const JointLog p = process_log(simulate_log(mtm, layout, sample_feasible_parameters(mtm, layout, 6), traj, sim),
                                 FilterConfig{});
  const Eigen::Index a = p.size() / 4, k = p.size() / 2;
  double num_sq = 0.0, den_sq = 0.0;
  for (Eigen::Index i = a; i < a + k; ++i) {
    const Vector truth = eval_trajectory(traj, p.t(i)).ddq;
    num_sq += (p.ddq.row(i).transpose() - truth).squaredNorm();
    den_sq += truth.squaredNorm();
  }
  const double acc_err = std::sqrt(num_sq / den_sq);
  report(6, amp_err <= 5e-3 && phase <= 1e-3 && diff_err <= 1e-10 && acc_err <= 0.01, "signal pipeline",
         "amplitude error " + num(amp_err) + " (<= 0.005), phase " + num(phase) + " rad (<= 1e-3), quadratic derivative " +
             num(diff_err) + " (<= 1e-10), mid-band acceleration RMS " + num(acc_err) + " (<= 0.01)");
}

// ------------------------------------------------------------------ 7

void criterion_7(const RobotModel& mtm, const RobotModel& psm) {
  double coupling = 0.0;
  bool printed = true;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const RobotModel* m : {&mtm, &psm}) {
    for (const auto& b : m->coupling.blocks) {
      const auto lu = b.matrix.fullPivLu();
      for (int k = 0; k < 100; ++k) {
        Vector q(b.matrix.cols());
        for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = u(rng);
        coupling = std::max(coupling, (lu.solve(Vector(b.matrix * q)) - q).cwiseAbs().maxCoeff());
      }
    }
  }
  Matrix mtm_expected(3, 3), psm_expected(3, 3);
  mtm_expected << 1, 0, 0, -1, 1, 0, 0.6697, -0.6697, 1;
  psm_expected << 1.0186, 0, 0, -0.8306, 0.6089, 0.6089, 0, -1.2177, 1.2177;
  printed = mtm.coupling.blocks.size() == 1 && psm.coupling.blocks.size() == 1 &&
            mtm.coupling.blocks[0].matrix == mtm_expected && psm.coupling.blocks[0].matrix == psm_expected;

  double parallel = 0.0;
  const Box3 hull{Vec3(-0.2, -0.2, -0.2), Vec3(0.2, 0.2, 0.2)};
  for (int k = 0; k < 100; ++k) {
    const Vector10 d = random_link(hull, TruthRanges{}, rng, "link");
    const auto st = recover_standard(d);
    parallel = st ? std::max(parallel, (to_barycentric(*st) - d).cwiseAbs().maxCoeff()) : 1.0;
  }

  const std::vector<double> poly{0.012, -0.03, 0.008, 0.004, -0.002, -0.001, 0.0005, 0.0003};
  const Vector q = Vector::LinSpaced(300, -1.2, 1.2);
  Vector p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    double acc = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = acc * q(i) + *it;
    p(i) = acc;
  }
  const double fc = 0.05;
  const CableSpec fit = fit_cable_polynomial(q, Vector(p.array() + fc), Vector(p.array() - fc), 7);
  double cable = 0.0;
  for (int k = 0; k < 8; ++k) cable = std::max(cable, std::abs(fit.coefficients[k] - poly[k]));

  report(7, printed && coupling <= 1e-12 && parallel <= 1e-12 && cable <= 1e-9, "structural checks",
         std::string("printed coupling matrices ") + (printed ? "match" : "differ") + ", round trip " + num(coupling) +
             " (<= 1e-12), parallel axis " + num(parallel) + " (<= 1e-12), cable coefficients " + num(cable) +
             " (<= 1e-9)");
}

// ------------------------------------------------------------------ 8

void criterion_8(const RobotModel& m) {
  const ParameterLayout layout = make_layout(m);
  Vector delta = sample_feasible_parameters(m, layout, 8).delta;
  // Break the triangle inequality on link 2, push link 3's COM out of its
  // hull and make one Coulomb coefficient negative.
  const int s2 = layout.inertial[m.joint_index("2")];
  delta(s2 + 0) += 0.5;
  const int s3 = layout.inertial[m.joint_index("3")];
  const auto& hull = m.resolved[m.joint_index("3")].com_hull;
  delta(s3 + 6) = delta(s3 + 9) * (hull.upper(0) + 0.2);
  delta(layout.coulomb[m.joint_index("1")]) = -0.01;
  const FeasibilityMargins truth_margins = feasibility_margins(m, layout, delta);

  const BaseReduction objective = objective_reduction(m, layout, 500, 8);
  DesignConfig cfg;
  std::mt19937_64 rng(8);
  const FourierTrajectory traj = random_feasible_trajectory(m, layout, objective, cfg, rng);
  GroundTruth truth;
  truth.delta = delta;
  const JointLog log = process_log(simulate_log(m, layout, truth, traj, SimulationConfig{}), FilterConfig{});
  const IdentificationProblem p = stack_problem(m, layout, {log});
  const BaseReduction red = base_reduction(m, layout, 2000, 8);
  const BaseEstimate ols = solve_ols_base(p, red);
  const IdentifiedParameters id = solve_feasible(p, m, layout);
  const double worst = id.margins.worst();
  report(8, worst >= -1e-9 && id.residual >= ols.residual, "feasibility projection of infeasible data",
         "generating parameters' worst margin " + num(truth_margins.worst()) + ", solution worst margin " + num(worst) +
             " (>= -1e-9), residual " + num(id.residual) + " vs OLS " + num(ols.residual));
}

}  // namespace

int main() {
  try {
    const RobotModel mtm = load_model(model_path("mtm.model"));
    const RobotModel psm = load_model(model_path("psm.model"));
    criterion_1({&mtm, &psm});
    criterion_2({&mtm, &psm});
    const std::vector<Loop> loops{make_loop(mtm, 0.1, 1.8, 3), make_loop(psm, 0.18, 5.4, 3)};
    criterion_3(loops);
    criterion_4(loops[0]);
    criterion_5(mtm);
    criterion_6(mtm);
    criterion_7(mtm, psm);
    criterion_8(mtm);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
