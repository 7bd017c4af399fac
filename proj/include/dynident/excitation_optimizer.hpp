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

// Excitation design: minimize log cond(W_b) plus an exterior penalty on
// joint, velocity and workspace limits with L-BFGS, from several random
// starts.
//
// The search runs in normalized basis coordinates. For basis coordinate i
// with span s_i and home value c_i:
//   q_b,i(t) = c_i + s_i (o_i + sum_l alpha_il p_l(t) + beta_il c_l(t))
// where p_l, c_l are the ramped sine/cosine shapes of harmonic l. The
// result is converted to a motor-space FourierTrajectory, which is linear
// in these variables.

#ifndef DYNIDENT_EXCITATION_OPTIMIZER_HPP_
#define DYNIDENT_EXCITATION_OPTIMIZER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <ceres/ceres.h>

#include "dynident/common.hpp"
#include "dynident/excitation.hpp"
#include "dynident/kinematics.hpp"
#include "dynident/model.hpp"
#include "dynident/parameters.hpp"
#include "dynident/regressor.hpp"

namespace dynident {

struct DesignConfig {
  double f_f = 0.1;
  int n_h = 6;
  int multistart = 8;
  std::uint64_t seed = 0;
  double ramp_duration = 5.0;
  double duration = 0.0;  // 0: ramp plus two periods
  int sample_count = kObjectiveSamples;
  int grid_points = 0;     // per period for the penalty; 0: max(100, 20 n_h)
  int check_factor = 10;   // final check grid = check_factor * grid_points
  double amplitude_fraction = 0.5;
  int max_iterations = 100;  // per penalty stage
  std::vector<double> penalty_weights{1e1, 1e3, 1e5};
};

struct DesignLogRow {
  int restart = 0;
  int stage = 0;
  int iteration = 0;
  double objective = 0.0;  // penalized log-condition at this iterate
  double best = std::numeric_limits<double>::infinity();  // best feasible cond so far
};

struct DesignResult {
  FourierTrajectory trajectory;
  double condition = std::numeric_limits<double>::infinity();
  ConstraintReport report;
  int restart = -1;
  std::vector<double> restart_conditions;  // per restart, +inf if infeasible
  std::vector<DesignLogRow> log;
};

inline void validate_design(const DesignConfig& c) {
  if (!(c.f_f > 0.0) || !std::isfinite(c.f_f)) throw ValidationError("f_f must be positive");
  if (c.n_h < 1) throw ValidationError("n_h must be at least 1");
  if (c.multistart < 1) throw ValidationError("multistart must be at least 1");
  if (c.sample_count < 1) throw ValidationError("sample_count must be at least 1");
  if (c.ramp_duration < 0.0) throw ValidationError("ramp duration must be non-negative");
}

inline int penalty_grid(const DesignConfig& c) {
  return c.grid_points > 0 ? c.grid_points : std::max(100, 20 * c.n_h);
}

// A configuration strictly inside every position limit, found by cyclic
// projection onto the limit slabs shrunk by `shrink` of their width. Starts
// at the centre of the basis box.
inline Vector feasible_home(const RobotModel& model, double shrink = 0.2) {
  const BasisBox box = basis_box(model);
  const auto& cp = model.coupling;
  Vector q = box.motor_from_basis * (0.5 * (box.q_lo + box.q_hi) - box.basis_offset);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    bool moved = false;
    for (const auto& lim : model.limits) {
      const int row = cp.index_of(lim.coordinate);
      const Vector e = cp.E.row(row).transpose();
      const double ee = e.squaredNorm();
      if (ee == 0.0) continue;
      const double w = lim.q_max - lim.q_min;
      const double lo = lim.q_min + shrink * w, hi = lim.q_max - shrink * w;
      const double v = e.dot(q) + cp.e0(row);
      if (v < lo - 1e-12) {
        q += (lo - v) / ee * e;
        moved = true;
      } else if (v > hi + 1e-12) {
        q += (hi - v) / ee * e;
        moved = true;
      }
    }
    if (!moved) return q;
  }
  throw ValidationError("joint limits admit no common configuration");
}

namespace design {

// Shared, read-only pieces of one design problem.
struct Setup {
  const RobotModel* model = nullptr;
  const ParameterLayout* layout = nullptr;
  const BaseReduction* reduction = nullptr;
  DesignConfig config;
  int nm = 0;
  int stride = 0;        // variables per basis coordinate: 1 + 2 n_h
  Matrix motor_from_basis;
  Vector basis_offset;
  Vector home_b;         // basis home configuration
  Vector span;           // basis spans
  FourierTrajectory shape;  // timing fields only
  std::vector<double> sample_times;
  std::vector<HarmonicBasis> sample_basis;
  std::vector<double> grid_times;
  std::vector<HarmonicBasis> grid_basis;
  std::vector<int> limit_rows;
  Matrix limit_map;      // limits x basis: d(limited coordinate)/d q_b
  std::vector<int> workspace_frames;

  int size() const { return nm * stride; }
};

inline Setup make_setup(const RobotModel& model, const ParameterLayout& layout, const BaseReduction& reduction,
                        const DesignConfig& config) {
  Setup s;
  s.model = &model;
  s.layout = &layout;
  s.reduction = &reduction;
  s.config = config;
  s.nm = model.motor_count();
  s.stride = 1 + 2 * config.n_h;
  const BasisBox box = basis_box(model);
  s.motor_from_basis = box.motor_from_basis;
  s.basis_offset = box.basis_offset;
  s.span = box.q_hi - box.q_lo;
  const Vector home_m = feasible_home(model);
  Matrix B(s.nm, s.nm);
  for (int i = 0; i < s.nm; ++i) B.row(i) = model.coupling.E.row(model.coupling.basis_selector[i]);
  s.home_b = B * home_m + s.basis_offset;
  s.shape = zero_trajectory(s.nm, config.f_f, config.n_h);
  s.shape.ramp_duration = config.ramp_duration;
  s.shape.duration = config.duration > 0.0 ? config.duration : config.ramp_duration + 2.0 * s.shape.period();
  s.sample_times = objective_times(s.shape, config.sample_count);
  for (double t : s.sample_times) s.sample_basis.push_back(harmonic_basis(config.f_f, config.n_h, config.ramp_duration, t));
  s.grid_times = constraint_grid(s.shape, penalty_grid(config));
  for (double t : s.grid_times) s.grid_basis.push_back(harmonic_basis(config.f_f, config.n_h, config.ramp_duration, t));
  s.limit_map.resize(static_cast<Eigen::Index>(model.limits.size()), s.nm);
  for (std::size_t i = 0; i < model.limits.size(); ++i) {
    const int row = model.coupling.index_of(model.limits[i].coordinate);
    s.limit_rows.push_back(row);
    s.limit_map.row(static_cast<Eigen::Index>(i)) = model.coupling.E.row(row) * s.motor_from_basis;
  }
  for (const auto& ws : model.workspace) s.workspace_frames.push_back(model.joint_index(ws.joint));
  return s;
}

inline FourierTrajectory to_trajectory(const Setup& s, const double* x) {
  FourierTrajectory t = s.shape;
  const int h = s.config.n_h;
  const double w = t.omega();
  Vector off_b(s.nm);
  Matrix a_b(s.nm, h), b_b(s.nm, h);
  for (int i = 0; i < s.nm; ++i) {
    const double* xi = x + i * s.stride;
    off_b(i) = s.home_b(i) + s.span(i) * xi[0];
    for (int l = 0; l < h; ++l) {
      a_b(i, l) = s.span(i) * xi[1 + l] * w * (l + 1);
      b_b(i, l) = s.span(i) * xi[1 + h + l] * w * (l + 1);
    }
  }
  t.offsets = s.motor_from_basis * (off_b - s.basis_offset);
  t.a = s.motor_from_basis * a_b;
  t.b = s.motor_from_basis * b_b;
  return t;
}

// Basis-space position, velocity and acceleration at one precomputed time.
inline void basis_state(const Setup& s, const double* x, const HarmonicBasis& hb, Vector& q, Vector& dq, Vector& ddq) {
  const int h = s.config.n_h;
  q.resize(s.nm);
  dq.resize(s.nm);
  ddq.resize(s.nm);
  for (int i = 0; i < s.nm; ++i) {
    const double* xi = x + i * s.stride;
    const Eigen::Map<const Vector> al(xi + 1, h), be(xi + 1 + h, h);
    q(i) = s.home_b(i) + s.span(i) * (xi[0] + al.dot(hb.pos_sin) + be.dot(hb.pos_cos));
    dq(i) = s.span(i) * (al.dot(hb.vel_sin) + be.dot(hb.vel_cos));
    ddq(i) = s.span(i) * (al.dot(hb.acc_sin) + be.dot(hb.acc_cos));
  }
}

// Adds d/dx of sum_i (gq_i q_b,i + gdq_i dq_b,i + gddq_i ddq_b,i) to grad.
inline void chain_basis(const Setup& s, const HarmonicBasis& hb, const Vector& gq, const Vector& gdq,
                        const Vector& gddq, double* grad) {
  const int h = s.config.n_h;
  for (int i = 0; i < s.nm; ++i) {
    double* gi = grad + i * s.stride;
    const double sp = s.span(i);
    gi[0] += sp * gq(i);
    for (int l = 0; l < h; ++l) {
      gi[1 + l] += sp * (gq(i) * hb.pos_sin(l) + gdq(i) * hb.vel_sin(l) + gddq(i) * hb.acc_sin(l));
      gi[1 + h + l] += sp * (gq(i) * hb.pos_cos(l) + gdq(i) * hb.vel_cos(l) + gddq(i) * hb.acc_cos(l));
    }
  }
}

inline constexpr double kSingularLogCondition = 40.0;

// log cond(W_b) and, when grad is given, its gradient.
inline double log_condition(const Setup& s, const double* x, double* grad) {
  const auto& model = *s.model;
  const auto& red = *s.reduction;
  const int nm = s.nm;
  const int b = red.base_count();
  const auto S = static_cast<Eigen::Index>(s.sample_times.size());
  std::vector<Vector> qm(static_cast<std::size_t>(S)), dqm(static_cast<std::size_t>(S)), ddqm(static_cast<std::size_t>(S));
  Matrix Wb(S * nm, b);
  Vector qb, dqb, ddqb;
  for (Eigen::Index k = 0; k < S; ++k) {
    basis_state(s, x, s.sample_basis[k], qb, dqb, ddqb);
    qm[k] = s.motor_from_basis * (qb - s.basis_offset);
    dqm[k] = s.motor_from_basis * dqb;
    ddqm[k] = s.motor_from_basis * ddqb;
    const Matrix H = full_regressor(model, *s.layout, qm[k], dqm[k], ddqm[k]);
    for (int c = 0; c < b; ++c) Wb.block(k * nm, c, nm, 1) = H.col(red.independent[c]);
  }
  if (!Wb.allFinite()) throw NumericError("trajectory design produced a non-finite regressor");
  Eigen::HouseholderQR<Matrix> qr(Wb);
  const Matrix R = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(b - 1);
  if (!(smin > kConditionSingular * smax)) return kSingularLogCondition;
  const double value = std::log(smax / smin);
  if (grad == nullptr) return value;

  Vector umax = Vector::Zero(S * nm), umin = Vector::Zero(S * nm);
  umax.head(b) = svd.matrixU().col(0);
  umin.head(b) = svd.matrixU().col(b - 1);
  umax = qr.householderQ() * umax;
  umin = qr.householderQ() * umin;
  Vector vmax = Vector::Zero(s.layout->size()), vmin = Vector::Zero(s.layout->size());
  for (int c = 0; c < b; ++c) {
    vmax(red.independent[c]) = svd.matrixV()(c, 0) / smax;
    vmin(red.independent[c]) = svd.matrixV()(c, b - 1) / smin;
  }
  for (Eigen::Index k = 0; k < S; ++k) {
    const Vector um = umax.segment(k * nm, nm), un = umin.segment(k * nm, nm);
    auto phi = [&](const Vector& q, const Vector& dq, const Vector& ddq) {
      const Matrix H = full_regressor(model, *s.layout, q, dq, ddq);
      return um.dot(H * vmax) - un.dot(H * vmin);
    };
    // Forward differences; phi is linear in ddq and smooth in q, dq away
    // from velocity sign changes.
    const double base = phi(qm[k], dqm[k], ddqm[k]);
    Vector gq(nm), gdq(nm), gddq(nm);
    for (int j = 0; j < nm; ++j) {
      const double hq = 1e-7 * std::max(1.0, std::abs(qm[k](j)));
      const double hv = 1e-7 * std::max(1.0, std::abs(dqm[k](j)));
      const Vector e = Vector::Unit(nm, j);
      gq(j) = (phi(qm[k] + hq * e, dqm[k], ddqm[k]) - base) / hq;
      gdq(j) = (phi(qm[k], dqm[k] + hv * e, ddqm[k]) - base) / hv;
      gddq(j) = phi(qm[k], dqm[k], ddqm[k] + e) - base;
    }
    // Motor gradients back to basis coordinates: q_m = M (q_b - offset).
    chain_basis(s, s.sample_basis[k], s.motor_from_basis.transpose() * gq,
                s.motor_from_basis.transpose() * gdq, s.motor_from_basis.transpose() * gddq, grad);
  }
  return value;
}

inline constexpr double kWorkspaceScale = 0.1;  // m, normalizes workspace violations

// Sum of squared normalized limit violations over the penalty grid.
inline double penalty(const Setup& s, const double* x, double* grad) {
  const auto& model = *s.model;
  const auto& cp = model.coupling;
  double p = 0.0;
  Vector qb, dqb, ddqb;
  const Vector zero = Vector::Zero(s.nm);
  for (std::size_t g = 0; g < s.grid_times.size(); ++g) {
    basis_state(s, x, s.grid_basis[g], qb, dqb, ddqb);
    Vector gq = Vector::Zero(s.nm), gdq = Vector::Zero(s.nm);
    bool touched = false;
    for (std::size_t i = 0; i < model.limits.size(); ++i) {
      const auto& lim = model.limits[i];
      const auto r = static_cast<Eigen::Index>(i);
      const double q = s.limit_map.row(r).dot(qb - s.basis_offset) + cp.e0(s.limit_rows[i]);
      const double dq = s.limit_map.row(r).dot(dqb);
      const double wq = lim.q_max - lim.q_min, wv = lim.dq_max - lim.dq_min;
      double vq = 0.0, vv = 0.0;
      if (q > lim.q_max) vq = q - lim.q_max;
      if (q < lim.q_min) vq = q - lim.q_min;
      if (dq > lim.dq_max) vv = dq - lim.dq_max;
      if (dq < lim.dq_min) vv = dq - lim.dq_min;
      if (vq != 0.0) {
        p += vq * vq / (wq * wq);
        gq += 2.0 * vq / (wq * wq) * s.limit_map.row(r).transpose();
        touched = true;
      }
      if (vv != 0.0) {
        p += vv * vv / (wv * wv);
        gdq += 2.0 * vv / (wv * wv) * s.limit_map.row(r).transpose();
        touched = true;
      }
    }
    if (!model.workspace.empty()) {
      const Vector qm = s.motor_from_basis * (qb - s.basis_offset);
      auto violation = [&](const Vector& q, Vector* per_box) {
        const auto poses = frame_positions(model, cp.E * q + cp.e0);
        double sum = 0.0;
        for (std::size_t i = 0; i < model.workspace.size(); ++i) {
          const Vec3& pos = poses[s.workspace_frames[i]].translation;
          const auto& box = model.workspace[i].box;
          for (int k = 0; k < 3; ++k) {
            double v = 0.0;
            if (pos(k) > box.upper(k)) v = pos(k) - box.upper(k);
            if (pos(k) < box.lower(k)) v = box.lower(k) - pos(k);
            sum += v * v / (kWorkspaceScale * kWorkspaceScale);
          }
        }
        if (per_box) (*per_box)(0) = sum;
        return sum;
      };
      const double v0 = violation(qm, nullptr);
      if (v0 > 0.0) {
        p += v0;
        touched = true;
        if (grad) {
          Vector gm(s.nm);
          for (int j = 0; j < s.nm; ++j) {
            const Vector e = Vector::Unit(s.nm, j);
            gm(j) = (violation(qm + 1e-7 * e, nullptr) - violation(qm - 1e-7 * e, nullptr)) / 2e-7;
          }
          gq += s.motor_from_basis.transpose() * gm;
        }
      }
    }
    if (grad && touched) chain_basis(s, s.grid_basis[g], gq, gdq, zero, grad);
  }
  return p;
}

class Objective : public ceres::FirstOrderFunction {
 public:
  Objective(const Setup& setup, double weight) : setup_(setup), weight_(weight) {}

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    try {
      std::vector<double> gc, gp;
      if (gradient) {
        gc.assign(static_cast<std::size_t>(NumParameters()), 0.0);
        gp.assign(static_cast<std::size_t>(NumParameters()), 0.0);
      }
      const double c = log_condition(setup_, x, gradient ? gc.data() : nullptr);
      const double p = penalty(setup_, x, gradient ? gp.data() : nullptr);
      *cost = c + weight_ * p;
      if (gradient) {
        for (int i = 0; i < NumParameters(); ++i) gradient[i] = gc[i] + weight_ * gp[i];
      }
      return std::isfinite(*cost);
    } catch (const NumericError&) {
      return false;
    }
  }
  int NumParameters() const override { return setup_.size(); }

 private:
  const Setup& setup_;
  double weight_;
};

class Recorder : public ceres::IterationCallback {
 public:
  Recorder(std::vector<DesignLogRow>& rows, int restart, int stage) : rows_(rows), restart_(restart), stage_(stage) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& summary) override {
    DesignLogRow row;
    row.restart = restart_;
    row.stage = stage_;
    row.iteration = summary.iteration;
    row.objective = summary.cost;
    rows_.push_back(row);
    return ceres::SOLVER_CONTINUE;
  }

 private:
  std::vector<DesignLogRow>& rows_;
  int restart_, stage_;
};

// Random start: harmonic coefficients uniform in [-1, 1], rescaled so each
// coordinate's summed amplitude is amplitude_fraction of its span; offsets
// at the home configuration.
template <class Rng>
std::vector<double> random_start(const Setup& s, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(s.size()), 0.0);
  const int h = s.config.n_h;
  for (int i = 0; i < s.nm; ++i) {
    double* xi = x.data() + i * s.stride;
    double sum = 0.0;
    for (int k = 1; k < s.stride; ++k) {
      xi[k] = unit(rng);
      sum += std::abs(xi[k]);
    }
    for (int k = 1; k < s.stride; ++k) xi[k] *= s.config.amplitude_fraction * 0.5 / sum;
  }
  (void)h;
  return x;
}

inline std::mt19937_64 restart_stream(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x5eedu};
  return std::mt19937_64(seq);
}

// Shrinks offsets toward home and amplitudes toward zero until the fine
// grid check passes. Returns false if even the home configuration fails.
inline bool repair(const Setup& s, std::vector<double>& x, ConstraintReport& report) {
  const int fine = penalty_grid(s.config) * s.config.check_factor;
  for (int attempt = 0; attempt < 200; ++attempt) {
    report = check_constraints(*s.model, to_trajectory(s, x.data()), fine);
    if (report.feasible()) return true;
    for (double& v : x) v *= 0.97;
  }
  return false;
}

}  // namespace design

// Random trajectory drawn like a restart's starting point and repaired to
// feasibility; used as the baseline the optimizer is compared against.
template <class Rng>
FourierTrajectory random_feasible_trajectory(const RobotModel& model, const ParameterLayout& layout,
                                             const BaseReduction& reduction, const DesignConfig& config, Rng& rng) {
  validate_design(config);
  const design::Setup s = design::make_setup(model, layout, reduction, config);
  std::vector<double> x = design::random_start(s, rng);
  ConstraintReport rep;
  if (!design::repair(s, x, rep)) throw NumericError("no feasible random trajectory");
  return design::to_trajectory(s, x.data());
}

inline DesignResult optimize_trajectory(const RobotModel& model, const ParameterLayout& layout,
                                        const BaseReduction& reduction, const DesignConfig& config) {
  validate_design(config);
  const design::Setup s = design::make_setup(model, layout, reduction, config);

  struct Outcome {
    std::vector<double> x;
    double condition = std::numeric_limits<double>::infinity();
    ConstraintReport report;
    std::vector<DesignLogRow> log;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(config.multistart));
  parallel_for(outcomes.size(), [&](std::size_t r) {
    auto rng = design::restart_stream(config.seed, static_cast<int>(r));
    Outcome& out = outcomes[r];
    out.x = design::random_start(s, rng);
    for (std::size_t stage = 0; stage < config.penalty_weights.size(); ++stage) {
      ceres::GradientProblem problem(new design::Objective(s, config.penalty_weights[stage]));
      ceres::GradientProblemSolver::Options options;
      options.line_search_direction_type = ceres::LBFGS;
      options.max_num_iterations = config.max_iterations;
      options.logging_type = ceres::SILENT;
      options.minimizer_progress_to_stdout = false;
      options.function_tolerance = 1e-9;
      options.gradient_tolerance = 1e-8;
      options.parameter_tolerance = 1e-10;
      design::Recorder recorder(out.log, static_cast<int>(r), static_cast<int>(stage));
      options.callbacks.push_back(&recorder);
      ceres::GradientProblemSolver::Summary summary;
      std::vector<double> trial = out.x;
      ceres::Solve(options, problem, trial.data(), &summary);
      if (std::all_of(trial.begin(), trial.end(), [](double v) { return std::isfinite(v); })) out.x = trial;
    }
    if (design::repair(s, out.x, out.report)) {
      const double lc = design::log_condition(s, out.x.data(), nullptr);
      out.condition = lc >= design::kSingularLogCondition ? std::numeric_limits<double>::infinity() : std::exp(lc);
    }
  });

  DesignResult result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    auto& out = outcomes[r];
    result.restart_conditions.push_back(out.condition);
    if (out.condition < best) {
      best = out.condition;
      result.restart = static_cast<int>(r);
      result.condition = out.condition;
      result.report = out.report;
      result.trajectory = design::to_trajectory(s, out.x.data());
    }
    for (auto& row : out.log) {
      row.best = best;
      result.log.push_back(row);
    }
    if (out.log.empty()) result.log.push_back({static_cast<int>(r), 0, 0, 0.0, best});
    else result.log.back().best = best;
  }
  if (result.restart < 0) throw NumericError("no feasible trajectory found after " + std::to_string(config.multistart) + " restarts");
  // Report the exact objective of the returned motor-space trajectory.
  result.condition = condition_objective(model, layout, reduction, result.trajectory, config.sample_count);
  return result;
}

}  // namespace dynident

#endif  // DYNIDENT_EXCITATION_OPTIMIZER_HPP_
