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

// Fourier-series excitation trajectories: evaluation with a smooth ramp-in,
// limit/workspace checks, and the condition number of the stacked base
// regressor that trajectory design minimizes.

#ifndef DYNIDENT_EXCITATION_HPP_
#define DYNIDENT_EXCITATION_HPP_

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/kinematics.hpp"
#include "dynident/model.hpp"
#include "dynident/parameters.hpp"
#include "dynident/regressor.hpp"

namespace dynident {

// q_k(t) = q_ok + s(t) * sum_l [a_lk/(w l) sin(w l t) - b_lk/(w l) cos(w l t)]
// in motor coordinates, w = 2 pi f_f, s the ramp envelope.
struct FourierTrajectory {
  double f_f = 0.1;
  int n_h = 6;
  Vector offsets;  // q_o per motor
  Matrix a, b;     // motors x n_h
  double duration = 25.0;
  double ramp_duration = 5.0;

  int joints() const { return static_cast<int>(offsets.size()); }
  double period() const { return 1.0 / f_f; }
  double omega() const { return 2.0 * kPi * f_f; }
};

struct TrajectoryState {
  Vector q, dq, ddq;
};

// Quintic smoothstep over [0, T]: value, first and second time derivative.
struct Envelope {
  double s = 1.0, ds = 0.0, dds = 0.0;
};

inline Envelope ramp_envelope(double t, double ramp) {
  if (ramp <= 0.0 || t >= ramp) return {};
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  const double u = t / ramp;
  const double u2 = u * u, u3 = u2 * u;
  Envelope e;
  e.s = u3 * (10.0 - 15.0 * u + 6.0 * u2);
  e.ds = 30.0 * u2 * (1.0 - u) * (1.0 - u) / ramp;
  e.dds = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (ramp * ramp);
  return e;
}

// Per-harmonic basis at time t: the oscillatory part of q, dq, ddq is
// sum_l (sin_coef_l * p_l + cos_coef_l * c_l) with sin_coef = a/(w l) and
// cos_coef = b/(w l).
struct HarmonicBasis {
  Vector pos_sin, pos_cos, vel_sin, vel_cos, acc_sin, acc_cos;
};

inline HarmonicBasis harmonic_basis(double f_f, int n_h, double ramp, double t) {
  HarmonicBasis h{Vector(n_h), Vector(n_h), Vector(n_h), Vector(n_h), Vector(n_h), Vector(n_h)};
  const Envelope e = ramp_envelope(t, ramp);
  const double w = 2.0 * kPi * f_f;
  for (int l = 0; l < n_h; ++l) {
    const double wl = w * (l + 1);
    const double sn = std::sin(wl * t), cs = std::cos(wl * t);
    // s * sin and its derivatives
    h.pos_sin(l) = e.s * sn;
    h.vel_sin(l) = e.ds * sn + e.s * wl * cs;
    h.acc_sin(l) = e.dds * sn + 2.0 * e.ds * wl * cs - e.s * wl * wl * sn;
    // -s * cos and its derivatives
    h.pos_cos(l) = -e.s * cs;
    h.vel_cos(l) = -e.ds * cs + e.s * wl * sn;
    h.acc_cos(l) = -e.dds * cs + 2.0 * e.ds * wl * sn + e.s * wl * wl * cs;
  }
  return h;
}

inline TrajectoryState eval_trajectory(const FourierTrajectory& traj, double t) {
  const int n = traj.joints();
  const HarmonicBasis h = harmonic_basis(traj.f_f, traj.n_h, traj.ramp_duration, t);
  TrajectoryState s{traj.offsets, Vector::Zero(n), Vector::Zero(n)};
  const double w = traj.omega();
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < traj.n_h; ++l) {
      const double cs = traj.a(k, l) / (w * (l + 1));
      const double cc = traj.b(k, l) / (w * (l + 1));
      s.q(k) += cs * h.pos_sin(l) + cc * h.pos_cos(l);
      s.dq(k) += cs * h.vel_sin(l) + cc * h.vel_cos(l);
      s.ddq(k) += cs * h.acc_sin(l) + cc * h.acc_cos(l);
    }
  }
  return s;
}

inline FourierTrajectory zero_trajectory(int joints, double f_f, int n_h) {
  FourierTrajectory t;
  t.f_f = f_f;
  t.n_h = n_h;
  t.offsets = Vector::Zero(joints);
  t.a = Matrix::Zero(joints, n_h);
  t.b = Matrix::Zero(joints, n_h);
  t.duration = t.ramp_duration + 2.0 * t.period();
  return t;
}

inline void validate_trajectory(const FourierTrajectory& traj) {
  if (!(traj.f_f > 0.0) || !std::isfinite(traj.f_f)) throw ValidationError("trajectory.f_f: must be positive");
  if (traj.n_h < 1) throw ValidationError("trajectory.n_h: must be at least 1");
  if (traj.a.rows() != traj.joints() || traj.b.rows() != traj.joints() || traj.a.cols() != traj.n_h ||
      traj.b.cols() != traj.n_h) {
    throw ValidationError("trajectory: amplitude tables must be joints x n_h");
  }
  if (traj.ramp_duration < 0.0) throw ValidationError("trajectory.ramp_duration: must be non-negative");
  if (!(traj.duration > 0.0)) throw ValidationError("trajectory.duration: must be positive");
}

inline Json trajectory_to_json(const FourierTrajectory& traj) {
  Json doc;
  doc["schema"] = 1;
  doc["f_f"] = traj.f_f;
  doc["n_h"] = traj.n_h;
  doc["duration"] = traj.duration;
  doc["ramp_duration"] = traj.ramp_duration;
  doc["offsets"] = std::vector<double>(traj.offsets.data(), traj.offsets.data() + traj.offsets.size());
  Json a = Json::array(), b = Json::array();
  for (int k = 0; k < traj.joints(); ++k) {
    Json ra = Json::array(), rb = Json::array();
    for (int l = 0; l < traj.n_h; ++l) {
      ra.push_back(traj.a(k, l));
      rb.push_back(traj.b(k, l));
    }
    a.push_back(ra);
    b.push_back(rb);
  }
  doc["a"] = a;
  doc["b"] = b;
  return doc;
}

inline FourierTrajectory trajectory_from_json(const Json& doc) {
  try {
    FourierTrajectory t;
    t.f_f = doc.at("f_f").get<double>();
    t.n_h = doc.at("n_h").get<int>();
    t.duration = doc.at("duration").get<double>();
    t.ramp_duration = doc.value("ramp_duration", 5.0);
    const auto off = doc.at("offsets").get<std::vector<double>>();
    const int n = static_cast<int>(off.size());
    t.offsets = Eigen::Map<const Vector>(off.data(), n);
    t.a.resize(n, std::max(t.n_h, 0));
    t.b.resize(n, std::max(t.n_h, 0));
    const auto& a = doc.at("a");
    const auto& b = doc.at("b");
    if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n) {
      throw ValidationError("trajectory: amplitude tables must have one row per joint");
    }
    for (int k = 0; k < n; ++k) {
      if (static_cast<int>(a[k].size()) != t.n_h || static_cast<int>(b[k].size()) != t.n_h) {
        throw ValidationError("trajectory: amplitude rows must have n_h entries");
      }
      for (int l = 0; l < t.n_h; ++l) {
        t.a(k, l) = a[k][l].get<double>();
        t.b(k, l) = b[k][l].get<double>();
      }
    }
    validate_trajectory(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
}

inline FourierTrajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("trajectory '" + path + "': " + e.what());
  }
  return trajectory_from_json(doc);
}

inline void save_trajectory(const FourierTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trajectory '" + path + "'");
  out << trajectory_to_json(traj).dump(2) << '\n';
}

// Worst margin per constraint over the grid; negative means violated.
struct ConstraintReport {
  std::vector<double> position;   // per model.limits entry
  std::vector<double> velocity;   // per model.limits entry
  std::vector<double> workspace;  // per model.workspace entry
  int grid_points = 0;

  double worst() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto* v : {&position, &velocity, &workspace}) {
      for (double m : *v) w = std::min(w, m);
    }
    return w;
  }
  bool feasible() const { return worst() >= 0.0; }
};

// Sample times: `per_period` points across one post-ramp period plus the
// ramp itself at the same spacing.
inline std::vector<double> constraint_grid(const FourierTrajectory& traj, int per_period) {
  std::vector<double> times;
  const double step = traj.period() / per_period;
  for (double t = 0.0; t < traj.ramp_duration; t += step) times.push_back(t);
  for (int i = 0; i < per_period; ++i) times.push_back(traj.ramp_duration + i * step);
  return times;
}

inline ConstraintReport check_constraints(const RobotModel& model, const FourierTrajectory& traj,
                                          int grid_points) {
  validate_trajectory(traj);
  if (traj.joints() != model.motor_count()) {
    throw ValidationError("trajectory has " + std::to_string(traj.joints()) + " joints, model has " +
                          std::to_string(model.motor_count()) + " motors");
  }
  if (grid_points < 20 * traj.n_h) {
    throw ValidationError("check_constraints: need at least " + std::to_string(20 * traj.n_h) + " grid points per period");
  }
  const auto& cp = model.coupling;
  ConstraintReport rep;
  rep.grid_points = grid_points;
  const double inf = std::numeric_limits<double>::infinity();
  rep.position.assign(model.limits.size(), inf);
  rep.velocity.assign(model.limits.size(), inf);
  rep.workspace.assign(model.workspace.size(), inf);
  std::vector<int> rows, frames;
  for (const auto& lim : model.limits) rows.push_back(cp.index_of(lim.coordinate));
  for (const auto& ws : model.workspace) frames.push_back(model.joint_index(ws.joint));
  for (double t : constraint_grid(traj, grid_points)) {
    const TrajectoryState s = eval_trajectory(traj, t);
    for (std::size_t i = 0; i < model.limits.size(); ++i) {
      const auto& lim = model.limits[i];
      const double q = cp.E.row(rows[i]).dot(s.q) + cp.e0(rows[i]);
      const double dq = cp.E.row(rows[i]).dot(s.dq);
      rep.position[i] = std::min({rep.position[i], q - lim.q_min, lim.q_max - q});
      rep.velocity[i] = std::min({rep.velocity[i], dq - lim.dq_min, lim.dq_max - dq});
    }
    if (!model.workspace.empty()) {
      const auto poses = frame_positions(model, cp.E * s.q + cp.e0);
      for (std::size_t i = 0; i < model.workspace.size(); ++i) {
        const Vec3& p = poses[frames[i]].translation;
        const auto& box = model.workspace[i].box;
        for (int k = 0; k < 3; ++k) {
          rep.workspace[i] = std::min({rep.workspace[i], p(k) - box.lower(k), box.upper(k) - p(k)});
        }
      }
    }
  }
  return rep;
}

// Reduction used by trajectory design: columns of links flagged
// exclude_from_trajectory_objective are zeroed before the rank decision,
// so they never enter W_b.
inline BaseReduction objective_reduction(const RobotModel& model, const ParameterLayout& layout,
                                         int sample_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const SampleSet samples = random_samples(model, sample_count, rng);
  Matrix W = stack_regressor(model, layout, samples);
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (model.joints[j].exclude_from_trajectory_objective && layout.inertial[j] >= 0) {
      W.middleCols<10>(layout.inertial[j]).setZero();
    }
  }
  return reduce_columns(W);
}

inline constexpr double kConditionSingular = 1e-10;

// cond_2 of a tall matrix via QR then SVD of R; +inf when numerically
// rank deficient.
inline double condition_of(const Matrix& W) {
  if (W.cols() == 0) return 1.0;
  if (W.rows() < W.cols()) return std::numeric_limits<double>::infinity();
  Eigen::HouseholderQR<Matrix> qr(W);
  const Matrix R = qr.matrixQR().topRows(W.cols()).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(R);
  const Vector& s = svd.singularValues();
  const double smax = s(0), smin = s(s.size() - 1);
  if (!(smax > 0.0) || !(smin > kConditionSingular * smax)) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

inline std::vector<double> objective_times(const FourierTrajectory& traj, int sample_count) {
  std::vector<double> times(static_cast<std::size_t>(sample_count));
  for (int i = 0; i < sample_count; ++i) times[i] = traj.ramp_duration + traj.period() * i / sample_count;
  return times;
}

inline Matrix base_regressor_stack(const RobotModel& model, const ParameterLayout& layout,
                                   const BaseReduction& reduction, const FourierTrajectory& traj,
                                   const std::vector<double>& times) {
  const int nm = model.motor_count();
  Matrix Wb(static_cast<Eigen::Index>(times.size()) * nm, reduction.base_count());
  parallel_for(times.size(), [&](std::size_t i) {
    const TrajectoryState s = eval_trajectory(traj, times[i]);
    if (!s.q.allFinite() || !s.dq.allFinite() || !s.ddq.allFinite()) {
      throw NumericError("trajectory state is not finite at t = " + std::to_string(times[i]));
    }
    const Matrix H = full_regressor(model, layout, s.q, s.dq, s.ddq);
    for (int c = 0; c < reduction.base_count(); ++c) {
      Wb.block(static_cast<Eigen::Index>(i) * nm, c, nm, 1) = H.col(reduction.independent[c]);
    }
  });
  return Wb;
}

inline constexpr int kObjectiveSamples = 100;

inline double condition_objective(const RobotModel& model, const ParameterLayout& layout,
                                  const BaseReduction& reduction, const FourierTrajectory& traj,
                                  int sample_count = kObjectiveSamples) {
  validate_trajectory(traj);
  return condition_of(base_regressor_stack(model, layout, reduction, traj, objective_times(traj, sample_count)));
}

}  // namespace dynident

#endif  // DYNIDENT_EXCITATION_HPP_
