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

// Motor-torque regressor tau^m = H(q^m, dq^m, ddq^m) * delta and its
// reduction to base parameters.
//
// Link inertia columns come from a unit-parameter Newton-Euler pass over the
// spanning tree: every link wrench is linear in its barycentric block, and the
// tree-joint torques it induces are projected onto the motors through the
// constant gradient of each joint coordinate. Friction, spring and cable
// torques act on joint coordinates and are projected the same way.

#ifndef DYNIDENT_REGRESSOR_HPP_
#define DYNIDENT_REGRESSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/kinematics.hpp"
#include "dynident/model.hpp"
#include "dynident/parameters.hpp"

namespace dynident {

using Regressor = Matrix;

namespace detail {

// K(w) with L*w = K(w) * (Lxx, Lxy, Lxz, Lyy, Lyz, Lzz).
inline Eigen::Matrix<double, 3, 6> inertia_product(const Vec3& w) {
  Eigen::Matrix<double, 3, 6> k;
  k << w.x(), w.y(), w.z(), 0.0, 0.0, 0.0,
       0.0, w.x(), 0.0, w.y(), w.z(), 0.0,
       0.0, 0.0, w.x(), 0.0, w.y(), w.z();
  return k;
}

// Link wrench about its frame origin, in the link frame, as a linear map of
// the barycentric block: rows 0-2 force, rows 3-5 moment.
inline Eigen::Matrix<double, 6, 10> wrench_regressor(const LinkMotion& m) {
  Eigen::Matrix<double, 6, 10> y = Eigen::Matrix<double, 6, 10>::Zero();
  const Mat3 sw = skew(m.omega);
  y.block<3, 3>(0, 6) = skew(m.domega) + sw * sw;
  y.block<3, 1>(0, 9) = m.accel;
  y.block<3, 6>(3, 0) = inertia_product(m.domega) + sw * inertia_product(m.omega);
  y.block<3, 3>(3, 6) = -skew(m.accel);
  return y;
}

}  // namespace detail

namespace detail {

inline void add_inertial(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s,
                         Matrix& H) {
  const auto motion = propagate_motion(model, s);
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    const int col = layout.inertial[k];
    if (col < 0) continue;
    const auto& pk = motion[k].pose;
    const Eigen::Matrix<double, 6, 10> y = detail::wrench_regressor(motion[k]);
    const Eigen::Matrix<double, 3, 10> force = pk.rotation * y.topRows<3>();
    const Eigen::Matrix<double, 3, 10> moment = pk.rotation * y.bottomRows<3>();
    for (int j = static_cast<int>(k); j >= 0; j = model.resolved[j].parent) {
      const auto kind = model.joints[j].kind;
      if (kind == JointKind::kFixed) continue;
      const Vec3 axis = motion[j].pose.rotation.col(2);
      Eigen::Matrix<double, 1, 10> row;
      if (kind == JointKind::kRevolute) {
        const Vec3 arm = pk.translation - motion[j].pose.translation;
        row = axis.transpose() * (moment + skew(arm) * force);
      } else {
        row = axis.transpose() * force;
      }
      H.middleCols<10>(col) += model.resolved[j].gradient * row;
    }
  }
}

inline void add_friction(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s,
                         Matrix& H) {
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.viscous[j] < 0) continue;
    const auto& g = model.resolved[j].gradient;
    const double v = g.dot(s.dq_m);
    H.col(layout.viscous[j]) += g * v;
    H.col(layout.coulomb[j]) += g * sign_of(v);
    H.col(layout.offset[j]) += g;
  }
}

inline void add_motor_inertia(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s,
                              Matrix& H) {
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.motor_inertia[j] < 0) continue;
    const int m = model.resolved[j].motor;
    H(m, layout.motor_inertia[j]) += s.ddq_m(m);
  }
}

}  // namespace detail

// Equivalent prolongation of one spring at joint coordinate q.
inline double spring_prolongation(const SpringSpec& spring, double q) {
  if (spring.kind == SpringKind::kTorsional) return -q;
  const double angle = kPi + spring.q_o - q;
  const double ls2 = spring.h_s * spring.h_s + spring.r_s * spring.r_s -
                     2.0 * spring.h_s * spring.r_s * std::cos(angle);
  const double ls = std::sqrt(std::max(ls2, 0.0));
  if (!(ls > 1e-12)) {
    throw NumericError("spring on joint '" + spring.joint + "': degenerate geometry, spring length is zero");
  }
  const double moment_arm = spring.h_s * spring.r_s * std::sin(angle) / ls;
  return (ls - spring.l_r) * moment_arm;
}

namespace detail {

inline void add_spring(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s,
                       Matrix& H) {
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.stiffness[j] < 0) continue;
    const auto& rj = model.resolved[j];
    const double q = rj.coordinate_c.dot(s.q_c);
    H.col(layout.stiffness[j]) += rj.gradient * spring_prolongation(model.springs[rj.spring], q);
  }
}

}  // namespace detail

// Each contribution as a full-width matrix; columns of other kinds are zero.
inline Matrix inertial_regressor(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s) {
  Matrix H = Matrix::Zero(model.motor_count(), layout.size());
  detail::add_inertial(model, layout, s, H);
  return H;
}

inline Matrix friction_regressor(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s) {
  Matrix H = Matrix::Zero(model.motor_count(), layout.size());
  detail::add_friction(model, layout, s, H);
  return H;
}

inline Matrix motor_inertia_regressor(const RobotModel& model, const ParameterLayout& layout,
                                      const CoordinateState& s) {
  Matrix H = Matrix::Zero(model.motor_count(), layout.size());
  detail::add_motor_inertia(model, layout, s, H);
  return H;
}

inline Matrix spring_regressor(const RobotModel& model, const ParameterLayout& layout, const CoordinateState& s) {
  Matrix H = Matrix::Zero(model.motor_count(), layout.size());
  detail::add_spring(model, layout, s, H);
  return H;
}

inline double eval_polynomial(const std::vector<double>& coefficients, double x) {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// Known feedforward torque from cables; not part of delta.
inline Vector cable_torque(const RobotModel& model, const Vector& q_m) {
  Vector tau = Vector::Zero(model.motor_count());
  const Vector q_c = model.coupling.E * q_m + model.coupling.e0;
  for (const auto& cable : model.cables) {
    const int j = model.joint_index(cable.joint);
    const auto& rj = model.resolved[j];
    tau += rj.gradient * eval_polynomial(cable.coefficients, rj.coordinate_c.dot(q_c));
  }
  return tau;
}

inline Regressor full_regressor(const RobotModel& model, const ParameterLayout& layout,
                                const Vector& q_m, const Vector& dq_m, const Vector& ddq_m) {
  const CoordinateState s = expand_coordinates(model, q_m, dq_m, ddq_m);
  Matrix H = Matrix::Zero(model.motor_count(), layout.size());
  detail::add_inertial(model, layout, s, H);
  detail::add_friction(model, layout, s, H);
  detail::add_motor_inertia(model, layout, s, H);
  detail::add_spring(model, layout, s, H);
  return H;
}

inline Regressor full_regressor(const RobotModel& model, const Vector& q_m, const Vector& dq_m,
                                const Vector& ddq_m) {
  return full_regressor(model, make_layout(model), q_m, dq_m, ddq_m);
}

// Motor-space samples, one row per sample.
struct SampleSet {
  Matrix q, dq, ddq;
  Eigen::Index size() const { return q.rows(); }
};

// Stacks H over samples: rows [s * n_m, (s + 1) * n_m) belong to sample s.
inline Matrix stack_regressor(const RobotModel& model, const ParameterLayout& layout,
                              const SampleSet& samples) {
  const int nm = model.motor_count();
  Matrix W(samples.size() * nm, layout.size());
  parallel_for(static_cast<std::size_t>(samples.size()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    W.middleRows(r * nm, nm) = full_regressor(model, layout, samples.q.row(r).transpose(),
                                              samples.dq.row(r).transpose(),
                                              samples.ddq.row(r).transpose());
  });
  return W;
}

inline constexpr double kRandomAccelLimit = 10.0;

// Draws one state uniformly inside the joint limits (rejection over the
// basis box), velocities inside the velocity limits, motor accelerations in
// +-kRandomAccelLimit.
template <class Rng>
void random_state(const RobotModel& model, const BasisBox& box, Rng& rng, Vector& q_m,
                  Vector& dq_m, Vector& ddq_m) {
  const int nm = model.motor_count();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector qb(nm), dqb(nm);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (int i = 0; i < nm; ++i) {
      qb(i) = box.q_lo(i) + (box.q_hi(i) - box.q_lo(i)) * unit(rng);
      dqb(i) = box.dq_lo(i) + (box.dq_hi(i) - box.dq_lo(i)) * unit(rng);
    }
    q_m = box.motor_from_basis * (qb - box.basis_offset);
    dq_m = box.motor_from_basis * dqb;
    const auto margin = limit_margin(model, q_m, dq_m);
    if (margin.position >= 0.0 && margin.velocity >= 0.0) break;
  }
  ddq_m.resize(nm);
  for (int i = 0; i < nm; ++i) ddq_m(i) = kRandomAccelLimit * (2.0 * unit(rng) - 1.0);
}

template <class Rng>
SampleSet random_samples(const RobotModel& model, int count, Rng& rng) {
  const int nm = model.motor_count();
  const BasisBox box = basis_box(model);
  SampleSet set{Matrix(count, nm), Matrix(count, nm), Matrix(count, nm)};
  Vector q, dq, ddq;
  for (int i = 0; i < count; ++i) {
    random_state(model, box, rng, q, dq, ddq);
    set.q.row(i) = q.transpose();
    set.dq.row(i) = dq.transpose();
    set.ddq.row(i) = ddq.transpose();
  }
  return set;
}

// Base parameters delta_b = delta_I + K_d * delta_D with W_b = W(:, I), so
// that W * delta == W_b * delta_b for every delta.
struct BaseReduction {
  int parameter_count = 0;
  std::vector<int> independent;  // ascending; the columns kept in W_b
  std::vector<int> dependent;    // ascending
  Matrix regrouping;             // K_d, independent.size() x dependent.size()

  int base_count() const { return static_cast<int>(independent.size()); }

  Vector base_parameters(const Vector& delta) const {
    Vector db(base_count());
    for (int i = 0; i < base_count(); ++i) db(i) = delta(independent[i]);
    if (!dependent.empty()) {
      Vector dd(static_cast<Eigen::Index>(dependent.size()));
      for (std::size_t i = 0; i < dependent.size(); ++i) dd(static_cast<Eigen::Index>(i)) = delta(dependent[i]);
      db += regrouping * dd;
    }
    return db;
  }

  Matrix base_regressor(const Matrix& W) const {
    Matrix wb(W.rows(), base_count());
    for (int i = 0; i < base_count(); ++i) wb.col(i) = W.col(independent[i]);
    return wb;
  }

  // Embeds base parameters into a standard vector with zero dependent part.
  Vector expand(const Vector& delta_b) const {
    Vector delta = Vector::Zero(parameter_count);
    for (int i = 0; i < base_count(); ++i) delta(independent[i]) = delta_b(i);
    return delta;
  }
};

inline constexpr double kRankTolerance = 1e-10;

// QR with column pivoting on a stacked regressor. Columns whose |R_ii| falls
// below tol * max|R_ii| are expressed in terms of the independent ones.
inline BaseReduction reduce_columns(const Matrix& W, double tol = kRankTolerance) {
  BaseReduction red;
  const auto n = W.cols();
  red.parameter_count = static_cast<int>(n);
  if (n == 0) return red;
  Eigen::ColPivHouseholderQR<Matrix> qr(W);
  const Matrix R = qr.matrixR().topRows(std::min(W.rows(), n)).template triangularView<Eigen::Upper>();
  const auto& perm = qr.colsPermutation().indices();
  const Eigen::Index kmax = std::min(W.rows(), n);
  double rmax = 0.0;
  for (Eigen::Index i = 0; i < kmax; ++i) rmax = std::max(rmax, std::abs(R(i, i)));
  Eigen::Index rank = 0;
  while (rank < kmax && rmax > 0.0 && std::abs(R(rank, rank)) > tol * rmax) ++rank;

  Matrix K = Matrix::Zero(rank, n - rank);
  if (rank > 0 && n > rank) {
    K = R.topLeftCorner(rank, rank).template triangularView<Eigen::Upper>().solve(
        R.topRightCorner(rank, n - rank));
  }
  std::vector<int> ind_order(static_cast<std::size_t>(rank)), dep_order(static_cast<std::size_t>(n - rank));
  std::iota(ind_order.begin(), ind_order.end(), 0);
  std::iota(dep_order.begin(), dep_order.end(), 0);
  std::sort(ind_order.begin(), ind_order.end(), [&](int a, int b) { return perm(a) < perm(b); });
  std::sort(dep_order.begin(), dep_order.end(), [&](int a, int b) { return perm(rank + a) < perm(rank + b); });
  red.regrouping.resize(rank, n - rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    red.independent.push_back(perm(ind_order[i]));
    for (Eigen::Index j = 0; j < n - rank; ++j) red.regrouping(i, j) = K(ind_order[i], dep_order[j]);
  }
  for (Eigen::Index j = 0; j < n - rank; ++j) red.dependent.push_back(perm(rank + dep_order[j]));
  return red;
}

// Structural base parameters from `sample_count` random states.
inline BaseReduction base_reduction(const RobotModel& model, const ParameterLayout& layout,
                                    int sample_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const SampleSet samples = random_samples(model, sample_count, rng);
  return reduce_columns(stack_regressor(model, layout, samples));
}

inline BaseReduction base_reduction(const RobotModel& model, int sample_count, std::uint64_t seed) {
  return base_reduction(model, make_layout(model), sample_count, seed);
}

inline void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  if (!header.empty()) out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

// Writes the stacked regressor and the reduction (independent indices and
// K_d) for external inspection.
inline void export_reduction_csv(const RobotModel& model, const ParameterLayout& layout,
                                 const BaseReduction& red, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.precision(17);
  out << "base_index,parameter";
  for (int d : red.dependent) out << ',' << param_name(model, layout, d);
  out << '\n';
  for (int i = 0; i < red.base_count(); ++i) {
    out << red.independent[i] << ',' << param_name(model, layout, red.independent[i]);
    for (std::size_t j = 0; j < red.dependent.size(); ++j) out << ',' << red.regrouping(i, static_cast<Eigen::Index>(j));
    out << '\n';
  }
}

}  // namespace dynident

#endif  // DYNIDENT_REGRESSOR_HPP_
