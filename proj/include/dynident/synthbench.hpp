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

// Synthetic bench standing in for the hardware: random physically feasible
// parameters, simulated torque logs, and a Lagrangian torque oracle that
// shares nothing with the Newton-Euler regressor except forward kinematics.

#ifndef DYNIDENT_SYNTHBENCH_HPP_
#define DYNIDENT_SYNTHBENCH_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/excitation.hpp"
#include "dynident/kinematics.hpp"
#include "dynident/model.hpp"
#include "dynident/parameters.hpp"
#include "dynident/regressor.hpp"
#include "dynident/signals.hpp"

namespace dynident {

namespace oracle {

// World-frame geometric Jacobian of every tree link, 6 x n_m: rows 0-2 the
// origin velocity, rows 3-5 the angular velocity.
inline std::vector<Matrix> link_jacobians(const RobotModel& model, const std::vector<FramePose>& poses) {
  const int nm = model.motor_count();
  std::vector<Matrix> J(model.joints.size());
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    J[k] = Matrix::Zero(6, nm);
    if (!model.in_tree(static_cast<int>(k))) continue;
    for (int j = static_cast<int>(k); j >= 0; j = model.resolved[j].parent) {
      const auto kind = model.joints[j].kind;
      if (kind == JointKind::kFixed) continue;
      const Vec3 z = poses[j].rotation.col(2);
      const Eigen::RowVectorXd g = model.resolved[j].gradient.transpose();
      if (kind == JointKind::kRevolute) {
        J[k].topRows<3>() += z.cross(poses[k].translation - poses[j].translation) * g;
        J[k].bottomRows<3>() += z * g;
      } else {
        J[k].topRows<3>() += z * g;
      }
    }
  }
  return J;
}

inline Vector q_complete(const RobotModel& model, const Vector& q_m) {
  return model.coupling.E * q_m + model.coupling.e0;
}

// Joint-space mass matrix of the link inertias, M(q) = sum J^T G J with the
// spatial inertia G about each link origin rotated into the world frame.
inline Matrix mass_matrix(const RobotModel& model, const ParameterLayout& layout, const Vector& delta,
                          const Vector& q_m) {
  const auto poses = frame_positions(model, q_complete(model, q_m));
  const auto J = link_jacobians(model, poses);
  const int nm = model.motor_count();
  Matrix M = Matrix::Zero(nm, nm);
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    if (layout.inertial[k] < 0) continue;
    const Vector10 d = link_block(layout, delta, static_cast<int>(k));
    const Mat3& R = poses[k].rotation;
    const Vec3 l = R * d.segment<3>(6);
    Eigen::Matrix<double, 6, 6> G;
    G.topLeftCorner<3, 3>() = d(9) * Mat3::Identity();
    G.topRightCorner<3, 3>() = skew(l).transpose();
    G.bottomLeftCorner<3, 3>() = skew(l);
    G.bottomRightCorner<3, 3>() = R * inertia_matrix(d) * R.transpose();
    M += J[k].transpose() * G * J[k];
  }
  return M;
}

inline double kinetic_energy(const RobotModel& model, const ParameterLayout& layout, const Vector& delta,
                             const Vector& q_m, const Vector& dq_m) {
  return 0.5 * dq_m.dot(mass_matrix(model, layout, delta, q_m) * dq_m);
}

inline double potential_energy(const RobotModel& model, const ParameterLayout& layout, const Vector& delta,
                               const Vector& q_m) {
  const auto poses = frame_positions(model, q_complete(model, q_m));
  double p = 0.0;
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    if (layout.inertial[k] < 0) continue;
    const Vector10 d = link_block(layout, delta, static_cast<int>(k));
    p -= d(9) * model.gravity.dot(poses[k].translation) + model.gravity.dot(poses[k].rotation * d.segment<3>(6));
  }
  return p;
}

// Unit-stiffness spring energy whose negative gradient is the torque
// convention of the regressor's prolongation.
inline double spring_energy(const SpringSpec& spring, double q) {
  if (spring.kind == SpringKind::kTorsional) return 0.5 * q * q;
  const double ls = std::sqrt(spring.h_s * spring.h_s + spring.r_s * spring.r_s -
                              2.0 * spring.h_s * spring.r_s * std::cos(kPi + spring.q_o - q));
  return 0.5 * (ls - spring.l_r) * (ls - spring.l_r);
}

inline constexpr double kStep = 1e-6;

// Central difference with one level of Richardson extrapolation.
template <class F>
double derivative(const F& f, double h = kStep) {
  const double d1 = (f(h) - f(-h)) / (2.0 * h);
  const double d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace oracle

// tau = d/dt(dK/d dq) - dK/dq + dP/dq with every derivative taken
// numerically, plus friction, rotor inertia and springs in closed form.
inline Vector lagrangian_oracle(const RobotModel& model, const ParameterLayout& layout, const Vector& delta,
                                const Vector& q_m, const Vector& dq_m, const Vector& ddq_m) {
  const int nm = model.motor_count();
  if (q_m.size() != nm || dq_m.size() != nm || ddq_m.size() != nm || delta.size() != layout.size()) {
    throw ValidationError("lagrangian_oracle: dimension mismatch");
  }
  using oracle::derivative;
  const Matrix M = oracle::mass_matrix(model, layout, delta, q_m);
  // d/dt (M dq) = M ddq + (dM/dt) dq, dM/dt along the motion direction.
  const Vector mdot_dq = [&] {
    Vector out(nm);
    for (int i = 0; i < nm; ++i) {
      out(i) = derivative([&](double h) {
        return (oracle::mass_matrix(model, layout, delta, q_m + h * dq_m) * dq_m)(i);
      });
    }
    return out;
  }();
  Vector tau = M * ddq_m + mdot_dq;
  for (int i = 0; i < nm; ++i) {
    const Vector e = Vector::Unit(nm, i);
    tau(i) -= derivative([&](double h) { return oracle::kinetic_energy(model, layout, delta, q_m + h * e, dq_m); });
    tau(i) += derivative([&](double h) { return oracle::potential_energy(model, layout, delta, q_m + h * e); });
  }

  const Vector q_c = oracle::q_complete(model, q_m);
  const Vector dq_c = model.coupling.E * dq_m;
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const auto& rj = model.resolved[j];
    // Generalized force of a joint-coordinate torque: dq_j/dq_m = E^T row.
    const Vector proj = model.coupling.E.transpose() * rj.coordinate_c;
    if (layout.viscous[j] >= 0) {
      const double v = rj.coordinate_c.dot(dq_c);
      const double f = delta(layout.viscous[j]) * v + delta(layout.coulomb[j]) * sign_of(v) +
                       delta(layout.offset[j]);
      tau += proj * f;
    }
    if (layout.motor_inertia[j] >= 0) tau(rj.motor) += delta(layout.motor_inertia[j]) * ddq_m(rj.motor);
    if (layout.stiffness[j] >= 0) {
      const auto& spring = model.springs[rj.spring];
      const double q = rj.coordinate_c.dot(q_c);
      const double force = -derivative([&](double h) { return oracle::spring_energy(spring, q + h); });
      tau += proj * delta(layout.stiffness[j]) * force;
    }
  }
  return tau;
}

struct GroundTruth {
  Vector delta;
  std::uint64_t seed = 0;
  double noise_sigma_fraction = 0.0;
};

// Ranges the bench draws from.
struct TruthRanges {
  double mass_lo = 0.1, mass_hi = 5.0;
  double inertia_lo = 1e-4, inertia_hi = 1e-1;
  double hull_shrink = 0.1;  // fraction of each hull side kept clear
  double viscous_lo = 0.005, viscous_hi = 0.05;
  double coulomb_lo = 0.002, coulomb_hi = 0.02;
  double offset_abs = 0.02;
  double rotor_lo = 1e-4, rotor_hi = 1e-2;
  double extension_lo = 100.0, extension_hi = 1000.0;
  double torsional_lo = 0.01, torsional_hi = 0.1;
};

inline constexpr double kTruthMargin = 1e-6;

// Uniform rotation from the QR of a Gaussian matrix.
template <class Rng>
Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i) = gauss(rng);
  Eigen::HouseholderQR<Mat3> qr(a);
  Mat3 q = qr.householderQ();
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return q;
}

template <class Rng>
Vector10 random_link(const Box3& hull, const TruthRanges& ranges, Rng& rng, const std::string& name) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(rng)); };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    LinkInertial link;
    link.mass = ranges.mass_lo + (ranges.mass_hi - ranges.mass_lo) * unit(rng);
    for (int k = 0; k < 3; ++k) {
      const double side = hull.upper(k) - hull.lower(k);
      const double lo = hull.lower(k) + ranges.hull_shrink * side;
      link.com(k) = lo + (1.0 - 2.0 * ranges.hull_shrink) * side * unit(rng);
    }
    Vec3 lam(log_uniform(ranges.inertia_lo, ranges.inertia_hi), log_uniform(ranges.inertia_lo, ranges.inertia_hi),
             log_uniform(ranges.inertia_lo, ranges.inertia_hi));
    if (lam(0) + lam(1) <= lam(2) || lam(1) + lam(2) <= lam(0) || lam(0) + lam(2) <= lam(1)) continue;
    const Mat3 Q = random_rotation(rng);
    link.inertia_com = Q * lam.asDiagonal() * Q.transpose();
    const Vector10 d = to_barycentric(link);
    if (min_eigenvalue(pseudo_inertia(d)) >= kTruthMargin) return d;
  }
  throw NumericError("could not draw feasible inertia for link '" + name + "'");
}

inline GroundTruth sample_feasible_parameters(const RobotModel& model, const ParameterLayout& layout,
                                              std::uint64_t seed, const TruthRanges& ranges = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  GroundTruth truth;
  truth.seed = seed;
  truth.delta = Vector::Zero(layout.size());
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.inertial[j] >= 0) {
      truth.delta.segment<10>(layout.inertial[j]) =
          random_link(model.resolved[j].com_hull, ranges, rng, model.joints[j].name);
    }
    if (layout.viscous[j] >= 0) {
      truth.delta(layout.viscous[j]) = uniform(ranges.viscous_lo, ranges.viscous_hi);
      truth.delta(layout.coulomb[j]) = uniform(ranges.coulomb_lo, ranges.coulomb_hi);
      truth.delta(layout.offset[j]) = uniform(-ranges.offset_abs, ranges.offset_abs);
    }
    if (layout.motor_inertia[j] >= 0) truth.delta(layout.motor_inertia[j]) = uniform(ranges.rotor_lo, ranges.rotor_hi);
    if (layout.stiffness[j] >= 0) {
      const bool ext = model.springs[model.resolved[j].spring].kind == SpringKind::kExtension;
      truth.delta(layout.stiffness[j]) =
          ext ? uniform(ranges.extension_lo, ranges.extension_hi) : uniform(ranges.torsional_lo, ranges.torsional_hi);
    }
  }
  return truth;
}

struct SimulationConfig {
  double rate = 200.0;
  double duration = 0.0;  // 0: use the trajectory's duration
  double noise_fraction = 0.0;
  double position_noise = 0.0;  // absolute sigma on q, off by default
  std::uint64_t seed = 0;
};

// Noise for one sample comes from its own generator seeded by (seed,
// sample index), so logs do not depend on evaluation order.
inline std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t sample, std::uint64_t channel) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32),
                    static_cast<std::uint32_t>(channel)};
  return std::mt19937_64(seq);
}

inline JointLog simulate_log(const RobotModel& model, const ParameterLayout& layout, const GroundTruth& truth,
                             const FourierTrajectory& traj, const SimulationConfig& config) {
  validate_trajectory(traj);
  const int nm = model.motor_count();
  if (traj.joints() != nm) {
    throw ValidationError("trajectory has " + std::to_string(traj.joints()) + " joints, model has " +
                          std::to_string(nm) + " motors");
  }
  if (truth.delta.size() != layout.size()) throw ValidationError("ground truth does not match the model parameters");
  if (!(config.rate > 0.0)) throw ValidationError("rate must be positive");
  const double duration = config.duration > 0.0 ? config.duration : traj.duration;
  const auto count = static_cast<Eigen::Index>(std::floor(duration * config.rate + 1e-9)) + 1;
  JointLog log;
  log.t.resize(count);
  log.q.resize(count, nm);
  log.dq.resize(count, nm);
  log.tau.resize(count, nm);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double t = static_cast<double>(r) / config.rate;
    const TrajectoryState s = eval_trajectory(traj, t);
    log.t(r) = t;
    log.q.row(r) = s.q.transpose();
    log.dq.row(r) = s.dq.transpose();
    const Vector tau = full_regressor(model, layout, s.q, s.dq, s.ddq) * truth.delta + cable_torque(model, s.q);
    log.tau.row(r) = tau.transpose();
  });
  if (config.noise_fraction > 0.0) {
    const Vector range = log.tau.colwise().maxCoeff() - log.tau.colwise().minCoeff();
    const Vector sigma = config.noise_fraction * range;
    for (Eigen::Index r = 0; r < count; ++r) {
      auto rng = sample_stream(config.seed, static_cast<std::uint64_t>(r), 0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int c = 0; c < nm; ++c) log.tau(r, c) += sigma(c) * gauss(rng);
    }
  }
  if (config.position_noise > 0.0) {
    for (Eigen::Index r = 0; r < count; ++r) {
      auto rng = sample_stream(config.seed, static_cast<std::uint64_t>(r), 1);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int c = 0; c < nm; ++c) log.q(r, c) += config.position_noise * gauss(rng);
    }
  }
  return log;
}

}  // namespace dynident

#endif  // DYNIDENT_SYNTHBENCH_HPP_
