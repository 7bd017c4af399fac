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

// Modified (proximal) DH kinematics over the spanning tree of a RobotModel.

#ifndef DYNIDENT_KINEMATICS_HPP_
#define DYNIDENT_KINEMATICS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/model.hpp"

namespace dynident {

struct FramePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  FramePose operator*(const FramePose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  FramePose inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -rt * translation};
  }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

// T = RotX(alpha_prev) * TransX(a_prev) * RotZ(theta) * TransZ(d).
inline FramePose dh_transform(double a_prev, double alpha_prev, double d, double theta) {
  const double ca = std::cos(alpha_prev), sa = std::sin(alpha_prev);
  const double ct = std::cos(theta), st = std::sin(theta);
  FramePose t;
  t.rotation << ct, -st, 0.0,
                st * ca, ct * ca, -sa,
                st * sa, ct * sa, ca;
  t.translation << a_prev, -sa * d, ca * d;
  return t;
}

struct CoordinateState {
  Vector q_m, dq_m, ddq_m;
  Vector q_c, dq_c, ddq_c;
};

inline CoordinateState expand_coordinates(const RobotModel& model, const Vector& q_m,
                                          const Vector& dq_m, const Vector& ddq_m) {
  const int nm = model.motor_count();
  if (q_m.size() != nm || dq_m.size() != nm || ddq_m.size() != nm) {
    throw ValidationError("expand_coordinates: expected " + std::to_string(nm) + " motor coordinates");
  }
  const auto& cp = model.coupling;
  CoordinateState s;
  s.q_m = q_m;
  s.dq_m = dq_m;
  s.ddq_m = ddq_m;
  s.q_c = cp.E * q_m + cp.e0;
  s.dq_c = cp.E * dq_m;
  s.ddq_c = cp.E * ddq_m;
  return s;
}

// Value of joint j's coordinate (without the constant DH part).
inline double joint_coordinate(const RobotModel& model, int j, const Vector& q_c) {
  return model.resolved[j].coordinate_c.dot(q_c);
}

inline FramePose joint_transform(const RobotModel& model, int j, double coordinate) {
  const auto& js = model.joints[j];
  double d = js.d, theta = js.theta;
  if (js.kind == JointKind::kRevolute) theta += coordinate;
  if (js.kind == JointKind::kPrismatic) d += coordinate;
  return dh_transform(js.a_prev, js.alpha_prev, d, theta);
}

// World pose of every joint frame. Bodies outside the tree get the identity.
inline std::vector<FramePose> frame_positions(const RobotModel& model, const Vector& q_c) {
  std::vector<FramePose> poses(model.joints.size());
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const int parent = model.resolved[j].parent;
    if (parent == ResolvedJoint::kDetached) continue;
    const FramePose local = joint_transform(model, static_cast<int>(j),
                                            joint_coordinate(model, static_cast<int>(j), q_c));
    poses[j] = parent < 0 ? local : poses[parent] * local;
  }
  return poses;
}

// Motion of one link frame: world pose plus angular velocity, angular
// acceleration and origin acceleration (gravity folded in as a base
// acceleration of -g), all expressed in the link frame.
struct LinkMotion {
  FramePose pose;
  Vec3 omega = Vec3::Zero();
  Vec3 domega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

// Outward Newton-Euler recursion over the spanning tree. Branches are
// visited in declaration order, which finalize_model guarantees is
// topological.
inline std::vector<LinkMotion> propagate_motion(const RobotModel& model, const CoordinateState& s) {
  std::vector<LinkMotion> out(model.joints.size());
  LinkMotion base;
  base.accel = -model.gravity;
  const Vec3 z = Vec3::UnitZ();
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const int parent = model.resolved[j].parent;
    if (parent == ResolvedJoint::kDetached) continue;
    const LinkMotion& p = parent < 0 ? base : out[parent];
    const auto& rj = model.resolved[j];
    const double v = rj.coordinate_c.dot(s.dq_c);
    const double acc = rj.coordinate_c.dot(s.ddq_c);
    const FramePose local = joint_transform(model, static_cast<int>(j), rj.coordinate_c.dot(s.q_c));
    const Mat3 rt = local.rotation.transpose();
    const Vec3& r = local.translation;

    LinkMotion& m = out[j];
    m.pose = parent < 0 ? local : p.pose * local;
    const Vec3 w_in = rt * p.omega;
    m.accel = rt * (p.domega.cross(r) + p.omega.cross(p.omega.cross(r)) + p.accel);
    switch (model.joints[j].kind) {
      case JointKind::kRevolute:
        m.omega = w_in + v * z;
        m.domega = rt * p.domega + w_in.cross(v * z) + acc * z;
        break;
      case JointKind::kPrismatic:
        m.omega = w_in;
        m.domega = rt * p.domega;
        m.accel += 2.0 * m.omega.cross(v * z) + acc * z;
        break;
      case JointKind::kFixed:
        m.omega = w_in;
        m.domega = rt * p.domega;
        break;
    }
  }
  return out;
}

}  // namespace dynident

#endif  // DYNIDENT_KINEMATICS_HPP_
