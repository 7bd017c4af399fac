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

// Standard dynamic parameter vector.
//
// Per joint k, in declaration order: the barycentric inertial block
//   (Lxx, Lxy, Lxz, Lyy, Lyz, Lzz, lx, ly, lz, m)
// when the link carries inertia, followed by whichever of
//   (Fv, Fc, Fo, Im, Ks)
// the joint's flags enable. L is the inertia about the link frame origin and
// l = m r the first moment.

#ifndef DYNIDENT_PARAMETERS_HPP_
#define DYNIDENT_PARAMETERS_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/model.hpp"

namespace dynident {

enum class ParamKind {
  kLxx, kLxy, kLxz, kLyy, kLyz, kLzz, kLx, kLy, kLz, kMass,
  kViscous, kCoulomb, kOffset, kMotorInertia, kStiffness
};

inline const char* param_symbol(ParamKind k) {
  static constexpr std::array<const char*, 15> kSymbols = {
      "Lxx", "Lxy", "Lxz", "Lyy", "Lyz", "Lzz", "lx", "ly", "lz", "m",
      "Fv", "Fc", "Fo", "Im", "Ks"};
  return kSymbols[static_cast<std::size_t>(k)];
}

struct ParameterEntry {
  int joint = -1;
  ParamKind kind = ParamKind::kMass;
};

struct ParameterLayout {
  std::vector<ParameterEntry> entries;
  // Per joint start of the 10-wide inertial block, or -1.
  std::vector<int> inertial;
  std::vector<int> viscous, coulomb, offset, motor_inertia, stiffness;

  int size() const { return static_cast<int>(entries.size()); }

  int index(int joint, ParamKind kind) const {
    for (int i = 0; i < size(); ++i) {
      if (entries[i].joint == joint && entries[i].kind == kind) return i;
    }
    return -1;
  }
};

inline ParameterLayout make_layout(const RobotModel& model) {
  ParameterLayout layout;
  const std::size_t n = model.joints.size();
  layout.inertial.assign(n, -1);
  layout.viscous.assign(n, -1);
  layout.coulomb.assign(n, -1);
  layout.offset.assign(n, -1);
  layout.motor_inertia.assign(n, -1);
  layout.stiffness.assign(n, -1);
  auto push = [&](int j, ParamKind k) {
    layout.entries.push_back({j, k});
    return layout.size() - 1;
  };
  for (std::size_t jj = 0; jj < n; ++jj) {
    const int j = static_cast<int>(jj);
    const auto& js = model.joints[jj];
    if (js.link_inertia) {
      layout.inertial[jj] = layout.size();
      for (int k = 0; k < 10; ++k) push(j, static_cast<ParamKind>(k));
    }
    if (js.friction) {
      layout.viscous[jj] = push(j, ParamKind::kViscous);
      layout.coulomb[jj] = push(j, ParamKind::kCoulomb);
      layout.offset[jj] = push(j, ParamKind::kOffset);
    }
    if (js.motor_inertia) layout.motor_inertia[jj] = push(j, ParamKind::kMotorInertia);
    if (js.spring) layout.stiffness[jj] = push(j, ParamKind::kStiffness);
  }
  return layout;
}

inline std::string param_name(const RobotModel& model, const ParameterLayout& layout, int i) {
  const auto& e = layout.entries[i];
  return model.joints[e.joint].name + "." + param_symbol(e.kind);
}

// Physical description of one rigid link, COM and inertia in the link frame.
struct LinkInertial {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia_com = Mat3::Zero();
};

inline Mat3 inertia_matrix(const Vector10& d) {
  Mat3 L;
  L << d(0), d(1), d(2),
       d(1), d(3), d(4),
       d(2), d(4), d(5);
  return L;
}

inline Vector10 to_barycentric(const LinkInertial& link) {
  const Vec3 l = link.mass * link.com;
  const Mat3 S = skew(link.com);
  const Mat3 L = link.inertia_com + link.mass * S.transpose() * S;
  Vector10 d;
  d << L(0, 0), L(0, 1), L(0, 2), L(1, 1), L(1, 2), L(2, 2), l.x(), l.y(), l.z(), link.mass;
  return d;
}

inline constexpr double kMassFloor = 1e-6;

// Inverts l = m r and the parallel-axis shift. nullopt when the mass is
// below m_floor, where r = l/m is not meaningful.
inline std::optional<LinkInertial> recover_standard(const Vector10& d, double m_floor = kMassFloor) {
  const double m = d(9);
  if (!(m >= m_floor)) return std::nullopt;
  LinkInertial link;
  link.mass = m;
  link.com = d.segment<3>(6) / m;
  const Mat3 S = skew(link.com);
  link.inertia_com = inertia_matrix(d) - m * S.transpose() * S;
  return link;
}

// Pseudo-inertia [[tr(L)/2 * 1 - L, l], [l^T, m]]; positive definite exactly
// when the link has positive mass and a physically realizable inertia.
inline Mat4 pseudo_inertia(const Vector10& d) {
  const Mat3 L = inertia_matrix(d);
  Mat4 D = Mat4::Zero();
  D.topLeftCorner<3, 3>() = 0.5 * L.trace() * Mat3::Identity() - L;
  D.topRightCorner<3, 1>() = d.segment<3>(6);
  D.bottomLeftCorner<1, 3>() = d.segment<3>(6).transpose();
  D(3, 3) = d(9);
  return D;
}

inline double min_eigenvalue(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline Vector10 link_block(const ParameterLayout& layout, const Vector& delta, int joint) {
  return delta.segment<10>(layout.inertial[joint]);
}

}  // namespace dynident

#endif  // DYNIDENT_PARAMETERS_HPP_
