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

// Declarative robot description.
//
// A model is a set of named coordinates that are affine functions of the
// motor coordinates q^m, plus a tree of modified-DH joints whose variables are
// linear combinations of those coordinates. Closed chains (parallelograms,
// counterweights) are expressed as a spanning tree whose passive joints are
// tied to the basis coordinates through the coordinate expressions.
//
// File format (JSON, `schema: 1`):
//
//   motors            ordered motor coordinate names
//   coupling_blocks   [{name, inputs: [motor...], outputs: [name...], matrix}]
//                     outputs = matrix * inputs; matrix must be invertible
//   coordinates       [{name, terms: {name: coef}, offset}] in dependency order
//   basis             coordinate names forming q^b (one per motor)
//   joints            [{name, type: revolute|prismatic|fixed, parent, a, alpha,
//                      d, theta, coordinate: {name: coef}, link_inertia,
//                      motor_inertia, motor, friction, spring, com_hull,
//                      exclude_from_trajectory_objective}]
//                     parent is "base", an earlier joint, or null for bodies
//                     outside the kinematic tree (motor-side inertia/friction)
//   springs           [{kind: extension|torsional, joint, h_s, r_s, q_o, l_r}]
//   cables            [{joint, degree, coefficients}] (ascending powers)
//   limits            [{coordinate, q_min, q_max, dq_min, dq_max}]
//   workspace         [{joint, lower: [x,y,z], upper: [x,y,z]}]
//   gravity           [gx, gy, gz]
//
// Angles may be given as strings with a "deg" suffix ("-57 deg"); they are
// converted to radians at load. Everything else is SI.

#ifndef DYNIDENT_MODEL_HPP_
#define DYNIDENT_MODEL_HPP_

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynident/common.hpp"

namespace dynident {

using Json = nlohmann::ordered_json;

enum class JointKind { kRevolute, kPrismatic, kFixed };

struct LinearTerm {
  std::string coordinate;
  double coefficient = 0.0;
};
using LinearExpr = std::vector<LinearTerm>;

struct Box3 {
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Zero();
};

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::kRevolute;
  // "base", a joint declared earlier, or nullopt for a body that is not part
  // of the kinematic tree (e.g. a motor rotor or a relative-friction site).
  std::optional<std::string> parent = "base";
  double a_prev = 0.0;
  double alpha_prev = 0.0;
  double d = 0.0;      // constant part of d (the whole d for revolute joints)
  double theta = 0.0;  // constant part of theta (the whole theta for prismatic)
  LinearExpr coordinate;
  bool link_inertia = false;
  bool motor_inertia = false;
  bool friction = false;
  bool spring = false;
  std::optional<std::string> motor;  // rotor whose acceleration drives I_m
  bool exclude_from_trajectory_objective = false;
  std::optional<Box3> com_hull;
};

struct CouplingBlock {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Matrix matrix;
};

struct CoordinateDef {
  std::string name;
  LinearExpr terms;
  double offset = 0.0;
};

// Affine map q^c = E q^m + e0 from motor to complete coordinates. The
// complete vector lists the non-motor coordinates in declaration order
// followed by the motors.
struct CouplingMap {
  std::vector<std::string> motors;
  std::vector<CouplingBlock> blocks;
  std::vector<CoordinateDef> coordinates;
  std::vector<std::string> basis;

  std::vector<std::string> complete_names;
  Matrix E;
  Vector e0;
  std::vector<int> basis_selector;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < complete_names.size(); ++i) {
      if (complete_names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
  int motor_index(const std::string& name) const {
    for (std::size_t i = 0; i < motors.size(); ++i) {
      if (motors[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

enum class SpringKind { kExtension, kTorsional };

struct SpringSpec {
  SpringKind kind = SpringKind::kTorsional;
  std::string joint;
  double h_s = 0.0;
  double r_s = 0.0;
  double q_o = 0.0;
  double l_r = 0.0613;
};

struct CableSpec {
  std::string joint;
  int degree = 7;
  std::vector<double> coefficients;  // c0 + c1 q + ... + c_degree q^degree
};

struct JointLimit {
  std::string coordinate;
  double q_min = 0.0;
  double q_max = 0.0;
  double dq_min = 0.0;
  double dq_max = 0.0;
};

struct WorkspaceBox {
  std::string joint;
  Box3 box;
};

// Per-joint quantities derived once at load.
struct ResolvedJoint {
  int parent = -1;          // -1: base, kDetached: not in the tree
  Vector coordinate_c;      // joint coordinate as a row over q^c
  Vector gradient;          // d(joint coordinate)/d q^m
  double coordinate_offset = 0.0;  // contribution of e0
  int motor = -1;
  int spring = -1;
  Box3 com_hull;
  static constexpr int kDetached = -2;
};

struct RobotModel {
  std::string name;
  std::vector<JointSpec> joints;
  CouplingMap coupling;
  std::vector<SpringSpec> springs;
  std::vector<CableSpec> cables;
  Vec3 gravity{0.0, 0.0, -9.81};
  std::vector<JointLimit> limits;
  std::vector<WorkspaceBox> workspace;

  std::vector<ResolvedJoint> resolved;

  int motor_count() const { return static_cast<int>(coupling.motors.size()); }
  int complete_count() const { return static_cast<int>(coupling.complete_names.size()); }
  int joint_index(const std::string& joint_name) const {
    for (std::size_t i = 0; i < joints.size(); ++i) {
      if (joints[i].name == joint_name) return static_cast<int>(i);
    }
    return -1;
  }
  bool in_tree(int j) const { return resolved[j].parent != ResolvedJoint::kDetached; }
};

namespace detail {

inline double to_si_value(const Json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::istringstream in(s);
    double x = 0.0;
    if (!(in >> x)) throw ParseError(path + ": cannot read number from '" + s + "'");
    std::string unit;
    in >> unit;
    if (unit.empty() || unit == "rad" || unit == "m") return x;
    if (unit == "deg") return x * kPi / 180.0;
    throw ParseError(path + ": unknown unit '" + unit + "'");
  }
  throw ParseError(path + ": expected a number");
}

inline double number_or(const Json& obj, const char* key, double fallback,
                        const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return to_si_value(obj.at(key), path + "." + key);
}

inline double required_number(const Json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ParseError(path + "." + key + ": missing");
  return to_si_value(obj.at(key), path + "." + key);
}

inline Vec3 read_vec3(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ParseError(path + ": expected 3 numbers");
  return Vec3(to_si_value(v[0], path + "[0]"), to_si_value(v[1], path + "[1]"),
              to_si_value(v[2], path + "[2]"));
}

inline bool read_bool(const Json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) return false;
  if (!obj.at(key).is_boolean()) throw ParseError(path + "." + key + ": expected a boolean");
  return obj.at(key).get<bool>();
}

inline LinearExpr read_expr(const Json& v, const std::string& path) {
  LinearExpr out;
  if (v.is_null()) return out;
  if (!v.is_object()) throw ParseError(path + ": expected an object of coefficients");
  for (const auto& [key, coef] : v.items()) {
    out.push_back({key, to_si_value(coef, path + "." + key)});
  }
  return out;
}

inline Json write_expr(const LinearExpr& e) {
  Json out = Json::object();
  for (const auto& t : e) out[t.coordinate] = t.coefficient;
  return out;
}

inline Json write_vec3(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline std::vector<std::string> read_names(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + ": expected an array of names");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) throw ParseError(path + "[" + std::to_string(i) + "]: expected a name");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

inline double condition_number(const Matrix& m) {
  if (m.rows() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

// Static DH translation of a child frame expressed in its parent frame.
inline Vec3 child_origin(const JointSpec& child) {
  return Vec3(child.a_prev, -std::sin(child.alpha_prev) * child.d,
              std::cos(child.alpha_prev) * child.d);
}

}  // namespace detail

inline constexpr double kSingularCondition = 1e12;

// Resolves coordinate expressions into E/e0, checks every invariant and
// fills RobotModel::resolved. Throws ValidationError with a field path.
inline void finalize_model(RobotModel& model) {
  auto& cp = model.coupling;
  const int nm = static_cast<int>(cp.motors.size());
  if (nm == 0) throw ValidationError("motors: empty motor list");
  if (model.joints.empty()) throw ValidationError("joints: empty joint list");

  std::map<std::string, std::pair<Vector, double>> rows;
  std::vector<std::string> order;
  for (int i = 0; i < nm; ++i) {
    if (rows.count(cp.motors[i])) throw ValidationError("motors[" + std::to_string(i) + "]: duplicate name '" + cp.motors[i] + "'");
    rows[cp.motors[i]] = {Vector::Unit(nm, i), 0.0};
  }
  auto define = [&](const std::string& name, Vector row, double offset, const std::string& path) {
    if (rows.count(name)) throw ValidationError(path + ": duplicate coordinate '" + name + "'");
    rows[name] = {std::move(row), offset};
    order.push_back(name);
  };

  for (std::size_t b = 0; b < cp.blocks.size(); ++b) {
    const auto& blk = cp.blocks[b];
    const std::string path = "coupling_blocks[" + std::to_string(b) + "]";
    const auto n = static_cast<Eigen::Index>(blk.inputs.size());
    if (blk.matrix.rows() != n || blk.matrix.cols() != n ||
        static_cast<Eigen::Index>(blk.outputs.size()) != n) {
      throw ValidationError(path + ": block '" + blk.name + "' must be square with matching inputs/outputs");
    }
    const double cond = detail::condition_number(blk.matrix);
    if (!(cond < kSingularCondition)) {
      throw ValidationError(path + ": block '" + blk.name + "' is singular");
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      Vector row = Vector::Zero(nm);
      for (Eigen::Index c = 0; c < n; ++c) {
        const int m = cp.motor_index(blk.inputs[c]);
        if (m < 0) throw ValidationError(path + ".inputs: '" + blk.inputs[c] + "' is not a motor");
        row(m) += blk.matrix(r, c);
      }
      define(blk.outputs[r], row, 0.0, path + ".outputs");
    }
  }
  for (std::size_t i = 0; i < cp.coordinates.size(); ++i) {
    const auto& def = cp.coordinates[i];
    const std::string path = "coordinates[" + std::to_string(i) + "]";
    Vector row = Vector::Zero(nm);
    double offset = def.offset;
    for (const auto& t : def.terms) {
      auto it = rows.find(t.coordinate);
      if (it == rows.end()) throw ValidationError(path + ".terms: unknown coordinate '" + t.coordinate + "'");
      row += t.coefficient * it->second.first;
      offset += t.coefficient * it->second.second;
    }
    define(def.name, row, offset, path);
  }

  cp.complete_names = order;
  for (const auto& m : cp.motors) cp.complete_names.push_back(m);
  const int nc = static_cast<int>(cp.complete_names.size());
  cp.E.resize(nc, nm);
  cp.e0.resize(nc);
  for (int i = 0; i < nc; ++i) {
    const auto& [row, offset] = rows.at(cp.complete_names[i]);
    cp.E.row(i) = row.transpose();
    cp.e0(i) = offset;
  }

  cp.basis_selector.clear();
  for (std::size_t i = 0; i < cp.basis.size(); ++i) {
    const int idx = cp.index_of(cp.basis[i]);
    if (idx < 0) throw ValidationError("basis[" + std::to_string(i) + "]: unknown coordinate '" + cp.basis[i] + "'");
    cp.basis_selector.push_back(idx);
  }
  if (static_cast<int>(cp.basis_selector.size()) != nm) {
    throw ValidationError("basis: needs one coordinate per motor");
  }
  {
    Matrix B(nm, nm);
    for (int i = 0; i < nm; ++i) B.row(i) = cp.E.row(cp.basis_selector[i]);
    if (!(detail::condition_number(B) < kSingularCondition)) {
      throw ValidationError("basis: basis coordinates do not determine the motors");
    }
  }

  auto expr_row = [&](const LinearExpr& e, const std::string& path) {
    Vector row = Vector::Zero(nc);
    for (const auto& t : e) {
      const int idx = cp.index_of(t.coordinate);
      if (idx < 0) throw ValidationError(path + ": unknown coordinate '" + t.coordinate + "'");
      row(idx) += t.coefficient;
    }
    return row;
  };

  model.resolved.assign(model.joints.size(), ResolvedJoint{});
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const auto& js = model.joints[j];
    auto& rj = model.resolved[j];
    const std::string path = "joints[" + std::to_string(j) + "]";
    if (js.name.empty()) throw ValidationError(path + ".name: empty");
    for (std::size_t k = 0; k < j; ++k) {
      if (model.joints[k].name == js.name) throw ValidationError(path + ".name: duplicate joint '" + js.name + "'");
    }
    if (!js.parent) {
      rj.parent = ResolvedJoint::kDetached;
      if (js.link_inertia) throw ValidationError(path + ".link_inertia: bodies outside the tree carry no link inertia");
      if (js.kind == JointKind::kFixed) throw ValidationError(path + ".type: a detached body needs a coordinate");
    } else if (*js.parent == "base") {
      rj.parent = -1;
    } else {
      rj.parent = -1;
      bool found = false;
      for (std::size_t k = 0; k < j; ++k) {
        if (model.joints[k].name == *js.parent) {
          if (!model.joints[k].parent) throw ValidationError(path + ".parent: '" + *js.parent + "' is not in the kinematic tree");
          rj.parent = static_cast<int>(k);
          found = true;
        }
      }
      if (!found) throw ValidationError(path + ".parent: unknown or later joint '" + *js.parent + "'");
    }
    if (js.kind == JointKind::kFixed && !js.coordinate.empty()) {
      throw ValidationError(path + ".coordinate: fixed joints have no coordinate");
    }
    if (js.kind != JointKind::kFixed && js.coordinate.empty()) {
      throw ValidationError(path + ".coordinate: moving joints need a coordinate expression");
    }
    if (js.kind == JointKind::kFixed && (js.friction || js.motor_inertia || js.spring)) {
      throw ValidationError(path + ": fixed joints cannot carry friction, motor inertia or springs");
    }
    rj.coordinate_c = expr_row(js.coordinate, path + ".coordinate");
    rj.gradient = cp.E.transpose() * rj.coordinate_c;
    rj.coordinate_offset = rj.coordinate_c.dot(cp.e0);
    if (js.motor_inertia) {
      if (!js.motor) throw ValidationError(path + ".motor: required when motor_inertia is set");
      rj.motor = cp.motor_index(*js.motor);
      if (rj.motor < 0) throw ValidationError(path + ".motor: unknown motor '" + *js.motor + "'");
    }
  }

  // Default COM hull: bounding box of the link origin and its children's
  // origins, padded on every side.
  constexpr double kHullPad = 0.05;
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    auto& rj = model.resolved[j];
    const auto& js = model.joints[j];
    if (js.com_hull) {
      for (int k = 0; k < 3; ++k) {
        if (!(js.com_hull->lower(k) < js.com_hull->upper(k))) {
          throw ValidationError("joints[" + std::to_string(j) + "].com_hull: lower must be below upper");
        }
      }
      rj.com_hull = *js.com_hull;
      continue;
    }
    Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
    for (std::size_t c = 0; c < model.joints.size(); ++c) {
      if (model.resolved[c].parent == static_cast<int>(j)) {
        const Vec3 p = detail::child_origin(model.joints[c]);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
    rj.com_hull.lower = lo.array() - kHullPad;
    rj.com_hull.upper = hi.array() + kHullPad;
  }

  for (std::size_t s = 0; s < model.springs.size(); ++s) {
    const auto& sp = model.springs[s];
    const std::string path = "springs[" + std::to_string(s) + "]";
    const int j = model.joint_index(sp.joint);
    if (j < 0) throw ValidationError(path + ".joint: unknown joint '" + sp.joint + "'");
    if (!model.joints[j].spring) throw ValidationError(path + ".joint: joint '" + sp.joint + "' is not flagged with a spring");
    if (model.resolved[j].spring >= 0) throw ValidationError(path + ".joint: joint '" + sp.joint + "' already has a spring");
    if (sp.kind == SpringKind::kExtension && !(sp.h_s > 0.0 && sp.r_s > 0.0 && sp.l_r > 0.0)) {
      throw ValidationError(path + ": h_s, r_s and l_r must be positive");
    }
    model.resolved[j].spring = static_cast<int>(s);
  }
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (model.joints[j].spring && model.resolved[j].spring < 0) {
      throw ValidationError("joints[" + std::to_string(j) + "].spring: no spring entry for joint '" + model.joints[j].name + "'");
    }
  }
  for (std::size_t c = 0; c < model.cables.size(); ++c) {
    const auto& cb = model.cables[c];
    const std::string path = "cables[" + std::to_string(c) + "]";
    const int j = model.joint_index(cb.joint);
    if (j < 0) throw ValidationError(path + ".joint: unknown joint '" + cb.joint + "'");
    if (cb.degree < 0) throw ValidationError(path + ".degree: must be non-negative");
    if (static_cast<int>(cb.coefficients.size()) != cb.degree + 1) {
      throw ValidationError(path + ".coefficients: expected degree + 1 values");
    }
  }
  for (std::size_t i = 0; i < model.limits.size(); ++i) {
    const auto& lim = model.limits[i];
    const std::string path = "limits[" + std::to_string(i) + "]";
    if (cp.index_of(lim.coordinate) < 0) throw ValidationError(path + ".coordinate: unknown coordinate '" + lim.coordinate + "'");
    if (!(lim.q_min < lim.q_max)) throw ValidationError(path + ": q_min must be below q_max");
    if (!(lim.dq_min < lim.dq_max)) throw ValidationError(path + ": dq_min must be below dq_max");
  }
  for (std::size_t i = 0; i < model.workspace.size(); ++i) {
    const auto& ws = model.workspace[i];
    const std::string path = "workspace[" + std::to_string(i) + "]";
    const int j = model.joint_index(ws.joint);
    if (j < 0 || !model.in_tree(j)) throw ValidationError(path + ".joint: unknown tree joint '" + ws.joint + "'");
    for (int k = 0; k < 3; ++k) {
      if (!(ws.box.lower(k) < ws.box.upper(k))) throw ValidationError(path + ": lower must be below upper");
    }
  }
}

inline RobotModel parse_model(const Json& doc) {
  if (!doc.is_object()) throw ParseError("model: expected a JSON object");
  if (!doc.contains("schema") || !doc.at("schema").is_number_integer() || doc.at("schema").get<int>() != 1) {
    throw ValidationError("schema: expected schema 1");
  }
  RobotModel model;
  model.name = doc.value("name", std::string{});
  if (!doc.contains("motors")) throw ParseError("motors: missing");
  model.coupling.motors = detail::read_names(doc.at("motors"), "motors");
  if (doc.contains("coupling_blocks")) {
    const auto& blocks = doc.at("coupling_blocks");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string path = "coupling_blocks[" + std::to_string(b) + "]";
      const auto& jb = blocks[b];
      CouplingBlock blk;
      blk.name = jb.value("name", std::string{});
      blk.inputs = detail::read_names(jb.at("inputs"), path + ".inputs");
      blk.outputs = detail::read_names(jb.at("outputs"), path + ".outputs");
      const auto& m = jb.at("matrix");
      if (!m.is_array()) throw ParseError(path + ".matrix: expected rows");
      const auto rows = static_cast<Eigen::Index>(m.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(m[0].size()) : 0;
      blk.matrix.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!m[r].is_array() || static_cast<Eigen::Index>(m[r].size()) != cols) {
          throw ParseError(path + ".matrix: ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
          blk.matrix(r, c) = detail::to_si_value(m[r][c], path + ".matrix");
        }
      }
      model.coupling.blocks.push_back(std::move(blk));
    }
  }
  if (doc.contains("coordinates")) {
    const auto& coords = doc.at("coordinates");
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const std::string path = "coordinates[" + std::to_string(i) + "]";
      const auto& jc = coords[i];
      if (!jc.contains("name")) throw ParseError(path + ".name: missing");
      CoordinateDef def;
      def.name = jc.at("name").get<std::string>();
      def.terms = detail::read_expr(jc.value("terms", Json::object()), path + ".terms");
      def.offset = detail::number_or(jc, "offset", 0.0, path);
      model.coupling.coordinates.push_back(std::move(def));
    }
  }
  if (doc.contains("basis")) model.coupling.basis = detail::read_names(doc.at("basis"), "basis");

  if (!doc.contains("joints") || !doc.at("joints").is_array()) throw ParseError("joints: missing");
  const auto& joints = doc.at("joints");
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const std::string path = "joints[" + std::to_string(j) + "]";
    const auto& jj = joints[j];
    if (!jj.is_object()) throw ParseError(path + ": expected an object");
    JointSpec js;
    if (!jj.contains("name")) throw ParseError(path + ".name: missing");
    js.name = jj.at("name").get<std::string>();
    const std::string type = jj.value("type", std::string("revolute"));
    if (type == "revolute") js.kind = JointKind::kRevolute;
    else if (type == "prismatic") js.kind = JointKind::kPrismatic;
    else if (type == "fixed") js.kind = JointKind::kFixed;
    else throw ParseError(path + ".type: unknown joint type '" + type + "'");
    if (!jj.contains("parent") || jj.at("parent").is_null()) {
      js.parent = std::nullopt;
    } else {
      js.parent = jj.at("parent").get<std::string>();
    }
    js.a_prev = detail::number_or(jj, "a", 0.0, path);
    js.alpha_prev = detail::number_or(jj, "alpha", 0.0, path);
    js.d = detail::number_or(jj, "d", 0.0, path);
    js.theta = detail::number_or(jj, "theta", 0.0, path);
    if (jj.contains("coordinate")) js.coordinate = detail::read_expr(jj.at("coordinate"), path + ".coordinate");
    js.link_inertia = detail::read_bool(jj, "link_inertia", path);
    js.motor_inertia = detail::read_bool(jj, "motor_inertia", path);
    js.friction = detail::read_bool(jj, "friction", path);
    js.spring = detail::read_bool(jj, "spring", path);
    js.exclude_from_trajectory_objective = detail::read_bool(jj, "exclude_from_trajectory_objective", path);
    if (jj.contains("motor") && !jj.at("motor").is_null()) js.motor = jj.at("motor").get<std::string>();
    if (jj.contains("com_hull")) {
      Box3 box;
      box.lower = detail::read_vec3(jj.at("com_hull").at("lower"), path + ".com_hull.lower");
      box.upper = detail::read_vec3(jj.at("com_hull").at("upper"), path + ".com_hull.upper");
      js.com_hull = box;
    }
    model.joints.push_back(std::move(js));
  }

  if (doc.contains("springs")) {
    const auto& springs = doc.at("springs");
    for (std::size_t s = 0; s < springs.size(); ++s) {
      const std::string path = "springs[" + std::to_string(s) + "]";
      const auto& js = springs[s];
      SpringSpec sp;
      const std::string kind = js.value("kind", std::string("torsional"));
      if (kind == "extension") sp.kind = SpringKind::kExtension;
      else if (kind == "torsional") sp.kind = SpringKind::kTorsional;
      else throw ParseError(path + ".kind: unknown spring kind '" + kind + "'");
      sp.joint = js.at("joint").get<std::string>();
      if (sp.kind == SpringKind::kExtension) {
        sp.h_s = detail::required_number(js, "h_s", path);
        sp.r_s = detail::required_number(js, "r_s", path);
        sp.q_o = detail::required_number(js, "q_o", path);
        sp.l_r = detail::number_or(js, "l_r", 0.0613, path);
      }
      model.springs.push_back(sp);
    }
  }
  if (doc.contains("cables")) {
    const auto& cables = doc.at("cables");
    for (std::size_t c = 0; c < cables.size(); ++c) {
      const std::string path = "cables[" + std::to_string(c) + "]";
      const auto& jc = cables[c];
      CableSpec cb;
      cb.joint = jc.at("joint").get<std::string>();
      cb.degree = jc.value("degree", 7);
      if (jc.contains("coefficients")) {
        for (const auto& v : jc.at("coefficients")) cb.coefficients.push_back(detail::to_si_value(v, path + ".coefficients"));
      } else {
        cb.coefficients.assign(static_cast<std::size_t>(std::max(cb.degree, 0) + 1), 0.0);
      }
      model.cables.push_back(std::move(cb));
    }
  }
  if (doc.contains("limits")) {
    const auto& limits = doc.at("limits");
    for (std::size_t i = 0; i < limits.size(); ++i) {
      const std::string path = "limits[" + std::to_string(i) + "]";
      const auto& jl = limits[i];
      JointLimit lim;
      lim.coordinate = jl.at("coordinate").get<std::string>();
      lim.q_min = detail::required_number(jl, "q_min", path);
      lim.q_max = detail::required_number(jl, "q_max", path);
      lim.dq_min = detail::required_number(jl, "dq_min", path);
      lim.dq_max = detail::required_number(jl, "dq_max", path);
      model.limits.push_back(lim);
    }
  }
  if (doc.contains("workspace")) {
    const auto& ws = doc.at("workspace");
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const std::string path = "workspace[" + std::to_string(i) + "]";
      WorkspaceBox box;
      box.joint = ws[i].at("joint").get<std::string>();
      box.box.lower = detail::read_vec3(ws[i].at("lower"), path + ".lower");
      box.box.upper = detail::read_vec3(ws[i].at("upper"), path + ".upper");
      model.workspace.push_back(box);
    }
  }
  if (doc.contains("gravity")) model.gravity = detail::read_vec3(doc.at("gravity"), "gravity");

  finalize_model(model);
  return model;
}

inline RobotModel parse_model_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  try {
    return parse_model(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

inline RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model_text(buf.str());
}

// Canonical form: SI numbers, resolved COM hulls, fields in a fixed order.
inline Json model_to_json(const RobotModel& model) {
  Json doc;
  doc["schema"] = 1;
  doc["name"] = model.name;
  doc["motors"] = model.coupling.motors;
  Json blocks = Json::array();
  for (const auto& blk : model.coupling.blocks) {
    Json m = Json::array();
    for (Eigen::Index r = 0; r < blk.matrix.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < blk.matrix.cols(); ++c) row.push_back(blk.matrix(r, c));
      m.push_back(row);
    }
    blocks.push_back({{"name", blk.name}, {"inputs", blk.inputs}, {"outputs", blk.outputs}, {"matrix", m}});
  }
  doc["coupling_blocks"] = blocks;
  Json coords = Json::array();
  for (const auto& c : model.coupling.coordinates) {
    coords.push_back({{"name", c.name}, {"terms", detail::write_expr(c.terms)}, {"offset", c.offset}});
  }
  doc["coordinates"] = coords;
  doc["basis"] = model.coupling.basis;
  Json joints = Json::array();
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const auto& js = model.joints[j];
    Json jj;
    jj["name"] = js.name;
    jj["type"] = js.kind == JointKind::kRevolute ? "revolute" : js.kind == JointKind::kPrismatic ? "prismatic" : "fixed";
    jj["parent"] = js.parent ? Json(*js.parent) : Json(nullptr);
    jj["a"] = js.a_prev;
    jj["alpha"] = js.alpha_prev;
    jj["d"] = js.d;
    jj["theta"] = js.theta;
    jj["coordinate"] = detail::write_expr(js.coordinate);
    jj["link_inertia"] = js.link_inertia;
    jj["motor_inertia"] = js.motor_inertia;
    jj["motor"] = js.motor ? Json(*js.motor) : Json(nullptr);
    jj["friction"] = js.friction;
    jj["spring"] = js.spring;
    jj["exclude_from_trajectory_objective"] = js.exclude_from_trajectory_objective;
    const auto& hull = model.resolved.empty() ? js.com_hull.value_or(Box3{}) : model.resolved[j].com_hull;
    jj["com_hull"] = {{"lower", detail::write_vec3(hull.lower)}, {"upper", detail::write_vec3(hull.upper)}};
    joints.push_back(jj);
  }
  doc["joints"] = joints;
  Json springs = Json::array();
  for (const auto& sp : model.springs) {
    Json js{{"kind", sp.kind == SpringKind::kExtension ? "extension" : "torsional"}, {"joint", sp.joint}};
    if (sp.kind == SpringKind::kExtension) {
      js["h_s"] = sp.h_s;
      js["r_s"] = sp.r_s;
      js["q_o"] = sp.q_o;
      js["l_r"] = sp.l_r;
    }
    springs.push_back(js);
  }
  doc["springs"] = springs;
  Json cables = Json::array();
  for (const auto& cb : model.cables) {
    cables.push_back({{"joint", cb.joint}, {"degree", cb.degree}, {"coefficients", cb.coefficients}});
  }
  doc["cables"] = cables;
  Json limits = Json::array();
  for (const auto& lim : model.limits) {
    limits.push_back({{"coordinate", lim.coordinate}, {"q_min", lim.q_min}, {"q_max", lim.q_max},
                      {"dq_min", lim.dq_min}, {"dq_max", lim.dq_max}});
  }
  doc["limits"] = limits;
  Json ws = Json::array();
  for (const auto& w : model.workspace) {
    ws.push_back({{"joint", w.joint}, {"lower", detail::write_vec3(w.box.lower)}, {"upper", detail::write_vec3(w.box.upper)}});
  }
  doc["workspace"] = ws;
  doc["gravity"] = detail::write_vec3(model.gravity);
  return doc;
}

inline bool operator==(const RobotModel& a, const RobotModel& b) {
  return model_to_json(a) == model_to_json(b);
}

struct CouplingReport {
  struct Block {
    std::string name;
    double condition = 1.0;
  };
  std::vector<Block> blocks;
  bool ok = true;
};

// Checks every coupling block is invertible and that E reproduces the block
// equations; returns per-block 2-norm condition numbers.
inline CouplingReport validate_coupling(const RobotModel& model) {
  CouplingReport report;
  const auto& cp = model.coupling;
  for (const auto& blk : cp.blocks) {
    const double cond = detail::condition_number(blk.matrix);
    if (!(cond < kSingularCondition)) {
      throw ValidationError("coupling block '" + blk.name + "' is singular");
    }
    for (Eigen::Index r = 0; r < blk.matrix.rows(); ++r) {
      const int row = cp.index_of(blk.outputs[r]);
      Vector expected = Vector::Zero(model.motor_count());
      for (Eigen::Index c = 0; c < blk.matrix.cols(); ++c) {
        expected(cp.motor_index(blk.inputs[c])) += blk.matrix(r, c);
      }
      if (row < 0 || (cp.E.row(row).transpose() - expected).cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("coupling block '" + blk.name + "' is inconsistent with E");
      }
    }
    report.blocks.push_back({blk.name, cond});
  }
  return report;
}

// Joint-limit bookkeeping shared by sampling, trajectory design and checks.

inline const JointLimit* find_limit(const RobotModel& model, const std::string& coordinate) {
  for (const auto& lim : model.limits) {
    if (lim.coordinate == coordinate) return &lim;
  }
  return nullptr;
}

// Box over the basis coordinates used to draw random states. Basis
// coordinates without their own limit borrow one from a limited coordinate
// that moves proportionally; otherwise a generic range is used.
struct BasisBox {
  Vector q_lo, q_hi, dq_lo, dq_hi;
  Matrix motor_from_basis;  // q^m = motor_from_basis * (q^b - basis_offset)
  Vector basis_offset;
};

inline BasisBox basis_box(const RobotModel& model) {
  const auto& cp = model.coupling;
  const int nm = model.motor_count();
  BasisBox box;
  box.q_lo.resize(nm);
  box.q_hi.resize(nm);
  box.dq_lo.resize(nm);
  box.dq_hi.resize(nm);
  Matrix B(nm, nm);
  box.basis_offset.resize(nm);
  for (int i = 0; i < nm; ++i) {
    const int row = cp.basis_selector[i];
    B.row(i) = cp.E.row(row);
    box.basis_offset(i) = cp.e0(row);
    box.q_lo(i) = -kPi;
    box.q_hi(i) = kPi;
    box.dq_lo(i) = -1.0;
    box.dq_hi(i) = 1.0;
    bool found = false;
    for (const auto& lim : model.limits) {
      const int other = cp.index_of(lim.coordinate);
      if (other == row) {
        box.q_lo(i) = lim.q_min;
        box.q_hi(i) = lim.q_max;
        box.dq_lo(i) = lim.dq_min;
        box.dq_hi(i) = lim.dq_max;
        found = true;
        break;
      }
    }
    if (found) continue;
    for (const auto& lim : model.limits) {
      const int other = cp.index_of(lim.coordinate);
      const Vector a = cp.E.row(row).transpose();
      const Vector b = cp.E.row(other).transpose();
      const double bb = b.squaredNorm();
      if (bb == 0.0) continue;
      const double scale = a.dot(b) / bb;
      if (scale == 0.0 || (a - scale * b).norm() > 1e-12 * a.norm()) continue;
      // a = scale * b, so this coordinate = scale * (other - e0_other) + e0_row.
      auto map = [&](double v) { return scale * (v - cp.e0(other)) + cp.e0(row); };
      box.q_lo(i) = std::min(map(lim.q_min), map(lim.q_max));
      box.q_hi(i) = std::max(map(lim.q_min), map(lim.q_max));
      box.dq_lo(i) = std::min(scale * lim.dq_min, scale * lim.dq_max);
      box.dq_hi(i) = std::max(scale * lim.dq_min, scale * lim.dq_max);
      break;
    }
  }
  box.motor_from_basis = B.inverse();
  return box;
}

// Worst (most negative) normalized margin over every position and velocity
// limit at one state; >= 0 means all limits hold.
struct LimitMargin {
  double position = std::numeric_limits<double>::infinity();
  double velocity = std::numeric_limits<double>::infinity();
  int worst_position = -1;
  int worst_velocity = -1;
};

inline LimitMargin limit_margin(const RobotModel& model, const Vector& q_m, const Vector& dq_m) {
  LimitMargin out;
  const auto& cp = model.coupling;
  for (std::size_t i = 0; i < model.limits.size(); ++i) {
    const auto& lim = model.limits[i];
    const int row = cp.index_of(lim.coordinate);
    const double q = cp.E.row(row).dot(q_m) + cp.e0(row);
    const double dq = cp.E.row(row).dot(dq_m);
    const double mq = std::min(q - lim.q_min, lim.q_max - q);
    const double mdq = std::min(dq - lim.dq_min, lim.dq_max - dq);
    if (mq < out.position) {
      out.position = mq;
      out.worst_position = static_cast<int>(i);
    }
    if (mdq < out.velocity) {
      out.velocity = mdq;
      out.worst_velocity = static_cast<int>(i);
    }
  }
  return out;
}

}  // namespace dynident

#endif  // DYNIDENT_MODEL_HPP_
